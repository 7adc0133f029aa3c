"""Seeded experiment campaigns on the pile simulator.

Three studies are provided:

* ``h1``: fixed-point picks at the pile centre, with and without protrusions,
  across apertures; reports the variance ratio and a two-sided F-test.
* ``h2``: fixed-point vs spread-and-pick at one aperture across protrusion
  lengths; reports picked-mass standard deviations.
* ``h3``: fit an aperture-to-mass model from training picks, invert it for
  each target mass, and compare the picking error of graspability-index and
  spread-and-pick picks.

Seeds follow a ladder: ``master_seed`` plus a tuple of cell keys (never the
strategy) gives every trial its own pile and hook draws, so strategies in
the same cell see identical piles.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .gripper import GripperSpec
from .grasp_planner import GraspPlan, plan_with_clearance
from .mass_model import MassModel, TrialRecord, fit, invert, picking_error
from .pile_sim import (
    PickParams,
    PileConfig,
    PileState,
    generate_pile,
    pixel_to_mm,
    render_depth,
    simulate_pick,
)

log = logging.getLogger(__name__)

EXPERIMENTS = ("H1", "H2", "H3")
STRATEGIES = ("FP", "GI", "SnP")
FP_ROTATION = 90.0
PROVENANCE = "simulated 2.5D pile; no real-material effects (moisture, adhesion, jamming)"

TRIAL_COLUMNS = [
    "experiment", "phase", "strategy", "l_mm", "w_mm", "target_mass_g", "trial_n", "seed",
    "rx", "ry", "rtheta_deg", "planned", "rz_used", "spread", "spread_edges", "er_x", "er_y",
    "n_direct", "n_picked", "picked_mass_g",
]


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    pile: PileConfig = field(default_factory=PileConfig)
    gripper: GripperSpec = field(default_factory=GripperSpec)
    apertures: tuple[float, ...] = (40.0,)
    protrusion_lengths: tuple[float, ...] = (10.0,)
    target_masses: tuple[float, ...] = ()
    trials_per_cell: int = 30
    strategies: tuple[str, ...] = ("FP",)
    master_seed: int = 0
    render_scale: float = 2.0  # mm/px for planning
    sigma_mm: float = 5.0
    orientation_step: float = 15.0
    train_trials: int | None = None  # H3 training picks per aperture; default trials_per_cell
    train_strategy: str = "matched"  # H3: "matched" fits one model per strategy
    train_protrusion_length: float | None = None  # H3 transfer: fit on this l, test on each l
    walled: bool = False  # pick area is a container; plates must stay inside it

    def __post_init__(self):
        exp = self.experiment.upper()
        object.__setattr__(self, "experiment", exp)
        for name in ("apertures", "protrusion_lengths", "target_masses", "strategies"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if exp not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")
        bad = set(self.strategies) - set(STRATEGIES)
        if bad or not self.strategies:
            raise ValueError(f"strategies must be a non-empty subset of {STRATEGIES}, got {self.strategies}")
        if not self.apertures or not self.protrusion_lengths:
            raise ValueError("apertures and protrusion_lengths must be non-empty")
        for w in self.apertures:
            self.gripper.with_aperture(w)
        if exp == "H1":
            if not any(l == 0 for l in self.protrusion_lengths) or not any(l > 0 for l in self.protrusion_lengths):
                raise ValueError("H1 needs both an l=0 cell and an l>0 cell")
            if set(self.strategies) != {"FP"}:
                raise ValueError("H1 uses fixed-point picking only")
        if exp == "H3":
            if not self.target_masses or any(m <= 0 for m in self.target_masses):
                raise ValueError("H3 needs positive target masses")
            if len(set(self.apertures)) < 2:
                raise ValueError("H3 needs at least two training apertures")
            if set(self.strategies) - {"GI", "SnP"}:
                raise ValueError("H3 compares GI and SnP")
            if self.train_strategy != "matched" and self.train_strategy not in STRATEGIES:
                raise ValueError(f"train_strategy must be 'matched' or one of {STRATEGIES}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pile"] = self.pile.to_dict()
        d["gripper"] = self.gripper.to_dict()
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        pile = PileConfig.from_dict(d.pop("pile", {}))
        gripper = GripperSpec.from_dict(d.pop("gripper", {}))
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(pile=pile, gripper=gripper, **known)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """Desk-scale versions of the three studies."""
    exp = experiment.upper()
    if exp == "H1":
        # 30 g heap on an open 300 x 250 mm area
        base = dict(
            pile=PileConfig(n=200, area_mm=(300.0, 250.0), spread_sd_mm=35.0),
            apertures=(20.0, 30.0, 40.0, 50.0, 60.0),
            protrusion_lengths=(0.0, 10.0),
            trials_per_cell=200,
            strategies=("FP",),
        )
    elif exp == "H2":
        # 60 g of staples filling a 128 x 106 mm container
        base = dict(
            pile=PileConfig(n=400, area_mm=(128.0, 106.0), uniform_drop=True),
            walled=True,
            apertures=(40.0,),
            protrusion_lengths=(6.0, 8.0, 10.0, 12.0),
            trials_per_cell=60,
            strategies=("FP", "SnP"),
        )
    elif exp == "H3":
        # strand-like stand-in for plastic herbs filling the same container
        base = dict(
            pile=PileConfig(n=400, area_mm=(128.0, 106.0), uniform_drop=True, kind="strand",
                            unit_mass=0.6),
            walled=True,
            apertures=(20.0, 30.0, 40.0, 50.0, 60.0),
            protrusion_lengths=(12.0,),
            target_masses=(8.0, 10.0, 12.0),
            trials_per_cell=20,
            strategies=("GI", "SnP"),
        )
    else:
        raise ValueError(f"unknown experiment {experiment!r}")
    base.update(overrides)
    return ExperimentConfig(experiment=exp, **base)


def config_with_overrides(experiment: str, overrides: dict) -> ExperimentConfig:
    """Default config for ``experiment`` with JSON-style overrides applied.

    ``pile`` and ``gripper`` entries are merged field by field onto the
    defaults rather than replacing them.
    """
    base = default_config(experiment).to_dict()
    for k, v in overrides.items():
        if k in ("pile", "gripper"):
            base[k] = {**base[k], **v}
        elif k == "experiment" and str(v).upper() != base["experiment"]:
            raise ValueError(f"config is for {v}, not {base['experiment']}")
        else:
            base[k] = v
    unknown = set(base) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig.from_dict(base)


# ---------------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------------


def _key(x: float) -> int:
    return int(round(x * 1000))


def trial_seed(master_seed: int, *keys: int) -> int:
    """Independent 63-bit seed for the cell/trial identified by ``keys``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


@dataclass
class PlannedPick:
    params: PickParams
    plan: GraspPlan | None
    rz_used: float | None
    spread: bool


def plan_on_pile(pile: PileState, gripper: GripperSpec, scale: float, sigma_mm: float,
                 step: float, walled: bool = False) -> tuple[GraspPlan, float | None]:
    """Render the pile and plan with the clearance raised one layer at a time."""
    depth = render_depth(pile, scale)
    return plan_with_clearance(depth, gripper, pile.config.layer_mm, sigma_mm=sigma_mm, step=step,
                               walled=walled)


def choose_pick(strategy: str, pile: PileState, gripper: GripperSpec, scale: float = 2.0,
                sigma_mm: float = 5.0, step: float = 15.0, walled: bool = False,
                plan_cache: dict | None = None) -> PlannedPick:
    """Pick pose for one strategy. FP never consults the planner."""
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if strategy == "FP":
        cx, cy = pile.centroid()
        return PlannedPick(PickParams(cx, cy, FP_ROTATION, gripper.aperture_w), None, None, False)
    key = gripper.aperture_w
    if plan_cache is not None and key in plan_cache:
        plan, rz = plan_cache[key]
    else:
        plan, rz = plan_on_pile(pile, gripper, scale, sigma_mm, step, walled)
        if plan_cache is not None:
            plan_cache[key] = (plan, rz)
    if not plan.found:
        # nothing collision-free at any clearance: fall back to the pile centre
        cx, cy = pile.centroid()
        return PlannedPick(PickParams(cx, cy, FP_ROTATION, gripper.aperture_w), plan, None, False)
    rx, ry = pixel_to_mm(plan.grasp[0], plan.grasp[1], scale)
    rotation = plan.grasp[2]
    spread = strategy == "SnP" and plan.entanglement is not None
    if spread:
        rotation = plan.spread_rotation
    return PlannedPick(PickParams(rx, ry, rotation, gripper.aperture_w, rz), plan, rz, spread)


def run_trial(strategy, pile, gripper, cfg: ExperimentConfig, seed, plan_cache=None):
    choice = choose_pick(strategy, pile, gripper, cfg.render_scale, cfg.sigma_mm, cfg.orientation_step,
                         cfg.walled, plan_cache)
    outcome, _ = simulate_pick(pile, choice.params, choice.spread, seed, gripper=gripper, strategy=strategy)
    return choice, outcome


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _row(cfg, phase, strategy, l, w, target, trial, seed, choice, outcome) -> dict:
    plan = choice.plan
    er = plan.entanglement if (plan is not None and choice.spread) else None
    p = choice.params
    return {
        "experiment": cfg.experiment,
        "phase": phase,
        "strategy": strategy,
        "l_mm": float(l),
        "w_mm": float(w),
        "target_mass_g": None if target is None else float(target),
        "trial_n": trial,
        "seed": seed,
        "rx": float(p.rx),
        "ry": float(p.ry),
        "rtheta_deg": float(p.rtheta),
        "planned": int(plan is not None and plan.found),
        "rz_used": choice.rz_used,
        "spread": int(choice.spread),
        "spread_edges": outcome.spread_edges,
        "er_x": None if er is None else int(er[0]),
        "er_y": None if er is None else int(er[1]),
        "n_direct": len(outcome.direct_ids),
        "n_picked": len(outcome.picked_ids),
        "picked_mass_g": float(outcome.picked_mass),
    }


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellStats:
    phase: str
    strategy: str
    l_mm: float
    w_mm: float | None
    target_mass_g: float | None
    n: int
    mean: float
    sd: float
    var: float
    e_mean: float | None = None
    e_sd: float | None = None

    def key(self):
        return (self.phase, self.strategy, self.l_mm, self.w_mm, self.target_mass_g)


def _sample_sd(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


def _sample_var(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1)) if len(x) > 1 else 0.0


def cell_stats(rows: list[dict]) -> list[CellStats]:
    """Aggregate trial rows per (phase, strategy, l, w, target).

    H3 test rows are grouped without w, since the aperture comes from the
    inverted model.
    """
    groups: dict = {}
    for r in rows:
        target = r["target_mass_g"]
        w = None if target is not None else r["w_mm"]
        key = (r["phase"], r["strategy"], r["l_mm"], w, target)
        groups.setdefault(key, []).append(r["picked_mass_g"])
    out = []
    for (phase, strategy, l, w, target), masses in groups.items():
        m = np.array(masses, dtype=np.float64)
        e_mean = e_sd = None
        if target is not None:
            err = np.abs(target - m)
            e_mean = picking_error(target, masses)
            e_sd = _sample_sd(err)
        out.append(CellStats(phase, strategy, l, w, target, len(m), math.fsum(m) / len(m),
                             _sample_sd(m), _sample_var(m), e_mean, e_sd))
    return out


def f_test(a, b) -> tuple[float, float]:
    """Two-sided F-test of Var(a) == Var(b); returns (ratio, p-value)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    va, vb = _sample_var(a), _sample_var(b)
    if vb == 0:
        return math.inf if va > 0 else math.nan, 0.0 if va > 0 else 1.0
    ratio = va / vb
    dfa, dfb = len(a) - 1, len(b) - 1
    p = 2.0 * min(stats.f.sf(ratio, dfa, dfb), stats.f.cdf(ratio, dfa, dfb))
    return ratio, min(1.0, float(p))


@dataclass
class CampaignReport:
    config: ExperimentConfig
    rows: list[dict]
    cells: list[CellStats]
    comparisons: list[dict] = field(default_factory=list)
    models: dict = field(default_factory=dict)
    provenance: str = PROVENANCE

    @property
    def seed(self) -> int:
        return self.config.master_seed

    def cell(self, **match) -> CellStats:
        hits = [c for c in self.cells if all(getattr(c, k) == v for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} cells match {match}")
        return hits[0]

    def masses(self, **match) -> list[float]:
        return [r["picked_mass_g"] for r in self.rows if all(r[k] == v for k, v in match.items())]


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


def run_h1(cfg: ExperimentConfig) -> CampaignReport:
    """Fixed-point picks at the pile centre for every (l, w); piles shared across w."""
    if cfg.experiment != "H1":
        raise ValueError("run_h1 needs an H1 config")
    rows = []
    for l in cfg.protrusion_lengths:
        pcfg = replace(cfg.pile, l_mm=l)
        for t in range(cfg.trials_per_cell):
            seed = trial_seed(cfg.master_seed, 1, _key(l), t)
            pile = generate_pile(pcfg, seed=seed)
            for w in cfg.apertures:
                gripper = cfg.gripper.with_aperture(w)
                choice, outcome = run_trial("FP", pile, gripper, cfg, seed)
                rows.append(_row(cfg, "test", "FP", l, w, None, t, seed, choice, outcome))
    report = CampaignReport(cfg, rows, cell_stats(rows))
    zero = [l for l in cfg.protrusion_lengths if l == 0][0]
    for l in cfg.protrusion_lengths:
        if l == 0:
            continue
        for w in cfg.apertures:
            a = report.masses(l_mm=float(l), w_mm=float(w))
            b = report.masses(l_mm=float(zero), w_mm=float(w))
            ratio, p = f_test(a, b)
            report.comparisons.append({"w_mm": float(w), "l_mm": float(l), "variance_ratio": ratio,
                                       "f_test_p": p})
    return report


def run_h2(cfg: ExperimentConfig) -> CampaignReport:
    """FP vs SnP per protrusion length; each trial re-drops the pile (vibration reset)."""
    if cfg.experiment != "H2":
        raise ValueError("run_h2 needs an H2 config")
    rows = []
    for l in cfg.protrusion_lengths:
        pcfg = replace(cfg.pile, l_mm=l)
        for w in cfg.apertures:
            gripper = cfg.gripper.with_aperture(w)
            for t in range(cfg.trials_per_cell):
                seed = trial_seed(cfg.master_seed, 2, _key(l), _key(w), t)
                pile = generate_pile(pcfg, seed=seed)
                cache: dict = {}
                for strategy in cfg.strategies:
                    choice, outcome = run_trial(strategy, pile, gripper, cfg, seed, cache)
                    rows.append(_row(cfg, "test", strategy, l, w, None, t, seed, choice, outcome))
    report = CampaignReport(cfg, rows, cell_stats(rows))
    if {"FP", "SnP"} <= set(cfg.strategies):
        for l in cfg.protrusion_lengths:
            for w in cfg.apertures:
                fp = report.cell(strategy="FP", l_mm=float(l), w_mm=float(w))
                snp = report.cell(strategy="SnP", l_mm=float(l), w_mm=float(w))
                report.comparisons.append({"l_mm": float(l), "w_mm": float(w), "sd_FP": fp.sd,
                                           "sd_SnP": snp.sd, "sd_reduction": 1.0 - snp.sd / fp.sd
                                           if fp.sd > 0 else 0.0})
    return report


def _train_strategies(cfg: ExperimentConfig) -> list[str]:
    if cfg.train_strategy == "matched":
        return list(cfg.strategies)
    return [cfg.train_strategy]


def run_h3(cfg: ExperimentConfig) -> CampaignReport:
    """Fit aperture->mass per training strategy, then pick each target mass.

    With ``train_protrusion_length`` set, every model is fitted on that pile
    and evaluated on each of ``protrusion_lengths`` (material transfer).
    """
    if cfg.experiment != "H3":
        raise ValueError("run_h3 needs an H3 config")
    rows = []
    train_ls = ([cfg.train_protrusion_length] if cfg.train_protrusion_length is not None
                else list(cfg.protrusion_lengths))
    n_train = cfg.train_trials or cfg.trials_per_cell
    models: dict = {}
    for train_l in train_ls:
        pcfg = replace(cfg.pile, l_mm=train_l)
        records: dict = {s: [] for s in _train_strategies(cfg)}
        for w in cfg.apertures:
            gripper = cfg.gripper.with_aperture(w)
            for t in range(n_train):
                seed = trial_seed(cfg.master_seed, 3, 0, _key(train_l), _key(w), t)
                pile = generate_pile(pcfg, seed=seed)
                cache: dict = {}
                for strategy in records:
                    choice, outcome = run_trial(strategy, pile, gripper, cfg, seed, cache)
                    rows.append(_row(cfg, "train", strategy, train_l, w, None, t, seed, choice, outcome))
                    p = choice.params
                    records[strategy].append(TrialRecord(p.rx, p.ry, p.rtheta, w, outcome.picked_mass,
                                                         strategy, t))
        for strategy, recs in records.items():
            models[(float(train_l), strategy)] = fit(recs)

    for l in cfg.protrusion_lengths:
        train_l = cfg.train_protrusion_length if cfg.train_protrusion_length is not None else l
        pcfg = replace(cfg.pile, l_mm=l)
        for target in cfg.target_masses:
            for t in range(cfg.trials_per_cell):
                seed = trial_seed(cfg.master_seed, 3, 1, _key(l), _key(target), t)
                pile = generate_pile(pcfg, seed=seed)
                cache: dict = {}
                for strategy in cfg.strategies:
                    model_key = strategy if cfg.train_strategy == "matched" else cfg.train_strategy
                    model = models[(float(train_l), model_key)]
                    w = invert(model, target).aperture
                    gripper = cfg.gripper.with_aperture(w)
                    choice, outcome = run_trial(strategy, pile, gripper, cfg, seed, cache)
                    rows.append(_row(cfg, "test", strategy, l, w, target, t, seed, choice, outcome))

    report = CampaignReport(cfg, rows, cell_stats(rows))
    report.models = {f"l={k[0]:g}/{k[1]}": m.to_dict() for k, m in models.items()}
    if {"GI", "SnP"} <= set(cfg.strategies):
        for l in cfg.protrusion_lengths:
            for target in cfg.target_masses:
                gi = report.cell(phase="test", strategy="GI", l_mm=float(l), target_mass_g=float(target))
                snp = report.cell(phase="test", strategy="SnP", l_mm=float(l), target_mass_g=float(target))
                report.comparisons.append({
                    "l_mm": float(l), "target_mass_g": float(target),
                    "train_l_mm": float(cfg.train_protrusion_length if cfg.train_protrusion_length
                                        is not None else l),
                    "e_GI": gi.e_mean, "e_SnP": snp.e_mean,
                    "e_reduction": 1.0 - snp.e_mean / gi.e_mean if gi.e_mean > 0 else 0.0,
                })
    return report


def run_campaign(cfg: ExperimentConfig) -> CampaignReport:
    return {"H1": run_h1, "H2": run_h2, "H3": run_h3}[cfg.experiment](cfg)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def trials_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRIAL_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in TRIAL_COLUMNS])
    return buf.getvalue()


_INT_COLUMNS = {"trial_n", "seed", "planned", "spread", "spread_edges", "er_x", "er_y", "n_direct", "n_picked"}
_STR_COLUMNS = {"experiment", "phase", "strategy"}


def read_trials_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as f:
        for raw in csv.DictReader(f):
            row = {}
            for k, v in raw.items():
                if k in _STR_COLUMNS:
                    row[k] = v
                elif v == "":
                    row[k] = None
                elif k in _INT_COLUMNS:
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows


_SUMMARY_COLUMNS = ["phase", "strategy", "l_mm", "w_mm", "target_mass_g", "n", "mean", "sd", "var",
                    "e_mean", "e_sd"]


def summary_markdown(report: CampaignReport) -> str:
    lines = [f"# Campaign {report.config.experiment} (master_seed={report.seed})", "",
             f"_{report.provenance}_", ""]
    lines.append("| " + " | ".join(_SUMMARY_COLUMNS) + " |")
    lines.append("|" + "---|" * len(_SUMMARY_COLUMNS))
    for c in report.cells:
        vals = asdict(c)
        lines.append("| " + " | ".join(_md(vals[k]) for k in _SUMMARY_COLUMNS) + " |")
    if report.comparisons:
        keys = list(report.comparisons[0])
        lines += ["", "## Comparisons", "", "| " + " | ".join(keys) + " |", "|" + "---|" * len(keys)]
        for comp in report.comparisons:
            lines.append("| " + " | ".join(_md(comp[k]) for k in keys) + " |")
    if report.models:
        lines += ["", "## Mass models", ""]
        for name, m in report.models.items():
            lines.append(f"- {name}: mass = {m['slope']:.4f} g/mm * w + {m['intercept']:.4f} g "
                         f"(domain {m['domain'][0]:g}-{m['domain'][1]:g} mm, residual s.d. "
                         f"{m['residual_sd']:.3f} g)")
    return "\n".join(lines) + "\n"


def _md(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def summary_csv(report: CampaignReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_SUMMARY_COLUMNS)
    for c in report.cells:
        vals = asdict(c)
        writer.writerow([_fmt(vals[k]) for k in _SUMMARY_COLUMNS])
    return buf.getvalue()


def emit_report(report: CampaignReport, out_dir, fmt: str = "markdown") -> dict:
    """Write ``trials.csv``, a summary table and a JSON echo of config/comparisons."""
    if fmt not in ("csv", "markdown"):
        raise ValueError("format must be 'csv' or 'markdown'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trials": out / "trials.csv"}
    paths["trials"].write_text(trials_csv(report.rows))
    if fmt == "markdown":
        paths["summary"] = out / "summary.md"
        paths["summary"].write_text(summary_markdown(report))
    else:
        paths["summary"] = out / "summary.csv"
        paths["summary"].write_text(summary_csv(report))
    paths["report"] = out / "report.json"
    paths["report"].write_text(json.dumps({
        "config": report.config.to_dict(),
        "master_seed": report.seed,
        "provenance": report.provenance,
        "cells": [asdict(c) for c in report.cells],
        "comparisons": report.comparisons,
        "models": report.models,
    }, indent=2, default=_json_default) + "\n")
    return paths


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")
