"""Mass-constrained picking: picking error, aperture-to-mass fit and its inverse."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

TRIAL_FIELDS = ["strategy", "rx", "ry", "rtheta_deg", "w_mm", "picked_mass_g", "trial_n"]


class FitError(ValueError):
    """Training data cannot produce an invertible (increasing) model."""


def picking_error(target_mass: float, picks: Sequence[float]) -> float:
    """Mean absolute deviation of the picked masses from ``target_mass``."""
    picks = list(picks)
    if not picks:
        raise ValueError("picking error needs at least one pick")
    if not target_mass > 0:
        raise ValueError("target mass must be > 0")
    return math.fsum(abs(target_mass - m) for m in picks) / len(picks)


@dataclass(frozen=True)
class TrialRecord:
    rx: float
    ry: float
    rtheta: float
    w: float
    picked_mass: float
    strategy: str = "FP"
    trial_n: int = 0

    def __post_init__(self):
        if self.picked_mass < 0:
            raise ValueError(f"picked mass must be >= 0, got {self.picked_mass}")


@dataclass(frozen=True)
class MassModel:
    slope: float  # g/mm
    intercept: float  # g
    w_min: float
    w_max: float
    residual_sd: float = 0.0

    def __post_init__(self):
        if not self.slope > 0:
            raise FitError(f"mass model must be increasing in aperture, slope={self.slope}")
        if self.w_min > self.w_max:
            raise ValueError("fit domain is empty")

    def predict(self, w: float) -> float:
        return self.slope * w + self.intercept

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "domain": [self.w_min, self.w_max],
            "residual_sd": self.residual_sd,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MassModel":
        w_min, w_max = d["domain"]
        return cls(float(d["slope"]), float(d["intercept"]), float(w_min), float(w_max),
                   float(d.get("residual_sd", 0.0)))


def fit(records: Sequence[TrialRecord]) -> MassModel:
    """Least-squares line ``mass = slope * w + intercept`` over every trial.

    Raises :class:`FitError` with fewer than two distinct apertures or when
    the fitted slope is not positive.
    """
    w = np.array([r.w for r in records], dtype=np.float64)
    m = np.array([r.picked_mass for r in records], dtype=np.float64)
    if np.unique(w).size < 2:
        raise FitError("fit needs at least two distinct apertures")
    w_bar, m_bar = w.mean(), m.mean()
    dw = w - w_bar
    slope = float(np.dot(dw, m - m_bar) / np.dot(dw, dw))
    intercept = float(m_bar - slope * w_bar)
    if not slope > 0:
        raise FitError(
            f"picked mass does not increase with aperture (slope {slope:.6g} g/mm); "
            "a non-monotone model cannot be inverted"
        )
    resid = m - (slope * w + intercept)
    dof = len(m) - 2
    sd = float(math.sqrt(np.dot(resid, resid) / dof)) if dof > 0 else 0.0
    return MassModel(slope, intercept, float(w.min()), float(w.max()), sd)


def slope_standard_error(records: Sequence[TrialRecord], model: MassModel) -> float:
    w = np.array([r.w for r in records], dtype=np.float64)
    return model.residual_sd / math.sqrt(float(np.sum((w - w.mean()) ** 2)))


class Inversion(NamedTuple):
    aperture: float
    clamped: bool


def invert(model: MassModel, target_mass: float) -> Inversion:
    """Aperture predicted to pick ``target_mass``, clamped to the fit domain."""
    w = (target_mass - model.intercept) / model.slope
    if w < model.w_min:
        return Inversion(model.w_min, True)
    if w > model.w_max:
        return Inversion(model.w_max, True)
    return Inversion(w, False)


# ---------------------------------------------------------------------------
# IO
# ---------------------------------------------------------------------------


def read_trials(path, strategy: str | None = None, phase: str | None = None) -> list[TrialRecord]:
    """Trial records from CSV; extra columns are ignored.

    ``strategy`` and ``phase`` filter rows (``phase`` only applies when the
    file has a phase column, as campaign output does).
    """
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(TRIAL_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"trial CSV missing columns: {sorted(missing)}")
        rows = [r for r in reader
                if (strategy is None or r["strategy"] == strategy)
                and (phase is None or r.get("phase", phase) == phase)]
        return [
            TrialRecord(
                rx=float(row["rx"]),
                ry=float(row["ry"]),
                rtheta=float(row["rtheta_deg"]),
                w=float(row["w_mm"]),
                picked_mass=float(row["picked_mass_g"]),
                strategy=row["strategy"],
                trial_n=int(row["trial_n"]),
            )
            for row in rows
        ]


def write_trials(path, records: Sequence[TrialRecord]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRIAL_FIELDS)
        for r in records:
            writer.writerow([r.strategy, repr(r.rx), repr(r.ry), repr(r.rtheta), repr(r.w),
                             repr(r.picked_mass), r.trial_n])


def save_model(model: MassModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_model(path) -> MassModel:
    return MassModel.from_dict(json.loads(Path(path).read_text()))
