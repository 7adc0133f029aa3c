"""Command-line entry point: ``tanglepick <subcommand> ...``.

Subcommands write JSON to stdout (or files under ``--out-dir``) and exit
with status 2 on invalid input or violated invariants.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import campaign as camp
from .depth_scene import load_depth_map, save_depth_map, save_mask
from .gripper import GripperSpec
from .grasp_planner import DEFAULT_SIGMA_MM, plan_grasp, plan_with_clearance
from .mass_model import fit, invert, read_trials, save_model, slope_standard_error
from .pile_sim import PickParams, PileConfig, PileState, generate_pile, render_depth, simulate_pick

log = logging.getLogger("tanglepick")


def _load_json(path) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def _emit(obj, out_dir: str | None, name: str) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
        log.info("wrote %s", out / name)
    sys.stdout.write(text)


def _gripper(args) -> GripperSpec:
    spec = GripperSpec.from_dict(_load_json(args.gripper)) if args.gripper else GripperSpec()
    if args.w is not None:
        spec = spec.with_aperture(args.w)
    if args.rz is not None:
        spec = GripperSpec.from_dict({**spec.to_dict(), "insertion_depth_rz": args.rz})
    return spec


def cmd_plan(args) -> int:
    depth = load_depth_map(args.depth, scale=args.scale)
    spec = _gripper(args)
    rz_used = spec.insertion_depth_rz
    if args.rz_step is not None:
        if args.target_height is not None:
            raise ValueError("--target-height cannot be combined with --rz-step")
        plan, rz_used = plan_with_clearance(depth, spec, args.rz_step, sigma_mm=args.sigma, step=args.step,
                                            walled=args.walled, keep_maps=bool(args.dump_maps))
    elif args.walled:
        raise ValueError("--walled needs --rz-step")
    else:
        plan = plan_grasp(depth, spec, sigma_mm=args.sigma, step=args.step,
                          target_height=args.target_height, keep_maps=bool(args.dump_maps))
    if args.dump_maps and plan.maps is not None:
        out = Path(args.dump_maps)
        out.mkdir(parents=True, exist_ok=True)
        save_mask(plan.maps.G, out / "G.pgm")
        save_mask(plan.maps.Gprime, out / "Gprime.pgm")
        save_mask(plan.maps.wc, out / "wc.pgm")
        save_mask(plan.maps.wcp, out / "wcp.pgm")
    result = plan.to_dict()
    result["scale_mm_per_px"] = depth.scale
    result["rz_used_mm"] = rz_used if plan.found else None
    _emit(result, args.out_dir, "plan.json")
    return 0


def cmd_simulate(args) -> int:
    cfg = PileConfig.from_dict(_load_json(args.config))
    pile = generate_pile(cfg, seed=args.seed)
    summary = {"n": len(pile.particles), "edges": len(pile.edges), "total_mass_g": pile.total_mass,
               "seed": pile.rng_seed}
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        pile.save(out / "state.json")
        save_depth_map(render_depth(pile, args.scale), out / "depth.pgm")
    _emit(summary, None, "")
    return 0


def cmd_pick(args) -> int:
    pile = PileState.load(args.state)
    spec = _gripper(args)
    seed = pile.rng_seed if args.seed is None else args.seed
    if args.strategy:
        choice = camp.choose_pick(args.strategy, pile, spec, args.scale, args.sigma, args.step, args.walled)
        params, spread, strategy = choice.params, choice.spread, args.strategy
    else:
        if args.rx is None or args.ry is None:
            raise ValueError("give --strategy or an explicit --rx/--ry pick point")
        params = PickParams(args.rx, args.ry, args.rtheta, spec.aperture_w, args.rz or 0.0)
        spread, strategy = args.spread, None
    outcome, remaining = simulate_pick(pile, params, spread, seed, gripper=spec, strategy=strategy)
    result = {
        "strategy": outcome.strategy,
        "params": asdict(params),
        "spread": spread,
        "n_direct": len(outcome.direct_ids),
        "picked_ids": list(outcome.picked_ids),
        "picked_mass_g": outcome.picked_mass,
        "spread_edges": outcome.spread_edges,
    }
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        remaining.save(out / "remaining.json")
    _emit(result, args.out_dir, "pick.json")
    return 0


def cmd_campaign(args) -> int:
    overrides = _load_json(args.config)
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials_per_cell"] = args.trials
    cfg = camp.config_with_overrides(args.experiment, overrides)
    log.info("running %s with master_seed=%d", cfg.experiment, cfg.master_seed)
    report = camp.run_campaign(cfg)
    out_dir = args.out_dir or f"campaign_{cfg.experiment.lower()}"
    paths = camp.emit_report(report, out_dir, args.format)
    sys.stdout.write(paths["summary"].read_text())
    return 0


def cmd_fit(args) -> int:
    records = read_trials(args.trials, strategy=args.strategy, phase=args.phase)
    if not records:
        raise ValueError("no trial rows match the given filters")
    model = fit(records)
    result = {"model": model.to_dict(), "n_trials": len(records),
              "slope_se": slope_standard_error(records, model)}
    if args.target:
        result["inversions"] = [
            {"target_mass_g": m, "aperture_mm": inv.aperture, "clamped": inv.clamped}
            for m, inv in ((m, invert(model, m)) for m in args.target)
        ]
    if args.out:
        save_model(model, args.out)
    _emit(result, args.out_dir, "fit.json")
    return 0


def _add_gripper_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gripper", help="gripper spec JSON")
    p.add_argument("--w", type=float, help="aperture override in mm")
    p.add_argument("--rz", type=float, help="insertion depth / fingertip height in mm")


def _add_planner_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA_MM, help="Gaussian sigma in mm")
    p.add_argument("--step", type=float, default=15.0, help="orientation step in degrees")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tanglepick", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a grasp on a depth map")
    p.add_argument("depth", help="depth map (.pgm counts of 0.1 mm, or .csv in mm)")
    p.add_argument("--scale", type=float, help="mm per pixel if not recorded with the map")
    p.add_argument("--target-height", type=float, help="target threshold in mm (default: highest point)")
    p.add_argument("--dump-maps", metavar="DIR", help="write G, G', wc and wcp as PGM")
    p.add_argument("--rz-step", type=float, help="raise the insertion depth in these steps until a grasp exists")
    p.add_argument("--walled", action="store_true", help="treat the map border as container walls")
    p.add_argument("--out-dir")
    _add_gripper_args(p)
    _add_planner_args(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="generate a pile, save state and depth render")
    p.add_argument("--config", help="pile config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float, default=1.0, help="render mm per pixel")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pick", help="simulate one pick on a saved pile")
    p.add_argument("state", help="pile state JSON")
    p.add_argument("--strategy", choices=camp.STRATEGIES)
    p.add_argument("--rx", type=float)
    p.add_argument("--ry", type=float)
    p.add_argument("--rtheta", type=float, default=camp.FP_ROTATION)
    p.add_argument("--spread", action="store_true")
    p.add_argument("--walled", action="store_true", help="keep plates inside the area when planning")
    p.add_argument("--scale", type=float, default=2.0, help="planning render mm per pixel")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    _add_gripper_args(p)
    _add_planner_args(p)
    p.set_defaults(func=cmd_pick)

    p = sub.add_parser("campaign", help="run an H1/H2/H3 study")
    p.add_argument("experiment", type=str.upper, choices=camp.EXPERIMENTS)
    p.add_argument("--config", help="JSON overrides merged onto the study defaults")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--trials", type=int, help="trials per cell")
    p.add_argument("--out-dir")
    p.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("fit-mass-model", help="fit aperture -> mass from a trial CSV")
    p.add_argument("trials", help="trial CSV (campaign trials.csv works)")
    p.add_argument("--strategy")
    p.add_argument("--phase", help="e.g. 'train' for campaign output")
    p.add_argument("--target", type=float, nargs="*", help="target masses to invert")
    p.add_argument("--out", help="write the model JSON here")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
