"""Command-line entry point for experiments, sweeps, and replays.

Every run writes a ``config.json`` with fully resolved settings, so any
result can be reproduced from its output directory alone.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from .optimizers import OPTIMIZER_KINDS
from .orchestrator import (
    ExperimentConfig,
    SENSITIVITY_SUBSETS,
    StartupError,
    run_experiment,
    sensitivity_analysis,
    write_artifacts,
    write_sensitivity_csv,
)
from .param_space import CONTROLLER_KINDS, build_space, get_bounds
from .evaluator import SimConfig, evaluate_unit
from .track import generate_fixtures, get_track

DEFAULT_SWEEP_POPSIZES = (6, 12, 24, 48, 96)
DEFAULT_TRACKS = ("spielberg", "silverstone", "monza")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--optimizer", default="cma", choices=OPTIMIZER_KINDS)
    p.add_argument("--popsize", type=int, default=None)
    p.add_argument("--controller", default="purepursuit", choices=CONTROLLER_KINDS)
    p.add_argument("--track", default="spielberg")
    p.add_argument("--bounds", default="original",
                   help="'original', 'relaxed', or a JSON file path")
    p.add_argument("--budget", type=int, default=9600)
    p.add_argument("--workers", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objective", default="race",
                   help="'race' or 'bench:<name>:<dim>'")
    p.add_argument("--n-control-points", type=int, default=100)
    p.add_argument("--out", default=None, help="output directory")


def _config_from_args(args, **overrides) -> ExperimentConfig:
    kwargs = dict(
        optimizer=args.optimizer,
        popsize=args.popsize,
        controller=args.controller,
        track=args.track,
        bounds=args.bounds,
        budget=args.budget,
        workers=args.workers,
        seed=args.seed,
        objective=args.objective,
        n_control_points=args.n_control_points,
        out_dir=args.out,
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def _out_dir(args, default_name: str) -> str:
    return args.out if args.out else os.path.join("runs", default_name)


def _run_and_write(config: ExperimentConfig, out_dir: str) -> float:
    log = run_experiment(config)
    write_artifacts(log, out_dir)
    return log.best_score


def cmd_optimize(args) -> int:
    out_dir = _out_dir(args, "optimize")
    config = _config_from_args(args, out_dir=out_dir)
    best = _run_and_write(config, out_dir)
    print(f"best score: {best}")
    print(f"artifacts written to {out_dir}")
    return 0


def cmd_bench(args) -> int:
    args.objective = f"bench:{args.function}:{args.dim}"
    args.track = "spielberg"
    return cmd_optimize(args)


def _write_summary(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_compare_optimizers(args) -> int:
    out_dir = _out_dir(args, "compare-optimizers")
    os.makedirs(out_dir, exist_ok=True)
    kinds = args.optimizers or list(OPTIMIZER_KINDS)
    seeds = args.seeds or [args.seed]
    results = {}
    for kind in kinds:
        bests = []
        for seed in seeds:
            sub = os.path.join(out_dir, f"{kind}-seed{seed}")
            config = _config_from_args(
                args, optimizer=kind, seed=seed, out_dir=sub,
                popsize=1 if kind == "oneplusone" else args.popsize,
            )
            bests.append(_run_and_write(config, sub))
        results[kind] = bests
    rows = sorted(
        (
            [kind, repr(float(np.median(bests)))] + [repr(b) for b in bests]
            for kind, bests in results.items()
        ),
        key=lambda r: float(r[1]),
    )
    header = ["optimizer", "median_best"] + [f"seed{s}" for s in seeds]
    _write_summary(os.path.join(out_dir, "summary.csv"), header, rows)
    for row in rows:
        print(f"{row[0]}: median best {row[1]}")
    return 0


def _sweep(args, axis_name: str, values, overrides_for) -> int:
    out_dir = _out_dir(args, f"{axis_name}-sweep")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for value in values:
        sub = os.path.join(out_dir, f"{axis_name}-{value}")
        config = _config_from_args(args, out_dir=sub, **overrides_for(value))
        best = _run_and_write(config, sub)
        rows.append([value, repr(best)])
        print(f"{axis_name}={value}: best {best}")
    _write_summary(
        os.path.join(out_dir, "summary.csv"), [axis_name, "best_s"], rows
    )
    return 0


def cmd_popsize_sweep(args) -> int:
    sizes = args.popsizes or list(DEFAULT_SWEEP_POPSIZES)
    return _sweep(args, "popsize", sizes, lambda v: {"popsize": int(v)})


def cmd_track_sweep(args) -> int:
    tracks = args.tracks or list(DEFAULT_TRACKS)
    return _sweep(args, "track", tracks, lambda v: {"track": v})


def cmd_controller_sweep(args) -> int:
    controllers = args.controllers or list(CONTROLLER_KINDS)
    return _sweep(args, "controller", controllers, lambda v: {"controller": v})


def cmd_bounds_study(args) -> int:
    out_dir = _out_dir(args, "bounds-study")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for preset in args.presets:
        sub = os.path.join(out_dir, f"bounds-{preset}")
        config = _config_from_args(args, bounds=preset, out_dir=sub)
        log = run_experiment(config)
        write_artifacts(log, sub)
        dnf = SimConfig().dnf_penalty_s
        valid = int(sum(int(np.sum(g.scores < dnf)) for g in log.generations))
        rows.append([preset, valid, repr(log.best_score)])
        print(f"bounds={preset}: {valid} successful candidates, "
              f"best {log.best_score}")
    _write_summary(
        os.path.join(out_dir, "summary.csv"),
        ["bounds", "valid_candidates", "best_s"], rows,
    )
    return 0


def _load_run(run_dir: str) -> tuple[ExperimentConfig, np.ndarray]:
    config_path = os.path.join(run_dir, "config.json")
    best_path = os.path.join(run_dir, "best_candidate.json")
    for path in (config_path, best_path):
        if not os.path.exists(path):
            raise StartupError(f"missing run artifact: {path}")
    with open(config_path) as fh:
        raw = json.load(fh)
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    config = ExperimentConfig(**{k: v for k, v in raw.items() if k in names})
    with open(best_path) as fh:
        best = np.array(json.load(fh)["unit"], dtype=float)
    return config, best


def cmd_sensitivity(args) -> int:
    config, best = _load_run(args.run)
    if config.objective != "race":
        raise StartupError("sensitivity analysis needs a racing run")
    track = get_track(config.track)
    space = build_space(
        config.controller, get_bounds(config.bounds), config.n_control_points,
        track=track,
    )
    out_dir = _out_dir(args, "sensitivity")
    os.makedirs(out_dir, exist_ok=True)
    sigmas = np.concatenate(
        [[0.0], np.logspace(np.log10(args.sigma_min), np.log10(args.sigma_max),
                            args.n_sigmas)]
    )
    for subset in args.subsets:
        report = sensitivity_analysis(
            best, space, track, sigmas, subset=subset, trials=args.trials,
            seed=args.seed, workers=args.workers, track_ref=config.track,
        )
        path = os.path.join(out_dir, f"sensitivity-{subset}.csv")
        write_sensitivity_csv(report, path)
        print(f"{subset}: success rates "
              f"{np.array2string(report.success_rates, precision=2)}")
    return 0


def cmd_replay(args) -> int:
    config, best = _load_run(args.run)
    if config.objective != "race":
        raise StartupError("replay needs a racing run")
    track = get_track(config.track)
    space = build_space(
        config.controller, get_bounds(config.bounds), config.n_control_points,
        track=track,
    )
    sim = SimConfig(record_trajectory=True)
    result = evaluate_unit(best, track, space, sim)
    out_dir = _out_dir(args, "replay")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "trajectory.csv")
    result.export_trajectory_csv(path)
    print(f"score {result.score_s}, laps {result.laps_completed}, "
          f"crash_reason {result.crash_reason.value}")
    print(f"trajectory written to {path}")
    return 0


def cmd_gen_tracks(args) -> int:
    written = generate_fixtures(args.out or "tracks")
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raceopt",
        description="Gradient-free multi-domain optimization of a simulated race car",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run one optimization experiment")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bench", help="optimize an analytic benchmark function")
    _add_experiment_flags(p)
    p.add_argument("--function", default="sphere",
                   choices=("sphere", "rosenbrock", "rastrigin"))
    p.add_argument("--dim", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare-optimizers",
                       help="run several optimizers on the same task")
    _add_experiment_flags(p)
    p.add_argument("--optimizers", nargs="+", choices=OPTIMIZER_KINDS)
    p.add_argument("--seeds", nargs="+", type=int)
    p.set_defaults(func=cmd_compare_optimizers)

    p = sub.add_parser("popsize-sweep", help="sweep the population size")
    _add_experiment_flags(p)
    p.add_argument("--popsizes", nargs="+", type=int)
    p.set_defaults(func=cmd_popsize_sweep)

    p = sub.add_parser("track-sweep", help="run the same experiment per track")
    _add_experiment_flags(p)
    p.add_argument("--tracks", nargs="+")
    p.set_defaults(func=cmd_track_sweep)

    p = sub.add_parser("controller-sweep",
                       help="run the same experiment per controller")
    _add_experiment_flags(p)
    p.add_argument("--controllers", nargs="+", choices=CONTROLLER_KINDS)
    p.set_defaults(func=cmd_controller_sweep)

    p = sub.add_parser("bounds-study",
                       help="count valid solutions under different bounds")
    _add_experiment_flags(p)
    p.add_argument("--presets", nargs="+", default=["original", "relaxed"])
    p.set_defaults(func=cmd_bounds_study)

    p = sub.add_parser("sensitivity",
                       help="noise-robustness of a stored best candidate")
    p.add_argument("--run", required=True, help="directory of a previous run")
    p.add_argument("--subsets", nargs="+", default=list(SENSITIVITY_SUBSETS),
                   choices=SENSITIVITY_SUBSETS)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--sigma-min", type=float, default=1e-4)
    p.add_argument("--sigma-max", type=float, default=1.0)
    p.add_argument("--n-sigmas", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=24)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("replay", help="re-simulate a stored best candidate")
    p.add_argument("--run", required=True, help="directory of a previous run")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("gen-tracks", help="write the synthetic track fixtures")
    p.add_argument("--out", default="tracks")
    p.set_defaults(func=cmd_gen_tracks)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StartupError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime fault
        print(f"runtime fault: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
