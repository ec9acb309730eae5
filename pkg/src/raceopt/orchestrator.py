"""Generation-synchronous experiment loop and sensitivity analysis.

One coordinating process owns the optimizer; candidate evaluations fan
out to a fixed pool of worker processes and are reduced strictly in
candidate order, so results are identical for any worker count.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import multiprocessing
import numpy as np

from . import __version__, benchfns
from .evaluator import SimConfig, evaluate, evaluate_unit
from .optimizers import covariance_norm, default_popsize, make_optimizer
from .param_space import SearchSpace, build_space, decode, get_bounds
from .track import Track, get_track

SENSITIVITY_SUBSETS = ("all", "physical", "decision", "control")


class StartupError(RuntimeError):
    """Invalid experiment configuration or missing fixture."""


@dataclass(frozen=True)
class ExperimentConfig:
    optimizer: str = "cma"
    popsize: int | None = None
    controller: str = "purepursuit"
    track: str = "spielberg"
    bounds: str = "original"
    budget: int = 9600
    workers: int = 24
    seed: int = 0
    objective: str = "race"  # "race" or "bench:<name>:<dim>"
    n_control_points: int = 100
    out_dir: str | None = None

    def resolved_popsize(self) -> int:
        if self.popsize is not None:
            return self.popsize
        return default_popsize(self.optimizer, self.workers)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["popsize"] = self.resolved_popsize()
        d["version"] = __version__
        return d


@dataclass(frozen=True)
class GenerationLog:
    generation: int
    scores: np.ndarray
    mean_s: float
    std_s: float
    best_s: float  # cumulative best across generations
    covariance_norm: float


@dataclass(frozen=True)
class ExperimentLog:
    config: ExperimentConfig
    generations: list[GenerationLog]
    best_score: float
    best_unit: np.ndarray
    wall_time_s: float


@dataclass(frozen=True)
class SensitivityReport:
    sigmas: np.ndarray
    subset: str
    trials: int
    success_rates: np.ndarray


class ObjectiveContext:
    """Resolved objective: either a benchmark function or the racing task."""

    def __init__(self, config: ExperimentConfig):
        self.kind = "race"
        self.track: Track | None = None
        self.space: SearchSpace | None = None
        self.sim_config = SimConfig()
        self.bench = None
        if config.objective.startswith("bench:"):
            parts = config.objective.split(":")
            if len(parts) != 3:
                raise StartupError(
                    "bench objective must look like 'bench:<name>:<dim>'"
                )
            self.kind = "bench"
            try:
                self.bench = benchfns.get_bench(parts[1], int(parts[2]))
            except ValueError as exc:
                raise StartupError(str(exc)) from None
            self.dim = self.bench.dim
        elif config.objective == "race":
            try:
                self.track = get_track(config.track)
                bounds = get_bounds(config.bounds)
            except Exception as exc:
                raise StartupError(str(exc)) from None
            self.space = build_space(
                config.controller,
                bounds,
                config.n_control_points,
                track=self.track,
            )
            self.dim = self.space.n
        else:
            raise StartupError(f"unknown objective '{config.objective}'")

    def score(self, unit_vector: np.ndarray) -> float:
        if self.kind == "bench":
            return benchfns.eval_bench(self.bench, unit_vector)
        return evaluate_unit(unit_vector, self.track, self.space, self.sim_config).score_s


# worker-process state, set once per worker by the pool initializer
_WORKER_CONTEXT: ObjectiveContext | None = None


def _init_worker(config_dict: dict) -> None:
    global _WORKER_CONTEXT
    config_dict = {
        k: v for k, v in config_dict.items() if k not in ("version", "popsize")
    }
    _WORKER_CONTEXT = ObjectiveContext(ExperimentConfig(**config_dict))


def _eval_in_worker(unit_vector: np.ndarray) -> float:
    return _WORKER_CONTEXT.score(unit_vector)


class BatchEvaluator:
    """Maps candidate batches to scores, serially or over a process pool.

    Scores come back ordered by candidate index regardless of completion
    order, which keeps runs bit-identical across worker counts.
    """

    def __init__(self, config: ExperimentConfig, context: ObjectiveContext):
        self.context = context
        self._pool = None
        if config.workers > 1:
            ctx = multiprocessing.get_context("fork")
            self._pool = ProcessPoolExecutor(
                max_workers=config.workers,
                mp_context=ctx,
                initializer=_init_worker,
                initargs=(dataclasses.asdict(config),),
            )

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        if self._pool is None:
            return np.array([self.context.score(u) for u in batch])
        results = self._pool.map(_eval_in_worker, list(batch))
        return np.array(list(results))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def reduce_generation(
    generation: int,
    scores: np.ndarray,
    cov_batch: np.ndarray,
    prev_best: float,
) -> GenerationLog:
    """Per-generation statistics; scores must be ordered by candidate index."""
    scores = np.asarray(scores, dtype=float)
    std = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
    cov = covariance_norm(cov_batch) if len(cov_batch) >= 2 else 0.0
    return GenerationLog(
        generation=generation,
        scores=scores,
        mean_s=float(np.mean(scores)),
        std_s=std,
        best_s=float(min(prev_best, scores.min())),
        covariance_norm=cov,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentLog:
    """Run one full ask/evaluate/tell loop over the configured budget."""
    if config.workers < 1:
        raise StartupError("workers must be >= 1")
    popsize = config.resolved_popsize()
    if config.budget < popsize:
        raise StartupError(
            f"budget {config.budget} is below one generation (popsize {popsize})"
        )
    context = ObjectiveContext(config)
    optimizer = make_optimizer(
        config.optimizer, context.dim, popsize, seed=config.seed
    )
    n_generations = config.budget // popsize
    start = time.perf_counter()
    generations: list[GenerationLog] = []
    best = np.inf
    # trailing candidates for the covariance diagnostic of 1-point batches
    recent: list[np.ndarray] = []
    recent_cap = max(popsize, 24)

    with BatchEvaluator(config, context) as evaluate_batch:
        for g in range(n_generations):
            batch = optimizer.ask()
            scores = evaluate_batch(batch)
            optimizer.tell(batch, scores)
            recent.extend(batch)
            del recent[:-recent_cap]
            cov_batch = batch if popsize >= 2 else np.array(recent)
            log = reduce_generation(g, scores, cov_batch, best)
            best = log.best_s
            generations.append(log)

    return ExperimentLog(
        config=config,
        generations=generations,
        best_score=float(optimizer.best_score),
        best_unit=optimizer.best_candidate.copy(),
        wall_time_s=time.perf_counter() - start,
    )


def sensitivity_analysis(
    best_candidate: np.ndarray,
    space: SearchSpace,
    track: Track,
    sigmas: np.ndarray,
    subset: str = "all",
    trials: int = 100,
    seed: int = 0,
    sim_config: SimConfig = SimConfig(),
    workers: int = 1,
    track_ref: str | None = None,
) -> SensitivityReport:
    """Success rate of Gaussian-perturbed copies of a found solution.

    Noise is added i.i.d. in the unit cube to the dimensions selected by
    ``subset`` (all / physical / decision / control), clamped to [0, 1].
    ``track_ref`` is the track name/path workers should resolve; without
    it evaluation stays in-process.
    """
    best = np.asarray(best_candidate, dtype=float)
    baseline = evaluate_unit(best, track, space, sim_config)
    if not baseline.success:
        raise StartupError("solution not valid: baseline candidate fails at sigma=0")
    dims = space.subset_dims(subset)
    rng = np.random.default_rng(seed)
    sigmas = np.asarray(sigmas, dtype=float)
    dnf = sim_config.dnf_penalty_s

    config = ExperimentConfig(
        controller=space.controller_kind,
        track=track_ref if track_ref is not None else track.name,
        workers=workers if track_ref is not None else 1,
        n_control_points=space.n_control_points,
    )
    context = ObjectiveContext.__new__(ObjectiveContext)
    context.kind = "race"
    context.track = track
    context.space = space
    context.sim_config = sim_config
    context.bench = None
    context.dim = space.n

    rates = np.empty(len(sigmas))
    with BatchEvaluator(config, context) as evaluate_batch:
        for i, sigma in enumerate(sigmas):
            noise = rng.normal(0.0, 1.0, size=(trials, len(dims)))
            batch = np.repeat(best[None, :], trials, axis=0)
            batch[:, dims] = np.clip(batch[:, dims] + sigma * noise, 0.0, 1.0)
            scores = evaluate_batch(batch)
            rates[i] = float(np.mean(scores < dnf))
    return SensitivityReport(
        sigmas=sigmas, subset=subset, trials=trials, success_rates=rates
    )


# -- artifact output ----------------------------------------------------------


def write_generations_csv(log: ExperimentLog, path: str) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gen", "mean_s", "std_s", "best_s", "cov_norm"])
        for g in log.generations:
            writer.writerow(
                [g.generation, repr(g.mean_s), repr(g.std_s), repr(g.best_s),
                 repr(g.covariance_norm)]
            )


def write_sensitivity_csv(report: SensitivityReport, path: str) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "subset", "success_rate"])
        for sigma, rate in zip(report.sigmas, report.success_rates):
            writer.writerow([repr(float(sigma)), report.subset, repr(float(rate))])


def write_artifacts(log: ExperimentLog, out_dir: str) -> None:
    """Write config.json, generations.csv, best_candidate.json, trajectory.csv."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(log.config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_generations_csv(log, os.path.join(out_dir, "generations.csv"))

    best = {"unit": log.best_unit.tolist(), "score_s": log.best_score}
    context = ObjectiveContext(log.config)
    if context.kind == "race":
        candidate = decode(context.space, log.best_unit)
        best["decoded"] = {
            k: v for k, v in candidate.to_dict().items() if k != "unit"
        }
    with open(os.path.join(out_dir, "best_candidate.json"), "w") as fh:
        json.dump(best, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if context.kind == "race":
        sim = dataclasses.replace(context.sim_config, record_trajectory=True)
        result = evaluate(
            decode(context.space, log.best_unit), context.track, context.space, sim
        )
        if result.trajectory is not None and len(result.trajectory):
            result.export_trajectory_csv(os.path.join(out_dir, "trajectory.csv"))
