"""Analytic benchmark functions over the unit cube.

Used to test optimizer correctness independently of the racing stack.
Each function maps the unit cube affinely onto its standard domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _sphere(x: np.ndarray) -> float:
    return float(np.sum(x**2))


def _rosenbrock(x: np.ndarray) -> float:
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def _rastrigin(x: np.ndarray) -> float:
    return float(10.0 * len(x) + np.sum(x**2 - 10.0 * np.cos(2.0 * np.pi * x)))


@dataclass(frozen=True)
class BenchFunction:
    name: str
    dim: int
    lower: float
    upper: float
    minimum: np.ndarray  # argmin in the standard domain
    minimum_value: float = 0.0

    def to_domain(self, unit_vector: np.ndarray) -> np.ndarray:
        return self.lower + unit_vector * (self.upper - self.lower)

    @property
    def minimum_unit(self) -> np.ndarray:
        return (self.minimum - self.lower) / (self.upper - self.lower)


_SPECS = {
    "sphere": (_sphere, -5.0, 5.0, 0.0),
    "rosenbrock": (_rosenbrock, -2.0, 2.0, 1.0),
    "rastrigin": (_rastrigin, -5.12, 5.12, 0.0),
}

BENCH_NAMES = tuple(_SPECS)


def get_bench(name: str, dim: int) -> BenchFunction:
    if name not in _SPECS:
        raise ValueError(f"unknown benchmark '{name}'; available: {BENCH_NAMES}")
    if dim < 1 or (name == "rosenbrock" and dim < 2):
        raise ValueError(f"invalid dimension {dim} for '{name}'")
    _, lower, upper, argmin = _SPECS[name]
    return BenchFunction(name, dim, lower, upper, np.full(dim, argmin))


def eval_bench(fn: BenchFunction, unit_vector: np.ndarray) -> float:
    u = np.asarray(unit_vector, dtype=float)
    if u.shape != (fn.dim,):
        raise ValueError(f"expected vector of length {fn.dim}, got {u.shape}")
    return _SPECS[fn.name][0](fn.to_domain(u))
