"""Six gradient-free optimizers behind one ask/tell interface.

All optimizers operate on the unit cube [0, 1]^n and are deterministic
given (kind, hyperparameters, seed, tell history). Out-of-bounds samples
are component-wise clamped to the cube before being emitted.
"""

from __future__ import annotations

import numpy as np

OPTIMIZER_KINDS = (
    "cma",
    "twopointsde",
    "noisyde",
    "pso",
    "oneplusone",
    "randomsearch",
)

# DE mutation/crossover constants
DE_WEIGHT = 0.8
DE_CROSSOVER = 0.5

# PSO constriction constants
PSO_OMEGA = 0.7298
PSO_PHI_P = 1.49618
PSO_PHI_G = 1.49618

# (1+1) step-size adaptation: one-fifth-rule family with factor 1.5
ONEPLUSONE_GROW = 1.5
ONEPLUSONE_SHRINK = 1.5 ** (-0.25)


class ProtocolError(RuntimeError):
    """ask/tell called out of order or with a mismatched batch."""


def covariance_norm(batch: np.ndarray) -> float:
    """Frobenius norm of the unbiased sample covariance of a batch."""
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[0] < 2:
        raise ValueError("covariance_norm needs a batch of >= 2 vectors")
    cov = np.cov(batch, rowvar=False, ddof=1)
    return float(np.linalg.norm(np.atleast_2d(cov)))


def de_default_popsize(policy: str, n: int, workers: int) -> int:
    """Population-size policies for the DE variants."""
    if policy == "standard":
        return max(workers, 30)
    if policy == "dimension":
        return max(workers, 30, n + 1)
    if policy == "large":
        return max(workers, 30, 7 * n)
    raise ValueError(f"unknown DE popsize policy '{policy}'")


def cma_defaults(n: int, lam: int) -> dict:
    """Standard CMA-ES selection weights and learning rates for (n, lambda)."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if lam < 2:
        raise ValueError("CMA needs a population size of at least 2")
    mu = lam // 2
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mueff = 1.0 / np.sum(weights**2)
    cs = (mueff + 2.0) / (n + mueff + 5.0)
    ds = 1.0 + 2.0 * max(0.0, np.sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs
    cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n)
    c1 = 2.0 / ((n + 1.3) ** 2 + mueff)
    cmu = min(
        1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) ** 2 + mueff)
    )
    chi_n = np.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n**2))
    return {
        "mu": mu,
        "weights": weights,
        "mueff": mueff,
        "cs": cs,
        "ds": ds,
        "cc": cc,
        "c1": c1,
        "cmu": cmu,
        "chi_n": chi_n,
    }


class Optimizer:
    """Generation-synchronous ask/tell base with elitism of record."""

    kind = "base"

    def __init__(self, dim: int, popsize: int, seed: int = 0):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        if popsize < 1:
            raise ValueError("popsize must be >= 1")
        self.dim = dim
        self.popsize = popsize
        self.rng = np.random.default_rng(seed)
        self.generation = 0
        self.best_score = np.inf
        self.best_candidate: np.ndarray | None = None
        self._pending: np.ndarray | None = None

    def ask(self) -> np.ndarray:
        if self._pending is not None:
            raise ProtocolError("ask called twice without an intervening tell")
        batch = np.clip(self._ask(), 0.0, 1.0)
        assert batch.shape == (self.popsize, self.dim)
        self._pending = batch
        return batch.copy()

    def tell(self, batch: np.ndarray, scores: np.ndarray) -> None:
        if self._pending is None:
            raise ProtocolError("tell called before ask")
        batch = np.asarray(batch, dtype=float)
        scores = np.asarray(scores, dtype=float)
        if batch.shape != self._pending.shape or not np.array_equal(
            batch, self._pending
        ):
            raise ProtocolError("tell batch does not match the last ask output")
        if scores.shape != (self.popsize,):
            raise ProtocolError(f"expected {self.popsize} scores, got {scores.shape}")
        if not np.all(np.isfinite(scores)):
            raise ProtocolError("scores must be finite (use a finite DNF penalty)")
        i = int(np.argmin(scores))
        if scores[i] < self.best_score:
            self.best_score = float(scores[i])
            self.best_candidate = batch[i].copy()
        self._update(batch, scores)
        self.generation += 1
        self._pending = None

    # subclass hooks
    def _ask(self) -> np.ndarray:
        raise NotImplementedError

    def _update(self, batch: np.ndarray, scores: np.ndarray) -> None:
        raise NotImplementedError


class RandomSearch(Optimizer):
    """Uniform i.i.d. sampling baseline."""

    kind = "randomsearch"

    def _ask(self) -> np.ndarray:
        return self.rng.uniform(0.0, 1.0, size=(self.popsize, self.dim))

    def _update(self, batch, scores) -> None:
        pass


class OnePlusOne(Optimizer):
    """(1+1) evolution strategy with adaptive Gaussian mutation scale."""

    kind = "oneplusone"

    def __init__(self, dim: int, popsize: int = 1, seed: int = 0, sigma0: float = 0.3):
        if popsize != 1:
            raise ValueError("(1+1) uses a population size of exactly 1")
        super().__init__(dim, 1, seed)
        self.sigma = float(sigma0)
        self.incumbent: np.ndarray | None = None
        self.incumbent_score = np.inf

    def _ask(self) -> np.ndarray:
        if self.incumbent is None:
            return self.rng.uniform(0.0, 1.0, size=(1, self.dim))
        mutant = self.incumbent + self.sigma * self.rng.standard_normal(self.dim)
        return mutant[None, :]

    def _update(self, batch, scores) -> None:
        if self.incumbent is None:
            self.incumbent = batch[0].copy()
            self.incumbent_score = float(scores[0])
            return
        if scores[0] < self.incumbent_score:
            self.incumbent = batch[0].copy()
            self.incumbent_score = float(scores[0])
            self.sigma *= ONEPLUSONE_GROW
        else:
            self.sigma *= ONEPLUSONE_SHRINK


def pso_velocity(
    velocity: np.ndarray,
    position: np.ndarray,
    personal_best: np.ndarray,
    global_best: np.ndarray,
    r_p: np.ndarray,
    r_g: np.ndarray,
    omega: float = PSO_OMEGA,
    phi_p: float = PSO_PHI_P,
    phi_g: float = PSO_PHI_G,
) -> np.ndarray:
    """Velocity update: inertia plus randomly weighted pulls toward the bests."""
    return (
        omega * velocity
        + phi_p * r_p * (personal_best - position)
        + phi_g * r_g * (global_best - position)
    )


class PSO(Optimizer):
    """Particle swarm with constriction-style constants."""

    kind = "pso"

    def __init__(self, dim: int, popsize: int, seed: int = 0):
        if popsize < 2:
            raise ValueError("PSO needs a population size of at least 2")
        super().__init__(dim, popsize, seed)
        self.positions: np.ndarray | None = None
        self.velocities = np.zeros((popsize, dim))
        self.pbest_pos: np.ndarray | None = None
        self.pbest_score: np.ndarray | None = None

    def _ask(self) -> np.ndarray:
        if self.positions is None:
            return self.rng.uniform(0.0, 1.0, size=(self.popsize, self.dim))
        gbest = self.pbest_pos[int(np.argmin(self.pbest_score))]
        r_p = self.rng.uniform(0.0, 1.0, size=(self.popsize, self.dim))
        r_g = self.rng.uniform(0.0, 1.0, size=(self.popsize, self.dim))
        self.velocities = pso_velocity(
            self.velocities, self.positions, self.pbest_pos, gbest, r_p, r_g
        )
        return self.positions + self.velocities

    def _update(self, batch, scores) -> None:
        self.positions = batch.copy()
        if self.pbest_pos is None:
            self.pbest_pos = batch.copy()
            self.pbest_score = scores.copy()
            return
        improved = scores < self.pbest_score
        self.pbest_pos[improved] = batch[improved]
        self.pbest_score[improved] = scores[improved]


def _distinct_indices(rng: np.random.Generator, count: int, n: int, exclude: int):
    """count distinct indices in [0, n) excluding one index."""
    pool = np.delete(np.arange(n), exclude)
    return rng.choice(pool, size=count, replace=False)


def de_donor_two_points(
    population: np.ndarray,
    fitness: np.ndarray,
    target: int,
    rng: np.random.Generator,
    weight: float = DE_WEIGHT,
) -> np.ndarray:
    """Donor with two weighted difference pairs on top of the best genome."""
    a, b, c, d = _distinct_indices(rng, 4, len(population), target)
    best = int(np.argmin(fitness))
    return population[best] + weight * (
        (population[a] - population[b]) + (population[c] - population[d])
    )


def de_base_noisy(population: np.ndarray, fitness: np.ndarray) -> np.ndarray:
    """Mean of the genomes scoring better than the population median."""
    median = np.median(fitness)
    mask = fitness < median
    if not np.any(mask):
        mask = fitness == fitness.min()
    return population[mask].mean(axis=0)


def de_donor_noisy(
    population: np.ndarray,
    fitness: np.ndarray,
    target: int,
    rng: np.random.Generator,
    weight: float = DE_WEIGHT,
) -> np.ndarray:
    """Donor with one difference pair on top of the better-than-median mean."""
    a, b = _distinct_indices(rng, 2, len(population), target)
    return de_base_noisy(population, fitness) + weight * (
        population[a] - population[b]
    )


class DifferentialEvolution(Optimizer):
    """DE with binomial crossover and greedy one-to-one selection."""

    kind = "de"
    donor_variant = "twopoints"

    def __init__(
        self,
        dim: int,
        popsize: int,
        seed: int = 0,
        weight: float = DE_WEIGHT,
        crossover: float = DE_CROSSOVER,
    ):
        if popsize < 6:
            raise ValueError("DE needs a population size of at least 6")
        if not 0.0 <= crossover <= 1.0:
            raise ValueError("crossover probability must lie in [0, 1]")
        super().__init__(dim, popsize, seed)
        self.weight = weight
        self.crossover = crossover
        self.population: np.ndarray | None = None
        self.fitness: np.ndarray | None = None

    def _donor(self, target: int) -> np.ndarray:
        if self.donor_variant == "twopoints":
            return de_donor_two_points(
                self.population, self.fitness, target, self.rng, self.weight
            )
        return de_donor_noisy(
            self.population, self.fitness, target, self.rng, self.weight
        )

    def _ask(self) -> np.ndarray:
        if self.population is None:
            return self.rng.uniform(0.0, 1.0, size=(self.popsize, self.dim))
        trials = np.empty((self.popsize, self.dim))
        for i in range(self.popsize):
            donor = self._donor(i)
            mask = self.rng.uniform(size=self.dim) < self.crossover
            mask[self.rng.integers(self.dim)] = True  # forced donor component
            trials[i] = np.where(mask, donor, self.population[i])
        return trials

    def _update(self, batch, scores) -> None:
        if self.population is None:
            self.population = batch.copy()
            self.fitness = scores.copy()
            return
        improved = scores < self.fitness
        self.population[improved] = batch[improved]
        self.fitness[improved] = scores[improved]


class TwoPointsDE(DifferentialEvolution):
    kind = "twopointsde"
    donor_variant = "twopoints"


class NoisyDE(DifferentialEvolution):
    kind = "noisyde"
    donor_variant = "noisy"


class CMA(Optimizer):
    """CMA-ES with rank-one/rank-mu covariance update and CSA step size."""

    kind = "cma"

    def __init__(
        self,
        dim: int,
        popsize: int,
        seed: int = 0,
        mean0: float = 0.5,
        sigma0: float = 0.3,
    ):
        super().__init__(dim, popsize, seed)
        h = cma_defaults(dim, popsize)
        self.mu = h["mu"]
        self.weights = h["weights"]
        self.mueff = h["mueff"]
        self.cs = h["cs"]
        self.ds = h["ds"]
        self.cc = h["cc"]
        self.c1 = h["c1"]
        self.cmu = h["cmu"]
        self.chi_n = h["chi_n"]
        self.mean = np.full(dim, float(mean0))
        self.sigma = float(sigma0)
        self.C = np.eye(dim)
        self.p_sigma = np.zeros(dim)
        self.p_c = np.zeros(dim)
        self._decompose()

    def _decompose(self) -> None:
        self.C = (self.C + self.C.T) / 2.0
        eigvals, eigvecs = np.linalg.eigh(self.C)
        eigvals = np.maximum(eigvals, 1e-20)
        self.B = eigvecs
        self.D = np.sqrt(eigvals)
        self.inv_sqrt_C = eigvecs @ np.diag(1.0 / self.D) @ eigvecs.T

    def _ask(self) -> np.ndarray:
        z = self.rng.standard_normal((self.popsize, self.dim))
        return self.mean + self.sigma * (z * self.D) @ self.B.T

    def _update(self, batch, scores) -> None:
        order = np.argsort(scores, kind="stable")
        selected = batch[order[: self.mu]]
        mean_old = self.mean
        mean_new = self.weights @ selected
        y = (mean_new - mean_old) / self.sigma

        self.p_sigma = (1.0 - self.cs) * self.p_sigma + np.sqrt(
            self.cs * (2.0 - self.cs) * self.mueff
        ) * (self.inv_sqrt_C @ y)
        norm_ps = np.linalg.norm(self.p_sigma)
        decay = np.sqrt(1.0 - (1.0 - self.cs) ** (2.0 * (self.generation + 1)))
        h_sigma = norm_ps / decay / self.chi_n < 1.4 + 2.0 / (self.dim + 1.0)

        self.p_c = (1.0 - self.cc) * self.p_c + (
            np.sqrt(self.cc * (2.0 - self.cc) * self.mueff) * y if h_sigma else 0.0
        )

        ys = (selected - mean_old) / self.sigma
        rank_mu = (ys.T * self.weights) @ ys
        rank_one = np.outer(self.p_c, self.p_c)
        correction = 0.0 if h_sigma else self.cc * (2.0 - self.cc)
        self.C = (
            (1.0 - self.c1 - self.cmu) * self.C
            + self.c1 * (rank_one + correction * self.C)
            + self.cmu * rank_mu
        )
        self.sigma *= np.exp((self.cs / self.ds) * (norm_ps / self.chi_n - 1.0))
        self.mean = mean_new
        self._decompose()


_KIND_TO_CLASS = {
    "cma": CMA,
    "twopointsde": TwoPointsDE,
    "noisyde": NoisyDE,
    "pso": PSO,
    "oneplusone": OnePlusOne,
    "randomsearch": RandomSearch,
}


def default_popsize(kind: str, workers: int = 24) -> int:
    """Default population size: the worker count, except (1+1) which uses 1."""
    return 1 if kind == "oneplusone" else workers


def make_optimizer(
    kind: str, dim: int, popsize: int | None = None, seed: int = 0, **hyper
) -> Optimizer:
    kind = kind.lower()
    if kind not in _KIND_TO_CLASS:
        raise ValueError(
            f"unknown optimizer '{kind}'; available: {', '.join(OPTIMIZER_KINDS)}"
        )
    if popsize is None:
        popsize = default_popsize(kind)
    return _KIND_TO_CLASS[kind](dim, popsize, seed, **hyper)
