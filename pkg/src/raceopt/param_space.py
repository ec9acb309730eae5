"""Search space definition and unit-cube encoding.

The search space is the concatenation of three sub-spaces:

* physical: vehicle mass and CoG-to-front-axle distance,
* decision-making: minimum/maximum longitudinal velocity plus one lateral
  offset per raceline control point,
* control: the parameter block of the selected path tracker.

Optimizers only ever see vectors in the unit cube [0, 1]^n; ``decode`` and
``encode`` map losslessly between unit vectors and physical values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

import numpy as np

from .vehicle import WHEELBASE_M

PURE_PURSUIT = "purepursuit"
STANLEY = "stanley"
LQR = "lqr"

CONTROLLER_KINDS = (PURE_PURSUIT, STANLEY, LQR)

#: names of the controller parameter block, per controller kind
CONTROLLER_PARAM_NAMES = {
    PURE_PURSUIT: ("lookahead_m",),
    STANLEY: ("gain_kp",),
    LQR: ("q1", "q2", "q3", "q4", "r"),
}


class ConfigurationError(ValueError):
    """Invalid bounds or search-space configuration."""


class CodecError(ValueError):
    """decode/encode input violates its preconditions."""


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def validate(self, name: str) -> None:
        if not (self.lower < self.upper):
            raise ConfigurationError(
                f"interval '{name}' requires lower < upper, got "
                f"[{self.lower}, {self.upper}]"
            )

    def to_unit(self, value: float) -> float:
        return (value - self.lower) / (self.upper - self.lower)

    def from_unit(self, u: float) -> float:
        return self.lower + u * (self.upper - self.lower)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol


@dataclass(frozen=True)
class BoundsConfig:
    """Bounds for every tunable parameter.

    ``perturb_halfwidth_m`` caps the symmetric bound on each lateral
    control-point offset; the effective per-point half-width may be
    tightened further by the local track width (see ``build_space``).
    The 0.25 m default keeps randomly sampled racelines inside a typical
    corridor; larger caps make nearly every sampled candidate crash and
    the objective landscape flat.
    """

    mass_kg: Interval
    cog_to_front_m: Interval
    v_min_mps: Interval
    v_max_mps: Interval
    lookahead_m: Interval
    gain_kp: Interval
    lqr_q: Interval
    lqr_r: Interval
    perturb_halfwidth_m: float = 0.25

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Interval):
                value.validate(f.name)
        if not self.perturb_halfwidth_m > 0:
            raise ConfigurationError(
                f"perturb_halfwidth_m must be > 0, got {self.perturb_halfwidth_m}"
            )

    def controller_intervals(self, controller_kind: str) -> tuple[Interval, ...]:
        if controller_kind == PURE_PURSUIT:
            return (self.lookahead_m,)
        if controller_kind == STANLEY:
            return (self.gain_kp,)
        if controller_kind == LQR:
            return (self.lqr_q,) * 4 + (self.lqr_r,)
        raise ConfigurationError(f"unknown controller kind '{controller_kind}'")


#: bounds used throughout the default experiments
ORIGINAL_BOUNDS = BoundsConfig(
    mass_kg=Interval(3.0, 4.0),
    cog_to_front_m=Interval(0.147, 0.170),
    v_min_mps=Interval(0.5, 2.0),
    v_max_mps=Interval(6.0, 15.0),
    lookahead_m=Interval(0.2, 2.0),
    gain_kp=Interval(0.001, 2.0),
    lqr_q=Interval(0.001, 1.0),
    lqr_r=Interval(0.001, 1.0),
)

#: deliberately loosened bounds for the bounds-relaxation study
RELAXED_BOUNDS = BoundsConfig(
    mass_kg=Interval(1.0, 10.0),
    cog_to_front_m=Interval(0.001, 0.3),
    v_min_mps=Interval(0.5, 10.0),
    v_max_mps=Interval(10.0, 20.0),
    lookahead_m=Interval(0.2, 10.0),
    gain_kp=Interval(0.001, 2.0),
    lqr_q=Interval(0.001, 1.0),
    lqr_r=Interval(0.001, 1.0),
)

BOUNDS_PRESETS = {"original": ORIGINAL_BOUNDS, "relaxed": RELAXED_BOUNDS}


def bounds_from_json(path: str) -> BoundsConfig:
    """Load a :class:`BoundsConfig` from a JSON file.

    Interval fields are two-element arrays ``[lower, upper]``; scalar
    fields are plain numbers. Missing fields fall back to the original
    preset.
    """
    with open(path) as fh:
        raw = json.load(fh)
    kwargs = {}
    for f in fields(BoundsConfig):
        if f.name not in raw:
            kwargs[f.name] = getattr(ORIGINAL_BOUNDS, f.name)
            continue
        value = raw[f.name]
        if f.name == "perturb_halfwidth_m":
            kwargs[f.name] = float(value)
        else:
            lo, hi = value
            kwargs[f.name] = Interval(float(lo), float(hi))
    unknown = set(raw) - {f.name for f in fields(BoundsConfig)}
    if unknown:
        raise ConfigurationError(f"unknown bounds fields: {sorted(unknown)}")
    return BoundsConfig(**kwargs)


def get_bounds(name_or_path: str) -> BoundsConfig:
    """Resolve a preset name ('original'/'relaxed') or a JSON file path."""
    if name_or_path in BOUNDS_PRESETS:
        return BOUNDS_PRESETS[name_or_path]
    return bounds_from_json(name_or_path)


@dataclass(frozen=True)
class SearchSpace:
    """Immutable description of the concatenated search space.

    Dimension layout::

        0: mass_kg            1: cog_to_front_m
        2: v_min_mps          3: v_max_mps
        4 .. 4+n_cp:          lateral control-point offsets
        4+n_cp .. n:          controller parameter block
    """

    bounds: BoundsConfig
    controller_kind: str
    n_control_points: int = 100
    perturb_halfwidths: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.controller_kind not in CONTROLLER_KINDS:
            raise ConfigurationError(
                f"unknown controller kind '{self.controller_kind}'"
            )
        if self.n_control_points < 4:
            raise ConfigurationError("n_control_points must be >= 4")
        hw = self.perturb_halfwidths
        if hw is None:
            hw = np.full(self.n_control_points, self.bounds.perturb_halfwidth_m)
        hw = np.asarray(hw, dtype=float)
        if hw.shape != (self.n_control_points,):
            raise ConfigurationError("perturb_halfwidths length mismatch")
        if not np.all(hw > 0):
            raise ConfigurationError("perturb_halfwidths must all be > 0")
        hw.flags.writeable = False
        object.__setattr__(self, "perturb_halfwidths", hw)

    @property
    def controller_intervals(self) -> tuple[Interval, ...]:
        return self.bounds.controller_intervals(self.controller_kind)

    @property
    def n(self) -> int:
        return 4 + self.n_control_points + len(self.controller_intervals)

    # sub-space index ranges (disjoint, covering 0..n)
    @property
    def physical_dims(self) -> np.ndarray:
        return np.arange(0, 2)

    @property
    def decision_dims(self) -> np.ndarray:
        return np.concatenate(
            [np.arange(2, 4), np.arange(4, 4 + self.n_control_points)]
        )

    @property
    def control_dims(self) -> np.ndarray:
        return np.arange(4 + self.n_control_points, self.n)

    def subset_dims(self, subset: str) -> np.ndarray:
        """Dimension indices for a sensitivity-analysis subset."""
        subset = subset.lower()
        if subset == "all":
            return np.arange(self.n)
        if subset == "physical":
            return self.physical_dims
        if subset == "decision":
            return self.decision_dims
        if subset == "control":
            return self.control_dims
        raise ConfigurationError(f"unknown subset '{subset}'")


@dataclass(frozen=True)
class Candidate:
    """One decoded point of the search space."""

    unit: np.ndarray
    mass_kg: float
    cog_to_front_m: float
    v_min_mps: float
    v_max_mps: float
    perturbs_m: np.ndarray
    controller_params: np.ndarray

    def to_dict(self) -> dict:
        return {
            "unit": self.unit.tolist(),
            "mass_kg": self.mass_kg,
            "cog_to_front_m": self.cog_to_front_m,
            "v_min_mps": self.v_min_mps,
            "v_max_mps": self.v_max_mps,
            "perturbs_m": self.perturbs_m.tolist(),
            "controller_params": self.controller_params.tolist(),
        }


def build_space(
    controller_kind: str,
    bounds: BoundsConfig,
    n_control_points: int = 100,
    track=None,
    vehicle_half_width_m: float = 0.15,
) -> SearchSpace:
    """Build a :class:`SearchSpace` for one controller kind.

    When ``track`` is given, the per-control-point perturbation half-width
    is the local half track width minus the vehicle half width, capped at
    ``bounds.perturb_halfwidth_m``; otherwise the cap is used everywhere.
    """
    halfwidths = None
    if track is not None:
        from .raceline import control_points

        cps = control_points(track, n_control_points)
        halfwidths = np.empty(n_control_points)
        for i, (s, _) in enumerate(cps):
            w_l, w_r = track.widths_at(s)
            local = min(w_l, w_r) - vehicle_half_width_m
            halfwidths[i] = min(max(local, 1e-3), bounds.perturb_halfwidth_m)
    return SearchSpace(
        bounds=bounds,
        controller_kind=controller_kind,
        n_control_points=n_control_points,
        perturb_halfwidths=halfwidths,
    )


def _scalar_intervals(space: SearchSpace) -> tuple[Interval, ...]:
    b = space.bounds
    return (b.mass_kg, b.cog_to_front_m, b.v_min_mps, b.v_max_mps)


def decode(space: SearchSpace, unit_vector: np.ndarray) -> Candidate:
    """Map a unit-cube vector to physical parameter values.

    Velocity ordering is repaired by swapping the decoded pair when
    v_min > v_max, which keeps the map total under relaxed bounds.
    """
    u = np.asarray(unit_vector, dtype=float)
    if u.shape != (space.n,):
        raise CodecError(f"expected unit vector of length {space.n}, got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise CodecError("unit vector contains non-finite components")
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise CodecError("unit vector components must lie in [0, 1]")

    scalars = [iv.from_unit(u[i]) for i, iv in enumerate(_scalar_intervals(space))]
    mass, cog, v_min, v_max = scalars
    if v_min > v_max:
        v_min, v_max = v_max, v_min
    if not cog < WHEELBASE_M:
        raise CodecError(
            f"cog_to_front_m = {cog} must stay below the wheelbase {WHEELBASE_M}"
        )
    n_cp = space.n_control_points
    perturbs = (2.0 * u[4 : 4 + n_cp] - 1.0) * space.perturb_halfwidths
    ctrl = np.array(
        [
            iv.from_unit(u[4 + n_cp + j])
            for j, iv in enumerate(space.controller_intervals)
        ]
    )
    return Candidate(
        unit=u.copy(),
        mass_kg=mass,
        cog_to_front_m=cog,
        v_min_mps=v_min,
        v_max_mps=v_max,
        perturbs_m=perturbs,
        controller_params=ctrl,
    )


def encode(space: SearchSpace, candidate: Candidate) -> np.ndarray:
    """Exact inverse of :func:`decode` for in-bounds candidates."""
    u = np.empty(space.n)
    scalar_values = (
        candidate.mass_kg,
        candidate.cog_to_front_m,
        candidate.v_min_mps,
        candidate.v_max_mps,
    )
    scalar_names = ("mass_kg", "cog_to_front_m", "v_min_mps", "v_max_mps")
    for i, (value, iv, name) in enumerate(
        zip(scalar_values, _scalar_intervals(space), scalar_names)
    ):
        if not iv.contains(value):
            raise CodecError(
                f"{name} = {value} outside bounds [{iv.lower}, {iv.upper}]"
            )
        u[i] = iv.to_unit(value)
    n_cp = space.n_control_points
    perturbs = np.asarray(candidate.perturbs_m, dtype=float)
    if perturbs.shape != (n_cp,):
        raise CodecError("perturbs_m length mismatch")
    if np.any(np.abs(perturbs) > space.perturb_halfwidths):
        raise CodecError("perturbation outside its half-width bound")
    u[4 : 4 + n_cp] = (perturbs / space.perturb_halfwidths + 1.0) / 2.0
    ctrl = np.asarray(candidate.controller_params, dtype=float)
    intervals = space.controller_intervals
    if ctrl.shape != (len(intervals),):
        raise CodecError("controller_params length mismatch")
    for j, (value, iv) in enumerate(zip(ctrl, intervals)):
        if not iv.contains(value):
            raise CodecError(
                f"controller param {j} = {value} outside "
                f"[{iv.lower}, {iv.upper}]"
            )
        u[4 + n_cp + j] = iv.to_unit(value)
    return u
