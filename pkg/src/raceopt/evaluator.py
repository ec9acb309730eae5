"""The objective function: one candidate, two simulated laps, one score."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernel
from .param_space import Candidate, SearchSpace, decode
from .raceline import build_raceline
from .track import Track
from .vehicle import VehicleParams

DNF_PENALTY_S = 99999.0


class CrashReason(Enum):
    NONE = "none"
    OFF_TRACK = "off_track"
    CONTROLLER_FAULT = "controller_fault"
    TIMEOUT = "timeout"
    NON_FINITE = "non_finite"


_STATUS_TO_REASON = {
    _kernel.STATUS_SUCCESS: CrashReason.NONE,
    _kernel.STATUS_OFFTRACK: CrashReason.OFF_TRACK,
    _kernel.STATUS_CONTROLLER_FAULT: CrashReason.CONTROLLER_FAULT,
    _kernel.STATUS_TIMEOUT: CrashReason.TIMEOUT,
    _kernel.STATUS_NONFINITE: CrashReason.NON_FINITE,
}


@dataclass(frozen=True)
class SimConfig:
    dt_s: float = 0.01
    t_max_s: float = 300.0
    n_laps: int = 2
    dnf_penalty_s: float = DNF_PENALTY_S
    ds_m: float = 0.1
    vehicle_half_width_m: float = 0.15
    k_steer: float = 10.0
    k_speed: float = 8.0
    record_trajectory: bool = False
    base_params: VehicleParams = field(default_factory=VehicleParams)


@dataclass(frozen=True)
class LapResult:
    score_s: float
    success: bool
    laps_completed: int
    crash_reason: CrashReason
    trajectory: np.ndarray | None = None  # rows: t, x, y, yaw, v, steer, slip

    def export_trajectory_csv(self, path: str) -> None:
        if self.trajectory is None:
            raise ValueError("trajectory was not recorded")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "y", "yaw", "v", "steer", "slip_angle"])
            for row in self.trajectory:
                writer.writerow([repr(float(v)) for v in row])


def count_laps(s_positions: np.ndarray, length_m: float) -> int:
    """Completed laps from a sequence of projected arc positions.

    The sequence is unwrapped (forward and reverse crossings of s = 0
    both counted with sign), so oscillating across the line cannot
    inflate the count.
    """
    s = np.asarray(s_positions, dtype=float)
    if len(s) < 2:
        return 0
    deltas = np.diff(s)
    deltas = np.where(deltas > 0.5 * length_m, deltas - length_m, deltas)
    deltas = np.where(deltas <= -0.5 * length_m, deltas + length_m, deltas)
    unwrapped = float(np.sum(deltas))
    if unwrapped <= 0:
        return 0
    return int(unwrapped // length_m)


def _centerline_arrays(track: Track, ds_m: float):
    spline = track.spline
    m = max(64, int(round(spline.length_m / ds_m)))
    s = np.arange(m) * (spline.length_m / m)
    xy = spline.point_at(s)
    heading = spline.heading_at(s)
    wl = np.empty(m)
    wr = np.empty(m)
    for i, si in enumerate(s):
        wl[i], wr[i] = track.widths_at(si)
    return xy[:, 0].copy(), xy[:, 1].copy(), heading, wl, wr


def evaluate(
    candidate: Candidate,
    track: Track,
    space: SearchSpace,
    sim_config: SimConfig = SimConfig(),
) -> LapResult:
    """Roll out one candidate for two laps; DNF on crash or timeout.

    Fully deterministic: a pure function of its arguments.
    """
    params = sim_config.base_params.with_candidate(
        candidate.mass_kg, candidate.cog_to_front_m
    )
    raceline = build_raceline(
        track,
        candidate.perturbs_m,
        candidate.v_min_mps,
        candidate.v_max_mps,
        ds_m=sim_config.ds_m,
        a_long_max=params.a_long_max_mps2,
    )
    cl_x, cl_y, cl_h, cl_wl, cl_wr = _centerline_arrays(track, sim_config.ds_m)
    from .controllers import CONTROLLER_KIND_CODES

    status, elapsed, laps, n_steps, traj = _kernel.rollout_kernel(
        raceline.x_m,
        raceline.y_m,
        raceline.heading_rad,
        raceline.kappa_per_m,
        raceline.v_ref_mps,
        raceline.ds_m,
        raceline.length_m,
        cl_x,
        cl_y,
        cl_h,
        cl_wl,
        cl_wr,
        params.as_array(),
        CONTROLLER_KIND_CODES[space.controller_kind],
        np.ascontiguousarray(candidate.controller_params, dtype=float),
        sim_config.dt_s,
        sim_config.t_max_s,
        sim_config.k_steer,
        sim_config.k_speed,
        sim_config.vehicle_half_width_m,
        sim_config.n_laps,
        sim_config.record_trajectory,
    )
    success = status == _kernel.STATUS_SUCCESS
    score = elapsed if success else sim_config.dnf_penalty_s
    trajectory = traj[:n_steps].copy() if sim_config.record_trajectory else None
    return LapResult(
        score_s=float(score),
        success=success,
        laps_completed=int(laps),
        crash_reason=_STATUS_TO_REASON[int(status)],
        trajectory=trajectory,
    )


def evaluate_unit(
    unit_vector: np.ndarray,
    track: Track,
    space: SearchSpace,
    sim_config: SimConfig = SimConfig(),
) -> LapResult:
    """Decode then evaluate one unit-cube vector."""
    return evaluate(decode(space, unit_vector), track, space, sim_config)
