"""Path trackers: Pure Pursuit, Stanley, and an LQR on lateral-error dynamics.

Each tracker maps (vehicle state, raceline) to a desired steer angle and
speed. All three are pure functions; the compiled kernel implementations
in :mod:`raceopt._kernel` do the arithmetic so that the same code runs in
unit tests and in the full-lap rollout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernel
from .param_space import LQR, PURE_PURSUIT, STANLEY
from .raceline import Raceline
from .vehicle import VehicleParams, VehicleState

CONTROLLER_KIND_CODES = {
    PURE_PURSUIT: _kernel.KIND_PURE_PURSUIT,
    STANLEY: _kernel.KIND_STANLEY,
    LQR: _kernel.KIND_LQR,
}


class ControllerFault(RuntimeError):
    """Gain computation failed (Riccati non-convergence)."""


@dataclass(frozen=True)
class ControllerConfig:
    kind: str
    params: np.ndarray
    horizon_dt_s: float = 0.01

    def __post_init__(self) -> None:
        params = np.asarray(self.params, dtype=float)
        object.__setattr__(self, "params", params)
        if self.kind == PURE_PURSUIT:
            if params.shape != (1,) or params[0] <= 0:
                raise ValueError("Pure Pursuit needs lookahead_m > 0")
        elif self.kind == STANLEY:
            if params.shape != (1,) or params[0] <= 0:
                raise ValueError("Stanley needs gain_kp > 0")
        elif self.kind == LQR:
            if params.shape != (5,):
                raise ValueError("LQR needs (q1..q4, r)")
            q, r = params[:4], params[4]
            if np.any(q < 0) or not np.any(q > 0):
                raise ValueError("LQR q must be >= 0 with at least one > 0")
            if r <= 0:
                raise ValueError("LQR r must be > 0")
        else:
            raise ValueError(f"unknown controller kind '{self.kind}'")


def _raceline_nearest(raceline: Raceline, px: float, py: float) -> int:
    return int(
        _kernel.nearest_index_global(px, py, raceline.x_m, raceline.y_m)
    )


def pure_pursuit(
    state: VehicleState,
    raceline: Raceline,
    lookahead_m: float,
    params: VehicleParams = VehicleParams(),
) -> tuple[float, float]:
    """Steer toward the raceline point one lookahead ahead of the rear axle."""
    if lookahead_m <= 0:
        raise ValueError("lookahead_m must be > 0")
    arr = state.as_array()
    rx = state.x_m - params.l_r_m * np.cos(state.yaw_rad)
    ry = state.y_m - params.l_r_m * np.sin(state.yaw_rad)
    idx = _raceline_nearest(raceline, rx, ry)
    steer, speed, _ = _kernel.pure_pursuit_kernel(
        arr,
        raceline.x_m,
        raceline.y_m,
        raceline.v_ref_mps,
        raceline.ds_m,
        lookahead_m,
        params.wheelbase_m,
        params.l_r_m,
        idx,
        len(raceline),
    )
    return float(steer), float(speed)


def stanley(
    state: VehicleState,
    raceline: Raceline,
    gain_kp: float,
    params: VehicleParams = VehicleParams(),
) -> tuple[float, float]:
    """Heading error plus crosstrack correction measured at the front axle."""
    if gain_kp <= 0:
        raise ValueError("gain_kp must be > 0")
    arr = state.as_array()
    fx = state.x_m + params.l_f_m * np.cos(state.yaw_rad)
    fy = state.y_m + params.l_f_m * np.sin(state.yaw_rad)
    idx = _raceline_nearest(raceline, fx, fy)
    steer, speed, _ = _kernel.stanley_kernel(
        arr,
        raceline.x_m,
        raceline.y_m,
        raceline.heading_rad,
        raceline.v_ref_mps,
        gain_kp,
        params.l_f_m,
        idx,
        len(raceline),
    )
    return float(steer), float(speed)


def solve_dare(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> np.ndarray:
    """Discrete algebraic Riccati equation by fixed-point iteration."""
    P, converged = _kernel.solve_dare_kernel(
        np.ascontiguousarray(A, dtype=float),
        np.ascontiguousarray(B, dtype=float),
        np.ascontiguousarray(Q, dtype=float),
        np.ascontiguousarray(R, dtype=float),
        tol,
        max_iter,
    )
    if not converged:
        raise ControllerFault("Riccati iteration did not converge")
    return P


def lqr_gain(
    v_mps: float,
    q: np.ndarray,
    r: float,
    wheelbase_m: float,
    dt: float = 0.01,
) -> np.ndarray:
    """Feedback gain K (length 4) for the lateral-error dynamics at speed v."""
    q = np.ascontiguousarray(q, dtype=float)
    K, _, converged = _kernel.lqr_gain_kernel(
        float(v_mps), q, float(r), wheelbase_m, dt, np.diag(q), 10000
    )
    if not converged:
        raise ControllerFault("Riccati iteration did not converge")
    if __debug__:
        v_eff = max(v_mps, 0.5)
        A = np.array(
            [[1.0, dt, 0.0, 0.0], [0.0, 0.0, v_eff, 0.0],
             [0.0, 0.0, 1.0, dt], [0.0, 0.0, 0.0, 0.0]]
        )
        B = np.array([[0.0], [0.0], [0.0], [v_eff / wheelbase_m]])
        radius = np.max(np.abs(np.linalg.eigvals(A - B @ K[None, :])))
        assert radius < 1.0, f"unstable closed loop, spectral radius {radius}"
    return K


def lqr(
    state: VehicleState,
    raceline: Raceline,
    q: np.ndarray,
    r_scalar: float,
    dt: float = 0.01,
    params: VehicleParams = VehicleParams(),
) -> tuple[float, float]:
    """LQR feedback on [e, e_dot, theta_e, theta_e_dot] plus curvature feedforward."""
    arr = state.as_array()
    idx = _raceline_nearest(raceline, state.x_m, state.y_m)
    q = np.ascontiguousarray(q, dtype=float)
    steer, speed, _, _, ok = _kernel.lqr_kernel(
        arr,
        raceline.x_m,
        raceline.y_m,
        raceline.heading_rad,
        raceline.kappa_per_m,
        raceline.v_ref_mps,
        q,
        float(r_scalar),
        params.wheelbase_m,
        dt,
        idx,
        len(raceline),
        np.diag(q),
        10000,
    )
    if not ok:
        raise ControllerFault("Riccati iteration did not converge")
    return float(steer), float(speed)


def compute_control(
    config: ControllerConfig,
    state: VehicleState,
    raceline: Raceline,
    params: VehicleParams = VehicleParams(),
) -> tuple[float, float]:
    """Dispatch to the tracker selected by the config."""
    if config.kind == PURE_PURSUIT:
        return pure_pursuit(state, raceline, float(config.params[0]), params)
    if config.kind == STANLEY:
        return stanley(state, raceline, float(config.params[0]), params)
    return lqr(
        state, raceline, config.params[:4], float(config.params[4]),
        config.horizon_dt_s, params,
    )
