"""Single-track vehicle model: parameters, state, and explicit stepping.

Only mass and the CoG-to-front-axle distance vary across candidates; the
remaining constants describe a 1/10-scale car and can be overridden from
a JSON file (see docs/vehicle.md).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernel

WHEELBASE_M = 0.3302


class SimulationFault(RuntimeError):
    """Non-finite state or input reached the simulator."""


@dataclass(frozen=True)
class VehicleParams:
    """Tunable and fixed physical constants of the single-track model."""

    mass_kg: float = 3.74
    l_f_m: float = 0.15875
    wheelbase_m: float = WHEELBASE_M
    i_z_kgm2: float = 0.04712
    c_sf: float = 4.718
    c_sr: float = 5.4562
    h_cg_m: float = 0.074
    mu: float = 1.0489
    steer_max_rad: float = 0.4189
    steer_rate_max_radps: float = 3.2
    a_long_max_mps2: float = 9.51
    v_max_mps: float = 20.0
    v_switch_mps: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.l_f_m < self.wheelbase_m:
            raise ValueError(
                f"l_f_m = {self.l_f_m} must lie strictly inside "
                f"(0, {self.wheelbase_m})"
            )
        if self.mass_kg <= 0:
            raise ValueError("mass_kg must be > 0")
        for name in ("i_z_kgm2", "c_sf", "c_sr", "h_cg_m", "mu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def l_r_m(self) -> float:
        return self.wheelbase_m - self.l_f_m

    def with_candidate(self, mass_kg: float, cog_to_front_m: float) -> "VehicleParams":
        """Apply the two tunable physical parameters of a candidate."""
        return replace(self, mass_kg=mass_kg, l_f_m=cog_to_front_m)

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.mass_kg,
                self.l_f_m,
                self.l_r_m,
                self.i_z_kgm2,
                self.c_sf,
                self.c_sr,
                self.h_cg_m,
                self.mu,
                self.steer_max_rad,
                self.steer_rate_max_radps,
                self.a_long_max_mps2,
                self.v_max_mps,
                self.v_switch_mps,
                self.wheelbase_m,
            ]
        )

    @classmethod
    def from_json(cls, path: str) -> "VehicleParams":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(**raw)


@dataclass(frozen=True)
class VehicleState:
    x_m: float = 0.0
    y_m: float = 0.0
    yaw_rad: float = 0.0
    v_mps: float = 0.0
    steer_rad: float = 0.0
    yaw_rate_radps: float = 0.0
    slip_angle_rad: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.x_m,
                self.y_m,
                self.yaw_rad,
                self.v_mps,
                self.steer_rad,
                self.yaw_rate_radps,
                self.slip_angle_rad,
            ]
        )

    @classmethod
    def from_array(cls, a: np.ndarray) -> "VehicleState":
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class ControlInput:
    steer_rate_cmd_radps: float
    accel_cmd_mps2: float


def clamp_input(
    inp: ControlInput, state: VehicleState, params: VehicleParams
) -> ControlInput:
    """Saturate a control input against actuator and speed limits."""
    if not (
        math.isfinite(inp.steer_rate_cmd_radps) and math.isfinite(inp.accel_cmd_mps2)
    ):
        raise SimulationFault("non-finite control input")
    sv, a = _kernel.clamp_input_kernel(
        inp.steer_rate_cmd_radps,
        inp.accel_cmd_mps2,
        state.v_mps,
        state.steer_rad,
        params.as_array(),
    )
    return ControlInput(sv, a)


def steer_and_speed_to_input(
    desired_steer_rad: float,
    desired_speed_mps: float,
    state: VehicleState,
    k_steer: float = 10.0,
    k_speed: float = 8.0,
) -> ControlInput:
    """Proportional tracking of a desired steer angle and speed."""
    return ControlInput(
        steer_rate_cmd_radps=k_steer * (desired_steer_rad - state.steer_rad),
        accel_cmd_mps2=k_speed * (desired_speed_mps - state.v_mps),
    )


def step(
    state: VehicleState,
    params: VehicleParams,
    inp: ControlInput,
    dt_s: float = 0.01,
) -> VehicleState:
    """One explicit RK4 step of the single-track model.

    Below the switch speed a kinematic bicycle is integrated; above it,
    the dynamic formulation with linear tires. Inputs are clamped to
    actuator limits before integration, the output state to steer and
    speed limits after it.
    """
    arr = state.as_array()
    if not np.all(np.isfinite(arr)):
        raise SimulationFault("non-finite vehicle state")
    if not (
        math.isfinite(inp.steer_rate_cmd_radps) and math.isfinite(inp.accel_cmd_mps2)
    ):
        raise SimulationFault("non-finite control input")
    out = _kernel.step_kernel(
        arr, params.as_array(), inp.steer_rate_cmd_radps, inp.accel_cmd_mps2, dt_s
    )
    return VehicleState.from_array(out)
