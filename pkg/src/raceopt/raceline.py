"""Raceline construction from the decision-parameter block.

A candidate's 100 lateral offsets shift evenly spaced centerline control
points along the local normal; a periodic spline of the offsets yields a
dense offset curve which is re-fitted, resampled at uniform arc length,
and annotated with a curvature-based velocity profile.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .track import Track, fit_closed_spline

DEFAULT_DS_M = 0.1


@dataclass(frozen=True)
class Raceline:
    """Closed reference path resampled at uniform arc spacing."""

    x_m: np.ndarray
    y_m: np.ndarray
    s_m: np.ndarray
    heading_rad: np.ndarray
    kappa_per_m: np.ndarray
    v_ref_mps: np.ndarray
    ds_m: float
    length_m: float

    def __len__(self) -> int:
        return len(self.x_m)

    def export_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s_m", "x_m", "y_m", "heading_rad", "kappa", "v_ref"])
            for row in zip(
                self.s_m, self.x_m, self.y_m, self.heading_rad,
                self.kappa_per_m, self.v_ref_mps,
            ):
                writer.writerow([repr(float(v)) for v in row])


def control_points(track: Track, n: int = 100) -> list[tuple[float, np.ndarray]]:
    """n control points evenly spaced in arc length, first at s = 0."""
    if n < 4:
        raise ValueError("need at least 4 control points")
    spline = track.spline
    s_values = np.arange(n) * (spline.length_m / n)
    return [(float(s), spline.point_at(s)) for s in s_values]


def velocity_profile(
    kappa_per_m: np.ndarray,
    v_min: float,
    v_max: float,
    ds_m: float,
    a_long_max: float = 9.51,
) -> np.ndarray:
    """Curvature-scaled speed target with longitudinal-acceleration smoothing.

    v(s) = v_min + (v_max - v_min) * (1 - |kappa|/kappa_max), then a
    wrap-around forward/backward pass enforces |dv/ds| * v <= a_long_max.
    Smoothing only ever lowers speeds, so the result stays in
    [v_min, v_max], and it is idempotent.
    """
    if v_min > v_max:
        raise ValueError("v_min must be <= v_max")
    kappa = np.abs(np.asarray(kappa_per_m, dtype=float))
    kappa_max = kappa.max() if len(kappa) else 0.0
    if kappa_max < 1e-9:
        return np.full_like(kappa, float(v_max))
    v = v_min + (v_max - v_min) * (1.0 - kappa / kappa_max)
    n = len(v)
    limit_sq = 2.0 * a_long_max * ds_m
    # closed loop: sweep twice around so the seam is handled
    for _ in range(2):
        for i in range(n):  # forward: limit acceleration
            j = (i + 1) % n
            cap = np.sqrt(v[i] ** 2 + limit_sq)
            if v[j] > cap:
                v[j] = cap
        for i in range(n - 1, -1, -1):  # backward: limit braking
            j = (i - 1) % n
            cap = np.sqrt(v[i] ** 2 + limit_sq)
            if v[j] > cap:
                v[j] = cap
    return v


def build_raceline(
    track: Track,
    perturbs_m: np.ndarray,
    v_min: float,
    v_max: float,
    ds_m: float = DEFAULT_DS_M,
    a_long_max: float = 9.51,
) -> Raceline:
    """Deterministically build the reference path for one candidate.

    Perturbed points may leave the track surface; drivability is judged
    by the simulation, not here.
    """
    perturbs = np.asarray(perturbs_m, dtype=float)
    if not np.all(np.isfinite(perturbs)):
        raise ValueError("perturbs_m contains non-finite values")
    if v_min > v_max:
        raise ValueError("v_min must be <= v_max")
    n_cp = len(perturbs)
    center = track.spline
    L0 = center.length_m

    # periodic lateral-offset function through the control-point offsets
    s_cp = np.arange(n_cp) * (L0 / n_cp)
    s_knots = np.concatenate([s_cp, [L0]])
    d_knots = np.concatenate([perturbs, perturbs[:1]])
    offset = CubicSpline(s_knots, d_knots, bc_type="periodic", extrapolate="periodic")

    # dense sampling of the offset curve, then re-fit for arc geometry
    m0 = max(64, int(round(L0 / ds_m)))
    s_dense = np.arange(m0) * (L0 / m0)
    pts = center.point_at(s_dense) + offset(s_dense)[:, None] * center.normal_at(
        s_dense
    )
    spline = fit_closed_spline(pts)
    L = spline.length_m

    m = max(64, int(round(L / ds_m)))
    ds = L / m
    s = np.arange(m) * ds
    xy = spline.point_at(s)
    heading = spline.heading_at(s)
    kappa = spline.curvature_at(s)
    v_ref = velocity_profile(kappa, v_min, v_max, ds, a_long_max=a_long_max)
    return Raceline(
        x_m=xy[:, 0],
        y_m=xy[:, 1],
        s_m=s,
        heading_rad=heading,
        kappa_per_m=kappa,
        v_ref_mps=v_ref,
        ds_m=ds,
        length_m=L,
    )
