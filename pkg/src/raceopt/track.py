"""Closed race-track geometry.

A track is a closed centerline polyline with per-point track widths.
Periodic cubic splines provide arc-length parameterization, curvature,
normal offsets, and point-to-centerline projection.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

TRACK_COLUMNS = ("x_m", "y_m", "w_tr_left_m", "w_tr_right_m")

#: env var overriding the directory searched for track CSV fixtures
TRACK_DIR_ENV = "RACEOPT_TRACK_DIR"

BUILTIN_TRACK_NAMES = ("circle", "oval", "spielberg", "silverstone", "monza")


class TrackError(ValueError):
    """Track file or geometry violates its invariants."""


class ClosedSpline:
    """Periodic cubic spline through a closed sequence of points.

    Parameterized by chord length internally; queries take the arc length
    ``s`` (in meters, taken modulo the total length).
    """

    #: lookup oversampling relative to the number of input points
    OVERSAMPLE = 10

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or len(points) < 4:
            raise TrackError("need >= 4 distinct (x, y) points")
        closed = np.vstack([points, points[:1]])
        chords = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        if np.any(chords <= 1e-9):
            raise TrackError("consecutive points coincide")
        t = np.concatenate([[0.0], np.cumsum(chords)])
        try:
            self._spline = CubicSpline(
                t, closed, bc_type="periodic", extrapolate="periodic"
            )
        except ValueError as exc:  # degenerate input
            raise TrackError(f"spline fit failed: {exc}") from None
        self._t_total = t[-1]
        self._knots_t = t[:-1]
        self._deriv = self._spline.derivative()
        self._deriv2 = self._deriv.derivative()

        # arc-length lookup table, oversampled relative to the knots
        n_fine = max(1000, self.OVERSAMPLE * len(points))
        t_fine = np.linspace(0.0, self._t_total, n_fine + 1)
        speed = np.linalg.norm(self._deriv(t_fine), axis=1)
        # cumulative trapezoid of |dP/dt|
        s_fine = np.concatenate(
            [[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(t_fine))]
        )
        self._t_fine = t_fine
        self._s_fine = s_fine
        self.length_m = float(s_fine[-1])
        self._lookup_points = self._spline(t_fine[:-1])

    # -- parameter conversion -------------------------------------------------

    def _s_to_t(self, s_m):
        s = np.mod(s_m, self.length_m)
        return np.interp(s, self._s_fine, self._t_fine)

    def _t_to_s(self, t):
        t = np.mod(t, self._t_total)
        return np.interp(t, self._t_fine, self._s_fine)

    @property
    def knot_s(self) -> np.ndarray:
        """Arc positions of the input points."""
        return self._t_to_s(self._knots_t)

    # -- queries --------------------------------------------------------------

    def point_at(self, s_m):
        """Position on the curve at arc length s (modulo the total length)."""
        return self._spline(self._s_to_t(s_m))

    def heading_at(self, s_m):
        d = self._deriv(self._s_to_t(s_m))
        return np.arctan2(d[..., 1], d[..., 0])

    def curvature_at(self, s_m):
        """Signed curvature; positive for left (counter-clockwise) turns."""
        t = self._s_to_t(s_m)
        d1 = self._deriv(t)
        d2 = self._deriv2(t)
        speed_sq = d1[..., 0] ** 2 + d1[..., 1] ** 2
        return (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / speed_sq**1.5

    def normal_at(self, s_m):
        """Unit normal pointing left of the travel direction."""
        t = self._s_to_t(s_m)
        d = self._deriv(t)
        norm = np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)
        return np.stack([-d[..., 1] / norm, d[..., 0] / norm], axis=-1)

    def offset_point(self, s_m, d_m):
        """Point at lateral distance d along the left normal at arc position s."""
        return self.point_at(s_m) + d_m * self.normal_at(s_m)

    def project(self, point) -> tuple[float, float]:
        """Globally nearest (s, signed lateral distance) for a point.

        Coarse search over the oversampled lookup table, then local
        refinement; the coarse pass makes the minimum global even on
        closed curves with hairpins.
        """
        point = np.asarray(point, dtype=float)
        d2 = np.sum((self._lookup_points - point) ** 2, axis=1)
        i = int(np.argmin(d2))
        t_lo = self._t_fine[i] - (self._t_fine[1] - self._t_fine[0])
        t_hi = self._t_fine[i] + (self._t_fine[1] - self._t_fine[0])

        def dist2(t):
            p = self._spline(t)
            return (p[0] - point[0]) ** 2 + (p[1] - point[1]) ** 2

        res = minimize_scalar(dist2, bounds=(t_lo, t_hi), method="bounded")
        s = float(self._t_to_s(res.x))
        n = self.normal_at(s)
        d = float(np.dot(point - self.point_at(s), n))
        return s, d


def fit_closed_spline(points: np.ndarray) -> ClosedSpline:
    """Periodic cubic spline through >= 4 distinct points of a closed loop."""
    return ClosedSpline(points)


@dataclass(frozen=True)
class Track:
    """Closed centerline with per-point track widths."""

    centerline: np.ndarray
    width_left_m: np.ndarray
    width_right_m: np.ndarray
    name: str = "unnamed"

    def __post_init__(self) -> None:
        pts = np.asarray(self.centerline, dtype=float)
        wl = np.asarray(self.width_left_m, dtype=float)
        wr = np.asarray(self.width_right_m, dtype=float)
        if len(pts) < 4:
            raise TrackError("too few points: a track needs >= 4")
        if wl.shape != (len(pts),) or wr.shape != (len(pts),):
            raise TrackError("widths must match the number of centerline points")
        if np.any(wl <= 0) or np.any(wr <= 0):
            raise TrackError("track widths must all be > 0")
        closed = np.vstack([pts, pts[:1]])
        if np.any(np.linalg.norm(np.diff(closed, axis=0), axis=1) <= 1e-9):
            raise TrackError("duplicate consecutive centerline points")
        object.__setattr__(self, "centerline", pts)
        object.__setattr__(self, "width_left_m", wl)
        object.__setattr__(self, "width_right_m", wr)

    @cached_property
    def spline(self) -> ClosedSpline:
        return fit_closed_spline(self.centerline)

    @property
    def length_m(self) -> float:
        return self.spline.length_m

    def widths_at(self, s_m: float) -> tuple[float, float]:
        """Track widths linearly interpolated at arc position s."""
        knot_s = self.spline.knot_s
        s = float(np.mod(s_m, self.length_m))
        xp = np.concatenate([knot_s, [self.length_m]])
        wl = np.concatenate([self.width_left_m, self.width_left_m[:1]])
        wr = np.concatenate([self.width_right_m, self.width_right_m[:1]])
        return float(np.interp(s, xp, wl)), float(np.interp(s, xp, wr))


def load_track(path: str) -> Track:
    """Load a track from a CSV with columns x_m, y_m, w_tr_left_m, w_tr_right_m."""
    if not os.path.exists(path):
        raise TrackError(f"track file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise TrackError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        missing = [c for c in TRACK_COLUMNS if c not in header]
        if missing:
            raise TrackError(f"{path}: missing columns {missing}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                values = [float(row[c]) for c in TRACK_COLUMNS]
            except (TypeError, ValueError, KeyError):
                raise TrackError(f"{path}: malformed row {lineno}") from None
            if values[2] <= 0 or values[3] <= 0:
                raise TrackError(f"{path}: non-positive width at row {lineno}")
            rows.append(values)
    if len(rows) < 4:
        raise TrackError(f"{path}: too few points ({len(rows)}), need >= 4")
    data = np.array(rows)
    pts = data[:, :2]
    # tolerate a duplicated closing point in the file
    if np.linalg.norm(pts[0] - pts[-1]) <= 1e-9:
        data = data[:-1]
        pts = pts[:-1]
    closed = np.vstack([pts, pts[:1]])
    gaps = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    bad = np.nonzero(gaps <= 1e-9)[0]
    if bad.size:
        raise TrackError(
            f"{path}: duplicate consecutive points at row {int(bad[0]) + 2}"
        )
    name = os.path.splitext(os.path.basename(path))[0]
    return Track(pts, data[:, 2], data[:, 3], name=name)


def project_to_centerline(track: Track, point) -> tuple[float, float]:
    """Arc position and signed lateral distance of the nearest centerline point."""
    return track.spline.project(point)


def curvature_at(spline: ClosedSpline, s_m):
    return spline.curvature_at(s_m)


def offset_point(spline: ClosedSpline, s_m, d_m):
    return spline.offset_point(s_m, d_m)


# -- synthetic fixtures -------------------------------------------------------


def _circle_track(radius: float = 10.0, n: int = 36, width: float = 1.2) -> Track:
    theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    pts = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    w = np.full(n, width)
    return Track(pts, w, w, name="circle")


def _oval_track(
    straight: float = 35.0, radius: float = 8.0, n: int = 72, width: float = 1.2
) -> Track:
    """Stadium oval: two straights joined by semicircular ends, length ~120 m."""
    perimeter = 2 * straight + 2 * np.pi * radius
    s_values = np.linspace(0.0, perimeter, n, endpoint=False)
    pts = np.empty((n, 2))
    for i, s in enumerate(s_values):
        if s < straight:  # bottom straight, heading +x
            pts[i] = (s - straight / 2, -radius)
        elif s < straight + np.pi * radius:  # right semicircle
            a = (s - straight) / radius
            pts[i] = (straight / 2 + radius * np.sin(a), -radius * np.cos(a))
        elif s < 2 * straight + np.pi * radius:  # top straight, heading -x
            d = s - straight - np.pi * radius
            pts[i] = (straight / 2 - d, radius)
        else:  # left semicircle
            a = (s - 2 * straight - np.pi * radius) / radius
            pts[i] = (-straight / 2 - radius * np.sin(a), radius * np.cos(a))
    w = np.full(n, width)
    return Track(pts, w, w, name="oval")


def _fourier_track(
    name: str, seed: int, base_radius: float, width: float, n: int = 160
) -> Track:
    """Smooth random closed circuit from a low-order radial Fourier series.

    Deterministic per (name, seed); stands in for real centerline data.
    """
    rng = np.random.default_rng(seed)
    n_modes = 6
    amps = rng.uniform(0.02, 0.10, size=n_modes) / np.arange(1, n_modes + 1)
    phases = rng.uniform(0.0, 2 * np.pi, size=n_modes)
    theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    r = np.full(n, 1.0)
    for k in range(n_modes):
        r += amps[k] * np.cos((k + 2) * theta + phases[k])
    r *= base_radius
    pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    w = np.full(n, width)
    return Track(pts, w, w, name=name)


def builtin_track(name: str) -> Track:
    """Deterministically generated synthetic fixture."""
    if name == "circle":
        return _circle_track()
    if name == "oval":
        return _oval_track()
    if name == "spielberg":
        return _fourier_track("spielberg", seed=11, base_radius=32.0, width=1.5)
    if name == "silverstone":
        return _fourier_track("silverstone", seed=23, base_radius=40.0, width=1.5)
    if name == "monza":
        return _fourier_track("monza", seed=37, base_radius=48.0, width=1.5)
    raise TrackError(
        f"unknown track '{name}'; available fixtures: "
        f"{', '.join(BUILTIN_TRACK_NAMES)}"
    )


def get_track(name_or_path: str) -> Track:
    """Resolve a track by file path, fixture-directory name, or builtin name."""
    if os.path.exists(name_or_path):
        return load_track(name_or_path)
    track_dir = os.environ.get(TRACK_DIR_ENV)
    if track_dir:
        candidate = os.path.join(track_dir, f"{name_or_path}.csv")
        if os.path.exists(candidate):
            return load_track(candidate)
    return builtin_track(name_or_path)


def write_track_csv(track: Track, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_COLUMNS)
        for (x, y), wl, wr in zip(
            track.centerline, track.width_left_m, track.width_right_m
        ):
            writer.writerow([repr(float(v)) for v in (x, y, wl, wr)])


def generate_fixtures(out_dir: str) -> list[str]:
    """Write all builtin synthetic fixtures as CSVs into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name in BUILTIN_TRACK_NAMES:
        path = os.path.join(out_dir, f"{name}.csv")
        write_track_csv(builtin_track(name), path)
        written.append(path)
    return written
