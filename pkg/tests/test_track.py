"""Closed-spline geometry against analytic circles and squares."""

import os

import numpy as np
import pytest

from raceopt.track import (
    BUILTIN_TRACK_NAMES,
    ClosedSpline,
    Track,
    TrackError,
    builtin_track,
    curvature_at,
    fit_closed_spline,
    generate_fixtures,
    get_track,
    load_track,
    offset_point,
    project_to_centerline,
    write_track_csv,
)


def circle_points(radius=10.0, n=16, clockwise=False):
    theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    if clockwise:
        theta = -theta
    return radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)


@pytest.fixture(scope="module")
def circle_spline():
    return fit_closed_spline(circle_points())


class TestFitClosedSpline:
    def test_circle_accuracy(self, circle_spline):
        s = np.linspace(0.0, circle_spline.length_m, 200)
        pts = circle_spline.point_at(s)
        radii = np.linalg.norm(pts, axis=1)
        assert np.max(np.abs(radii - 10.0)) < 5e-3

    def test_knots_reproduced(self, circle_spline):
        pts = circle_points()
        knot_pts = circle_spline.point_at(circle_spline.knot_s)
        assert np.max(np.linalg.norm(knot_pts - pts, axis=1)) < 1e-9

    def test_periodicity(self, circle_spline):
        L = circle_spline.length_m
        p0 = circle_spline.point_at(0.0)
        pL = circle_spline.point_at(L)
        assert np.linalg.norm(p0 - pL) < 1e-9

    def test_length_matches_integrated_arc(self, circle_spline):
        # fine midpoint quadrature of |dP/ds| as an independent length oracle
        L = circle_spline.length_m
        n = 20000
        s = (np.arange(n) + 0.5) * (L / n)
        pts = circle_spline.point_at(s)
        seg = np.linalg.norm(np.diff(pts, axis=0, append=pts[:1]), axis=1)
        assert abs(seg.sum() - L) / L < 1e-6

    def test_too_few_points(self):
        with pytest.raises(TrackError):
            fit_closed_spline(circle_points(n=3))

    def test_coincident_points(self):
        pts = circle_points()
        pts[5] = pts[4]
        with pytest.raises(TrackError):
            fit_closed_spline(pts)


class TestCurvature:
    def test_ccw_circle_positive(self, circle_track):
        spline = circle_track.spline
        s = np.linspace(0.0, spline.length_m, 100)
        kappa = curvature_at(spline, s)
        assert np.max(np.abs(kappa - 0.1)) < 1e-3

    def test_cw_circle_negative(self, circle_track):
        spline = fit_closed_spline(circle_track.centerline[::-1])
        kappa = curvature_at(spline, np.linspace(0.0, spline.length_m, 100))
        assert np.max(np.abs(kappa + 0.1)) < 1e-3

    def test_reversal_flips_sign(self, circle_spline):
        reverse = fit_closed_spline(circle_points()[::-1])
        k_fwd = float(curvature_at(circle_spline, 1.0))
        k_rev = float(curvature_at(reverse, 1.0))
        assert np.sign(k_fwd) == -np.sign(k_rev)

    def test_straight_segment_near_zero(self, oval_track):
        # the first centerline point opens the bottom straight, so its
        # midpoint sits at s = 17.5 on the 35 m straight
        kappa = float(curvature_at(oval_track.spline, 17.5))
        assert abs(kappa) < 1e-6


class TestOffsetAndProjection:
    def test_zero_offset_identity(self, circle_spline):
        s = 7.3
        p0 = circle_spline.point_at(s)
        p1 = offset_point(circle_spline, s, 0.0)
        assert np.linalg.norm(p1 - p0) < 1e-12

    def test_left_offset_shrinks_ccw_circle(self, circle_spline):
        s = np.linspace(0.0, circle_spline.length_m, 50)
        pts = np.array([offset_point(circle_spline, si, 1.0) for si in s])
        radii = np.linalg.norm(pts, axis=1)
        assert np.max(np.abs(radii - 9.0)) < 5e-3

    def test_project_centerline_point(self, circle_spline):
        p = circle_spline.point_at(4.2)
        s, d = circle_spline.project(p)
        assert abs(d) < 1e-6

    def test_offset_project_roundtrip(self, circle_spline):
        s_ref = 12.5
        p = offset_point(circle_spline, s_ref, 0.3)
        s, d = circle_spline.project(p)
        assert abs(d - 0.3) < 1e-3
        assert abs(s - s_ref) < 1e-3 or abs(abs(s - s_ref) - circle_spline.length_m) < 1e-3

    def test_straight_section_signed_distance(self, oval_track):
        spline = oval_track.spline
        # bottom straight heads +x, so +y is the left side
        p = spline.point_at(0.0) + np.array([0.0, 0.5])
        _, d = spline.project(p)
        assert d == pytest.approx(0.5, abs=1e-3)

    def test_projection_is_global(self, circle_spline):
        # a point near s=0 must not project to the far side of the circle
        p = circle_spline.point_at(0.5) * 1.02
        s, _ = circle_spline.project(p)
        assert min(s, circle_spline.length_m - s) < 1.0


class TestTrackType:
    def test_rejects_few_points(self):
        pts = circle_points(n=4)[:3]
        with pytest.raises(TrackError):
            Track(pts, np.ones(3), np.ones(3))

    def test_rejects_nonpositive_width(self):
        pts = circle_points(n=8)
        w = np.ones(8)
        w[3] = 0.0
        with pytest.raises(TrackError):
            Track(pts, w, np.ones(8))

    def test_widths_interpolation(self, oval_track):
        wl, wr = oval_track.widths_at(0.0)
        assert wl > 0 and wr > 0
        wl2, wr2 = oval_track.widths_at(oval_track.length_m)  # wraps to s=0
        assert wl2 == pytest.approx(wl)


class TestLoadTrack:
    def write_csv(self, path, rows, header="x_m,y_m,w_tr_left_m,w_tr_right_m"):
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(str(v) for v in row) + "\n")

    def test_unit_square(self, tmp_path):
        path = tmp_path / "square.csv"
        self.write_csv(path, [(0, 0, 1, 1), (1, 0, 1, 1), (1, 1, 1, 1), (0, 1, 1, 1)])
        track = load_track(str(path))
        assert len(track.centerline) == 4
        assert track.length_m == pytest.approx(4.0, rel=0.1)
        assert track.name == "square"

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        self.write_csv(path, [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
                       header="x_m,y_m,w_tr_left_m")
        with pytest.raises(TrackError, match="missing columns"):
            load_track(str(path))

    def test_nonpositive_width_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        self.write_csv(path, [(0, 0, 1, 1), (1, 0, 0, 1), (1, 1, 1, 1), (0, 1, 1, 1)])
        with pytest.raises(TrackError, match="row 3"):
            load_track(str(path))

    def test_too_few_points(self, tmp_path):
        path = tmp_path / "bad.csv"
        self.write_csv(path, [(0, 0, 1, 1), (1, 0, 1, 1), (1, 1, 1, 1)])
        with pytest.raises(TrackError, match="too few points"):
            load_track(str(path))

    def test_malformed_row_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        self.write_csv(path, [(0, 0, 1, 1), (1, "oops", 1, 1), (1, 1, 1, 1), (0, 1, 1, 1)])
        with pytest.raises(TrackError, match="row 3"):
            load_track(str(path))

    def test_missing_file(self):
        with pytest.raises(TrackError, match="not found"):
            load_track("/nonexistent/track.csv")

    def test_tolerates_duplicated_closing_point(self, tmp_path):
        path = tmp_path / "closed.csv"
        self.write_csv(path, [(0, 0, 1, 1), (1, 0, 1, 1), (1, 1, 1, 1),
                              (0, 1, 1, 1), (0, 0, 1, 1)])
        track = load_track(str(path))
        assert len(track.centerline) == 4


class TestFixtures:
    def test_builtin_names_resolve(self):
        for name in BUILTIN_TRACK_NAMES:
            track = builtin_track(name)
            assert track.name == name
            assert track.length_m > 0

    def test_unknown_name_lists_fixtures(self):
        with pytest.raises(TrackError, match="circle"):
            builtin_track("nurburgring")

    def test_builtins_deterministic(self):
        a = builtin_track("spielberg")
        b = builtin_track("spielberg")
        np.testing.assert_array_equal(a.centerline, b.centerline)

    def test_csv_roundtrip(self, tmp_path, oval_track):
        path = tmp_path / "oval.csv"
        write_track_csv(oval_track, str(path))
        loaded = load_track(str(path))
        np.testing.assert_allclose(loaded.centerline, oval_track.centerline)
        np.testing.assert_allclose(loaded.width_left_m, oval_track.width_left_m)

    def test_generate_fixtures(self, tmp_path):
        written = generate_fixtures(str(tmp_path))
        assert len(written) == len(BUILTIN_TRACK_NAMES)
        for path in written:
            assert os.path.exists(path)

    def test_get_track_env_dir(self, tmp_path, monkeypatch, circle_track):
        write_track_csv(circle_track, str(tmp_path / "mytrack.csv"))
        monkeypatch.setenv("RACEOPT_TRACK_DIR", str(tmp_path))
        track = get_track("mytrack")
        assert track.name == "mytrack"

    def test_get_track_path(self, tmp_path, circle_track):
        path = tmp_path / "direct.csv"
        write_track_csv(circle_track, str(path))
        assert get_track(str(path)).name == "direct"

    def test_oval_length(self, oval_track):
        expected = 2 * 35.0 + 2 * np.pi * 8.0
        assert oval_track.length_m == pytest.approx(expected, rel=1e-3)

    def test_circle_length(self, circle_track):
        assert circle_track.length_m == pytest.approx(2 * np.pi * 10.0, rel=1e-3)
