"""Path trackers against geometric and algebraic oracles."""

import math

import numpy as np
import pytest

from raceopt.controllers import (
    ControllerConfig,
    ControllerFault,
    compute_control,
    lqr,
    lqr_gain,
    pure_pursuit,
    solve_dare,
    stanley,
)
from raceopt.raceline import build_raceline
from raceopt.track import Track
from raceopt.vehicle import VehicleParams, VehicleState


def straight_heavy_oval():
    """Long thin stadium loop: the bottom straight is effectively a line."""
    n = 40
    pts = []
    for i in range(n):
        t = i / n * 2 * np.pi
        pts.append((60 * np.cos(t), 8 * np.sin(t)))
    return Track(np.array(pts), np.full(n, 2.0), np.full(n, 2.0), name="thin")


@pytest.fixture(scope="module")
def circle_raceline(circle_track):
    return build_raceline(circle_track, np.zeros(100), 2.0, 2.0)


@pytest.fixture(scope="module")
def oval_raceline(oval_track):
    return build_raceline(oval_track, np.zeros(100), 1.0, 5.0)


def state_on_oval_straight(oval_raceline, v=3.0, lateral=0.0, heading_offset=0.0):
    # index near mid bottom straight; the straight runs along +x at y = -8
    i = int(round(17.5 / oval_raceline.ds_m))
    return VehicleState(
        x_m=float(oval_raceline.x_m[i]),
        y_m=float(oval_raceline.y_m[i]) + lateral,
        yaw_rad=float(oval_raceline.heading_rad[i]) + heading_offset,
        v_mps=v,
    )


class TestPurePursuit:
    def test_aligned_on_straight_zero_steer(self, oval_raceline):
        state = state_on_oval_straight(oval_raceline)
        steer, speed = pure_pursuit(state, oval_raceline, 1.0)
        assert abs(steer) < 1e-6
        assert speed > 0

    def test_circle_chord_geometry(self, circle_raceline):
        # tangent pose on the circle: brute-force chord construction oracle
        params = VehicleParams()
        R = 10.0
        state = VehicleState(x_m=R, y_m=0.0, yaw_rad=math.pi / 2, v_mps=2.0)
        lookahead = 1.0
        steer, _ = pure_pursuit(state, circle_raceline, lookahead, params)

        rear = np.array([R - params.l_r_m * math.cos(state.yaw_rad),
                         -params.l_r_m * math.sin(state.yaw_rad)])
        _, i0 = circle_raceline_project(circle_raceline, rear)
        goal_idx = (i0 + int(round(lookahead / circle_raceline.ds_m))) % len(
            circle_raceline
        )
        goal = np.array([circle_raceline.x_m[goal_idx],
                         circle_raceline.y_m[goal_idx]])
        to_goal = goal - rear
        alpha = math.atan2(to_goal[1], to_goal[0]) - state.yaw_rad
        expected = math.atan(2.0 * params.wheelbase_m * math.sin(alpha) / lookahead)
        assert steer == pytest.approx(expected, abs=1e-6)

    def test_wraps_at_seam(self, circle_raceline):
        # pose just before s = L: the goal lies past the seam
        L = circle_raceline.length_m
        i = len(circle_raceline) - 2
        state = VehicleState(
            x_m=float(circle_raceline.x_m[i]),
            y_m=float(circle_raceline.y_m[i]),
            yaw_rad=float(circle_raceline.heading_rad[i]),
            v_mps=2.0,
        )
        steer, _ = pure_pursuit(state, circle_raceline, 1.0)
        j = 1
        state2 = VehicleState(
            x_m=float(circle_raceline.x_m[j]),
            y_m=float(circle_raceline.y_m[j]),
            yaw_rad=float(circle_raceline.heading_rad[j]),
            v_mps=2.0,
        )
        steer2, _ = pure_pursuit(state2, circle_raceline, 1.0)
        assert abs(steer - steer2) < 0.1

    def test_odd_in_lateral_error(self):
        # exactly straight reference so the mirror symmetry is not limited
        # by spline ripple
        from raceopt.raceline import Raceline

        n = 400
        ds = 0.1
        s = np.arange(n) * ds
        straight = Raceline(
            x_m=s.copy(), y_m=np.zeros(n), s_m=s,
            heading_rad=np.zeros(n), kappa_per_m=np.zeros(n),
            v_ref_mps=np.full(n, 3.0), ds_m=ds, length_m=n * ds,
        )
        left = VehicleState(x_m=20.0, y_m=+0.3, yaw_rad=0.0, v_mps=3.0)
        right = VehicleState(x_m=20.0, y_m=-0.3, yaw_rad=0.0, v_mps=3.0)
        s_left, _ = pure_pursuit(left, straight, 1.0)
        s_right, _ = pure_pursuit(right, straight, 1.0)
        assert s_left == pytest.approx(-s_right, abs=1e-9)

    def test_rejects_bad_lookahead(self, oval_raceline):
        with pytest.raises(ValueError):
            pure_pursuit(VehicleState(), oval_raceline, 0.0)

    def test_pure_function(self, oval_raceline):
        state = state_on_oval_straight(oval_raceline, lateral=0.2)
        a = pure_pursuit(state, oval_raceline, 1.0)
        b = pure_pursuit(state, oval_raceline, 1.0)
        assert a == b


def circle_raceline_project(raceline, point):
    d2 = (raceline.x_m - point[0]) ** 2 + (raceline.y_m - point[1]) ** 2
    i = int(np.argmin(d2))
    return raceline.s_m[i], i


class TestStanley:
    def test_zero_errors_zero_steer(self, oval_raceline):
        state = state_on_oval_straight(oval_raceline, v=3.0)
        # front axle sits ahead of the CoG; build the pose so the front
        # axle lands on the raceline exactly
        params = VehicleParams()
        state = VehicleState(
            x_m=state.x_m - params.l_f_m * math.cos(state.yaw_rad),
            y_m=state.y_m,
            yaw_rad=state.yaw_rad,
            v_mps=3.0,
        )
        steer, _ = stanley(state, oval_raceline, 1.0)
        assert abs(steer) < 1e-6

    def test_crosstrack_formula(self, oval_raceline):
        params = VehicleParams()
        base = state_on_oval_straight(oval_raceline, v=5.0)
        # path 0.5 m left of the front axle, no heading error
        state = VehicleState(
            x_m=base.x_m - params.l_f_m * math.cos(base.yaw_rad),
            y_m=base.y_m - 0.5,
            yaw_rad=base.yaw_rad,
            v_mps=5.0,
        )
        steer, _ = stanley(state, oval_raceline, 1.0)
        assert steer == pytest.approx(math.atan(0.5 / 5.01), abs=1e-6)

    def test_heading_term_decoupled(self, oval_raceline):
        params = VehicleParams()
        base = state_on_oval_straight(oval_raceline)
        state = VehicleState(
            x_m=base.x_m - params.l_f_m * math.cos(base.yaw_rad + 0.2),
            y_m=base.y_m - params.l_f_m * (
                math.sin(base.yaw_rad + 0.2) - math.sin(base.yaw_rad)
            ),
            yaw_rad=base.yaw_rad + 0.2,
            v_mps=3.0,
        )
        steer, _ = stanley(state, oval_raceline, 1.0)
        assert steer == pytest.approx(-0.2, abs=0.02)

    def test_high_speed_limit_is_heading_error(self, oval_raceline):
        base = state_on_oval_straight(oval_raceline, lateral=0.4,
                                      heading_offset=0.1)
        slow = VehicleState(base.x_m, base.y_m, base.yaw_rad, v_mps=1.0)
        fast = VehicleState(base.x_m, base.y_m, base.yaw_rad, v_mps=1000.0)
        steer_slow, _ = stanley(slow, oval_raceline, 1.0)
        steer_fast, _ = stanley(fast, oval_raceline, 1.0)
        assert abs(steer_fast - (-0.1)) < abs(steer_slow - (-0.1))
        assert steer_fast == pytest.approx(-0.1, abs=5e-3)

    def test_rejects_bad_gain(self, oval_raceline):
        with pytest.raises(ValueError):
            stanley(VehicleState(), oval_raceline, 0.0)


class TestSolveDare:
    def test_scalar_toy_golden_ratio(self):
        A = np.array([[1.0]])
        B = np.array([[1.0]])
        Q = np.array([[1.0]])
        R = np.array([[1.0]])
        P = solve_dare(A, B, Q, R)
        assert P[0, 0] == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-6)

    def test_non_convergence_raises(self):
        A = np.array([[1.0]])
        B = np.array([[1.0]])
        Q = np.array([[1.0]])
        R = np.array([[1.0]])
        with pytest.raises(ControllerFault):
            solve_dare(A, B, Q, R, tol=1e-16, max_iter=2)


class TestLqr:
    def test_gain_matches_reference_solver(self):
        # independent oracle: scipy's Riccati solver
        from scipy.linalg import solve_discrete_are

        dt, L = 0.01, 0.3302
        q = np.array([0.9, 0.8, 0.1, 0.05])
        r = 0.01
        for v in (0.5, 2.0, 6.0, 12.0):
            K = lqr_gain(v, q, r, L, dt)
            A = np.array([[1, dt, 0, 0], [0, 0, v, 0],
                          [0, 0, 1, dt], [0, 0, 0, 0.0]])
            B = np.array([[0.0], [0.0], [0.0], [v / L]])
            P = solve_discrete_are(A, B, np.diag(q), np.array([[r]]))
            K_ref = np.linalg.solve(r + B.T @ P @ B, B.T @ P @ A).ravel()
            np.testing.assert_allclose(K, K_ref, atol=1e-5)

    def test_closed_loop_stable(self):
        dt, L = 0.01, 0.3302
        K = lqr_gain(4.0, np.array([0.5, 0.5, 0.5, 0.5]), 0.5, L, dt)
        A = np.array([[1, dt, 0, 0], [0, 0, 4.0, 0],
                      [0, 0, 1, dt], [0, 0, 0, 0.0]])
        B = np.array([[0.0], [0.0], [0.0], [4.0 / L]])
        radius = np.max(np.abs(np.linalg.eigvals(A - B @ K[None, :])))
        assert radius < 1.0

    def test_zero_error_on_straight(self, oval_raceline):
        state = state_on_oval_straight(oval_raceline, v=3.0)
        steer, _ = lqr(state, oval_raceline,
                       np.array([0.5, 0.5, 0.5, 0.5]), 0.5)
        assert abs(steer) < 1e-6

    def test_feedforward_on_circle(self, circle_raceline):
        # zero-error pose: steer is the pure curvature feedforward
        R = 10.0
        params = VehicleParams()
        v = 2.0
        i = 40
        state = VehicleState(
            x_m=float(circle_raceline.x_m[i]),
            y_m=float(circle_raceline.y_m[i]),
            yaw_rad=float(circle_raceline.heading_rad[i]),
            v_mps=v,
            yaw_rate_radps=v / R,
        )
        steer, _ = lqr(state, circle_raceline,
                       np.array([0.5, 0.5, 0.5, 0.5]), 0.5, params=params)
        assert steer == pytest.approx(math.atan(params.wheelbase_m / R), abs=1e-3)

    def test_speed_floor_for_gain(self, oval_raceline):
        # gain computation at standstill uses v_eff = 0.5, does not fault
        state = state_on_oval_straight(oval_raceline, v=0.0)
        steer, speed = lqr(state, oval_raceline,
                           np.array([0.5, 0.5, 0.5, 0.5]), 0.5)
        assert math.isfinite(steer)
        assert speed > 0


class TestControllerConfig:
    def test_pure_pursuit_validation(self):
        ControllerConfig("purepursuit", np.array([1.0]))
        with pytest.raises(ValueError):
            ControllerConfig("purepursuit", np.array([-1.0]))
        with pytest.raises(ValueError):
            ControllerConfig("purepursuit", np.array([1.0, 2.0]))

    def test_stanley_validation(self):
        ControllerConfig("stanley", np.array([0.5]))
        with pytest.raises(ValueError):
            ControllerConfig("stanley", np.array([0.0]))

    def test_lqr_validation(self):
        ControllerConfig("lqr", np.array([1.0, 1.0, 1.0, 1.0, 0.1]))
        with pytest.raises(ValueError):
            ControllerConfig("lqr", np.array([0.0, 0.0, 0.0, 0.0, 0.1]))
        with pytest.raises(ValueError):
            ControllerConfig("lqr", np.array([1.0, 1.0, 1.0, 1.0, 0.0]))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ControllerConfig("mpc", np.array([1.0]))

    def test_dispatch(self, oval_raceline):
        state = state_on_oval_straight(oval_raceline)
        for kind, params in (
            ("purepursuit", np.array([1.0])),
            ("stanley", np.array([0.5])),
            ("lqr", np.array([0.5, 0.5, 0.5, 0.5, 0.5])),
        ):
            config = ControllerConfig(kind, params)
            steer, speed = compute_control(config, state, oval_raceline)
            assert math.isfinite(steer)
            assert speed > 0
