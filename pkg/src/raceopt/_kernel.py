"""Numba-compiled numeric core: vehicle stepping, trackers, lap rollout.

Everything in this module operates on plain float64 arrays so the full
2-lap rollout stays inside compiled code. The public modules
(:mod:`raceopt.vehicle`, :mod:`raceopt.controllers`,
:mod:`raceopt.evaluator`) wrap these functions with typed interfaces.

State vector layout: ``[x, y, yaw, v, steer, yaw_rate, slip_angle]``.
Parameter vector layout: ``[mass, l_f, l_r, I_z, C_sf, C_sr, h_cg, mu,
steer_max, steer_rate_max, a_long_max, v_max, v_switch, wheelbase]``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

G = 9.81

# state indices
SX, SY, SYAW, SV, SSTEER, SYAWRATE, SSLIP = 0, 1, 2, 3, 4, 5, 6

# parameter indices
PMASS, PLF, PLR, PIZ, PCSF, PCSR, PHCG, PMU = 0, 1, 2, 3, 4, 5, 6, 7
PSTEERMAX, PSVMAX, PAMAX, PVMAX, PVSWITCH, PWB = 8, 9, 10, 11, 12, 13

# rollout status codes
STATUS_SUCCESS = 0
STATUS_OFFTRACK = 1
STATUS_CONTROLLER_FAULT = 2
STATUS_TIMEOUT = 3
STATUS_NONFINITE = 4

# tracker kind codes
KIND_PURE_PURSUIT = 0
KIND_STANLEY = 1
KIND_LQR = 2


@njit(cache=True)
def wrap_angle(a):
    """Wrap an angle into (-pi, pi]."""
    out = (a + np.pi) % (2.0 * np.pi) - np.pi
    if out == -np.pi:
        out = np.pi
    return out


@njit(cache=True)
def clamp_input_kernel(sv, a, v, steer, p):
    """Saturate steer rate and acceleration against actuator limits."""
    sv_max = p[PSVMAX]
    if sv > sv_max:
        sv = sv_max
    elif sv < -sv_max:
        sv = -sv_max
    # hold the steering angle at its mechanical stop
    if steer >= p[PSTEERMAX] and sv > 0.0:
        sv = 0.0
    elif steer <= -p[PSTEERMAX] and sv < 0.0:
        sv = 0.0
    a_max = p[PAMAX]
    if a > a_max:
        a = a_max
    elif a < -a_max:
        a = -a_max
    if v >= p[PVMAX] and a > 0.0:
        a = 0.0
    elif v <= 0.0 and a < 0.0:
        a = 0.0
    return sv, a


@njit(cache=True)
def _deriv_dynamic(s, p, sv, a):
    """Single-track model with linear tires (valid above the switch speed)."""
    lf = p[PLF]
    lr = p[PLR]
    wb = lf + lr
    mu = p[PMU]
    csf = p[PCSF]
    csr = p[PCSR]
    h = p[PHCG]
    m = p[PMASS]
    iz = p[PIZ]

    v = s[SV]
    yaw = s[SYAW]
    steer = s[SSTEER]
    wz = s[SYAWRATE]
    beta = s[SSLIP]

    # axle load transfer with longitudinal acceleration
    f_front = csf * (G * lr - a * h)
    f_rear = csr * (G * lf + a * h)

    d = np.empty(7)
    d[SX] = v * np.cos(yaw + beta)
    d[SY] = v * np.sin(yaw + beta)
    d[SYAW] = wz
    d[SV] = a
    d[SSTEER] = sv
    d[SYAWRATE] = (mu * m / (iz * wb)) * (
        lf * f_front * steer
        + (lr * f_rear - lf * f_front) * beta
        - (lf * lf * f_front + lr * lr * f_rear) * wz / v
    )
    d[SSLIP] = (mu / (v * wb)) * (
        f_front * steer
        - (f_rear + f_front) * beta
        + (f_rear * lr - f_front * lf) * wz / v
    ) - wz
    return d


@njit(cache=True)
def _deriv_kinematic(s, p, sv, a):
    """Rear-axle-referenced kinematic bicycle (low-speed fallback)."""
    wb = p[PWB]
    v = s[SV]
    yaw = s[SYAW]
    d = np.zeros(7)
    d[SX] = v * np.cos(yaw)
    d[SY] = v * np.sin(yaw)
    d[SYAW] = v * np.tan(s[SSTEER]) / wb
    d[SV] = a
    d[SSTEER] = sv
    return d


@njit(cache=True)
def step_kernel(state, p, sv, a, dt):
    """One RK4 step with pre-clamped inputs and post-clamped state."""
    sv, a = clamp_input_kernel(sv, a, state[SV], state[SSTEER], p)
    kinematic = state[SV] < p[PVSWITCH]
    if kinematic:
        k1 = _deriv_kinematic(state, p, sv, a)
        k2 = _deriv_kinematic(state + 0.5 * dt * k1, p, sv, a)
        k3 = _deriv_kinematic(state + 0.5 * dt * k2, p, sv, a)
        k4 = _deriv_kinematic(state + dt * k3, p, sv, a)
    else:
        k1 = _deriv_dynamic(state, p, sv, a)
        k2 = _deriv_dynamic(state + 0.5 * dt * k1, p, sv, a)
        k3 = _deriv_dynamic(state + 0.5 * dt * k2, p, sv, a)
        k4 = _deriv_dynamic(state + dt * k3, p, sv, a)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if out[SSTEER] > p[PSTEERMAX]:
        out[SSTEER] = p[PSTEERMAX]
    elif out[SSTEER] < -p[PSTEERMAX]:
        out[SSTEER] = -p[PSTEERMAX]
    if out[SV] > p[PVMAX]:
        out[SV] = p[PVMAX]
    elif out[SV] < 0.0:
        out[SV] = 0.0
    if kinematic:
        # yaw rate and slip are algebraic functions of (v, steer) here
        out[SYAWRATE] = out[SV] * np.tan(out[SSTEER]) / p[PWB]
        out[SSLIP] = np.arctan(p[PLR] * np.tan(out[SSTEER]) / p[PWB])
    return out


@njit(cache=True)
def nearest_index_global(px, py, xs, ys):
    best = 0
    best_d = 1e30
    for i in range(xs.shape[0]):
        dx = xs[i] - px
        dy = ys[i] - py
        d = dx * dx + dy * dy
        if d < best_d:
            best_d = d
            best = i
    return best


@njit(cache=True)
def nearest_index_local(px, py, xs, ys, start, window):
    """Nearest sample index searched within +-window of a previous index."""
    n = xs.shape[0]
    best = start
    best_d = 1e30
    for k in range(-window, window + 1):
        i = (start + k) % n
        dx = xs[i] - px
        dy = ys[i] - py
        d = dx * dx + dy * dy
        if d < best_d:
            best_d = d
            best = i
    return best


@njit(cache=True)
def pure_pursuit_kernel(state, xs, ys, vs, ds, lookahead, wheelbase, lr, idx_hint, window):
    """Pure Pursuit: chase the raceline point one lookahead ahead of the rear axle."""
    yaw = state[SYAW]
    rx = state[SX] - lr * np.cos(yaw)
    ry = state[SY] - lr * np.sin(yaw)
    idx = nearest_index_local(rx, ry, xs, ys, idx_hint, window)
    n = xs.shape[0]
    goal = (idx + int(round(lookahead / ds))) % n
    alpha = wrap_angle(np.arctan2(ys[goal] - ry, xs[goal] - rx) - yaw)
    steer = np.arctan(2.0 * wheelbase * np.sin(alpha) / lookahead)
    return steer, vs[goal], idx


@njit(cache=True)
def stanley_kernel(state, xs, ys, hs, vs, gain_kp, lf, idx_hint, window):
    """Stanley: heading error plus crosstrack correction at the front axle."""
    yaw = state[SYAW]
    fx = state[SX] + lf * np.cos(yaw)
    fy = state[SY] + lf * np.sin(yaw)
    idx = nearest_index_local(fx, fy, xs, ys, idx_hint, window)
    h_ref = hs[idx]
    # signed offset of the axle, positive when left of the path
    nx = -np.sin(h_ref)
    ny = np.cos(h_ref)
    d_axle = (fx - xs[idx]) * nx + (fy - ys[idx]) * ny
    e = -d_axle  # positive when the path lies left of the axle
    heading_error = wrap_angle(h_ref - yaw)
    steer = heading_error + np.arctan(gain_kp * e / (state[SV] + 1e-2))
    return steer, vs[idx], idx


@njit(cache=True)
def solve_dare_kernel(A, B, Q, R, tol, max_iter):
    """Discrete algebraic Riccati equation by fixed-point iteration.

    Returns (P, converged).
    """
    P = Q.copy()
    At = A.T
    Bt = B.T
    for _ in range(max_iter):
        BtP = Bt @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = At @ P @ A - At @ P @ B @ K + Q
        delta = np.abs(P_next - P).max()
        P = P_next
        if delta < tol:
            return P, True
    return P, False


@njit(cache=True)
def lqr_gain_kernel(v, q, r, wheelbase, dt, P, max_iter):
    """Gain for the 4-state lateral-error dynamics at speed v.

    Error state: [e, e_dot, theta_e, theta_e_dot]. ``P`` is the Riccati
    warm start (pass Q for a cold start); convergence takes a handful of
    iterations when warm-started from a nearby speed. Returns
    (K, P, converged).
    """
    v_eff = v if v > 0.5 else 0.5
    b3 = v_eff / wheelbase

    # A has six nonzeros (A00=A22=1, A01=A23=dt, A12=v) and B = [0,0,0,b3],
    # so P A, A'PA, and the rank-one correction reduce to scalar arithmetic.
    converged = False
    K = np.zeros(4)
    P = P.copy()
    PA = np.empty((4, 4))
    M = np.empty((4, 4))
    w = np.empty(4)
    for _ in range(max_iter):
        for i in range(4):
            PA[i, 0] = P[i, 0]
            PA[i, 1] = dt * P[i, 0]
            PA[i, 2] = v_eff * P[i, 1] + P[i, 2]
            PA[i, 3] = dt * P[i, 2]
        for j in range(4):
            M[0, j] = PA[0, j]
            M[1, j] = dt * PA[0, j]
            M[2, j] = v_eff * PA[1, j] + PA[2, j]
            M[3, j] = dt * PA[2, j]
        denom = r + b3 * b3 * P[3, 3]
        for j in range(4):
            w[j] = b3 * PA[3, j]
            K[j] = w[j] / denom
        delta = 0.0
        for i in range(4):
            for j in range(4):
                pij = M[i, j] - w[i] * K[j]
                if i == j:
                    pij += q[i]
                d = pij - P[i, j]
                if d < 0.0:
                    d = -d
                if d > delta:
                    delta = d
                P[i, j] = pij
        if delta < 1e-6:
            converged = True
            break
    return K, P, converged


@njit(cache=True)
def lqr_kernel(state, xs, ys, hs, ks, vs, q, r, wheelbase, dt, idx_hint, window,
               P, max_iter):
    """LQR lateral-error tracker with curvature feedforward.

    Returns (steer, speed, idx, P, ok); steer is NaN when the Riccati
    iteration fails to converge.
    """
    idx = nearest_index_local(state[SX], state[SY], xs, ys, idx_hint, window)
    h_ref = hs[idx]
    kappa = ks[idx]
    nx = -np.sin(h_ref)
    ny = np.cos(h_ref)
    e = (state[SX] - xs[idx]) * nx + (state[SY] - ys[idx]) * ny
    theta_e = wrap_angle(state[SYAW] - h_ref)
    v = state[SV]
    z = np.empty(4)
    z[0] = e
    z[1] = v * np.sin(theta_e)
    z[2] = theta_e
    z[3] = state[SYAWRATE] - v * kappa
    K, P, converged = lqr_gain_kernel(v, q, r, wheelbase, dt, P, max_iter)
    if not converged:
        return np.nan, vs[idx], idx, P, False
    steer_fb = 0.0
    for j in range(4):
        steer_fb -= K[j] * z[j]
    steer = steer_fb + np.arctan(wheelbase * kappa)
    return steer, vs[idx], idx, P, True


@njit(cache=True)
def rollout_kernel(
    rl_x,
    rl_y,
    rl_h,
    rl_k,
    rl_v,
    rl_ds,
    rl_len,
    cl_x,
    cl_y,
    cl_h,
    cl_wl,
    cl_wr,
    p,
    ctrl_kind,
    ctrl_params,
    dt,
    t_max,
    k_steer,
    k_speed,
    vehicle_half_width,
    n_laps,
    record,
):
    """Roll out one candidate until n_laps, crash, or timeout.

    Returns (status, elapsed_s, laps_completed, n_steps, trajectory) where
    trajectory rows are (t, x, y, yaw, v, steer, slip) when ``record``.
    """
    n_rl = rl_x.shape[0]
    window = 40
    wheelbase = p[PWB]
    lf = p[PLF]
    lr = p[PLR]

    state = np.zeros(7)
    state[SX] = rl_x[0]
    state[SY] = rl_y[0]
    state[SYAW] = rl_h[0]

    n_max = int(round(t_max / dt))
    if record:
        traj = np.empty((n_max, 7))
    else:
        traj = np.empty((0, 7))

    idx_rl = 0
    idx_cl = nearest_index_global(state[SX], state[SY], cl_x, cl_y)
    # Riccati warm start carried across steps; seeded with Q (cold start)
    P_ric = np.zeros((4, 4))
    if ctrl_kind == KIND_LQR:
        for j in range(4):
            P_ric[j, j] = ctrl_params[j]
    prev_s = 0.0
    unwrapped = 0.0
    target = n_laps * rl_len
    laps = 0

    for i in range(n_max):
        # tracker
        if ctrl_kind == KIND_PURE_PURSUIT:
            steer_des, speed_des, idx_rl = pure_pursuit_kernel(
                state, rl_x, rl_y, rl_v, rl_ds, ctrl_params[0], wheelbase, lr,
                idx_rl, window,
            )
        elif ctrl_kind == KIND_STANLEY:
            steer_des, speed_des, idx_rl = stanley_kernel(
                state, rl_x, rl_y, rl_h, rl_v, ctrl_params[0], lf, idx_rl, window
            )
        else:
            steer_des, speed_des, idx_rl, P_ric, ok = lqr_kernel(
                state, rl_x, rl_y, rl_h, rl_k, rl_v, ctrl_params[:4],
                ctrl_params[4], wheelbase, dt, idx_rl, window, P_ric, 5000,
            )
            if not ok:
                return STATUS_CONTROLLER_FAULT, (i + 1) * dt, laps, i, traj

        sv = k_steer * (steer_des - state[SSTEER])
        a = k_speed * (speed_des - state[SV])
        state = step_kernel(state, p, sv, a, dt)
        t = (i + 1) * dt

        if record:
            traj[i, 0] = t
            traj[i, 1] = state[SX]
            traj[i, 2] = state[SY]
            traj[i, 3] = state[SYAW]
            traj[i, 4] = state[SV]
            traj[i, 5] = state[SSTEER]
            traj[i, 6] = state[SSLIP]

        finite = True
        for j in range(7):
            if not np.isfinite(state[j]):
                finite = False
        if not finite:
            return STATUS_NONFINITE, t, laps, i + 1, traj

        # lap accounting against the raceline arc position
        idx_rl = nearest_index_local(
            state[SX], state[SY], rl_x, rl_y, idx_rl, window
        )
        s_now = idx_rl * rl_ds
        delta = s_now - prev_s
        if delta > 0.5 * rl_len:
            delta -= rl_len
        elif delta <= -0.5 * rl_len:
            delta += rl_len
        unwrapped += delta
        prev_s = s_now
        if unwrapped > 0.0:
            laps = int(unwrapped / rl_len)

        # corridor check against the centerline
        idx_cl = nearest_index_local(
            state[SX], state[SY], cl_x, cl_y, idx_cl, window
        )
        h_ref = cl_h[idx_cl]
        d = (state[SX] - cl_x[idx_cl]) * (-np.sin(h_ref)) + (
            state[SY] - cl_y[idx_cl]
        ) * np.cos(h_ref)
        if d > cl_wl[idx_cl] - vehicle_half_width or d < -(
            cl_wr[idx_cl] - vehicle_half_width
        ):
            return STATUS_OFFTRACK, t, laps, i + 1, traj

        if unwrapped >= target:
            return STATUS_SUCCESS, t, n_laps, i + 1, traj

    return STATUS_TIMEOUT, n_max * dt, laps, n_max, traj
