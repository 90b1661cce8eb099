"""Fixed-step RK4 integration kernels.

All kernels are plain numpy functions, JIT-compiled with numba when it is
available (disk-cached), and otherwise run as-is.  Backward final-value
problems are integrated in time-to-go, so every kernel here marches forward;
callers reverse arrays for storage.  Schedules (controls, Riccati forcing)
are sampled at step nodes and midpoints, which is where the RK4 stages fall.

The barrier feedback inside the coupled sweep is parameterized by
``kind``: 0 selects the log-barrier closed form ``1/(b2 - rho)``; 1 selects
linear interpolation in precomputed tables over an equispaced rho grid.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    def _jit(fn):
        return njit(cache=True)(fn)

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    def _jit(fn):
        return fn

    HAVE_NUMBA = False

KIND_LOG = 0
KIND_TABLE = 1


@_jit
def simulate_rk4(A, B, x0, u_nodes, u_mids, h):
    """Integrate dx/ds = A x + B u with piecewise-linear u; returns (N+1, n)."""
    N = u_mids.shape[0]
    n = A.shape[0]
    out = np.empty((N + 1, n))
    x = x0.copy()
    out[0] = x
    for k in range(N):
        u0 = u_nodes[k]
        um = u_mids[k]
        u1 = u_nodes[k + 1]
        k1 = A @ x + B @ u0
        k2 = A @ (x + 0.5 * h * k1) + B @ um
        k3 = A @ (x + 0.5 * h * k2) + B @ um
        k4 = A @ (x + h * k3) + B @ u1
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = x
    return out


@_jit
def riccati_components_rk4(A, At, BBk, P_T, Q_T, R_T, c_nodes, c_mids, a_nodes, a_mids, h):
    """March the component FVPs in time-to-go.

    dP = At P + P A - P BBk P + c I,  dQ = (A - BBk P)' Q,
    dR = -alpha - Q' BBk Q, with c and alpha sampled at nodes/midpoints of the
    time-to-go axis.  Returns (P, Q, R) arrays indexed by time-to-go.
    """
    N = c_mids.shape[0]
    n = A.shape[0]
    I = np.eye(n)
    P_out = np.empty((N + 1, n, n))
    Q_out = np.empty((N + 1, n))
    R_out = np.empty(N + 1)
    P = P_T.copy()
    Q = Q_T.copy()
    R = R_T
    P_out[0] = P
    Q_out[0] = Q
    R_out[0] = R
    for k in range(N):
        c0 = c_nodes[k]
        cm = c_mids[k]
        c1 = c_nodes[k + 1]
        a0 = a_nodes[k]
        am = a_mids[k]
        a1 = a_nodes[k + 1]

        dP1 = At @ P + P @ A - P @ BBk @ P + c0 * I
        Acl = A - BBk @ P
        dQ1 = Acl.T @ Q
        dR1 = -a0 - Q @ (BBk @ Q)

        P2 = P + 0.5 * h * dP1
        Q2 = Q + 0.5 * h * dQ1
        dP2 = At @ P2 + P2 @ A - P2 @ BBk @ P2 + cm * I
        Acl = A - BBk @ P2
        dQ2 = Acl.T @ Q2
        dR2 = -am - Q2 @ (BBk @ Q2)

        P3 = P + 0.5 * h * dP2
        Q3 = Q + 0.5 * h * dQ2
        dP3 = At @ P3 + P3 @ A - P3 @ BBk @ P3 + cm * I
        Acl = A - BBk @ P3
        dQ3 = Acl.T @ Q3
        dR3 = -am - Q3 @ (BBk @ Q3)

        P4 = P + h * dP3
        Q4 = Q + h * dQ3
        dP4 = At @ P4 + P4 @ A - P4 @ BBk @ P4 + c1 * I
        Acl = A - BBk @ P4
        dQ4 = Acl.T @ Q4
        dR4 = -a1 - Q4 @ (BBk @ Q4)

        P = P + (h / 6.0) * (dP1 + 2.0 * dP2 + 2.0 * dP3 + dP4)
        P = 0.5 * (P + P.T)
        Q = Q + (h / 6.0) * (dQ1 + 2.0 * dQ2 + 2.0 * dQ3 + dQ4)
        R = R + (h / 6.0) * (dR1 + 2.0 * dR2 + 2.0 * dR3 + dR4)
        P_out[k + 1] = P
        Q_out[k + 1] = Q
        R_out[k + 1] = R
    return P_out, Q_out, R_out


@_jit
def riccati_matrix_rk4(A, At, BBk, P_T, V_nodes, V_mids, h):
    """March dP = At P + P A - P BBk P + V(tau) in time-to-go; V precomputed."""
    N = V_mids.shape[0]
    n = A.shape[0]
    P_out = np.empty((N + 1, n, n))
    P = P_T.copy()
    P_out[0] = P
    for k in range(N):
        dP1 = At @ P + P @ A - P @ BBk @ P + V_nodes[k]
        P2 = P + 0.5 * h * dP1
        dP2 = At @ P2 + P2 @ A - P2 @ BBk @ P2 + V_mids[k]
        P3 = P + 0.5 * h * dP2
        dP3 = At @ P3 + P3 @ A - P3 @ BBk @ P3 + V_mids[k]
        P4 = P + h * dP3
        dP4 = At @ P4 + P4 @ A - P4 @ BBk @ P4 + V_nodes[k + 1]
        P = P + (h / 6.0) * (dP1 + 2.0 * dP2 + 2.0 * dP3 + dP4)
        P = 0.5 * (P + P.T)
        P_out[k + 1] = P
    return P_out


@_jit
def _active_quadratic(rho, kind, b2, beta_M, rhohat_M, M, tbl_step, tbl_beta, tbl_alpha):
    """Slope and intercept level (beta*, alpha*) of the active quadratic at rho."""
    if rho >= rhohat_M:
        return beta_M, M
    if kind == KIND_LOG:
        beta = 1.0 / (b2 - rho)
        w = b2 * beta
        return beta, w - np.log(w) - 1.0
    pos = rho / tbl_step
    i = int(pos)
    if i >= tbl_beta.shape[0] - 1:
        i = tbl_beta.shape[0] - 2
    frac = pos - i
    beta = tbl_beta[i] + frac * (tbl_beta[i + 1] - tbl_beta[i])
    alpha = tbl_alpha[i] + frac * (tbl_alpha[i + 1] - tbl_alpha[i])
    return beta, alpha


@_jit
def tpbvp_sweep_rk4(A, At, BBk, P_T, Q_T, R_T, xi_T, h, N, K,
                    kind, b2, beta_M, rhohat_M, M, tbl_step, tbl_beta, tbl_alpha):
    """Coupled backward sweep of (P, Q, R, xi) in time-to-go.

    The Riccati forcing is K + beta*(|xi|^2) with beta* the active quadratic
    slope at the current swept state, so all components share stage times.
    Returns (P, Q, R, xi) arrays indexed by time-to-go.
    """
    n = A.shape[0]
    I = np.eye(n)
    P_out = np.empty((N + 1, n, n))
    Q_out = np.empty((N + 1, n))
    R_out = np.empty(N + 1)
    X_out = np.empty((N + 1, n))
    P = P_T.copy()
    Q = Q_T.copy()
    R = R_T
    xi = xi_T.copy()
    P_out[0] = P
    Q_out[0] = Q
    R_out[0] = R
    X_out[0] = xi
    for k in range(N):
        beta, alpha = _active_quadratic(xi @ xi, kind, b2, beta_M, rhohat_M, M,
                                        tbl_step, tbl_beta, tbl_alpha)
        dP1 = At @ P + P @ A - P @ BBk @ P + (K + beta) * I
        Acl = A - BBk @ P
        dQ1 = Acl.T @ Q
        dR1 = -alpha - Q @ (BBk @ Q)
        dx1 = -(Acl @ xi) + BBk @ Q

        P2 = P + 0.5 * h * dP1
        Q2 = Q + 0.5 * h * dQ1
        x2 = xi + 0.5 * h * dx1
        beta, alpha = _active_quadratic(x2 @ x2, kind, b2, beta_M, rhohat_M, M,
                                        tbl_step, tbl_beta, tbl_alpha)
        dP2 = At @ P2 + P2 @ A - P2 @ BBk @ P2 + (K + beta) * I
        Acl = A - BBk @ P2
        dQ2 = Acl.T @ Q2
        dR2 = -alpha - Q2 @ (BBk @ Q2)
        dx2 = -(Acl @ x2) + BBk @ Q2

        P3 = P + 0.5 * h * dP2
        Q3 = Q + 0.5 * h * dQ2
        x3 = xi + 0.5 * h * dx2
        beta, alpha = _active_quadratic(x3 @ x3, kind, b2, beta_M, rhohat_M, M,
                                        tbl_step, tbl_beta, tbl_alpha)
        dP3 = At @ P3 + P3 @ A - P3 @ BBk @ P3 + (K + beta) * I
        Acl = A - BBk @ P3
        dQ3 = Acl.T @ Q3
        dR3 = -alpha - Q3 @ (BBk @ Q3)
        dx3 = -(Acl @ x3) + BBk @ Q3

        P4 = P + h * dP3
        Q4 = Q + h * dQ3
        x4 = xi + h * dx3
        beta, alpha = _active_quadratic(x4 @ x4, kind, b2, beta_M, rhohat_M, M,
                                        tbl_step, tbl_beta, tbl_alpha)
        dP4 = At @ P4 + P4 @ A - P4 @ BBk @ P4 + (K + beta) * I
        Acl = A - BBk @ P4
        dQ4 = Acl.T @ Q4
        dR4 = -alpha - Q4 @ (BBk @ Q4)
        dx4 = -(Acl @ x4) + BBk @ Q4

        P = P + (h / 6.0) * (dP1 + 2.0 * dP2 + 2.0 * dP3 + dP4)
        P = 0.5 * (P + P.T)
        Q = Q + (h / 6.0) * (dQ1 + 2.0 * dQ2 + 2.0 * dQ3 + dQ4)
        R = R + (h / 6.0) * (dR1 + 2.0 * dR2 + 2.0 * dR3 + dR4)
        xi = xi + (h / 6.0) * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        P_out[k + 1] = P
        Q_out[k + 1] = Q
        R_out[k + 1] = R
        X_out[k + 1] = xi
    return P_out, Q_out, R_out, X_out


@_jit
def closed_loop_rk4(A, BBk, P_nodes, P_mids, Q_nodes, Q_mids, x0, h):
    """Integrate dx/ds = (A - BBk P(s)) x - BBk Q(s) forward; returns (N+1, n)."""
    N = P_mids.shape[0]
    n = A.shape[0]
    out = np.empty((N + 1, n))
    x = x0.copy()
    out[0] = x
    for k in range(N):
        k1 = (A - BBk @ P_nodes[k]) @ x - BBk @ Q_nodes[k]
        x2 = x + 0.5 * h * k1
        k2 = (A - BBk @ P_mids[k]) @ x2 - BBk @ Q_mids[k]
        x3 = x + 0.5 * h * k2
        k3 = (A - BBk @ P_mids[k]) @ x3 - BBk @ Q_mids[k]
        x4 = x + h * k3
        k4 = (A - BBk @ P_nodes[k + 1]) @ x4 - BBk @ Q_nodes[k + 1]
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = x
    return out
