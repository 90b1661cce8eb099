"""Convex barrier functions, their conjugates, and truncated representations.

A barrier is a scalar convex function ``phi`` on ``[0, b^2)`` that blows up at
the boundary; composed with the squared state norm it penalizes states outside
the open ball of radius ``b``.  The central objects here are:

* ``BarrierSpec``: the barrier ``phi`` with its first two derivatives.
* ``DualBarrier``: the convex conjugate ``a`` of ``phi`` restricted to slopes
  ``beta >= dphi(0)``, its derivatives, and the numeric inverse ``a_inv``.
* The full penalty ``barrier_value`` (extended-real valued) and its truncation
  ``barrier_value_M``, which agrees with the barrier up to the switch point
  ``rho_hat(M)`` and continues linearly with slope ``a_inv(M)`` beyond it.

The truncation admits a supremum-of-quadratics form: for every ``rho >= 0``,
``barrier_value_M(rho) = max over alpha in [-phi(0), M] of a_inv(alpha) rho -
alpha``, with the maximizer given by ``maximizer_alpha_M``.  Infinity is
represented by IEEE ``inf`` (checked via ``math.isinf``, never compared to a
sentinel).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidParameterError
from .lambertw import lambertw_m1_neg_exp

ScalarFn = Callable[[float], float]


class PhiKind(enum.Enum):
    LOG_BARRIER = "log"
    CUSTOM = "custom"


@dataclass(frozen=True)
class BarrierSpec:
    """Scalar barrier ``phi`` on ``[0, b^2)`` with derivatives.

    Use :func:`make_log_barrier` or :func:`make_custom_barrier`; the latter
    probes convexity and blow-up on a grid and rejects violators.
    """

    b: float
    phi: ScalarFn
    dphi: ScalarFn
    d2phi: ScalarFn
    phi_kind: PhiKind = PhiKind.CUSTOM

    @property
    def b2(self) -> float:
        return self.b * self.b


def make_log_barrier(b: float) -> BarrierSpec:
    """Log barrier ``phi(rho) = -log(1 - rho/b^2)`` with closed-form derivatives."""
    if not (b > 0.0) or not math.isfinite(b):
        raise InvalidParameterError(f"barrier radius b must be positive, got {b}")
    b2 = b * b

    def phi(rho: float) -> float:
        return -math.log1p(-rho / b2)

    def dphi(rho: float) -> float:
        return 1.0 / (b2 - rho)

    def d2phi(rho: float) -> float:
        return 1.0 / (b2 - rho) ** 2

    return BarrierSpec(b=float(b), phi=phi, dphi=dphi, d2phi=d2phi, phi_kind=PhiKind.LOG_BARRIER)


def make_custom_barrier(b: float, phi: ScalarFn, dphi: ScalarFn, d2phi: ScalarFn) -> BarrierSpec:
    """Wrap caller-supplied derivatives, probing convexity and boundary blow-up.

    The probe checks, on a fixed grid in ``[0, b^2)``: strict positivity of
    ``d2phi``, strict increase of ``dphi``, and that ``phi`` grows without
    apparent bound approaching ``b^2``.
    """
    if not (b > 0.0) or not math.isfinite(b):
        raise InvalidParameterError(f"barrier radius b must be positive, got {b}")
    b2 = b * b
    grid = b2 * (1.0 - np.logspace(0.0, -9.0, 19))
    vals_dphi = []
    for rho in grid:
        if not d2phi(float(rho)) > 0.0:
            raise InvalidParameterError(f"d2phi({rho}) is not strictly positive")
        vals_dphi.append(dphi(float(rho)))
    if not all(x < y for x, y in zip(vals_dphi, vals_dphi[1:])):
        raise InvalidParameterError("dphi is not strictly increasing on the probe grid")
    tail = [phi(float(b2 * (1.0 - eps))) for eps in (1e-3, 1e-6, 1e-9)]
    if not (tail[0] < tail[1] < tail[2]) or tail[2] < phi(0.0) + 10.0:
        raise InvalidParameterError("phi does not blow up approaching b^2")
    return BarrierSpec(b=float(b), phi=phi, dphi=dphi, d2phi=d2phi, phi_kind=PhiKind.CUSTOM)


@dataclass(frozen=True)
class DualBarrier:
    """Conjugate ``a`` of a barrier, with derivatives and the numeric inverse.

    ``a(beta) = beta * (dphi)^{-1}(beta) - phi((dphi)^{-1}(beta))`` for
    ``beta >= dphi(0)``.  Its inverse is evaluated by a safeguarded Newton
    iteration (bisection fallback on a doubling bracket); for the log barrier
    the closed forms ``a(beta) = b^2 beta - log(b^2 beta) - 1`` etc. are used.
    The root solve is the reference path; a Lambert-W fast path exists for the
    log barrier (:func:`log_barrier_a_inv_lambertw`) and must agree with it.
    """

    spec: BarrierSpec
    inv_tolerance: float = 1e-12

    @cached_property
    def phi0(self) -> float:
        return self.spec.phi(0.0)

    @cached_property
    def dphi0(self) -> float:
        return self.spec.dphi(0.0)

    # -- forward maps ----------------------------------------------------

    def dphi_inv(self, beta: float) -> float:
        """Inverse of dphi on [dphi(0), inf), by safeguarded Newton."""
        if beta < self.dphi0 - 1e-12 * max(1.0, abs(self.dphi0)):
            raise DomainError(f"dphi_inv requires beta >= dphi(0) = {self.dphi0}, got {beta}")
        spec = self.spec
        if spec.phi_kind is PhiKind.LOG_BARRIER:
            return spec.b2 - 1.0 / max(beta, self.dphi0)
        if beta <= self.dphi0:
            return 0.0
        lo, hi = 0.0, spec.b2 * 0.5
        while spec.dphi(hi) < beta:
            hi = spec.b2 - 0.5 * (spec.b2 - hi)
        rho = 0.5 * (lo + hi)
        for _ in range(100):
            f = spec.dphi(rho) - beta
            if f > 0.0:
                hi = rho
            else:
                lo = rho
            step = f / spec.d2phi(rho)
            cand = rho - step
            if not (lo < cand < hi):
                cand = 0.5 * (lo + hi)
            if abs(f) <= self.inv_tolerance * max(1.0, abs(beta)) or hi - lo <= 1e-16 * spec.b2:
                return rho
            rho = cand
        return rho

    def a(self, beta: float) -> float:
        """Conjugate value at slope beta (domain beta >= dphi(0))."""
        if beta < self.dphi0 - 1e-12 * max(1.0, abs(self.dphi0)):
            raise DomainError(f"a requires beta >= dphi(0) = {self.dphi0}, got {beta}")
        spec = self.spec
        if spec.phi_kind is PhiKind.LOG_BARRIER:
            w = spec.b2 * max(beta, self.dphi0)
            return w - math.log(w) - 1.0
        rho = self.dphi_inv(beta)
        return beta * rho - spec.phi(rho)

    def da(self, beta: float) -> float:
        """First derivative of a; equals (dphi)^{-1}(beta)."""
        if self.spec.phi_kind is PhiKind.LOG_BARRIER:
            if beta < self.dphi0 - 1e-12 * max(1.0, abs(self.dphi0)):
                raise DomainError(f"da requires beta >= dphi(0) = {self.dphi0}, got {beta}")
            return self.spec.b2 - 1.0 / max(beta, self.dphi0)
        return self.dphi_inv(beta)

    def d2a(self, beta: float) -> float:
        """Second derivative of a; equals 1 / d2phi((dphi)^{-1}(beta))."""
        if self.spec.phi_kind is PhiKind.LOG_BARRIER:
            if beta < self.dphi0 - 1e-12 * max(1.0, abs(self.dphi0)):
                raise DomainError(f"d2a requires beta >= dphi(0) = {self.dphi0}, got {beta}")
            return 1.0 / (beta * beta)
        return 1.0 / self.spec.d2phi(self.dphi_inv(beta))

    # -- inverse map ------------------------------------------------------

    def a_inv(self, alpha: float) -> float:
        """Solve a(beta) = alpha for beta >= dphi(0).

        Newton iteration with the analytic derivative ``da``, safeguarded by
        bisection on a bracket whose upper end doubles until it encloses the
        root.  Convergence target is ``inv_tolerance`` absolute on
        ``a(beta) - alpha`` (relaxed to a few ulps of alpha where that is below
        float granularity).
        """
        lo_alpha = -self.phi0
        if alpha < lo_alpha - 1e-12 * max(1.0, abs(lo_alpha)):
            raise DomainError(f"a_inv requires alpha >= -phi(0) = {lo_alpha}, got {alpha}")
        alpha = max(alpha, lo_alpha)
        if alpha == lo_alpha:
            return self.dphi0
        lo = self.dphi0
        hi = self.dphi0 + max(1.0, abs(self.dphi0))
        while self.a(hi) < alpha:
            hi = self.dphi0 + 2.0 * (hi - self.dphi0)
        tol = max(self.inv_tolerance, 4.0 * np.spacing(abs(alpha)))
        beta = 0.5 * (lo + hi)
        for _ in range(200):
            f = self.a(beta) - alpha
            if abs(f) <= tol:
                return beta
            if f > 0.0:
                hi = beta
            else:
                lo = beta
            slope = self.da(beta)
            cand = beta - f / slope if slope > 0.0 else math.nan
            if not (lo < cand < hi):
                cand = 0.5 * (lo + hi)
            if hi - lo <= 4.0 * np.spacing(max(abs(lo), abs(hi))):
                return 0.5 * (lo + hi)
            beta = cand
        return beta

    def rho_hat(self, M: float) -> float:
        """Switch point (dphi)^{-1}(a_inv(M)) in [0, b^2)."""
        if M < -self.phi0 - 1e-12 * max(1.0, abs(self.phi0)):
            raise InvalidParameterError(f"rho_hat requires M >= -phi(0) = {-self.phi0}, got {M}")
        return self.dphi_inv(self.a_inv(max(M, -self.phi0)))


def conjugate(spec: BarrierSpec) -> DualBarrier:
    """Construct the conjugate bundle for a barrier."""
    return DualBarrier(spec=spec)


@dataclass(frozen=True)
class Theta:
    """Conjugate of the full extended-real barrier: flat at -phi(0) below
    dphi(0), equal to ``a`` above."""

    dual: DualBarrier

    def __call__(self, beta: float) -> float:
        if beta < self.dual.dphi0:
            return -self.dual.phi0
        return self.dual.a(beta)


def log_barrier_a_inv_lambertw(dual: DualBarrier, alpha) -> float | np.ndarray:
    """Closed-form a_inv for the log barrier via the -1 branch of Lambert-W.

    Fast path only; must agree with ``DualBarrier.a_inv`` to 1e-10.  Accepts
    scalars or arrays.
    """
    if dual.spec.phi_kind is not PhiKind.LOG_BARRIER:
        raise InvalidParameterError("Lambert-W inverse applies to the log barrier only")
    alpha_arr = np.asarray(alpha, dtype=float)
    if np.any(alpha_arr < -1e-12):
        raise DomainError("a_inv requires alpha >= -phi(0) = 0")
    return -lambertw_m1_neg_exp(np.maximum(alpha_arr, 0.0)) / dual.spec.b2


# -- barrier evaluations ---------------------------------------------------


def barrier_value(dual: DualBarrier, rho: float) -> float:
    """Extended-real barrier: phi(rho) on [0, b^2), +inf elsewhere."""
    if 0.0 <= rho < dual.spec.b2:
        return dual.spec.phi(rho)
    return math.inf


def barrier_value_M(dual: DualBarrier, M: float, rho: float) -> float:
    """Truncated barrier: phi up to rho_hat(M), then linear with slope a_inv(M).

    +inf for rho < 0; continuous and C^1 at the switch point.
    """
    _check_truncation(dual, M)
    if rho < 0.0:
        return math.inf
    rh = dual.rho_hat(M)
    if rho <= rh:
        return dual.spec.phi(rho)
    return dual.a_inv(M) * rho - M


def maximizer_alpha_M(dual: DualBarrier, M: float, rho: float) -> float:
    """Maximizer of alpha -> a_inv(alpha) rho - alpha over [-phi(0), M]."""
    _check_truncation(dual, M)
    if rho < 0.0:
        raise InvalidParameterError(f"maximizer_alpha_M requires rho >= 0, got {rho}")
    if rho <= dual.rho_hat(M):
        return dual.a(dual.spec.dphi(rho))
    return float(M)


def maximizer_alpha_exact(dual: DualBarrier, rho: float) -> float:
    """Maximizer of the untruncated supremum: a(dphi(rho)) inside the ball,
    +inf at or beyond the boundary."""
    if rho < 0.0:
        raise InvalidParameterError(f"maximizer_alpha_exact requires rho >= 0, got {rho}")
    if rho >= dual.spec.b2:
        return math.inf
    return dual.a(dual.spec.dphi(rho))


def maximizer_beta_M(dual: DualBarrier, M: float, rho: float) -> float:
    """Slope of the active quadratic: dphi(rho) capped at a_inv(M).

    Equals a_inv(maximizer_alpha_M(rho)); this is the Hessian parameter the
    Riccati forcing consumes, so sweeps evaluate it without a root solve.
    """
    _check_truncation(dual, M)
    if rho < 0.0:
        raise InvalidParameterError(f"maximizer_beta_M requires rho >= 0, got {rho}")
    if rho <= dual.rho_hat(M):
        return dual.spec.dphi(rho)
    return dual.a_inv(M)


def gamma_rho(dual: DualBarrier, rho: float, alpha: float) -> float:
    """The quadratic-family objective gamma_rho(alpha) = a_inv(alpha) rho - alpha."""
    if rho < 0.0:
        raise InvalidParameterError(f"gamma_rho requires rho >= 0, got {rho}")
    return dual.a_inv(alpha) * rho - alpha


def gamma_rho_derivatives(dual: DualBarrier, rho: float, alpha: float) -> tuple[float, float]:
    """First and second derivatives of gamma_rho in alpha, for alpha > -phi(0).

    gamma' = rho / rho_hat(alpha) - 1 and
    gamma'' = -rho / (d2phi(rho_hat(alpha)) * rho_hat(alpha)^3); both are
    undefined at alpha = -phi(0) where rho_hat vanishes.
    """
    if rho < 0.0:
        raise InvalidParameterError(f"gamma_rho requires rho >= 0, got {rho}")
    if alpha <= -dual.phi0:
        raise DomainError(f"gamma_rho derivatives require alpha > -phi(0) = {-dual.phi0}")
    rh = dual.rho_hat(alpha)
    d1 = rho / rh - 1.0
    d2 = -rho / (dual.spec.d2phi(rh) * rh**3)
    return d1, d2


def lambda_plus(dual: DualBarrier, M: float, beta: float) -> float:
    """Auxiliary affine bound M + phi(0) - (a_inv(M) - beta) rho_hat(M)."""
    _check_truncation(dual, M)
    return M + dual.phi0 - (dual.a_inv(M) - beta) * dual.rho_hat(M)


def _check_truncation(dual: DualBarrier, M: float) -> None:
    lo = -dual.phi0
    if M < lo - 1e-12 * max(1.0, abs(lo)):
        raise InvalidParameterError(f"truncation level must satisfy M >= -phi(0) = {lo}, got {M}")


# -- vectorized helpers (quadrature-facing) --------------------------------


def a_inv_values(dual: DualBarrier, alpha: np.ndarray) -> np.ndarray:
    """a_inv over an array; Lambert-W path for the log barrier, else per-entry."""
    alpha = np.asarray(alpha, dtype=float)
    if dual.spec.phi_kind is PhiKind.LOG_BARRIER:
        return np.asarray(log_barrier_a_inv_lambertw(dual, alpha))
    return np.array([dual.a_inv(float(x)) for x in alpha.ravel()]).reshape(alpha.shape)


def phi_values(dual: DualBarrier, rho: np.ndarray) -> np.ndarray:
    """Extended-real barrier over an array (inf outside [0, b^2))."""
    rho = np.asarray(rho, dtype=float)
    spec = dual.spec
    if spec.phi_kind is PhiKind.LOG_BARRIER:
        inside = (rho >= 0.0) & (rho < spec.b2)
        out = np.full(rho.shape, np.inf)
        out[inside] = -np.log1p(-rho[inside] / spec.b2)
        return out
    return np.array([barrier_value(dual, float(x)) for x in rho.ravel()]).reshape(rho.shape)


def phi_M_values(dual: DualBarrier, M: float, rho: np.ndarray) -> np.ndarray:
    """Truncated barrier over an array."""
    _check_truncation(dual, M)
    rho = np.asarray(rho, dtype=float)
    spec = dual.spec
    rh = dual.rho_hat(M)
    beta_M = dual.a_inv(M)
    if spec.phi_kind is PhiKind.LOG_BARRIER:
        out = np.where(rho <= rh, -np.log1p(-np.minimum(rho, rh) / spec.b2), beta_M * rho - M)
        return np.where(rho < 0.0, np.inf, out)
    return np.array(
        [barrier_value_M(dual, M, float(x)) for x in rho.ravel()]
    ).reshape(rho.shape)


def maximizer_alpha_M_values(dual: DualBarrier, M: float, rho: np.ndarray) -> np.ndarray:
    """Pointwise maximizer schedule over an array of squared norms."""
    _check_truncation(dual, M)
    rho = np.asarray(rho, dtype=float)
    spec = dual.spec
    rh = dual.rho_hat(M)
    if spec.phi_kind is PhiKind.LOG_BARRIER:
        w = spec.b2 / (spec.b2 - np.minimum(rho, rh))
        return np.where(rho <= rh, w - np.log(w) - 1.0, float(M))
    return np.array(
        [maximizer_alpha_M(dual, M, float(x)) for x in rho.ravel()]
    ).reshape(rho.shape)


def maximizer_beta_M_values(dual: DualBarrier, M: float, rho: np.ndarray) -> np.ndarray:
    """Active quadratic slopes over an array of squared norms."""
    _check_truncation(dual, M)
    rho = np.asarray(rho, dtype=float)
    spec = dual.spec
    rh = dual.rho_hat(M)
    beta_M = dual.a_inv(M)
    if spec.phi_kind is PhiKind.LOG_BARRIER:
        return np.where(rho <= rh, 1.0 / (spec.b2 - np.minimum(rho, rh)), beta_M)
    return np.array(
        [maximizer_beta_M(dual, M, float(x)) for x in rho.ravel()]
    ).reshape(rho.shape)
