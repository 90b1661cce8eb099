"""Lambert-W function, -1 branch, for the log-barrier conjugate inverse.

Only the evaluation pattern W_{-1}(-exp(-1-alpha)) for alpha >= 0 is needed
here.  Working directly with alpha avoids forming -exp(-1-alpha), which
underflows for large alpha.  The implementation combines a branch-point
series (small alpha) with an asymptotic initial guess refined by Halley's
method applied to g(w) = w + log(-w) (large alpha).  Both paths vectorize.
"""

from __future__ import annotations

import numpy as np

# Below this offset from the branch point the series alone is at machine
# precision and the Halley denominator 1 + 1/w degenerates.
_SERIES_CUTOFF = 1e-4


def _branch_point_series(alpha):
    # W_{-1}(-e^{-1-alpha}) = -1 + p - p^2/3 + 11 p^3/72 - 43 p^4/540 + ...
    # with p = -sqrt(2 (1 - e^{-alpha})); -expm1 keeps 1 - e^{-alpha} exact.
    p = -np.sqrt(2.0 * (-np.expm1(-alpha)))
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))))


def _halley_on_log_form(alpha, w):
    # Solve g(w) = w + log(-w) + 1 + alpha = 0 for w <= -1.
    for _ in range(6):
        g = w + np.log(-w) + 1.0 + alpha
        gp = 1.0 + 1.0 / w
        gpp = -1.0 / (w * w)
        w = w - g / (gp - 0.5 * g * gpp / gp)
    return w


def lambertw_m1_neg_exp(alpha):
    """Evaluate W_{-1}(-exp(-1-alpha)) for alpha >= 0 (scalar or array).

    Returns values in (-inf, -1]; exactly -1 at alpha = 0.
    """
    alpha_arr = np.asarray(alpha, dtype=float)
    scalar = alpha_arr.ndim == 0
    a = np.atleast_1d(alpha_arr)
    if np.any(a < 0.0):
        raise ValueError("lambertw_m1_neg_exp requires alpha >= 0")
    out = np.empty_like(a)

    near = a < _SERIES_CUTOFF
    if np.any(near):
        out[near] = _branch_point_series(a[near])
    if np.any(~near):
        af = a[~near]
        # Asymptotic guess W_{-1}(x) ~ L1 - L2 + L2/L1 with L1 = log(-x) = -(1+alpha).
        L1 = -(1.0 + af)
        L2 = np.log(-L1)
        w0 = L1 - L2 + L2 / L1
        out[~near] = _halley_on_log_form(af, w0)
    return float(out[0]) if scalar else out.reshape(alpha_arr.shape)


def lambertw_m1(x):
    """W_{-1}(x) on the real branch domain [-1/e, 0)."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr >= 0.0) or np.any(x_arr < -np.exp(-1.0) - 1e-15):
        raise ValueError("lambertw_m1 requires x in [-1/e, 0)")
    # alpha = -1 - log(-x) >= 0 up to rounding at the branch point.
    alpha = np.maximum(-1.0 - np.log(-x_arr), 0.0)
    return lambertw_m1_neg_exp(alpha)
