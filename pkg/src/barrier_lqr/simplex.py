"""Nelder-Mead simplex minimization.

Deterministic implementation with the classic coefficients (reflection 1,
expansion 2, contraction 0.5, shrink 0.5).  Termination: best value at or
below ``ftarget`` (when given), simplex diameter below ``diameter_tol``, or
the iteration cap.  Ties are broken by stable sort so identical inputs give
bit-identical iterates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    fx: float
    iterations: int
    nfev: int
    converged: bool
    reason: str


def initial_simplex(center: np.ndarray, radius: float) -> np.ndarray:
    """Axis-aligned simplex: the center plus one vertex per coordinate."""
    center = np.asarray(center, dtype=float)
    n = center.size
    verts = np.tile(center, (n + 1, 1))
    for i in range(n):
        verts[i + 1, i] += radius
    return verts


def nelder_mead(
    f: Callable[[np.ndarray], float],
    center: np.ndarray,
    radius: float,
    *,
    max_iters: int = 400,
    diameter_tol: float = 1e-9,
    ftarget: float | None = None,
) -> SimplexResult:
    """Minimize ``f`` starting from an axis-aligned simplex around ``center``."""
    verts = initial_simplex(center, radius)
    n = verts.shape[1]
    fvals = np.array([f(v) for v in verts])
    nfev = n + 1
    reason = "max_iters"
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        order = np.argsort(fvals, kind="stable")
        verts = verts[order]
        fvals = fvals[order]
        if ftarget is not None and fvals[0] <= ftarget:
            reason, converged = "ftarget", True
            break
        diameter = float(np.max(np.linalg.norm(verts[1:] - verts[0], axis=1)))
        if diameter < diameter_tol:
            reason, converged = "diameter", True
            break

        centroid = np.mean(verts[:-1], axis=0)
        xr = centroid + (centroid - verts[-1])
        fr = f(xr)
        nfev += 1
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - verts[-1])
            fe = f(xe)
            nfev += 1
            if fe < fr:
                verts[-1], fvals[-1] = xe, fe
            else:
                verts[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            verts[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (verts[-1] - centroid)
            fc = f(xc)
            nfev += 1
            if fc < min(fr, fvals[-1]):
                verts[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    verts[i] = verts[0] + 0.5 * (verts[i] - verts[0])
                    fvals[i] = f(verts[i])
                nfev += n

    best = int(np.argmin(fvals))
    return SimplexResult(
        x=verts[best].copy(), fx=float(fvals[best]),
        iterations=it, nfev=nfev, converged=converged, reason=reason,
    )
