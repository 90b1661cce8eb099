"""Deterministic CSV and SVG output.

Plots are written as self-contained SVG with fixed canvas sizes and fixed
float formatting (12 significant digits in CSV, 0.01 px in SVG), so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import barrier as _barrier
from .barrier import DualBarrier
from .lti import Grid, Trajectory


def fmt12(x) -> str:
    return f"{float(x):.12g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt12(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _px(x: float) -> str:
    return f"{x:.2f}"


class _SvgCanvas:
    """Linear data-to-pixel mapping over a fixed-size canvas."""

    def __init__(self, width, height, xlim, ylim, margin=40.0):
        self.width, self.height, self.margin = width, height, margin
        self.xlim, self.ylim = xlim, ylim
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def map(self, x: float, y: float) -> tuple[float, float]:
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        px = self.margin + (x - x0) / (x1 - x0) * (self.width - 2 * self.margin)
        py = self.height - self.margin - (y - y0) / (y1 - y0) * (self.height - 2 * self.margin)
        return px, py

    def polyline(self, xs, ys, color: str, width: float = 1.5, dash: str | None = None):
        pts = []
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                px, py = self.map(x, y)
                pts.append(f"{_px(px)},{_px(py)}")
        if len(pts) < 2:
            return
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{dash_attr}/>'
        )

    def circle(self, cx, cy, r_data, color: str, width: float = 1.5):
        px, py = self.map(cx, cy)
        ex, _ = self.map(cx + r_data, cy)
        self.parts.append(
            f'<circle cx="{_px(px)}" cy="{_px(py)}" r="{_px(ex - px)}" fill="none" '
            f'stroke="{color}" stroke-width="{width}"/>'
        )

    def marker(self, x, y, color: str, r: float = 4.0):
        px, py = self.map(x, y)
        self.parts.append(f'<circle cx="{_px(px)}" cy="{_px(py)}" r="{r}" fill="{color}"/>')

    def text(self, x_px, y_px, s: str):
        self.parts.append(f'<text x="{_px(x_px)}" y="{_px(y_px)}" font-size="12" '
                          f'font-family="sans-serif">{s}</text>')

    def axes(self):
        m, w, h = self.margin, self.width, self.height
        self.parts.append(
            f'<rect x="{_px(m)}" y="{_px(m)}" width="{_px(w - 2 * m)}" '
            f'height="{_px(h - 2 * m)}" fill="none" stroke="#888" stroke-width="1"/>'
        )

    def to_string(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def phase_plot_svg(traj: Trajectory, b: float, grid: Grid, path: Path, title: str) -> None:
    """Trajectory against the constraint set: phase plane for n >= 2, else time series."""
    states = traj.states
    path = Path(path)
    if states.shape[1] >= 2:
        ext = 1.1 * max(float(np.max(np.abs(states[:, :2]))), b)
        canvas = _SvgCanvas(480, 480, (-ext, ext), (-ext, ext))
        canvas.axes()
        canvas.circle(0.0, 0.0, b, "#cc3333")
        canvas.polyline(states[:, 0], states[:, 1], "#1155cc", 2.0)
        canvas.marker(states[0, 0], states[0, 1], "#11aa11")
        canvas.marker(states[-1, 0], states[-1, 1], "#1155cc")
        canvas.text(canvas.margin, canvas.margin - 10, title)
    else:
        ext = 1.1 * max(float(np.max(np.abs(states[:, 0]))), b)
        canvas = _SvgCanvas(560, 360, (0.0, grid.horizon), (-ext, ext))
        canvas.axes()
        times = grid.times
        canvas.polyline(times, np.full_like(times, b), "#cc3333", 1.0, dash="4,3")
        canvas.polyline(times, np.full_like(times, -b), "#cc3333", 1.0, dash="4,3")
        canvas.polyline(times, states[:, 0], "#1155cc", 2.0)
        canvas.text(canvas.margin, canvas.margin - 10, title)
    path.write_text(canvas.to_string())


def emit_barrier_figure(dual: DualBarrier, M: float, output) -> tuple[Path, Path]:
    """Write the barrier, its truncation, and 8 tangent quadratics.

    ``output`` is a stem path; <stem>.csv holds columns (sqrt_rho, barrier,
    truncated, quad_0..quad_7) and <stem>.svg overlays the curves against the
    state norm.  Every quadratic minorizes the barrier with equality at its
    tangency point.
    """
    output = Path(output)
    csv_path = output.with_suffix(".csv")
    svg_path = output.with_suffix(".svg")
    b = dual.spec.b
    lo = -dual.phi0
    alphas = [lo + (M - lo) * i / 7.0 for i in range(8)] if M > lo else [lo] * 8
    tangencies = np.sqrt([dual.rho_hat(a) for a in alphas])
    sigma = np.unique(np.concatenate([np.linspace(0.0, 1.2 * b, 361), tangencies]))
    rho = sigma * sigma
    barrier_vals = _barrier.phi_values(dual, rho)
    trunc_vals = _barrier.phi_M_values(dual, M, rho)
    quads = [dual.a_inv(a) * rho - a for a in alphas]

    header = ["sqrt_rho", "barrier", "truncated"] + [f"quad_{i}" for i in range(8)]
    rows = [
        [sigma[k], barrier_vals[k], trunc_vals[k]] + [q[k] for q in quads]
        for k in range(sigma.size)
    ]
    write_csv(csv_path, header, rows)

    y_cap = 1.25 * float(np.max(trunc_vals))
    y_lo = min(0.0, float(np.min(trunc_vals)), *(float(np.min(q)) for q in quads))
    canvas = _SvgCanvas(560, 420, (0.0, float(sigma[-1])), (y_lo, max(y_cap, y_lo + 1.0)))
    canvas.axes()
    for q in quads:
        canvas.polyline(sigma, np.where(q <= y_cap, q, np.nan), "#999999", 1.0)
    canvas.polyline(sigma, np.where(trunc_vals <= y_cap, trunc_vals, np.nan), "#1155cc", 2.0)
    canvas.polyline(sigma, np.where(barrier_vals <= y_cap, barrier_vals, np.nan),
                    "#cc3333", 2.0, dash="6,4")
    canvas.text(canvas.margin, canvas.margin - 10,
                f"barrier (dashed), truncation M={fmt12(M)}, tangent quadratics")
    svg_path.write_text(canvas.to_string())
    return csv_path, svg_path
