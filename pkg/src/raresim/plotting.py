"""Minimal hand-written SVG line charts."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = (70, 20, 30, 50)  # left, right, top, bottom
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _scale(v: np.ndarray, log: bool) -> np.ndarray:
    return np.log10(v) if log else v


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [float(e) for e in range(math.floor(lo), math.ceil(hi) + 1)]
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, 5))


def _label(v: float, log: bool) -> str:
    return f"1e{int(v)}" if log else f"{v:.3g}"


def line_chart(series: Sequence[tuple[str, Sequence[float], Sequence[float]]], *,
               xlabel: str = "", ylabel: str = "", title: str = "",
               logx: bool = False, logy: bool = False) -> str:
    """SVG text for one or more (label, x, y) series; NaN points are skipped.

    A series with a single finite point is drawn as a marker.
    """
    pts = []
    for _, x, y in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y) & ((x > 0) | (not logx)) & ((y > 0) | (not logy))
        pts.append((_scale(x[ok], logx), _scale(y[ok], logy)))
    allx = np.concatenate([p[0] for p in pts]) if pts else np.array([0.0])
    ally = np.concatenate([p[1] for p in pts]) if pts else np.array([0.0])
    if allx.size == 0:
        allx, ally = np.array([0.0]), np.array([0.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if logx:
        x0, x1 = math.floor(x0), math.ceil(x1)
    if logy:
        y0, y1 = math.floor(y0), math.ceil(y1)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
    ]
    for t in _ticks(x0, x1, logx):
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 15}" text-anchor="middle">{_label(t, logx)}</text>')
    for t in _ticks(y0, y1, logy):
        out.append(f'<text x="{left - 5}" y="{py(t) + 4:.2f}" text-anchor="end">{_label(t, logy)}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="{top - 8}" text-anchor="middle">{title}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="15" y="{top + ph / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 15 {top + ph / 2:.2f})">{ylabel}</text>')
    for i, ((label, _, _), (x, y)) in enumerate(zip(series, pts)):
        color = COLORS[i % len(COLORS)]
        if x.size == 1:
            out.append(f'<circle cx="{px(x[0]):.2f}" cy="{py(y[0]):.2f}" r="4" fill="{color}"/>')
        elif x.size > 1:
            path = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{left + 10}" y="{top + 15 + 14 * i}" fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, *args, **kwargs) -> None:
    with open(path, "w") as fh:
        fh.write(line_chart(*args, **kwargs))
