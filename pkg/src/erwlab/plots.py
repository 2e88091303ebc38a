"""Plot data: CSV tables and bare SVG line charts."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H, _PAD = 480, 320, 40


def write_table(path, columns: dict) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=np.float64) for k in names])
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.10g")


def _thin(x, y, limit=2000):
    if len(x) <= limit:
        return x, y
    idx = np.unique(np.linspace(0, len(x) - 1, limit).astype(np.int64))
    return x[idx], y[idx]


def write_svg(path, series: dict, logx: bool = False, logy: bool = False, title: str = "") -> None:
    """One polyline per ``name -> (x, y)``; axes only implied by the frame."""
    prepared = {}
    for name, (x, y) in series.items():
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        keep = np.isfinite(x) & np.isfinite(y)
        if logx:
            keep &= x > 0
        if logy:
            keep &= y > 0
        x, y = x[keep], y[keep]
        if logx:
            x = np.log10(x)
        if logy:
            y = np.log10(y)
        prepared[name] = _thin(x, y)
    allx = np.concatenate([p[0] for p in prepared.values()] or [np.zeros(1)])
    ally = np.concatenate([p[1] for p in prepared.values()] or [np.zeros(1)])
    x0, x1 = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    y0, y1 = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def sx(v):
        return _PAD + (v - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def sy(v):
        return _H - _PAD - (v - y0) / (y1 - y0) * (_H - 2 * _PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
           f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
           'fill="none" stroke="#888"/>']
    if title:
        out.append(f'<text x="{_PAD}" y="{_PAD - 12}" font-size="12">{title}</text>')
    fmt = (lambda v: f"1e{v:.1f}") if logx else (lambda v: f"{v:.3g}")
    fmty = (lambda v: f"1e{v:.1f}") if logy else (lambda v: f"{v:.3g}")
    out.append(f'<text x="{_PAD}" y="{_H - 12}" font-size="10">{fmt(x0)}</text>')
    out.append(f'<text x="{_W - _PAD}" y="{_H - 12}" font-size="10" text-anchor="end">{fmt(x1)}</text>')
    out.append(f'<text x="4" y="{_H - _PAD}" font-size="10">{fmty(y0)}</text>')
    out.append(f'<text x="4" y="{_PAD + 4}" font-size="10">{fmty(y1)}</text>')
    for i, (name, (x, y)) in enumerate(prepared.items()):
        colour = _COLOURS[i % len(_COLOURS)]
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{_W - _PAD - 4}" y="{_PAD + 14 * (i + 1)}" font-size="11" '
                   f'text-anchor="end" fill="{colour}">{name}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def ecdf_pair(a, b, points: int = 400):
    """Both ECDFs on a shared grid spanning the central 99.8% of the pooled data."""
    pooled = np.concatenate([np.ravel(a), np.ravel(b)])
    lo, hi = np.quantile(pooled, [0.001, 0.999])
    if not math.isfinite(hi) or hi <= lo:
        hi = lo + 1.0
    grid = np.linspace(lo, hi, points)
    fa = np.searchsorted(np.sort(a), grid, side="right") / len(a)
    fb = np.searchsorted(np.sort(b), grid, side="right") / len(b)
    return grid, fa, fb
