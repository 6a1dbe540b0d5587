"""Minimal static SVG line plots (polylines, axes, tick labels)."""
from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _range(arrays):
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays]) if arrays else np.zeros(1)
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        pad = max(abs(lo), 1.0) * 1e-3
        return lo - pad, hi + pad
    return lo, hi


def _panel(series, xlabel, ylabel, title, x0, y0, width, height):
    ml, mr, mt, mb = 70, 20, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    xlo, xhi = _range([s[1] for s in series])
    ylo, yhi = _range([s[2] for s in series])

    def X(v):
        return x0 + ml + (v - xlo) / (xhi - xlo) * pw

    def Y(v):
        return y0 + mt + ph - (v - ylo) / (yhi - ylo) * ph

    out = [f'<rect x="{x0 + ml}" y="{y0 + mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{x0 + width / 2}" y="{y0 + 18}" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{x0 + ml + pw / 2}" y="{y0 + height - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
           f'<text x="{x0 + 14}" y="{y0 + mt + ph / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 {x0 + 14} {y0 + mt + ph / 2})">{escape(ylabel)}</text>']
    for v in np.linspace(xlo, xhi, 5):
        out.append(f'<line x1="{X(v):.2f}" y1="{y0 + mt + ph}" x2="{X(v):.2f}" y2="{y0 + mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X(v):.2f}" y="{y0 + mt + ph + 18}" text-anchor="middle" font-size="10">{_fmt(v)}</text>')
    for v in np.linspace(ylo, yhi, 5):
        out.append(f'<line x1="{x0 + ml - 5}" y1="{Y(v):.2f}" x2="{x0 + ml}" y2="{Y(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 + ml - 8}" y="{Y(v) + 3:.2f}" text-anchor="end" font-size="10">{_fmt(v)}</text>')
    for i, (label, xs, ys) in enumerate(series):
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(xs, ys) if np.isfinite(a) and np.isfinite(b))
        colour = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{pts}">'
                   f'<title>{escape(str(label))}</title></polyline>')
    return out


def _document(body, width, height):
    return "\n".join([
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        *body,
        "</svg>",
        "",
    ])


def line_plot(series: Sequence[tuple], xlabel: str, ylabel: str, title: str = "",
              width: int = 640, height: int = 480) -> str:
    """One panel; ``series`` is a list of ``(label, xs, ys)``, one polyline each."""
    return _document(_panel(series, xlabel, ylabel, title, 0, 0, width, height), width, height)


def stacked_plots(panels: Sequence[tuple], width: int = 640, panel_height: int = 260) -> str:
    """Vertically stacked panels, each ``(series, xlabel, ylabel, title)``."""
    body = []
    for i, (series, xlabel, ylabel, title) in enumerate(panels):
        body.extend(_panel(series, xlabel, ylabel, title, 0, i * panel_height, width, panel_height))
    return _document(body, width, panel_height * max(1, len(panels)))
