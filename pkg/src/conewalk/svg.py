"""Minimal SVG plots: empirical CDF overlays and histograms against a density."""

from __future__ import annotations

from html import escape
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .io import fmt

W, H, PAD = 640, 400, 50
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (np.asarray(v, dtype=float) - lo) / span * (b - a)


def _polyline(xs, ys, color, width=1.5):
    pts = " ".join(f"{fmt(round(float(x), 2))},{fmt(round(float(y), 2))}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{pts}"/>'


def _frame(title, xlo, xhi, ylo, yhi):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W // 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">'
        f'{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
    ]
    for v, pos in ((xlo, PAD), (xhi, W - PAD)):
        out.append(f'<text x="{pos}" y="{H - PAD + 16}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{fmt(round(float(v), 3))}</text>')
    for v, pos in ((ylo, H - PAD), (yhi, PAD)):
        out.append(f'<text x="{PAD - 6}" y="{pos + 4}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{fmt(round(float(v), 3))}</text>')
    return out


def _legend(labels):
    out = []
    for i, lab in enumerate(labels):
        y = PAD + 16 * i
        out.append(f'<line x1="{W - PAD - 150}" y1="{y}" x2="{W - PAD - 130}" y2="{y}" stroke="{COLORS[i % 4]}" '
                   'stroke-width="2"/>')
        out.append(f'<text x="{W - PAD - 125}" y="{y + 4}" font-family="sans-serif" font-size="11">'
                   f'{escape(lab)}</text>')
    return out


def cdf_plot(path, samples: Sequence, labels: Sequence[str], cdf: Optional[Callable] = None,
             cdf_label: str = "reference", title: str = "") -> None:
    """Empirical CDFs of several samples, optionally with a reference CDF."""
    arrs = [np.sort(np.asarray(s, dtype=float).ravel()) for s in samples]
    lo = min(a[0] for a in arrs)
    hi = max(a[-1] for a in arrs)
    sx = _scale(lo, hi, PAD, W - PAD)
    sy = _scale(0.0, 1.0, H - PAD, PAD)
    out = _frame(title, lo, hi, 0.0, 1.0)
    names = list(labels)
    for i, a in enumerate(arrs):
        idx = np.unique(np.linspace(0, len(a) - 1, min(len(a), 400)).astype(int))
        out.append(_polyline(sx(a[idx]), sy((idx + 1) / len(a)), COLORS[i % 4]))
    if cdf is not None:
        g = np.linspace(lo, hi, 300)
        out.append(_polyline(sx(g), sy(np.asarray(cdf(g))), COLORS[len(arrs) % 4], 1.0))
        names.append(cdf_label)
    out += _legend(names)
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")


def histogram_plot(path, samples, density: Optional[Callable] = None, bins: int = 50, label: str = "sample",
                   density_label: str = "density", title: str = "") -> None:
    """Normalized histogram with an optional density overlay."""
    a = np.asarray(samples, dtype=float).ravel()
    counts, edges = np.histogram(a, bins=bins, density=True)
    ymax = float(counts.max())
    g = np.linspace(edges[0], edges[-1], 300)
    dv = None
    if density is not None:
        dv = np.asarray(density(g), dtype=float)
        ymax = max(ymax, float(dv.max()))
    sx = _scale(edges[0], edges[-1], PAD, W - PAD)
    sy = _scale(0.0, ymax * 1.05, H - PAD, PAD)
    out = _frame(title, edges[0], edges[-1], 0.0, ymax * 1.05)
    for c, l, r in zip(counts, edges[:-1], edges[1:]):
        x0, x1 = float(sx(l)), float(sx(r))
        y = float(sy(c))
        out.append(f'<rect x="{fmt(round(x0, 2))}" y="{fmt(round(y, 2))}" width="{fmt(round(x1 - x0, 2))}" '
                   f'height="{fmt(round(H - PAD - y, 2))}" fill="{COLORS[0]}" fill-opacity="0.4"/>')
    names = [label]
    if dv is not None:
        out.append(_polyline(sx(g), sy(dv), COLORS[1]))
        names.append(density_label)
    out += _legend(names)
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")


def line_plot(path, x, series: Sequence, labels: Sequence[str], logx: bool = False, logy: bool = False,
              title: str = "") -> None:
    """Polylines y_i(x), optionally on log axes (tick labels show the original values)."""
    tx = np.log10 if logx else np.asarray
    ty = np.log10 if logy else np.asarray
    xs = tx(np.asarray(x, dtype=float))
    ys = [ty(np.asarray(s, dtype=float)) for s in series]
    lo, hi = float(xs.min()), float(xs.max())
    ylo = min(float(y.min()) for y in ys)
    yhi = max(float(y.max()) for y in ys)
    sx = _scale(lo, hi, PAD, W - PAD)
    sy = _scale(ylo, yhi, H - PAD, PAD)
    back_x = (lambda v: 10**v) if logx else (lambda v: v)
    back_y = (lambda v: 10**v) if logy else (lambda v: v)
    out = _frame(title, back_x(lo), back_x(hi), back_y(ylo), back_y(yhi))
    for i, y in enumerate(ys):
        out.append(_polyline(sx(xs), sy(y), COLORS[i % 4]))
    out += _legend(labels)
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
