"""Minimal self-contained SVG line and scatter charts."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 50


def _ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step) + 1)]


class _Frame:
    def __init__(self, xlim, ylim, logy=False):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.logy = logy

    def x(self, v):
        return LEFT + (v - self.x0) / (self.x1 - self.x0 or 1.0) * (WIDTH - LEFT - RIGHT)

    def y(self, v):
        if self.logy:
            v = math.log10(v)
        return HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0 or 1.0) * (HEIGHT - TOP - BOTTOM)


def _axes(frame, title, xlabel, ylabel):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    x_lo, x_hi = LEFT, WIDTH - RIGHT
    y_lo, y_hi = HEIGHT - BOTTOM, TOP
    parts.append(f'<rect x="{x_lo}" y="{y_hi}" width="{x_hi - x_lo}" height="{y_lo - y_hi}" fill="none" stroke="black"/>')
    for t in _ticks(frame.x0, frame.x1):
        px = frame.x(t)
        parts.append(f'<line x1="{px:.1f}" y1="{y_lo}" x2="{px:.1f}" y2="{y_lo + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{y_lo + 18}" text-anchor="middle">{t:g}</text>')
    yticks = range(math.floor(frame.y0), math.ceil(frame.y1) + 1) if frame.logy else _ticks(frame.y0, frame.y1)
    for t in yticks:
        value = 10.0 ** t if frame.logy else t
        py = frame.y(value)
        if py < y_hi - 0.5 or py > y_lo + 0.5:
            continue
        label = f"1e{t}" if frame.logy else f"{t:g}"
        parts.append(f'<line x1="{x_lo - 5}" y1="{py:.1f}" x2="{x_lo}" y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x_lo - 8}" y="{py + 4:.1f}" text-anchor="end">{label}</text>')
    parts.append(f'<text x="{(x_lo + x_hi) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(
        f'<text x="16" y="{(y_lo + y_hi) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(y_lo + y_hi) / 2:.1f})">{escape(ylabel)}</text>'
    )
    return parts


def _legend(parts, labels):
    for i, label in enumerate(labels):
        y = TOP + 16 + 18 * i
        color = PALETTE[i % len(PALETTE)]
        parts.append(f'<rect x="{WIDTH - RIGHT + 12}" y="{y - 9}" width="14" height="10" fill="{color}"/>')
        parts.append(f'<text x="{WIDTH - RIGHT + 32}" y="{y}">{escape(label)}</text>')


def line_chart(x, series: dict, title="", xlabel="", ylabel="", logy=False, vlines=()) -> str:
    """Polyline chart; non-finite (and, with ``logy``, non-positive) points are skipped."""
    x = np.asarray(x, dtype=float)
    finite = []
    for y in series.values():
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y) & ((y > 0) if logy else True)
        finite.append(y[ok])
    allv = np.concatenate(finite) if finite else np.array([])
    if allv.size == 0:
        ylim = (0.0, 1.0)
    elif logy:
        ylim = (math.floor(math.log10(allv.min())), math.ceil(math.log10(allv.max())) or 1.0)
        if ylim[0] == ylim[1]:
            ylim = (ylim[0] - 1, ylim[1])
    else:
        pad = 0.05 * (allv.max() - allv.min() or 1.0)
        ylim = (allv.min() - pad, allv.max() + pad)
    frame = _Frame((float(x.min()), float(x.max())) if x.size else (0.0, 1.0), ylim, logy)
    parts = _axes(frame, title, xlabel, ylabel)
    for v in vlines:
        px = frame.x(v)
        parts.append(f'<line x1="{px:.1f}" y1="{TOP}" x2="{px:.1f}" y2="{HEIGHT - BOTTOM}" stroke="gray" stroke-dasharray="4 3"/>')
    for i, y in enumerate(series.values()):
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y) & ((y > 0) if logy else True)
        pts = " ".join(f"{frame.x(a):.1f},{frame.y(b):.1f}" for a, b in zip(x[ok], y[ok]))
        parts.append(f'<polyline fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.2" points="{pts}"/>')
    _legend(parts, list(series))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_chart(groups: dict, title="") -> str:
    """Square-axis scatter of complex points, one colour per group."""
    allp = np.concatenate([np.asarray(p, dtype=complex) for p in groups.values()] or [np.zeros(0)])
    r = float(np.max(np.abs(np.concatenate([allp.real, allp.imag])))) * 1.1 if allp.size else 1.0
    frame = _Frame((-r, r), (-r, r))
    parts = _axes(frame, title, "in-phase", "quadrature")
    for i, pts in enumerate(groups.values()):
        color = PALETTE[i % len(PALETTE)]
        for z in np.asarray(pts, dtype=complex):
            parts.append(f'<circle cx="{frame.x(z.real):.1f}" cy="{frame.y(z.imag):.1f}" r="1.5" fill="{color}"/>')
    _legend(parts, list(groups))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
