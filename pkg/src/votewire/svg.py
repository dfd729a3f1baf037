"""Minimal deterministic SVG 1.1 plots.

Coordinates are printed with two decimals and elements are emitted in
input order, so equal inputs give byte-identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .stats import quantile

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _f(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo, hi, n=5):
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _tick_label(v):
    return f"{v:.0f}" if abs(v) >= 100 or float(v).is_integer() else f"{v:.2g}"


class _Frame:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x0, self.x1 = self.x0 - 1.0, self.x1 + 1.0
        if self.y1 <= self.y0:
            self.y0, self.y1 = self.y0 - 1.0, self.y1 + 1.0
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]
        self._axes(xlabel, ylabel)

    def px(self, x):
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)

    def py(self, y):
        return HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)

    def _axes(self, xlabel, ylabel):
        b, r = HEIGHT - BOTTOM, WIDTH - RIGHT
        self.parts.append(f'<path d="M{LEFT},{TOP} L{LEFT},{b} L{r},{b}" fill="none" stroke="black"/>')
        for t in _nice_ticks(self.x0, self.x1):
            x = _f(self.px(t))
            self.parts.append(f'<line x1="{x}" y1="{b}" x2="{x}" y2="{b + 4}" stroke="black"/>'
                              f'<text x="{x}" y="{b + 16}" text-anchor="middle">{_tick_label(t)}</text>')
        for t in _nice_ticks(self.y0, self.y1):
            y = _f(self.py(t))
            self.parts.append(f'<line x1="{LEFT - 4}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>'
                              f'<text x="{LEFT - 6}" y="{y}" text-anchor="end" dy="4">{_tick_label(t)}</text>')
        self.parts.append(f'<text x="{(LEFT + r) / 2}" y="{HEIGHT - 12}" text-anchor="middle">'
                          f'{escape(xlabel)}</text>')
        self.parts.append(f'<text x="16" y="{(TOP + b) / 2}" text-anchor="middle" '
                          f'transform="rotate(-90 16 {(TOP + b) / 2})">{escape(ylabel)}</text>')

    def legend(self, labels):
        for i, label in enumerate(labels):
            y = TOP + 6 + 14 * i
            self.parts.append(f'<rect x="{WIDTH - RIGHT - 150}" y="{y - 8}" width="10" height="10" '
                              f'fill="{PALETTE[i % len(PALETTE)]}"/>'
                              f'<text x="{WIDTH - RIGHT - 134}" y="{y}">{escape(label)}</text>')

    def svg(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _limits(arrays, pad=0.05):
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays]) if arrays else np.zeros(0)
    vals = vals[np.isfinite(vals)]
    if len(vals) == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo or max(abs(lo), 1.0)
    return lo - pad * span, hi + pad * span


def scatter(series, title="", xlabel="", ylabel="", lines=()) -> str:
    """``series``: (label, xs, ys) triples; ``lines``: (label, slope, intercept)."""
    xl = _limits([s[1] for s in series])
    yl = _limits([s[2] for s in series])
    fr = _Frame(xl, yl, title, xlabel, ylabel)
    for i, (_, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        dots = "".join(f'<circle cx="{_f(fr.px(x))}" cy="{_f(fr.py(y))}" r="1.6"/>'
                       for x, y in zip(xs, ys))
        fr.parts.append(f'<g fill="{color}" fill-opacity="0.6">{dots}</g>')
    for i, (_, slope, intercept) in enumerate(lines):
        x0, x1 = fr.x0, fr.x1
        fr.parts.append(f'<line x1="{_f(fr.px(x0))}" y1="{_f(fr.py(intercept + slope * x0))}" '
                        f'x2="{_f(fr.px(x1))}" y2="{_f(fr.py(intercept + slope * x1))}" '
                        f'stroke="black" stroke-dasharray="{4 + 2 * i},3"/>')
    fr.legend([s[0] for s in series] + [l[0] for l in lines])
    return fr.svg()


def boxplot(groups, title="", ylabel="") -> str:
    """Box plots whose widths are proportional to the square root of group size.

    Whiskers mark the 10% and 90% percentiles; the box spans the quartiles.
    """
    groups = [(label, np.asarray(v, dtype=float)) for label, v in groups if len(v)]
    yl = _limits([v for _, v in groups])
    fr = _Frame((0.0, float(len(groups))), yl, title, "", ylabel)
    biggest = max((len(v) for _, v in groups), default=1)
    for i, (label, v) in enumerate(groups):
        q10, q25, q50, q75, q90 = (quantile(v, q) for q in (0.10, 0.25, 0.50, 0.75, 0.90))
        half = 0.4 * math.sqrt(len(v) / biggest)
        xl, xc, xr = fr.px(i + 0.5 - half), fr.px(i + 0.5), fr.px(i + 0.5 + half)
        color = PALETTE[i % len(PALETTE)]
        fr.parts.append(
            f'<g stroke="black" fill="{color}" fill-opacity="0.5">'
            f'<line x1="{_f(xc)}" y1="{_f(fr.py(q90))}" x2="{_f(xc)}" y2="{_f(fr.py(q75))}"/>'
            f'<line x1="{_f(xc)}" y1="{_f(fr.py(q25))}" x2="{_f(xc)}" y2="{_f(fr.py(q10))}"/>'
            f'<rect x="{_f(xl)}" y="{_f(fr.py(q75))}" width="{_f(xr - xl)}" '
            f'height="{_f(fr.py(q25) - fr.py(q75))}"/>'
            f'<line x1="{_f(xl)}" y1="{_f(fr.py(q50))}" x2="{_f(xr)}" y2="{_f(fr.py(q50))}" stroke-width="2"/>'
            f'</g><text x="{_f(xc)}" y="{HEIGHT - BOTTOM + 30}" text-anchor="middle">'
            f'{escape(label)} (n={len(v)})</text>')
    return fr.svg()


def qq(pairs, title="", xlabel="", ylabel="") -> str:
    """Quantile pairs against the identity line."""
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    lim = _limits([xs, ys])
    fr = _Frame(lim, lim, title, xlabel, ylabel)
    fr.parts.append(f'<line x1="{_f(fr.px(lim[0]))}" y1="{_f(fr.py(lim[0]))}" x2="{_f(fr.px(lim[1]))}" '
                    f'y2="{_f(fr.py(lim[1]))}" stroke="gray" stroke-dasharray="3,3"/>')
    dots = "".join(f'<circle cx="{_f(fr.px(x))}" cy="{_f(fr.py(y))}" r="2.2"/>' for x, y in pairs)
    fr.parts.append(f'<g fill="{PALETTE[0]}">{dots}</g>')
    return fr.svg()


def means_chart(series, categories, title="", ylabel="") -> str:
    """Line chart of means: ``series`` is (label, [value or None per category])."""
    vals = [v for _, row in series for v in row if v is not None]
    fr = _Frame((-0.5, len(categories) - 0.5), _limits([vals]), title, "", ylabel)
    for j, cat in enumerate(categories):
        fr.parts.append(f'<text x="{_f(fr.px(j))}" y="{HEIGHT - BOTTOM + 30}" '
                        f'text-anchor="middle">{escape(cat)}</text>')
    for i, (_, row) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(fr.px(j), fr.py(v)) for j, v in enumerate(row) if v is not None]
        if len(pts) > 1:
            d = " ".join(f"{'M' if k == 0 else 'L'}{_f(x)},{_f(y)}" for k, (x, y) in enumerate(pts))
            fr.parts.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="2"/>')
        fr.parts.append("".join(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3" fill="{color}"/>' for x, y in pts))
    fr.legend([label for label, _ in series])
    return fr.svg()
