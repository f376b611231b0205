"""Self-contained SVG line plots with error bars.

Output depends only on the input numbers: fixed number formatting, no
timestamps, no random ids.
"""
from __future__ import annotations

import math
from html import escape
from typing import Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * max(1.0, abs(hi)):
        out.append(round(v, 12))
        v += step
    return out


def _label(v: float) -> str:
    return f"{v:.4g}"


def panel(series: Sequence[tuple[str, np.ndarray, np.ndarray, np.ndarray]], title: str = "",
          log: bool = False, width: int = 480, height: int = 320, x0: float = 0,
          y0: float = 0) -> str:
    """SVG group for one panel; ``series`` holds ``(label, t, value, stderr)``."""
    ml, mr, mt, mb = 60, 20, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    pts = []
    for _, t, v, e in series:
        t, v, e = (np.asarray(a, dtype=float) for a in (t, v, e))
        lo, hi = v - np.nan_to_num(e), v + np.nan_to_num(e)
        if log:
            keep = v > 0
            t, v, lo, hi = t[keep], v[keep], lo[keep], hi[keep]
            lo = np.where(lo > 0, lo, v / 10)
        pts.append((t, v, lo, hi))
    all_t = np.concatenate([p[0] for p in pts]) if pts else np.empty(0)
    all_y = np.concatenate([np.concatenate([p[2], p[3]]) for p in pts]) if pts else np.empty(0)
    all_t, all_y = all_t[np.isfinite(all_t)], all_y[np.isfinite(all_y)]
    tx0, tx1 = (float(all_t.min()), float(all_t.max())) if all_t.size else (0.0, 1.0)
    if tx1 == tx0:
        tx0, tx1 = tx0 - 1, tx1 + 1
    if log:
        ly = np.log10(all_y) if all_y.size else np.array([0.0, 1.0])
        ya, yb = math.floor(float(ly.min())), math.ceil(float(ly.max()))
        if yb == ya:
            yb = ya + 1
    else:
        ya, yb = (float(all_y.min()), float(all_y.max())) if all_y.size else (0.0, 1.0)
        if yb == ya:
            ya, yb = ya - 0.5, yb + 0.5
        pad = 0.05 * (yb - ya)
        ya, yb = ya - pad, yb + pad

    def sx(t):
        return x0 + ml + (t - tx0) / (tx1 - tx0) * pw

    def sy(y):
        yy = math.log10(y) if log else y
        return y0 + mt + ph - (yy - ya) / (yb - ya) * ph

    out = [f'<g font-family="sans-serif" font-size="11">',
           f'<rect x="{_f(x0 + ml)}" y="{_f(y0 + mt)}" width="{pw}" height="{ph}" '
           f'fill="none" stroke="#444"/>']
    if title:
        out.append(f'<text x="{_f(x0 + width / 2)}" y="{_f(y0 + 18)}" text-anchor="middle" '
                   f'font-size="13">{escape(title)}</text>')
    for tv in _ticks(tx0, tx1):
        X = sx(tv)
        out.append(f'<line x1="{_f(X)}" y1="{_f(y0 + mt + ph)}" x2="{_f(X)}" '
                   f'y2="{_f(y0 + mt + ph + 4)}" stroke="#444"/>')
        out.append(f'<text x="{_f(X)}" y="{_f(y0 + mt + ph + 16)}" text-anchor="middle">'
                   f'{_label(tv)}</text>')
    yt = [10.0 ** k for k in range(int(ya), int(yb) + 1)] if log else _ticks(ya, yb)
    for yv in yt:
        Y = sy(yv)
        out.append(f'<line x1="{_f(x0 + ml - 4)}" y1="{_f(Y)}" x2="{_f(x0 + ml)}" y2="{_f(Y)}" '
                   f'stroke="#444"/>')
        out.append(f'<text x="{_f(x0 + ml - 6)}" y="{_f(Y + 4)}" text-anchor="end">'
                   f'{_label(yv)}</text>')
    out.append(f'<text x="{_f(x0 + ml + pw / 2)}" y="{_f(y0 + height - 8)}" '
               f'text-anchor="middle">t</text>')
    for i, ((lab, *_), (t, v, lo, hi)) in enumerate(zip(series, pts)):
        col = PALETTE[i % len(PALETTE)]
        fin = np.isfinite(v)
        if fin.sum() > 1:
            path = " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(t[fin], v[fin]))
            out.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for a, b, l, h in zip(t, v, lo, hi):
            if not (np.isfinite(a) and np.isfinite(b)):
                continue
            X = sx(a)
            if np.isfinite(l) and np.isfinite(h) and h > l:
                out.append(f'<line x1="{_f(X)}" y1="{_f(sy(l))}" x2="{_f(X)}" y2="{_f(sy(h))}" '
                           f'stroke="{col}"/>')
            out.append(f'<circle cx="{_f(X)}" cy="{_f(sy(b))}" r="3" fill="{col}"/>')
        ly = y0 + mt + 14 + 14 * i
        out.append(f'<text x="{_f(x0 + ml + pw - 6)}" y="{_f(ly)}" text-anchor="end" '
                   f'fill="{col}">{escape(lab)}</text>')
    out.append("</g>")
    return "\n".join(out)


def render(series, title: str = "", log: bool = False, width: int = 480,
           height: int = 320) -> str:
    body = panel(series, title, log, width, height)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n{body}\n</svg>\n')


def dashboard(panels: Sequence[tuple[str, list, bool]], cols: int = 2, width: int = 480,
              height: int = 320) -> str:
    """Grid of panels; each entry is ``(title, series, log)``."""
    rows = max(1, math.ceil(len(panels) / cols))
    W, H = cols * width, rows * height
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}">']
    if not panels:
        parts.append('<text x="10" y="20" font-family="sans-serif">no curves</text>')
    for i, (title, series, log) in enumerate(panels):
        r, c = divmod(i, cols)
        parts.append(panel(series, title, log, width, height, c * width, r * height))
    parts.append("</svg>\n")
    return "\n".join(parts)
