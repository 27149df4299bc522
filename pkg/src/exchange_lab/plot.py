"""Tiny self-contained SVG charts for eyeballing outputs."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H, PAD = 640, 400, 50


def _scale(lo, hi, a, b):
    span = (hi - lo) or 1.0
    return lambda v: a + (v - lo) * (b - a) / span


def _frame(title, xlabel, ylabel, body):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">\n'
        f'<rect width="{W}" height="{H}" fill="white"/>\n'
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>\n'
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>\n'
        f'<text x="{W / 2}" y="20" text-anchor="middle">{escape(title)}</text>\n'
        f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>\n'
        f'<text x="15" y="{H / 2}" transform="rotate(-90 15 {H / 2})" text-anchor="middle">{escape(ylabel)}</text>\n'
        f"{body}</svg>\n"
    )


def _ticks(xlo, xhi, ylo, yhi, sx, sy, ylog=False):
    out = []
    for k in range(5):
        xv = xlo + k * (xhi - xlo) / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{H - PAD + 15}" text-anchor="middle">{xv:.4g}</text>')
        yv = ylo + k * (yhi - ylo) / 4
        label = f"1e{yv:.1f}" if ylog else f"{yv:.3g}"
        out.append(f'<text x="{PAD - 5}" y="{sy(yv) + 4:.1f}" text-anchor="end">{label}</text>')
    return "\n".join(out) + "\n"


def bars_with_curve(ns, heights, curve=None, title="", xlabel="n", ylabel="probability") -> str:
    """Bar chart of ``heights`` at integer ``ns`` with an optional overlaid curve."""
    ns = list(ns)
    ymax = max(list(heights) + (list(curve) if curve is not None else [])) or 1.0
    sx = _scale(min(ns) - 0.5, max(ns) + 0.5, PAD, W - PAD)
    sy = _scale(0, ymax, H - PAD, PAD)
    width = max(1.0, sx(1) - sx(0) - 1)
    parts = [f'<rect x="{sx(n - 0.5):.1f}" y="{sy(h):.1f}" width="{width:.1f}" height="{sy(0) - sy(h):.1f}" '
             f'fill="steelblue"/>' for n, h in zip(ns, heights)]
    if curve is not None:
        pts = " ".join(f"{sx(n):.1f},{sy(v):.1f}" for n, v in zip(ns, curve))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="crimson" stroke-width="2"/>')
    body = "\n".join(parts) + "\n" + _ticks(min(ns) - 0.5, max(ns) + 0.5, 0, ymax, sx, sy)
    return _frame(title, xlabel, ylabel, body)


def line_chart(xs, ys, title="", xlabel="t", ylabel="", log_y=False, marker_x=None) -> str:
    xs = list(xs)
    ys = [math.log10(y) if log_y else y for y in ys] if log_y else list(ys)
    finite = [y for y in ys if math.isfinite(y)]
    ylo, yhi = min(finite), max(finite)
    sx = _scale(min(xs), max(xs), PAD, W - PAD)
    sy = _scale(ylo, yhi, H - PAD, PAD)
    pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs, ys) if math.isfinite(y))
    body = f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>\n'
    if marker_x is not None:
        body += (f'<line x1="{sx(marker_x):.1f}" y1="{PAD}" x2="{sx(marker_x):.1f}" y2="{H - PAD}" '
                 f'stroke="gray" stroke-dasharray="4"/>\n')
    body += _ticks(min(xs), max(xs), ylo, yhi, sx, sy, log_y)
    return _frame(title, xlabel, ylabel, body)
