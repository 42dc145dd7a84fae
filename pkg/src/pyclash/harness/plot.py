"""Self-contained SVG plots of median signal error against the l1 budget."""

from __future__ import annotations

import math
import os
from xml.sax.saxutils import escape

__all__ = ["render_svg", "emit_plot"]

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 20, 50
COLORS = {
    "lasso": "#1f77b4",
    "sparse-clash": "#2ca02c",
    "model-clash": "#d62728",
    "model-sp": "#7f7f7f",
}
_FLOOR = 1e-16


def _decades(lo, hi):
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return a, b


def render_svg(summary) -> str:
    """SVG 1.1 document: one polyline per method, infinite budgets as dashed lines."""
    rows = list(summary)
    if not rows:
        raise ValueError("nothing to plot")
    methods = list(dict.fromkeys(r.method for r in rows))
    finite = [r for r in rows if math.isfinite(r.lam)]
    errors = [max(r.median_error, _FLOOR) for r in rows if not math.isnan(r.median_error)]
    if not errors:
        raise ValueError("no finite errors to plot")
    y0, y1 = _decades(min(errors), max(errors))
    lams = [r.lam for r in finite] or [1.0]
    x0, x1 = _decades(min(lams), max(lams))

    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(lam):
        return LEFT + (math.log10(lam) - x0) / (x1 - x0) * pw

    def py(err):
        return TOP + (y1 - math.log10(max(err, _FLOOR))) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for d in range(y0, y1 + 1):
        yy = TOP + (y1 - d) / (y1 - y0) * ph
        out.append(f'<line x1="{LEFT}" y1="{yy:.2f}" x2="{LEFT + pw}" y2="{yy:.2f}" '
                   'stroke="#dddddd"/>')
        out.append(f'<text class="ytick" x="{LEFT - 6}" y="{yy + 4:.2f}" font-size="11" '
                   f'text-anchor="end">1e{d}</text>')
    for d in range(x0, x1 + 1):
        xx = LEFT + (d - x0) / (x1 - x0) * pw
        out.append(f'<text class="xtick" x="{xx:.2f}" y="{TOP + ph + 16}" font-size="11" '
                   f'text-anchor="middle">1e{d}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 10}" font-size="12" '
               'text-anchor="middle">lambda / ||x*||_1</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2})">median ||x - x*||_2</text>')

    for j, method in enumerate(methods):
        color = COLORS.get(method, "#000000")
        pts = sorted((r.lam, r.median_error) for r in finite
                     if r.method == method and not math.isnan(r.median_error))
        if pts:
            coords = " ".join(f"{px(l):.2f},{py(e):.2f}" for l, e in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{coords}"/>')
        for r in rows:
            if r.method == method and math.isinf(r.lam) and not math.isnan(r.median_error):
                yy = py(r.median_error)
                out.append(f'<line x1="{LEFT}" y1="{yy:.2f}" x2="{LEFT + pw}" y2="{yy:.2f}" '
                           f'stroke="{color}" stroke-dasharray="6,4"/>')
        ly = TOP + 16 + 18 * j
        out.append(f'<line x1="{LEFT + pw + 10}" y1="{ly}" x2="{LEFT + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw + 35}" y="{ly + 4}" font-size="11">'
                   f'{escape(method)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(summary, path) -> str:
    """Render ``summary`` and write it to ``path``; nothing is written on error."""
    doc = render_svg(summary)
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise OSError(f"directory does not exist: {directory}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(doc)
    return doc
