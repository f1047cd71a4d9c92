"""SVG figures: heatmaps of total infected per p3 and bar charts of w.

Output is plain text built with fixed formatting, so the same summary always
produces byte-identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .analysis import Heatmap, SweepSummary, heatmaps
from .engine import format_p

CELL = 56
MARGIN_L = 90
MARGIN_T = 60
MARGIN_B = 70


def _pct(p: float) -> str:
    return f"{p * 100:g}%"


def heat_color(v: float, lo: float, hi: float) -> str:
    """Linear white -> red; ``lo`` maps to white, ``hi`` to pure red."""
    if math.isnan(v):
        return "#dddddd"
    f = 0.0 if hi <= lo else min(max((v - lo) / (hi - lo), 0.0), 1.0)
    gb = int(round(255 * (1.0 - f)))
    return f"#ff{gb:02x}{gb:02x}"


def cell_label(v: float) -> str:
    return "" if math.isnan(v) else str(int(math.floor(v + 0.5)))


def heatmap_svg(hm: Heatmap, title: str = "Total infected") -> str:
    nr, nc = hm.values.shape
    finite = hm.values[~np.isnan(hm.values)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 0.0
    width = MARGIN_L + nc * CELL + 20
    height = MARGIN_T + nr * CELL + MARGIN_B
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="13">',
           f'<text x="{width / 2:g}" y="24" text-anchor="middle" font-size="15">'
           f'{escape(title)}, p3 = {_pct(hm.p3)}</text>']
    for r in range(nr):
        y = MARGIN_T + r * CELL
        out.append(f'<text x="{MARGIN_L - 8}" y="{y + CELL / 2 + 4:g}" text-anchor="end">'
                   f'{_pct(hm.rows[r])}</text>')
        for c in range(nc):
            x = MARGIN_L + c * CELL
            v = float(hm.values[r, c])
            out.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                       f'fill="{heat_color(v, lo, hi)}" stroke="#888888"/>')
            out.append(f'<text x="{x + CELL / 2:g}" y="{y + CELL / 2 + 4:g}" '
                       f'text-anchor="middle">{cell_label(v)}</text>')
    yb = MARGIN_T + nr * CELL
    for c in range(nc):
        out.append(f'<text x="{MARGIN_L + c * CELL + CELL / 2:g}" y="{yb + 18}" '
                   f'text-anchor="middle">{_pct(hm.cols[c])}</text>')
    out.append(f'<text x="{MARGIN_L + nc * CELL / 2:g}" y="{yb + 44}" '
               f'text-anchor="middle">p1 (app usage)</text>')
    out.append(f'<text x="20" y="{MARGIN_T + nr * CELL / 2:g}" text-anchor="middle" '
               f'transform="rotate(-90 20 {MARGIN_T + nr * CELL / 2:g})">p2 (outing reduction)'
               f'</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def w_chart_svg(summary: SweepSummary, p1: float) -> str:
    """Bars of mean w for every (p2, p3) at one p1, grouped by p2."""
    rows = sorted((s for s in summary if s.p1 == p1), key=lambda s: (s.p2, s.p3))
    p2s = sorted({s.p2 for s in rows})
    p3s = sorted({s.p3 for s in rows})
    bar = 10
    group = bar * len(p3s) + 14
    plot_h = 240
    width = MARGIN_L + group * len(p2s) + 30
    height = MARGIN_T + plot_h + MARGIN_B
    ws = [s.mean_w for s in rows] or [0.0]
    span = max(max(abs(w) for w in ws), 1e-12)
    zero = MARGIN_T + plot_h / 2
    scale = (plot_h / 2) / span
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<text x="{width / 2:g}" y="24" text-anchor="middle" font-size="15">'
           f'Coefficient w, p1 = {_pct(p1)}</text>',
           f'<line x1="{MARGIN_L}" y1="{zero:g}" x2="{width - 20}" y2="{zero:g}" '
           f'stroke="#000000"/>',
           f'<text x="{MARGIN_L - 6}" y="{MARGIN_T + 4}" text-anchor="end">{span:.3g}</text>',
           f'<text x="{MARGIN_L - 6}" y="{zero + 4:g}" text-anchor="end">0</text>',
           f'<text x="{MARGIN_L - 6}" y="{MARGIN_T + plot_h + 4}" text-anchor="end">'
           f'{-span:.3g}</text>']
    by_key = {(s.p2, s.p3): s for s in rows}
    for gi, p2 in enumerate(p2s):
        gx = MARGIN_L + 7 + gi * group
        for bi, p3 in enumerate(p3s):
            s = by_key.get((p2, p3))
            if s is None:
                continue
            h = abs(s.mean_w) * scale
            y = zero - h if s.mean_w > 0 else zero
            shade = int(round(200 * (1 - bi / max(len(p3s) - 1, 1))))
            out.append(f'<rect x="{gx + bi * bar}" y="{y:.3f}" width="{bar - 1}" '
                       f'height="{h:.3f}" fill="#{shade:02x}{shade:02x}ff">'
                       f'<title>p2={format_p(p2)} p3={format_p(p3)} w={s.mean_w!r}</title>'
                       f'</rect>')
        out.append(f'<text x="{gx + bar * len(p3s) / 2:g}" y="{MARGIN_T + plot_h + 18}" '
                   f'text-anchor="middle">{_pct(p2)}</text>')
    out.append(f'<text x="{MARGIN_L + group * len(p2s) / 2:g}" y="{MARGIN_T + plot_h + 44}" '
               f'text-anchor="middle">p2 groups; bars p3 ascending left to right</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_all(summary: SweepSummary) -> dict[str, str]:
    """File name -> SVG text for every figure of ``summary``."""
    files = {}
    for hm in heatmaps(summary):
        files[f"heatmap_p3-{format_p(hm.p3)}.svg"] = heatmap_svg(hm)
    for p1 in sorted({s.p1 for s in summary}):
        files[f"w_p1-{format_p(p1)}.svg"] = w_chart_svg(summary, p1)
    return files
