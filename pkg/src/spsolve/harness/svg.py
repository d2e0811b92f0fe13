"""Tiny SVG line-plot writer (no plotting dependency)."""
from __future__ import annotations

from typing import Dict, Sequence

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2")


def line_plot_svg(
    series: Dict[str, Sequence[float]],
    title: str = "",
    xlabel: str = "cycle",
    ylabel: str = "log10 NMSE",
    width: int = 640,
    height: int = 420,
) -> str:
    """Render ``{label: y-values}`` (x = 0, 1, 2, ...) as an SVG document."""
    left, right, top, bottom = 60, 110, 30, 45
    pw, ph = width - left - right, height - top - bottom
    ys = [y for vals in series.values() for y in vals]
    xmax = max((len(v) - 1 for v in series.values()), default=1) or 1
    ymin, ymax = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if ymax == ymin:
        ymin, ymax = ymin - 1.0, ymax + 1.0

    def px(i):
        return left + pw * i / xmax

    def py(y):
        return top + ph * (ymax - y) / (ymax - ymin)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {top + ph / 2:.1f})">{ylabel}</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = ymin + frac * (ymax - ymin)
        out.append(
            f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" text-anchor="end" font-size="10">{yv:.1f}</text>'
        )
        xv = frac * xmax
        out.append(
            f'<text x="{px(xv):.1f}" y="{top + ph + 14}" text-anchor="middle" font-size="10">{xv:.0f}</text>'
        )
    for k, (label, vals) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{px(i):.2f},{py(y):.2f}" for i, y in enumerate(vals))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 16 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 36}" y="{ly + 4}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
