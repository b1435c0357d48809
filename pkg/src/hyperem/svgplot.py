"""Minimal self-contained SVG rendering for error-map heatmaps.

No plotting dependency: one <rect> per pixel, a fixed 256-step
grayscale-to-red ramp, and an embedded color-bar legend.
"""

from __future__ import annotations

import numpy as np

RAMP_STEPS = 256
CELL = 8
LEGEND_W = 24
MARGIN = 10


def _ramp_color(t: float) -> str:
    """t in [0, 1]: dark gray -> light gray -> red."""
    i = min(int(t * (RAMP_STEPS - 1)), RAMP_STEPS - 1)
    u = i / (RAMP_STEPS - 1)
    if u <= 0.5:
        g = int(40 + (u / 0.5) * 180)
        return f"rgb({g},{g},{g})"
    v = (u - 0.5) / 0.5
    r = int(220 + v * 35)
    gb = int(220 * (1 - v))
    return f"rgb({r},{gb},{gb})"


def heatmap_svg(values: np.ndarray, path, title: str = "") -> None:
    """Write an H x W value grid as an SVG heatmap; NaN pixels render black."""
    vals = np.asarray(values, dtype=np.float64)
    h, w = vals.shape
    finite = vals[np.isfinite(vals)]
    vmax = float(finite.max()) if finite.size else 0.0
    vmin = float(finite.min()) if finite.size else 0.0
    span = vmax - vmin
    width = MARGIN * 3 + w * CELL + LEGEND_W + 40
    height = MARGIN * 2 + max(h * CELL, 120) + 20
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" '
             f'width="{width}" height="{height}">']
    if title:
        parts.append(f'<text x="{MARGIN}" y="{height - 6}" '
                     f'font-size="10">{title}</text>')
    for i in range(h):
        for j in range(w):
            v = vals[i, j]
            if not np.isfinite(v):
                color = "rgb(0,0,0)"
            else:
                t = (v - vmin) / span if span > 0 else 0.0
                color = _ramp_color(t)
            parts.append(f'<rect class="px" x="{MARGIN + j * CELL}" '
                         f'y="{MARGIN + i * CELL}" width="{CELL}" '
                         f'height="{CELL}" fill="{color}"/>')
    # color-bar legend
    lx = MARGIN * 2 + w * CELL
    lh = max(h * CELL, 120)
    for s in range(RAMP_STEPS):
        y0 = MARGIN + lh - (s + 1) * lh / RAMP_STEPS
        parts.append(f'<rect class="legend" x="{lx}" y="{y0:.2f}" '
                     f'width="{LEGEND_W}" height="{lh / RAMP_STEPS + 0.5:.2f}" '
                     f'fill="{_ramp_color(s / (RAMP_STEPS - 1))}"/>')
    parts.append(f'<text x="{lx + LEGEND_W + 4}" y="{MARGIN + 10}" '
                 f'font-size="10">{vmax:.4g}</text>')
    parts.append(f'<text x="{lx + LEGEND_W + 4}" y="{MARGIN + lh}" '
                 f'font-size="10">{vmin:.4g}</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts))
