"""Deterministic SVG rendering of a designed layout.

Edges are stroked with a colour and width per installed cable type, the OSS
is a square marker, WTs are circles, and a legend plus scale bar anchor the
drawing. Output is byte-stable for identical inputs.
"""

from __future__ import annotations

from .instance import FarmInstance
from .model import Design

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#e377c2",
    "#bcbd22",
    "#7f7f7f",
)

MARGIN = 80.0
CANVAS = 900.0


def _scale_bar_length(extent_m: float) -> float:
    """A round number near a fifth of the drawing extent."""
    target = extent_m / 5.0
    mag = 1.0
    while mag * 10.0 <= target:
        mag *= 10.0
    for mult in (5.0, 2.0, 1.0):
        if mag * mult <= target:
            return mag * mult
    return mag


def render_layout(design: Design, instance: FarmInstance) -> str:
    pts = {p.id: p for p in instance.points}
    xs = [p.x for p in instance.points]
    ys = [p.y for p in instance.points]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    extent = max(xmax - xmin, ymax - ymin, 1.0)
    scale = (CANVAS - 2 * MARGIN) / extent

    def sx(x: float) -> float:
        return MARGIN + (x - xmin) * scale

    def sy(y: float) -> float:
        # Flip so north is up.
        return CANVAS - MARGIN - (y - ymin) * scale

    types = instance.effective_types()
    used_types = sorted(set(design.edge_types.values()))
    colour = {t: PALETTE[i % len(PALETTE)] for i, t in enumerate(used_types)}
    width = {t: 1.5 + 1.0 * i for i, t in enumerate(used_types)}

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS:.0f}" '
        f'height="{CANVAS:.0f}" viewBox="0 0 {CANVAS:.0f} {CANVAS:.0f}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]

    for (i, j) in design.active_edges:
        t = design.edge_types[(i, j)]
        a, b = pts[i], pts[j]
        lines.append(
            f'<line x1="{sx(a.x):.2f}" y1="{sy(a.y):.2f}" x2="{sx(b.x):.2f}" '
            f'y2="{sy(b.y):.2f}" stroke="{colour[t]}" stroke-width="{width[t]:.1f}" '
            f'class="cable-type-{t}"/>'
        )

    for p in instance.points:
        if p.is_oss:
            lines.append(
                f'<rect x="{sx(p.x) - 7:.2f}" y="{sy(p.y) - 7:.2f}" width="14" '
                f'height="14" fill="black" class="oss-marker"/>'
            )
        else:
            lines.append(
                f'<circle cx="{sx(p.x):.2f}" cy="{sy(p.y):.2f}" r="4" '
                f'fill="#333333" class="wt-marker"/>'
            )

    legend_y = 24.0
    lines.append(
        f'<text x="16" y="{legend_y:.0f}" font-size="14" font-family="sans-serif">'
        f"{instance.name}</text>"
    )
    for n, t in enumerate(used_types):
        y = legend_y + 22.0 * (n + 1)
        cap = types[t].capacity_a
        lines.append(
            f'<line x1="16" y1="{y:.1f}" x2="56" y2="{y:.1f}" '
            f'stroke="{colour[t]}" stroke-width="{width[t]:.1f}"/>'
        )
        lines.append(
            f'<text x="64" y="{y + 4:.1f}" font-size="12" font-family="sans-serif">'
            f"type {t} ({cap:.0f} A)</text>"
        )

    bar_m = _scale_bar_length(extent)
    bar_px = bar_m * scale
    y_bar = CANVAS - 24.0
    lines.append(
        f'<line x1="{MARGIN:.0f}" y1="{y_bar:.1f}" x2="{MARGIN + bar_px:.2f}" '
        f'y2="{y_bar:.1f}" stroke="black" stroke-width="2"/>'
    )
    lines.append(
        f'<text x="{MARGIN:.0f}" y="{y_bar - 6:.1f}" font-size="12" '
        f'font-family="sans-serif">{bar_m:.0f} m</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
