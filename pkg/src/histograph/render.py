"""Deterministic SVG heatmaps of per-nucleus importance.

One filled circle per nucleus at its pixel centroid, colored along a fixed
two-stop HSV ramp (hue 240 at score 0 through hue 0 at score 1, full
saturation and value). Identical inputs produce byte-identical SVG.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import NucleusGraph

LEGEND_STEPS = 32
LEGEND_WIDTH = 14.0
LEGEND_HEIGHT = 128.0
LEGEND_GAP = 46.0


@dataclass(frozen=True)
class RenderConfig:
    node_radius: float = 4.0
    margin: float = 20.0
    legend: bool = True

    def __post_init__(self):
        if self.node_radius <= 0 or self.margin < 0:
            raise ValidationError("node_radius must be positive and margin non-negative")


def ramp_color(score: float) -> str:
    """Hex color for a normalized score in [0, 1]: blue at 0, red at 1."""
    s = min(1.0, max(0.0, float(score)))
    hue_degrees = 240.0 * (1.0 - s)
    r, g, b = colorsys.hsv_to_rgb(hue_degrees / 360.0, 1.0, 1.0)
    return f"#{round(r * 255):02x}{round(g * 255):02x}{round(b * 255):02x}"


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def render_svg(g: NucleusGraph, normalized_scores, config: RenderConfig | None = None) -> str:
    cfg = config or RenderConfig()
    scores = np.asarray(normalized_scores, dtype=np.float64)
    if scores.shape != (g.n_nodes,):
        raise ValidationError(
            f"score count {scores.shape} does not match graph with {g.n_nodes} nodes")

    xs = g.centroids[:, 0]
    ys = g.centroids[:, 1]
    min_x, min_y = xs.min(), ys.min()
    width = (xs.max() - min_x) + 2 * cfg.margin
    height = (ys.max() - min_y) + 2 * cfg.margin
    if cfg.legend:
        width += LEGEND_GAP + LEGEND_WIDTH

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
    ]
    for i in range(g.n_nodes):
        cx = xs[i] - min_x + cfg.margin
        cy = ys[i] - min_y + cfg.margin
        lines.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(cfg.node_radius)}" '
            f'fill="{ramp_color(scores[i])}"/>')

    if cfg.legend:
        bar_x = width - LEGEND_WIDTH - cfg.margin
        bar_y = cfg.margin
        step_h = LEGEND_HEIGHT / LEGEND_STEPS
        for k in range(LEGEND_STEPS):
            # top of the bar is score 1, bottom is score 0
            level = 1.0 - (k + 0.5) / LEGEND_STEPS
            lines.append(
                f'<rect x="{_fmt(bar_x)}" y="{_fmt(bar_y + k * step_h)}" '
                f'width="{_fmt(LEGEND_WIDTH)}" height="{_fmt(step_h + 0.5)}" '
                f'fill="{ramp_color(level)}"/>')
        text_x = bar_x - 12.0
        lines.append(
            f'<text x="{_fmt(text_x)}" y="{_fmt(bar_y + 10.0)}" '
            f'font-family="monospace" font-size="10">1</text>')
        lines.append(
            f'<text x="{_fmt(text_x)}" y="{_fmt(bar_y + LEGEND_HEIGHT)}" '
            f'font-family="monospace" font-size="10">0</text>')

    lines.append("</svg>")
    return "\n".join(lines) + "\n"
