"""Static SVG overview of a pattern card.

One vertical axis per feature; every unique combination of a class is a
polyline through the ordinates of its codes, coloured by class and made more
transparent the rarer it is within its class.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .binning import BinSpec
from .pattern import PatternCard

__all__ = ["PlotOptions", "code_to_ordinate", "render_pattern_svg", "svg_document"]

TAB10 = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class PlotOptions:
    width: int = 1200
    height: int = 600
    palette: tuple[str, ...] = TAB10
    opacity_floor: float = 0.05
    max_combinations: int = 5000

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("width and height must be positive")
        if not 0 < self.opacity_floor <= 1:
            raise ValueError("opacity floor must be in (0, 1]")
        if self.max_combinations < 1:
            raise ValueError("max_combinations must be ≥ 1")
        if not self.palette:
            raise ValueError("palette must not be empty")


def code_to_ordinate(code, spec: BinSpec, depth_limit: int) -> float:
    """Place a code on ``[0, 1]`` as a positional fraction in base ``b + 1``.

    The largest code of length ``depth_limit`` (all digits ``b``) maps to 1;
    the out-of-domain code ``0`` maps to 0.
    """
    base = spec.b + 1
    value = sum(Fraction(int(d), base ** (i + 1)) for i, d in enumerate(code))
    scale = spec.b * sum(Fraction(1, base ** (i + 1)) for i in range(depth_limit))
    return float(value / scale)


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def svg_document(card: PatternCard, options: PlotOptions = PlotOptions()) -> str:
    model = card.model
    spec, levels = model.spec, model.depth_limit
    m = card.n_features
    if m < 1:
        raise ValueError("cannot plot a card without features")
    w, h = options.width, options.height
    left, right, top, bottom = 60.0, 40.0, 30.0, 60.0
    plot_w = max(w - left - right, 1.0)
    plot_h = max(h - top - bottom, 1.0)
    if m == 1:
        xs = [left + plot_w / 2]
    else:
        xs = [left + j * plot_w / (m - 1) for j in range(m)]

    ordinate_cache: dict[int, float] = {}

    def y_of(packed: int) -> float:
        y = ordinate_cache.get(packed)
        if y is None:
            y = ordinate_cache[packed] = top + (1.0 - code_to_ordinate(card.unpack(packed), spec, levels)) * plot_h
        return y

    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" '
        '"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>',
        '<g id="axes" stroke="#444444" stroke-width="1">',
    ]
    for x in xs:
        parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(top)}" x2="{_fmt(x)}" y2="{_fmt(top + plot_h)}"/>')
    parts.append("</g>")
    parts.append('<g id="feature-labels" font-family="sans-serif" font-size="10" text-anchor="middle" fill="#222222">')
    for x, name in zip(xs, model.feature_names):
        parts.append(f'<text x="{_fmt(x)}" y="{_fmt(top + plot_h + 16)}">{escape(name)}</text>')
    parts.append("</g>")

    for k, cp in enumerate(card.classes):
        color = options.palette[k % len(options.palette)]
        # Most frequent first, ties in lexicographic order of the combination.
        order = np.lexsort((np.arange(cp.n_unique), -cp.combo_counts))[: options.max_combinations]
        peak = int(cp.combo_counts.max()) if cp.n_unique else 1
        parts.append(f'<g id="class-{k}" stroke={quoteattr(color)} fill="none" stroke-width="1">')
        parts.append(f"<title>{escape(cp.label)}</title>")
        for r in order[::-1].tolist():
            opacity = max(options.opacity_floor, int(cp.combo_counts[r]) / peak)
            ys = [y_of(p) for p in cp.combinations[r].tolist()]
            if m == 1:
                parts.append(
                    f'<circle class="combo" cx="{_fmt(xs[0])}" cy="{_fmt(ys[0])}" r="3" '
                    f'fill={quoteattr(color)} fill-opacity="{opacity:.4f}" stroke-opacity="{opacity:.4f}"/>'
                )
            else:
                points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
                parts.append(f'<polyline class="combo" points="{points}" stroke-opacity="{opacity:.4f}"/>')
        parts.append("</g>")

    parts.append('<g id="legend" font-family="sans-serif" font-size="11">')
    for k, cp in enumerate(card.classes):
        color = options.palette[k % len(options.palette)]
        x = left + 110.0 * k
        y = h - 14.0
        parts.append(f'<rect x="{_fmt(x)}" y="{_fmt(y - 9)}" width="10" height="10" fill={quoteattr(color)}/>')
        parts.append(f'<text x="{_fmt(x + 14)}" y="{_fmt(y)}" fill="#222222">{escape(cp.label)}</text>')
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_pattern_svg(
    card: PatternCard, options: PlotOptions = PlotOptions(), path: str | os.PathLike | None = None
) -> str:
    """Render the card and, when ``path`` is given, write it there as UTF-8."""
    text = svg_document(card, options)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
