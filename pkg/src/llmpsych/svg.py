"""Minimal dependency-free SVG output: labelled scatter and profile line."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH = HEIGHT = 480
MARGIN = 40


def _scale(values, lo_px, hi_px):
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full_like(v, (lo_px + hi_px) / 2)
    return lo_px + (v - lo) / (hi - lo) * (hi_px - lo_px)


def _frame(body: list[str]) -> str:
    axes = [
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    return "\n".join(
        [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">']
        + axes
        + body
        + ["</svg>", ""]
    )


def scatter_svg(coords, labels: Sequence[str], colors: Sequence[str] | None = None) -> str:
    """First two embedding dimensions as labelled points (1-D embeddings sit on a line)."""
    X = np.asarray(coords, dtype=float)
    xs = _scale(X[:, 0], MARGIN + 10, WIDTH - MARGIN - 10)
    ys = _scale(X[:, 1], HEIGHT - MARGIN - 10, MARGIN + 10) if X.shape[1] > 1 else np.full(len(X), HEIGHT / 2)
    body = []
    for i, (x, y) in enumerate(zip(xs, ys)):
        fill = colors[i] if colors else "steelblue"
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{escape(fill)}"/>')
        body.append(f'<text x="{x + 6:.2f}" y="{y - 6:.2f}" font-size="10">{escape(labels[i])}</text>')
    return _frame(body)


def profile_svg(values) -> str:
    v = np.asarray(values, dtype=float)
    xs = _scale(np.arange(len(v)), MARGIN, WIDTH - MARGIN)
    ys = _scale(v, HEIGHT - MARGIN, MARGIN)
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return _frame([f'<polyline points="{points}" fill="none" stroke="steelblue" stroke-width="2"/>'])
