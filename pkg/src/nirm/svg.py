"""Standalone SVG rendering: latent-space scatter and similarity network.

No plotting dependency; output is deterministic for fixed inputs so exports
can be compared byte for byte.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["force_layout", "scatter_svg", "network_svg"]

_RAMP = [(44, 123, 182), (255, 255, 191), (215, 25, 28)]  # low -> mid -> high


def _ramp_color(t: float) -> str:
    t = min(1.0, max(0.0, t))
    if t < 0.5:
        a, b, frac = _RAMP[0], _RAMP[1], t * 2.0
    else:
        a, b, frac = _RAMP[1], _RAMP[2], (t - 0.5) * 2.0
    rgb = [round(x + (y - x) * frac) for x, y in zip(a, b)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _canvas(points: np.ndarray, size: int, margin: int):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    scale = (size - 2 * margin) / span.max()

    def to_px(p):
        return (
            margin + (p[0] - lo[0]) * scale,
            size - margin - (p[1] - lo[1]) * scale,
        )

    return to_px


def _as_planar(points: np.ndarray) -> np.ndarray:
    """First two coordinates, zero-padded for one-dimensional spaces."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be 2-d")
    if points.shape[1] == 1:
        return np.column_stack([points[:, 0], np.zeros(points.shape[0])])
    return points[:, :2]


def force_layout(
    n_nodes: int,
    edges: list[tuple[int, int, float]],
    seed: int,
    iterations: int = 150,
) -> np.ndarray:
    """Fruchterman-Reingold style spring layout with seeded initialization.

    Edge weights scale the attractive force; the temperature schedule cools
    linearly.  Purely cosmetic: only the exported edge weights are contractual.
    """
    rng = np.random.default_rng(seed)
    pos = rng.random((n_nodes, 2))
    if n_nodes <= 1:
        return pos
    k = math.sqrt(1.0 / n_nodes)
    temperature = 0.1
    cool = temperature / (iterations + 1)
    for _ in range(iterations):
        disp = np.zeros((n_nodes, 2))
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        repulse = k * k / dist**2
        disp += (diff * repulse[:, :, None]).sum(axis=1)
        for a, b, w in edges:
            d = pos[a] - pos[b]
            norm = math.sqrt(float(d @ d)) or 1e-9
            pull = w * norm / k
            step = d / norm * pull
            disp[a] -= step
            disp[b] += step
        lengths = np.sqrt((disp**2).sum(axis=1))
        lengths[lengths == 0] = 1.0
        capped = np.minimum(lengths, temperature)
        pos += disp / lengths[:, None] * capped[:, None]
        temperature -= cool
    return pos


def scatter_svg(
    person_points: np.ndarray,
    person_scores: np.ndarray,
    item_points: np.ndarray,
    item_labels: list[str],
    *,
    size: int = 640,
    margin: int = 40,
    title: str = "latent space",
) -> str:
    """Joint scatter: persons as score-colored dots, items as labeled marks."""
    persons = _as_planar(person_points)
    items = _as_planar(item_points)
    to_px = _canvas(np.vstack([persons, items]), size, margin)

    smin = float(person_scores.min())
    srange = float(person_scores.max() - smin) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{margin}" y="{margin // 2 + 6}" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
    ]
    for k in range(persons.shape[0]):
        x, y = to_px(persons[k])
        color = _ramp_color((float(person_scores[k]) - smin) / srange)
        parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{color}" '
            f'fill-opacity="0.75"/>'
        )
    for i in range(items.shape[0]):
        x, y = to_px(items[i])
        parts.append(
            f'<rect x="{_fmt(x - 4)}" y="{_fmt(y - 4)}" width="8" height="8" '
            f'fill="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(x + 6)}" y="{_fmt(y - 6)}" font-family="sans-serif" '
            f'font-size="12" fill="black">{item_labels[i]}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def network_svg(
    labels: list[str],
    edges: list[tuple[int, int, float]],
    seed: int,
    *,
    size: int = 640,
    margin: int = 50,
    title: str = "similarity network",
) -> str:
    """Force-directed similarity network; edge width tracks the weight."""
    n = len(labels)
    layout = force_layout(n, edges, seed)
    to_px = _canvas(layout, size, margin)
    wmax = max((w for _, _, w in edges), default=1.0) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{margin}" y="{margin // 2 + 6}" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
    ]
    for a, b, w in edges:
        xa, ya = to_px(layout[a])
        xb, yb = to_px(layout[b])
        width = 0.5 + 2.5 * (w / wmax)
        parts.append(
            f'<line x1="{_fmt(xa)}" y1="{_fmt(ya)}" x2="{_fmt(xb)}" '
            f'y2="{_fmt(yb)}" stroke="#4a7aa7" stroke-opacity="0.7" '
            f'stroke-width="{_fmt(width)}"/>'
        )
    for i in range(n):
        x, y = to_px(layout[i])
        parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="10" fill="#f2f2f2" '
            f'stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y + 4)}" font-family="sans-serif" '
            f'font-size="10" text-anchor="middle">{labels[i]}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
