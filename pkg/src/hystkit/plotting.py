"""Plain-text SVG rendering of B-H curves; no external renderer needed.

Output is deterministic: fixed canvas, fixed color cycle, coordinates
formatted to three decimals.
"""

from __future__ import annotations

import numpy as np

__all__ = ["render_bh_svg"]

_WIDTH, _HEIGHT = 840, 620
_MARGIN = 70

# train loop / ground truth / prediction
_COLORS = ("#3465a4", "#cc0000", "#222222")


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def render_bh_svg(curves: list[tuple[str, np.ndarray, np.ndarray]], title: str = "") -> str:
    """Render labelled (H, B) polylines into an SVG document string."""
    if not curves:
        raise ValueError("need at least one curve")
    all_h = np.concatenate([np.asarray(h, dtype=float) for _, h, _ in curves])
    all_b = np.concatenate([np.asarray(b, dtype=float) for _, _, b in curves])
    h_lo, h_hi = float(all_h.min()), float(all_h.max())
    b_lo, b_hi = float(all_b.min()), float(all_b.max())
    h_span = (h_hi - h_lo) or 1.0
    b_span = (b_hi - b_lo) or 1.0

    def sx(h):
        return _MARGIN + (h - h_lo) / h_span * (_WIDTH - 2 * _MARGIN)

    def sy(b):
        return _HEIGHT - _MARGIN - (b - b_lo) / b_span * (_HEIGHT - 2 * _MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_WIDTH - 2 * _MARGIN}" '
        f'height="{_HEIGHT - 2 * _MARGIN}" fill="none" stroke="#888" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH // 2}" y="40" text-anchor="middle" '
            f'font-family="sans-serif" font-size="18">{title}</text>'
        )
    parts.append(
        f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 20}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">H (A/m)</text>'
    )
    parts.append(
        f'<text x="22" y="{_HEIGHT // 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14" transform="rotate(-90 22 {_HEIGHT // 2})">B (T)</text>'
    )

    for k, (label, h, b) in enumerate(curves):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(h, b))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = _MARGIN + 22 + 22 * k
        parts.append(
            f'<line x1="{_WIDTH - _MARGIN - 150}" y1="{ly - 5}" x2="{_WIDTH - _MARGIN - 120}" '
            f'y2="{ly - 5}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_WIDTH - _MARGIN - 112}" y="{ly}" font-family="sans-serif" '
            f'font-size="13">{label}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
