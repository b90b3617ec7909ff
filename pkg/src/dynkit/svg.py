"""Deterministic SVG rendering of 2D box sets, polylines and point clouds.

Fixed 1000x1000 canvas, fixed 8-color palette indexed by series, fixed
coordinate formatting; no timestamps or library metadata, so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import numpy as np

__all__ = ["emit_plot", "PALETTE", "CANVAS"]

CANVAS = 1000
PALETTE = (
    "#1f6fb4", "#d95f02", "#1b9e77", "#7570b3",
    "#e7298a", "#66a61e", "#e6ab02", "#666666",
)


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _project(pts: np.ndarray, lower, upper) -> np.ndarray:
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    scaled = (pts - lo) / (hi - lo) * CANVAS
    out = scaled.copy()
    out[..., 1] = CANVAS - scaled[..., 1]  # y axis up
    return out


def emit_plot(layers, path, lower, upper):
    """Write an SVG composed of layers over the window [lower, upper].

    Each layer is a dict with "kind" in {"boxset", "polyline", "cloud"}
    and "data": a BoxSet, an (n, 2) vertex array, or an (n, 2) point
    array.  Only 2D data is accepted.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if lo.shape != (2,) or hi.shape != (2,):
        raise ValueError("emit_plot renders 2D windows only")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" '
        f'height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="#ffffff"/>',
    ]
    for i, layer in enumerate(layers):
        kind = layer["kind"]
        color = PALETTE[layer.get("color", i) % len(PALETTE)]
        if kind == "boxset":
            boxset = layer["data"]
            grid = boxset.grid
            if grid.dim != 2:
                raise ValueError("emit_plot renders 2D data only")
            w = grid.h / (hi - lo) * CANVAS
            for b in boxset.indices():
                blo = grid.box_lower(int(b))
                corner = _project(blo[None, :], lo, hi)[0]
                parts.append(
                    f'<rect x="{_fmt(corner[0])}" y="{_fmt(corner[1] - w[1])}" '
                    f'width="{_fmt(w[0])}" height="{_fmt(w[1])}" '
                    f'fill="{color}" fill-opacity="0.6"/>')
        elif kind == "polyline":
            pts = np.asarray(layer["data"], dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2:
                raise ValueError("emit_plot renders 2D data only")
            if pts.shape[0] >= 2:
                proj = _project(pts, lo, hi)
                # break strokes at window wraps
                jumps = np.linalg.norm(np.diff(proj, axis=0), axis=1)
                cuts = np.nonzero(jumps > CANVAS / 2)[0]
                start = 0
                pieces = []
                for c in list(cuts) + [proj.shape[0] - 1]:
                    if c + 1 > start + 1:
                        pieces.append(proj[start:c + 1])
                    start = c + 1
                for piece in pieces:
                    d = "M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in piece)
                    parts.append(f'<path d="{d}" stroke="{color}" '
                                 f'stroke-width="1.5" fill="none"/>')
        elif kind == "cloud":
            pts = np.asarray(layer["data"], dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2:
                raise ValueError("emit_plot renders 2D data only")
            for x, y in _project(pts, lo, hi):
                parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" '
                             f'fill="{color}"/>')
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
