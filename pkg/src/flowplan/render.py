"""Frame renderers for message tensors.

ASCII legend (one character per cell):

    ==========  =========================================
    ``#``       obstacle
    (space)     no probability mass
    ``+``       uniform action distribution on that cell
    ``·``       most probable action is "still"
    ``^ u > n v b < p``  argmax action up, up-right, right,
                down-right, down, down-left, left, up-left
    ==========  =========================================

The pixmap mode emits a binary PPM (P6) whose blue channel is the cell
marginal scaled by the frame maximum; obstacles are mid gray and action
information is dropped.
"""

from __future__ import annotations

import numpy as np

from .engine import MessageTensor
from .grid import GridMap

#: argmax glyph per action index (0 = still, then the 8 directions)
GLYPHS = ("·", "^", "u", ">", "n", "v", "b", "<", "p")

_UNIFORM_TOL = 1e-12


def render_frame(
    tensor: MessageTensor, grid: GridMap, format: str = "ascii"
) -> bytes:
    """Render one message tensor as UTF-8 ASCII art or a P6 pixmap."""
    if format == "ascii":
        return _render_ascii(tensor.values, grid)
    if format == "pixmap":
        return _render_pixmap(tensor.values.sum(axis=2), grid)
    raise ValueError(f"unknown format {format!r}")


def _render_ascii(values: np.ndarray, grid: GridMap) -> bytes:
    rows = []
    for i in range(grid.rows):
        chars = []
        for j in range(grid.cols):
            if grid.mask[i, j]:
                chars.append("#")
                continue
            dist = values[i, j]
            total = dist.sum()
            if total == 0.0:
                chars.append(" ")
                continue
            p = dist / total
            if p.max() - p.min() <= _UNIFORM_TOL:
                chars.append("+")
            else:
                chars.append(GLYPHS[int(np.argmax(p))])
        rows.append("".join(chars))
    return ("\n".join(rows) + "\n").encode("utf-8")


def _render_pixmap(marginal: np.ndarray, grid: GridMap) -> bytes:
    peak = marginal.max()
    blue = np.zeros_like(marginal)
    if peak > 0.0:
        blue = np.round(255.0 * marginal / peak)
    pixels = np.zeros((grid.rows, grid.cols, 3), dtype=np.uint8)
    pixels[:, :, 2] = blue.astype(np.uint8)
    pixels[grid.mask == 1] = 128
    header = f"P6\n{grid.cols} {grid.rows}\n255\n".encode("ascii")
    return header + pixels.tobytes()
