"""3x3 grid placement with padded bounding-box collision checks and retry/shrink."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from posterkit.forge.config import Alignment, FontClass, GenerationConfig, Orientation

GRID = 3
ROW_NAMES = ("top", "middle", "bottom")
COL_NAMES = ("left", "center", "right")


def position_name(cell: tuple[int, int]) -> str:
    row, col = cell
    if (row, col) == (1, 1):
        return "center"
    return f"{ROW_NAMES[row]} {COL_NAMES[col]}"


POSITION_NAMES = {position_name((r, c)): (r, c) for r in range(GRID) for c in range(GRID)}
ALL_CELLS = tuple((r, c) for r in range(GRID) for c in range(GRID))


@dataclass(frozen=True)
class TextInstanceSpec:
    content: str
    font_id: str
    font_class: FontClass
    color_category: str
    color_rgb: tuple[int, int, int]
    orientation: Orientation
    alignment: Alignment
    rotation_deg: float
    grid_cell: tuple[int, int]  # (row, col)
    font_size_px: int

    def __post_init__(self) -> None:
        if not self.content:
            raise ValueError("text content must be non-empty")
        if self.orientation is not Orientation.HORIZONTAL and self.rotation_deg != 0:
            raise ValueError("only horizontal text may carry a rotation")
        if not all(0 <= v < GRID for v in self.grid_cell):
            raise ValueError(f"grid cell {self.grid_cell} outside the 3x3 grid")
        if self.font_size_px < 1:
            raise ValueError("font size must be positive")


Box = tuple[int, int, int, int]  # x0, y0, x1, y1; half-open


@dataclass(frozen=True)
class Placement:
    spec: TextInstanceSpec  # grid_cell and font_size_px reflect the accepted attempt
    box: Box
    attempts: int
    wrap_width: int
    mask: Any = field(default=None, compare=False, repr=False)


# measure(spec, wrap_width) -> (width, height, optional pre-rendered mask) or None if unrenderable
Measure = Callable[[TextInstanceSpec, int], "tuple[int, int, Any] | None"]


def cell_bounds(canvas: tuple[int, int], cell: tuple[int, int]) -> Box:
    """Pixel region of a grid cell; partition edges at ceil(k * size / 3)."""
    width, height = canvas
    row, col = cell

    def edge(k: int, size: int) -> int:
        return -(-k * size // GRID)

    return edge(col, width), edge(row, height), edge(col + 1, width), edge(row + 1, height)


def boxes_overlap(a: Box, b: Box) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def inflate(box: Box, pad: int) -> Box:
    return box[0] - pad, box[1] - pad, box[2] + pad, box[3] + pad


def wrap_width_for(canvas: tuple[int, int], cell: tuple[int, int], config: GenerationConfig) -> int:
    x0, _, x1, _ = cell_bounds(canvas, cell)
    return int((x1 - x0) * config.wrap_width_fraction)


def plan_layout(
    canvas: tuple[int, int],
    specs: Sequence[TextInstanceSpec],
    rng: np.random.Generator,
    config: GenerationConfig,
    measure: Measure,
) -> list[Placement]:
    """Place instances in order; each must fit inside its cell and clear earlier boxes.

    A failed attempt (does not fit, or collides) moves the instance to a
    different random cell; from attempt ``config.shrink_from_attempt`` on the
    font size is also scaled by ``config.shrink_factor`` per retry. Instances
    that exhaust ``config.max_placement_attempts`` are dropped.
    """
    placed: list[Placement] = []
    for spec in specs:
        cell = spec.grid_cell
        for attempt in range(1, config.max_placement_attempts + 1):
            if attempt > 1:
                others = [c for c in ALL_CELLS if c != cell]
                cell = others[int(rng.integers(len(others)))]
            shrink_steps = max(0, attempt - config.shrink_from_attempt + 1)
            size = max(1, int(round(spec.font_size_px * config.shrink_factor**shrink_steps)))
            trial = replace(spec, grid_cell=cell, font_size_px=size)
            wrap = wrap_width_for(canvas, cell, config)
            measured = measure(trial, wrap)
            if measured is None:
                continue
            w, h, mask = measured
            cx0, cy0, cx1, cy1 = cell_bounds(canvas, cell)
            if w > cx1 - cx0 or h > cy1 - cy0:
                continue
            x = cx0 + int(rng.integers(cx1 - cx0 - w + 1))
            y = cy0 + int(rng.integers(cy1 - cy0 - h + 1))
            box = (x, y, x + w, y + h)
            padded = inflate(box, config.collision_padding_px)
            if any(boxes_overlap(padded, p.box) for p in placed):
                continue
            placed.append(Placement(trial, box, attempt, wrap, mask))
            break
    return placed
