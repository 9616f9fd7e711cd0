"""Text-region masks: response parsing, Major/Minor classification, weight-map rasterization."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from posterkit.responses import ResponseParseError, load_json_object

NORMALIZED_EXTENT = 1000
MAJOR_FRACTION_THRESHOLD = 0.05


class SizeClass(str, enum.Enum):
    MAJOR = "major"
    MINOR = "minor"


# background, large text, small text
BACKGROUND_WEIGHT = 1.0
CLASS_WEIGHTS = {SizeClass.MAJOR: 0.6, SizeClass.MINOR: 0.2}
# 8-bit encoding of the weight map on disk
WEIGHT_TO_LEVEL = {0.2: 51, 0.6: 153, 1.0: 255}


@dataclass(frozen=True)
class TextRegionMask:
    box_2d: tuple[int, int, int, int]  # ymin, xmin, ymax, xmax in [0, 1000]
    size_class: SizeClass

    @property
    def area_fraction(self) -> float:
        return box_area_fraction(self.box_2d)

    def to_json(self) -> dict:
        return {"box_2d": list(self.box_2d), "size_class": self.size_class.value, "area_fraction": self.area_fraction}


def validate_box(box: object) -> tuple[int, int, int, int]:
    if not isinstance(box, (list, tuple)) or len(box) != 4:
        raise ResponseParseError("box must be a list of four integers", json.dumps(box))
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in box):
        raise ResponseParseError("box coordinates must be integers", json.dumps(box))
    ymin, xmin, ymax, xmax = box
    if not all(0 <= v <= NORMALIZED_EXTENT for v in box):
        raise ResponseParseError("box coordinate outside [0, 1000]", json.dumps(box))
    if ymin >= ymax or xmin >= xmax:
        raise ResponseParseError("box min must be below max on both axes", json.dumps(box))
    return ymin, xmin, ymax, xmax


def parse_text_regions(response: str) -> list[tuple[int, int, int, int]]:
    obj = load_json_object(response)
    if "text_regions" not in obj:
        raise ResponseParseError("missing key 'text_regions'", response[:200])
    regions = obj["text_regions"]
    if not isinstance(regions, list):
        raise ResponseParseError("'text_regions' must be a list", json.dumps(regions)[:200])
    return [validate_box(box) for box in regions]


def box_area_fraction(box: Sequence[int]) -> float:
    ymin, xmin, ymax, xmax = box
    return (ymax - ymin) * (xmax - xmin) / NORMALIZED_EXTENT**2


def classify_mask(box: Sequence[int], major_fraction_threshold: float = MAJOR_FRACTION_THRESHOLD) -> SizeClass:
    """Per-box classification; the boundary area counts as Major."""
    return SizeClass.MAJOR if box_area_fraction(box) >= major_fraction_threshold else SizeClass.MINOR


def build_masks(
    boxes: Sequence[Sequence[int]], major_fraction_threshold: float = MAJOR_FRACTION_THRESHOLD
) -> list[TextRegionMask]:
    return [TextRegionMask(tuple(b), classify_mask(b, major_fraction_threshold)) for b in boxes]


def pixel_span(lo: int, hi: int, size: int) -> tuple[int, int]:
    """Half-open pixel range covered by a normalized interval; min floors, max ceils."""
    return lo * size // NORMALIZED_EXTENT, -(-hi * size // NORMALIZED_EXTENT)


def rasterize_weight_map(masks: Sequence[TextRegionMask], width: int, height: int) -> np.ndarray:
    """Per-pixel loss weights, shape (height, width); overlapping masks keep the smaller weight."""
    if width < 1 or height < 1:
        raise ValueError(f"canvas must be at least 1x1, got {width}x{height}")
    grid = np.full((height, width), BACKGROUND_WEIGHT, dtype=np.float64)
    for mask in masks:
        ymin, xmin, ymax, xmax = mask.box_2d
        y0, y1 = pixel_span(ymin, ymax, height)
        x0, x1 = pixel_span(xmin, xmax, width)
        region = grid[y0:y1, x0:x1]
        np.minimum(region, CLASS_WEIGHTS[mask.size_class], out=region)
    return grid


def encode_weight_map(grid: np.ndarray) -> Image.Image:
    levels = np.full(grid.shape, 255, dtype=np.uint8)
    for weight, level in WEIGHT_TO_LEVEL.items():
        levels[np.isclose(grid, weight)] = level
    return Image.fromarray(levels)


def decode_weight_map(image: Image.Image) -> np.ndarray:
    levels = np.asarray(image.convert("L"))
    grid = np.full(levels.shape, np.nan)
    for weight, level in WEIGHT_TO_LEVEL.items():
        grid[levels == level] = weight
    if np.isnan(grid).any():
        raise ValueError("weight map image contains levels outside the known mapping")
    return grid


def save_weight_map(grid: np.ndarray, path: str | Path) -> None:
    """Write the weight map PNG and a ``.json`` sidecar describing the level mapping."""
    path = Path(path)
    encode_weight_map(grid).save(path, format="PNG")
    sidecar = {
        "encoding": "uint8 grayscale",
        "mapping": {f"{w:.1f}": level for w, level in WEIGHT_TO_LEVEL.items()},
        "height": int(grid.shape[0]),
        "width": int(grid.shape[1]),
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8")
