from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from typing import Any, Mapping

from posterkit.errors import ConfigError


class FontClass(str, enum.Enum):
    CLASSIC = "classic"
    STYLIZED = "stylized"


class Orientation(str, enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL_ROTATED = "vertical_rotated"
    VERTICAL_STACKED = "vertical_stacked"


class Alignment(str, enum.Enum):
    LEFT = "left"
    CENTER = "center"
    RIGHT = "right"


# RGB targets; rendered colors are jittered around these per instance
PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (220, 30, 40),
    "orange": (245, 140, 20),
    "yellow": (250, 215, 30),
    "green": (40, 170, 60),
    "cyan": (30, 200, 210),
    "blue": (30, 70, 210),
    "purple": (130, 50, 180),
    "pink": (240, 110, 170),
    "brown": (120, 70, 30),
    "white": (245, 245, 245),
    "black": (15, 15, 15),
    "gray": (128, 128, 128),
}
COLOR_JITTER = 16


@dataclass(frozen=True)
class GenerationConfig:
    instance_count_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    alphanumeric_fraction: float = 0.15
    stylized_font_fraction: float = 0.5
    font_mention_probability: float = 0.5
    rotation_probability: float = 0.10
    rotation_range_deg: tuple[float, float] = (-15.0, 15.0)
    max_placement_attempts: int = 5
    shrink_from_attempt: int = 3
    shrink_factor: float = 0.9
    collision_padding_px: int = 4
    wrap_width_fraction: float = 0.9
    max_wrap_lines: int = 3
    # horizontal, vertical_rotated, vertical_stacked
    orientation_weights: tuple[float, float, float] = (0.7, 0.15, 0.15)
    vertical_max_chars: int = 10
    font_size_fraction: tuple[float, float] = (0.03, 0.09)
    master_seed: int = 0
    canvas_size: tuple[int, int] = (1024, 1024)

    def __post_init__(self) -> None:
        probs = {
            "alphanumeric_fraction": self.alphanumeric_fraction,
            "stylized_font_fraction": self.stylized_font_fraction,
            "font_mention_probability": self.font_mention_probability,
            "rotation_probability": self.rotation_probability,
        }
        for name, value in probs.items():
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        for name in ("instance_count_weights", "orientation_weights"):
            weights = getattr(self, name)
            if len(weights) != 3 or any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
                raise ConfigError(f"{name} must be three non-negative weights summing to 1, got {weights}")
        if self.max_placement_attempts < 1:
            raise ConfigError("max_placement_attempts must be >= 1")
        lo, hi = self.rotation_range_deg
        if lo > hi:
            raise ConfigError(f"rotation_range_deg is inverted: {self.rotation_range_deg}")
        w, h = self.canvas_size
        if w < 256 or h < 256:
            raise ConfigError(f"canvas must be at least 256x256, got {w}x{h}")
        flo, fhi = self.font_size_fraction
        if not 0 < flo <= fhi < 1:
            raise ConfigError(f"font_size_fraction must satisfy 0 < lo <= hi < 1, got {self.font_size_fraction}")
        if not 0 < self.shrink_factor <= 1:
            raise ConfigError("shrink_factor must be in (0, 1]")

    @classmethod
    def from_mapping(cls, params: Mapping[str, Any]) -> "GenerationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(params) - known
        if unknown:
            raise ConfigError(f"unknown generation parameters: {sorted(unknown)}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_mapping(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}
