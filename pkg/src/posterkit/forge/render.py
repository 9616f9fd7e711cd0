"""Glyph rasterization of text instances and compositing onto backgrounds."""

from __future__ import annotations

import math
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from posterkit.errors import ConfigError
from posterkit.forge.config import Orientation
from posterkit.forge.fonts import FontLibrary
from posterkit.forge.layout import Placement, TextInstanceSpec

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
LINE_SPACING = 4


@lru_cache(maxsize=256)
def _load_font(path: str, size: int) -> ImageFont.FreeTypeFont:
    return ImageFont.truetype(path, size)


def wrap_lines(text: str, font: ImageFont.FreeTypeFont, max_width: int, max_lines: int) -> list[str]:
    """Greedy word wrap; overflow beyond ``max_lines`` stays on the last line."""
    if font.getlength(text) <= max_width:
        return [text]
    lines: list[str] = []
    current = ""
    for word in text.split(" "):
        candidate = f"{current} {word}" if current else word
        if current and font.getlength(candidate) > max_width and len(lines) < max_lines - 1:
            lines.append(current)
            current = word
        else:
            current = candidate
    lines.append(current)
    return lines


class Typesetter:
    """Renders a text instance into a tight 8-bit coverage mask.

    The mask size is the instance's bounding box, so measuring and rendering
    share one code path.
    """

    def __init__(self, library: FontLibrary, max_wrap_lines: int = 3) -> None:
        self.library = library
        self.max_wrap_lines = max_wrap_lines

    def layout_text(self, spec: TextInstanceSpec, wrap_width: int) -> str:
        font = _load_font(self.library[spec.font_id].path, spec.font_size_px)
        if spec.orientation is Orientation.VERTICAL_STACKED:
            return "\n".join(spec.content)
        if spec.orientation is Orientation.HORIZONTAL:
            return "\n".join(wrap_lines(spec.content, font, wrap_width, self.max_wrap_lines))
        return spec.content

    def mask(self, spec: TextInstanceSpec, wrap_width: int) -> Image.Image | None:
        font = _load_font(self.library[spec.font_id].path, spec.font_size_px)
        text = self.layout_text(spec, wrap_width)
        align = "center" if spec.orientation is Orientation.VERTICAL_STACKED else spec.alignment.value
        probe = ImageDraw.Draw(Image.new("L", (1, 1)))
        bbox = probe.multiline_textbbox((0, 0), text, font=font, align=align, spacing=LINE_SPACING)
        left, top = math.floor(bbox[0]), math.floor(bbox[1])
        right, bottom = math.ceil(bbox[2]), math.ceil(bbox[3])
        if right <= left or bottom <= top:
            return None
        tile = Image.new("L", (right - left, bottom - top), 0)
        ImageDraw.Draw(tile).multiline_text((-left, -top), text, font=font, fill=255, align=align, spacing=LINE_SPACING)
        if spec.orientation is Orientation.VERTICAL_ROTATED:
            tile = tile.transpose(Image.Transpose.ROTATE_90)
        elif spec.rotation_deg:
            tile = tile.rotate(spec.rotation_deg, resample=Image.Resampling.BICUBIC, expand=True)
        bbox = tile.getbbox()
        if bbox is None:
            return None
        return tile.crop(bbox)

    def measure(self, spec: TextInstanceSpec, wrap_width: int) -> tuple[int, int, Image.Image] | None:
        tile = self.mask(spec, wrap_width)
        if tile is None:
            return None
        return tile.width, tile.height, tile


def render_sample(
    background: Image.Image,
    placements: Sequence[Placement],
    typesetter: Typesetter | None = None,
    canvas_size: tuple[int, int] | None = None,
) -> tuple[Image.Image, list[tuple[int, int, int, int]]]:
    """Composite placements onto ``background``; returns the image and the ground-truth boxes.

    Only pixels inside a placement box can change.
    """
    canvas_size = canvas_size or background.size
    image = fit_background(background, canvas_size)
    boxes = []
    for placement in placements:
        tile = placement.mask
        if tile is None:
            if typesetter is None:
                raise ValueError("placement carries no mask and no typesetter was given")
            tile = typesetter.mask(placement.spec, placement.wrap_width)
        x0, y0, x1, y1 = placement.box
        if tile is None or tile.size != (x1 - x0, y1 - y0):
            raise ValueError(f"rendered text does not match planned box {placement.box}")
        image.paste(placement.spec.color_rgb, placement.box, tile)
        boxes.append(placement.box)
    return image, boxes


def fit_background(background: Image.Image, canvas_size: tuple[int, int]) -> Image.Image:
    """Center-crop to the canvas; backgrounds smaller than the canvas are rejected."""
    width, height = canvas_size
    if background.width < width or background.height < height:
        raise ConfigError(f"background {background.size} is smaller than canvas {canvas_size}")
    image = background.convert("RGB")
    if image.size != canvas_size:
        left = (image.width - width) // 2
        top = (image.height - height) // 2
        image = image.crop((left, top, left + width, top + height))
    elif image is background:
        image = image.copy()
    return image


def procedural_background(rng: np.random.Generator, canvas_size: tuple[int, int]) -> Image.Image:
    """Smooth multi-color field: a small random color grid upsampled bilinearly."""
    cells = int(rng.integers(2, 6))
    grid = rng.integers(0, 256, size=(cells, cells, 3), dtype=np.uint8)
    return Image.fromarray(grid).resize(canvas_size, Image.Resampling.BILINEAR)


class BackgroundSource:
    """Background images from a directory, or procedural ones when no directory is given."""

    def __init__(self, directory: Path | str | None = None) -> None:
        self.paths: list[Path] = []
        if directory is not None:
            directory = Path(directory)
            if not directory.is_dir():
                raise ConfigError(f"background directory {directory} does not exist")
            self.paths = sorted(p for p in directory.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES)
            if not self.paths:
                raise ConfigError(f"no PNG/JPEG backgrounds in {directory}")
            self.root = directory

    def draw(self, rng: np.random.Generator, canvas_size: tuple[int, int]) -> tuple[str, Image.Image]:
        if not self.paths:
            return "procedural", procedural_background(rng, canvas_size)
        path = self.paths[int(rng.integers(len(self.paths)))]
        with Image.open(path) as im:
            im.load()
            image = im.convert("RGB")
        return path.relative_to(self.root).as_posix(), image
