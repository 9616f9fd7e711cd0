"""End-to-end generation of one rendered sample from (master seed, sample index)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from posterkit.forge.config import PALETTE, COLOR_JITTER, Alignment, GenerationConfig, Orientation
from posterkit.forge.content import Grammar, generate_text_content
from posterkit.forge.fonts import FontCoverageError, FontLibrary, select_font
from posterkit.forge.layout import ALL_CELLS, Placement, TextInstanceSpec, plan_layout
from posterkit.forge.prompt import synthesize_prompt
from posterkit.forge.render import BackgroundSource, Typesetter, render_sample

SCHEMA_VERSION = 1
_ORIENTATIONS = (Orientation.HORIZONTAL, Orientation.VERTICAL_ROTATED, Orientation.VERTICAL_STACKED)
_ALIGNMENTS = tuple(Alignment)
_COLOR_NAMES = tuple(PALETTE)


def sample_seed(master_seed: int, index: int) -> int:
    """64-bit per-sample seed; depends only on (master_seed, index)."""
    seq = np.random.SeedSequence(master_seed & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(index,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass
class RenderedSample:
    index: int
    seed: int
    image: Image.Image
    placements: list[Placement]
    prompt: str
    background_id: str
    requested_instances: int

    @property
    def sample_id(self) -> str:
        return f"{self.index:08d}"

    def manifest_record(self, image_path: str | None = None) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.sample_id,
            "image": image_path,
            "background_id": self.background_id,
            "seed": self.seed,
            "prompt": self.prompt,
            "requested_instances": self.requested_instances,
            "instances": [
                {
                    "content": p.spec.content,
                    "box": list(p.box),
                    "orientation": p.spec.orientation.value,
                    "color": p.spec.color_category,
                    "font_id": p.spec.font_id,
                    "font_class": p.spec.font_class.value,
                    "cell": list(p.spec.grid_cell),
                    "alignment": p.spec.alignment.value,
                    "rotation_deg": p.spec.rotation_deg,
                    "font_size_px": p.spec.font_size_px,
                    "attempts": p.attempts,
                }
                for p in self.placements
            ],
        }


@dataclass
class ForgeAssets:
    library: FontLibrary
    grammar: Grammar
    backgrounds: BackgroundSource

    def __post_init__(self) -> None:
        self.typesetter = Typesetter(self.library)


def jitter_color(rng: np.random.Generator, name: str) -> tuple[int, int, int]:
    base = np.array(PALETTE[name])
    offset = rng.integers(-COLOR_JITTER, COLOR_JITTER + 1, size=3)
    return tuple(int(v) for v in np.clip(base + offset, 0, 255))


def draw_specs(rng: np.random.Generator, config: GenerationConfig, assets: ForgeAssets) -> tuple[int, list[TextInstanceSpec]]:
    """Sample the requested instance count and a spec per instance.

    Instances whose content no font can render are skipped here; the
    requested count is still reported.
    """
    count = int(rng.choice(3, p=config.instance_count_weights)) + 1
    cell_order = rng.permutation(len(ALL_CELLS))
    height = config.canvas_size[1]
    lo = max(8, int(height * config.font_size_fraction[0]))
    hi = max(lo, int(height * config.font_size_fraction[1]))
    specs = []
    for k in range(count):
        content = generate_text_content(rng, config, assets.grammar)
        try:
            font = select_font(rng, assets.library, content, config)
        except FontCoverageError:
            continue
        orientation = _ORIENTATIONS[int(rng.choice(3, p=config.orientation_weights))]
        if orientation is not Orientation.HORIZONTAL and len(content) > config.vertical_max_chars:
            orientation = Orientation.HORIZONTAL
        rotation = 0.0
        if orientation is Orientation.HORIZONTAL and rng.random() < config.rotation_probability:
            rotation = round(float(rng.uniform(*config.rotation_range_deg)), 2)
        color = _COLOR_NAMES[int(rng.integers(len(_COLOR_NAMES)))]
        specs.append(
            TextInstanceSpec(
                content=content,
                font_id=font.font_id,
                font_class=font.font_class,
                color_category=color,
                color_rgb=jitter_color(rng, color),
                orientation=orientation,
                alignment=_ALIGNMENTS[int(rng.integers(len(_ALIGNMENTS)))],
                rotation_deg=rotation,
                grid_cell=ALL_CELLS[int(cell_order[k])],
                font_size_px=int(rng.integers(lo, hi + 1)),
            )
        )
    return count, specs


def generate_sample(index: int, config: GenerationConfig, assets: ForgeAssets) -> RenderedSample:
    seed = sample_seed(config.master_seed, index)
    rng = np.random.default_rng(seed)
    background_id, background = assets.backgrounds.draw(rng, config.canvas_size)
    requested, specs = draw_specs(rng, config, assets)
    placements = plan_layout(config.canvas_size, specs, rng, config, assets.typesetter.measure)
    image, _ = render_sample(background, placements, assets.typesetter, config.canvas_size)
    prompt = synthesize_prompt(placements, config, rng)
    return RenderedSample(index, seed, image, placements, prompt, background_id, requested)
