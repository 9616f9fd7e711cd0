"""Synthetic text-rendering samples: content, fonts, grid layout, compositing, prompts."""

from posterkit.forge.config import Alignment, FontClass, GenerationConfig, Orientation, PALETTE
from posterkit.forge.content import Grammar, generate_text_content
from posterkit.forge.fonts import FontCoverageError, FontEntry, FontLibrary, select_font
from posterkit.forge.layout import Placement, TextInstanceSpec, cell_bounds, plan_layout
from posterkit.forge.prompt import NO_TEXT_PROMPT, parse_prompt, synthesize_prompt
from posterkit.forge.render import BackgroundSource, Typesetter, render_sample
from posterkit.forge.sample import ForgeAssets, RenderedSample, generate_sample, sample_seed

__all__ = [
    "Alignment",
    "BackgroundSource",
    "FontClass",
    "FontCoverageError",
    "FontEntry",
    "FontLibrary",
    "ForgeAssets",
    "GenerationConfig",
    "Grammar",
    "NO_TEXT_PROMPT",
    "Orientation",
    "PALETTE",
    "Placement",
    "RenderedSample",
    "TextInstanceSpec",
    "Typesetter",
    "cell_bounds",
    "generate_sample",
    "generate_text_content",
    "parse_prompt",
    "plan_layout",
    "render_sample",
    "sample_seed",
    "select_font",
    "synthesize_prompt",
]
