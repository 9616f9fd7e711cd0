"""Structured prompts describing rendered instances, and the exact inverse parser."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from posterkit.forge.config import PALETTE, FontClass, GenerationConfig, Orientation
from posterkit.forge.layout import POSITION_NAMES, Placement, position_name

NO_TEXT_PROMPT = "The image contains no rendered text."

ORIENTATION_PHRASES = {
    Orientation.HORIZONTAL: "written horizontally",
    Orientation.VERTICAL_ROTATED: "rotated 90 degrees to run vertically",
    Orientation.VERTICAL_STACKED: "vertically stacked with one character per line",
}
TILT_SUFFIX = " with a slight tilt"


@dataclass(frozen=True)
class PromptClause:
    content: str
    cell: tuple[int, int]
    orientation: Orientation
    color: str
    tilted: bool = False
    font_class: FontClass | None = None


def render_clause(clause: PromptClause) -> str:
    orientation = ORIENTATION_PHRASES[clause.orientation] + (TILT_SUFFIX if clause.tilted else "")
    text = (
        f"The text {json.dumps(clause.content, ensure_ascii=False)} is placed at the "
        f"{position_name(clause.cell)}, {orientation}, in {clause.color}"
    )
    if clause.font_class is not None:
        text += f", using a {clause.font_class.value} font"
    return text + "."


def clauses_for(placements: Sequence[Placement], mention_font: Sequence[bool]) -> list[PromptClause]:
    return [
        PromptClause(
            content=p.spec.content,
            cell=p.spec.grid_cell,
            orientation=p.spec.orientation,
            color=p.spec.color_category,
            tilted=p.spec.rotation_deg != 0,
            font_class=p.spec.font_class if mention else None,
        )
        for p, mention in zip(placements, mention_font)
    ]


def join_clauses(clauses: Sequence[PromptClause]) -> str:
    if not clauses:
        return NO_TEXT_PROMPT
    if len(clauses) == 1:
        return render_clause(clauses[0])
    return " ".join(f"{i}. {render_clause(c)}" for i, c in enumerate(clauses, start=1))


def synthesize_prompt(placements: Sequence[Placement], config: GenerationConfig, rng: np.random.Generator) -> str:
    """One clause per placed instance; the font style is mentioned with ``font_mention_probability``."""
    mention = [bool(rng.random() < config.font_mention_probability) for _ in placements]
    return join_clauses(clauses_for(placements, mention))


_JSON_STRING = r'"(?:[^"\\]|\\.)*"'
_CLAUSE = re.compile(
    r"(?:(?P<num>\d+)\. )?The text (?P<content>" + _JSON_STRING + r") is placed at the "
    r"(?P<pos>" + "|".join(sorted(POSITION_NAMES, key=len, reverse=True)) + r"), "
    r"(?P<orient>" + "|".join(re.escape(p) for p in ORIENTATION_PHRASES.values()) + r")"
    r"(?P<tilt>" + re.escape(TILT_SUFFIX) + r")?, "
    r"in (?P<color>" + "|".join(PALETTE) + r")"
    r"(?:, using a (?P<font>" + "|".join(c.value for c in FontClass) + r") font)?\."
)
_PHRASE_TO_ORIENTATION = {v: k for k, v in ORIENTATION_PHRASES.items()}


class PromptParseError(ValueError):
    pass


def parse_prompt(prompt: str) -> list[PromptClause]:
    """Recover the clauses of a synthesized prompt; the fallback prompt yields []."""
    if prompt == NO_TEXT_PROMPT:
        return []
    clauses: list[PromptClause] = []
    pos = 0
    for expected, match in enumerate(_CLAUSE.finditer(prompt), start=1):
        if match.start() != pos:
            raise PromptParseError(f"unparseable text at offset {pos}: {prompt[pos:match.start()]!r}")
        clauses.append(
            PromptClause(
                content=json.loads(match["content"]),
                cell=POSITION_NAMES[match["pos"]],
                orientation=_PHRASE_TO_ORIENTATION[match["orient"]],
                color=match["color"],
                tilted=match["tilt"] is not None,
                font_class=FontClass(match["font"]) if match["font"] else None,
            )
        )
        numbered = match["num"] is not None
        if numbered and int(match["num"]) != expected:
            raise PromptParseError(f"clause numbered {match['num']}, expected {expected}")
        pos = match.end()
        if pos < len(prompt) and prompt[pos] == " ":
            pos += 1
    if pos != len(prompt) or not clauses:
        raise PromptParseError(f"unparseable prompt tail: {prompt[pos:]!r}")
    if len(clauses) > 1 and not prompt.startswith("1. "):
        raise PromptParseError("multi-instance prompts must be numbered")
    return clauses
