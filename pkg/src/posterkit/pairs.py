"""Preference pairs (best-of-n with reward-gap and alignment gates) and reflection pairs (best-of-6)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

from posterkit.responses import ResponseParseError, load_json_object

REWARD_GAP_THRESHOLD = 0.025
REFLECT_SET_SIZE = 6

GAP_TOO_SMALL = "gap_too_small"
ALIGNMENT_FAIL = "alignment_fail"
MISSING_VERDICT = "missing_verdict"
DEGENERATE = "degenerate_set"

FEEDBACK_CONTENT_KEY = "Poster Content Suggestions"
FEEDBACK_STYLE_KEY = "Aesthetic style optimization suggestions"


class Verdict(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"


class DegenerateSetError(ValueError):
    """All rewards in a candidate set are equal, so no winner/loser split exists."""


@dataclass(frozen=True)
class Candidate:
    image: str
    reward: float


@dataclass(frozen=True)
class CandidateSet:
    prompt_id: str
    candidates: tuple[Candidate, ...]
    prompt: str = ""

    def __post_init__(self) -> None:
        if len(self.candidates) < 2:
            raise ValueError(f"{self.prompt_id}: need at least 2 candidates, got {len(self.candidates)}")
        if not all(math.isfinite(c.reward) for c in self.candidates):
            raise ValueError(f"{self.prompt_id}: non-finite reward")

    @property
    def rewards(self) -> list[float]:
        return [c.reward for c in self.candidates]


@dataclass(frozen=True)
class PreferencePair:
    prompt_id: str
    winner: str
    loser: str
    winner_reward: float
    loser_reward: float
    alignment_verdict: Verdict = Verdict.PASS

    @property
    def reward_gap(self) -> float:
        return self.winner_reward - self.loser_reward

    def to_json(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "winner": self.winner,
            "loser": self.loser,
            "winner_reward": self.winner_reward,
            "loser_reward": self.loser_reward,
            "reward_gap": self.reward_gap,
            "alignment_verdict": self.alignment_verdict.value,
        }


@dataclass(frozen=True)
class Rejection:
    prompt_id: str
    reason: str
    detail: str = ""


def select_extremes(rewards: Sequence[float]) -> tuple[int, int]:
    """Indices of the best and worst reward; ties go to the smallest index."""
    if len(rewards) < 2:
        raise ValueError("need at least two rewards")
    winner = loser = 0
    for i, r in enumerate(rewards):
        if r > rewards[winner]:
            winner = i
        if r < rewards[loser]:
            loser = i
    if rewards[winner] == rewards[loser]:
        raise DegenerateSetError("all rewards are equal")
    return winner, loser


def build_preference_pair(candidates: CandidateSet, verdict: Verdict | None) -> PreferencePair | Rejection:
    """Collapse a candidate set into a winner/loser pair, or explain why not.

    ``verdict`` is the alignment check of the winning candidate.
    """
    try:
        win, lose = select_extremes(candidates.rewards)
    except DegenerateSetError:
        return Rejection(candidates.prompt_id, DEGENERATE)
    winner, loser = candidates.candidates[win], candidates.candidates[lose]
    gap = winner.reward - loser.reward
    if not gap > REWARD_GAP_THRESHOLD:
        return Rejection(candidates.prompt_id, GAP_TOO_SMALL, f"gap={gap:.6g}")
    if verdict is None:
        return Rejection(candidates.prompt_id, MISSING_VERDICT)
    if verdict is not Verdict.PASS:
        return Rejection(candidates.prompt_id, ALIGNMENT_FAIL)
    return PreferencePair(candidates.prompt_id, winner.image, loser.image, winner.reward, loser.reward, verdict)


def parse_verdict(response: str) -> Verdict:
    obj = load_json_object(response)
    value = obj.get("final_decision")
    if value == "1":
        return Verdict.PASS
    if value == "0":
        return Verdict.FAIL
    raise ResponseParseError('final_decision must be "0" or "1"', response[:200])


def parse_best_of_six(response: str) -> int | None:
    """0-based index of the chosen poster, or None when every poster has text flaws."""
    obj = load_json_object(response)
    value = obj.get("best_image")
    if value == "none":
        return None
    if isinstance(value, str) and value in {str(i) for i in range(1, REFLECT_SET_SIZE + 1)}:
        return int(value) - 1
    raise ResponseParseError('best_image must be "1".."6" or "none"', response[:200])


@dataclass(frozen=True)
class Feedback:
    content: str
    style: str


def _lookup(obj: dict, key: str):
    wanted = key.casefold()
    matches = [v for k, v in obj.items() if isinstance(k, str) and k.strip().casefold() == wanted]
    return matches[0] if len(matches) == 1 else None


def parse_feedback(response: str) -> Feedback:
    """Content and style suggestions; key matching ignores case."""
    obj = load_json_object(response)
    content = _lookup(obj, FEEDBACK_CONTENT_KEY)
    style = _lookup(obj, FEEDBACK_STYLE_KEY)
    for key, value in ((FEEDBACK_CONTENT_KEY, content), (FEEDBACK_STYLE_KEY, style)):
        if not isinstance(value, str) or not value.strip():
            raise ResponseParseError(f"missing or empty {key!r}", response[:200])
    return Feedback(content, style)


@dataclass(frozen=True)
class ReflectionPair:
    source: str
    target: str
    feedback_content: str
    feedback_style: str

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "feedback_content": self.feedback_content,
            "feedback_style": self.feedback_style,
        }


@dataclass
class ReflectionSet:
    prompt_id: str
    candidates: tuple[str, ...]
    best_index: int | None
    pairs: list[ReflectionPair] = field(default_factory=list)
    dropped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def discarded(self) -> bool:
        return self.best_index is None or not self.pairs

    def to_json(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "candidates": list(self.candidates),
            "best_index": self.best_index,
            "discarded": self.discarded,
            "pairs": [p.to_json() for p in self.pairs],
            "dropped": [{"source_index": i, "reason": r} for i, r in self.dropped],
        }


def build_reflection_pairs(
    prompt_id: str,
    candidates: Sequence[str],
    best_index: int | None,
    feedback: Sequence[str | Feedback | None] | None = None,
) -> ReflectionSet:
    """Pair each non-best candidate with the best one.

    ``feedback`` is indexed by candidate position (the best slot is ignored);
    entries may be raw response text, an already parsed ``Feedback``, or None
    when no response is available. A pair whose feedback fails to parse is
    dropped on its own.
    """
    if len(candidates) != REFLECT_SET_SIZE:
        raise ValueError(f"{prompt_id}: reflection sets hold exactly {REFLECT_SET_SIZE} candidates")
    result = ReflectionSet(prompt_id, tuple(candidates), best_index)
    if best_index is None:
        return result
    if not 0 <= best_index < REFLECT_SET_SIZE:
        raise ValueError(f"{prompt_id}: best_index {best_index} out of range")
    feedback = list(feedback) if feedback is not None else [None] * REFLECT_SET_SIZE
    if len(feedback) != REFLECT_SET_SIZE:
        raise ValueError(f"{prompt_id}: need one feedback slot per candidate")
    target = candidates[best_index]
    for i, source in enumerate(candidates):
        if i == best_index:
            continue
        item = feedback[i]
        if item is None:
            result.dropped.append((i, "missing_feedback"))
            continue
        if isinstance(item, str):
            try:
                item = parse_feedback(item)
            except ResponseParseError as exc:
                result.dropped.append((i, f"feedback_parse_error: {exc}"))
                continue
        result.pairs.append(ReflectionPair(source, target, item.content, item.style))
    return result
