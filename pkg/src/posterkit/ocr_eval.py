"""Character-level OCR scoring: normalization, alignment counts, derived metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from posterkit.responses import ResponseParseError, load_json_object

PUNCTUATION = frozenset(".,;:!?'\"-()[]{}…`")


@dataclass(frozen=True)
class AlignmentCounts:
    correct: int
    insertions: int
    deletions: int
    substitutions: int

    def __post_init__(self) -> None:
        if min(self.correct, self.insertions, self.deletions, self.substitutions) < 0:
            raise ValueError(f"negative alignment count in {self}")

    @property
    def gt_chars(self) -> int:
        return self.correct + self.deletions + self.substitutions

    @property
    def ocr_chars(self) -> int:
        return self.correct + self.insertions + self.substitutions

    @property
    def total(self) -> int:
        return self.correct + self.insertions + self.deletions + self.substitutions


@dataclass(frozen=True)
class OcrMetrics:
    accuracy: float
    precision: float
    recall: float
    f_score: float


def normalize_text(raw: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace runs, trim."""
    lowered = raw.lower()
    stripped = "".join(ch for ch in lowered if ch not in PUNCTUATION)
    return " ".join(stripped.split())


def align_chars(gt: str, ocr: str) -> AlignmentCounts:
    """Count C/I/D/S over a minimum unit-cost edit alignment of ``gt`` against ``ocr``.

    Among equal-cost alignments the one with the most matches wins. Once cost
    and matches are fixed the substitution count is determined by the string
    lengths, so a single integer key per DP cell is enough:
    ``cost * scale - matches``.
    """
    n, m = len(gt), len(ocr)
    scale = min(n, m) + 1
    # prev[j]: best key aligning gt[:i-1] with ocr[:j]
    prev = [j * scale for j in range(m + 1)]
    for i in range(1, n + 1):
        g = gt[i - 1]
        cur = [i * scale]
        left = cur[0]
        for j in range(1, m + 1):
            diag = prev[j - 1] - 1 if g == ocr[j - 1] else prev[j - 1] + scale
            up = prev[j] + scale
            ins = left + scale
            best = diag
            if up < best:
                best = up
            if ins < best:
                best = ins
            cur.append(best)
            left = best
        prev = cur
    key = prev[m]
    cost = -(-key // scale)
    correct = cost * scale - key
    substitutions = n + m - 2 * correct - cost
    return AlignmentCounts(
        correct=correct,
        insertions=m - correct - substitutions,
        deletions=n - correct - substitutions,
        substitutions=substitutions,
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def compute_metrics(counts: AlignmentCounts) -> OcrMetrics:
    # both strings empty: nothing to get wrong
    if counts.total == 0:
        return OcrMetrics(1.0, 1.0, 1.0, 1.0)
    precision = _ratio(counts.correct, counts.ocr_chars)
    recall = _ratio(counts.correct, counts.gt_chars)
    f_score = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return OcrMetrics(
        accuracy=counts.correct / counts.total,
        precision=precision,
        recall=recall,
        f_score=f_score,
    )


def aggregate_corpus(per_sample: Sequence[OcrMetrics]) -> OcrMetrics:
    """Macro average: every sample counts once regardless of its length."""
    if not per_sample:
        raise ValueError("cannot aggregate an empty corpus")
    k = len(per_sample)
    return OcrMetrics(
        accuracy=sum(m.accuracy for m in per_sample) / k,
        precision=sum(m.precision for m in per_sample) / k,
        recall=sum(m.recall for m in per_sample) / k,
        f_score=sum(m.f_score for m in per_sample) / k,
    )


def percent(value: float) -> str:
    return f"{value * 100:.2f}%"


def evaluate_pair(gt_text: str, ocr_text: str) -> tuple[dict, OcrMetrics]:
    """Score one sample; returns the report object and the raw metrics."""
    gt = normalize_text(gt_text)
    ocr = normalize_text(ocr_text)
    counts = align_chars(gt, ocr)
    metrics = compute_metrics(counts)
    report = {
        "GT_text": gt,
        "OCR_text": ocr,
        "total_GT_chars": counts.gt_chars,
        "correct_chars": counts.correct,
        "insertions": counts.insertions,
        "deletions": counts.deletions,
        "substitutions": counts.substitutions,
        "accuracy": percent(metrics.accuracy),
        "precision": percent(metrics.precision),
        "recall": percent(metrics.recall),
        "f_score": percent(metrics.f_score),
    }
    return report, metrics


# Side-by-side preference evaluation responses (L / R / none per category).

PREFERENCE_CATEGORIES = ("aesthetic_value", "prompt_alignment", "text_accuracy", "overall_preference")
_CHOICES = {"L": "L", "R": "R", "none": None}


@dataclass(frozen=True)
class PreferenceJudgement:
    choices: dict[str, str | None]
    explanations: dict[str, str]


def parse_preference_evaluation(response: str) -> PreferenceJudgement:
    obj = load_json_object(response)
    choices: dict[str, str | None] = {}
    explanations: dict[str, str] = {}
    for category in PREFERENCE_CATEGORIES:
        if category not in obj:
            raise ResponseParseError(f"missing key {category!r}", response[:200])
        value = obj[category]
        if not isinstance(value, str) or value not in _CHOICES:
            raise ResponseParseError(f"{category} must be 'L', 'R' or 'none'", str(value))
        choices[category] = _CHOICES[value]
        explanation = obj.get(f"{category}_explanation", "")
        if not isinstance(explanation, str):
            raise ResponseParseError(f"{category}_explanation must be a string", str(explanation))
        explanations[category] = explanation
    return PreferenceJudgement(choices, explanations)


def tally_preferences(judgements: Iterable[PreferenceJudgement]) -> dict[str, dict[str, int]]:
    """Count L / R / none outcomes per category."""
    tally = {c: {"L": 0, "R": 0, "none": 0} for c in PREFERENCE_CATEGORIES}
    for judgement in judgements:
        for category, choice in judgement.choices.items():
            tally[category][choice or "none"] += 1
    return tally
