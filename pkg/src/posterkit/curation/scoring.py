from __future__ import annotations

import math
from typing import Mapping

from posterkit.curation.records import PosterRecord

BINARY_WEIGHTS = {"A": 0.0, "B": 1.0}
BINARY_THRESHOLD = 0.98
HPS_THRESHOLD = 0.25

LOW_BINARY_SCORE = "low_binary_score"
LOW_HPS = "low_hps"
MISSING_SCORE = "missing_score"


def score_binary(logits: Mapping[str, float], weights: Mapping[str, float] = BINARY_WEIGHTS) -> float:
    """Expected option weight under the softmax of the option logits.

    With the default weights (A=0, B=1) this is the probability of answer B,
    i.e. "no credit/billing block".
    """
    if set(logits) != set(weights):
        raise ValueError(f"logit options {sorted(logits)} do not match weight options {sorted(weights)}")
    values = {k: float(v) for k, v in logits.items()}
    if any(math.isnan(v) for v in values.values()):
        raise ValueError(f"NaN logit in {values}")
    if any(math.isinf(v) for v in values.values()):
        raise ValueError(f"infinite logit in {values}")
    top = max(values.values())
    exps = {k: math.exp(v - top) for k, v in values.items()}
    total = math.fsum(exps.values())
    return math.fsum(exps[k] / total * weights[k] for k in values)


def binary_filter(record: PosterRecord, threshold: float = BINARY_THRESHOLD) -> bool:
    if record.logits is None:
        record.reject(MISSING_SCORE)
        return False
    record.binary_score = score_binary(record.logits)
    if record.binary_score < threshold:
        record.reject(LOW_BINARY_SCORE)
        return False
    return True


def hps_filter(record: PosterRecord, threshold: float = HPS_THRESHOLD) -> bool:
    """Reject posters scoring strictly below ``threshold``."""
    if record.hps_score is None or math.isnan(record.hps_score):
        record.reject(MISSING_SCORE)
        return False
    if record.hps_score < threshold:
        record.reject(LOW_HPS)
        return False
    return True
