"""Forward-only numeric kernels for the flow-matching, region-weighted and DPO objectives.

Everything here is a pure function of numpy arrays; no gradients, no model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ArrayLike = np.ndarray | float


@dataclass(frozen=True)
class NoiseSchedule:
    """Interpolation path ``x_t = alpha(t) * x0 + sigma(t) * eps``."""

    alpha: Callable[[float], float]
    sigma: Callable[[float], float]
    alpha_dot: Callable[[float], float] | None = None
    sigma_dot: Callable[[float], float] | None = None
    name: str = "custom"

    @classmethod
    def linear(cls) -> "NoiseSchedule":
        # rectified flow: straight path from data (t=0) to noise (t=1)
        return cls(
            alpha=lambda t: 1.0 - t,
            sigma=lambda t: t,
            alpha_dot=lambda t: -1.0,
            sigma_dot=lambda t: 1.0,
            name="linear",
        )

    @classmethod
    def cosine(cls) -> "NoiseSchedule":
        half_pi = math.pi / 2
        return cls(
            alpha=lambda t: math.cos(half_pi * t),
            sigma=lambda t: math.sin(half_pi * t),
            alpha_dot=lambda t: -half_pi * math.sin(half_pi * t),
            sigma_dot=lambda t: half_pi * math.cos(half_pi * t),
            name="cosine",
        )


LINEAR = NoiseSchedule.linear()


def _check_same_shape(*arrays: np.ndarray) -> None:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) > 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")


def _check_t(t: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")


def noised_state(x0: ArrayLike, eps: ArrayLike, t: float, schedule: NoiseSchedule = LINEAR) -> np.ndarray:
    x0, eps = np.asarray(x0, dtype=np.float64), np.asarray(eps, dtype=np.float64)
    _check_same_shape(x0, eps)
    _check_t(t)
    return schedule.alpha(t) * x0 + schedule.sigma(t) * eps


def target_velocity(x0: ArrayLike, eps: ArrayLike, t: float, schedule: NoiseSchedule = LINEAR) -> np.ndarray:
    """Time derivative of the noising path at ``t``."""
    if schedule.alpha_dot is None or schedule.sigma_dot is None:
        raise ValueError(f"schedule {schedule.name!r} has no derivatives")
    x0, eps = np.asarray(x0, dtype=np.float64), np.asarray(eps, dtype=np.float64)
    _check_same_shape(x0, eps)
    _check_t(t)
    return schedule.alpha_dot(t) * x0 + schedule.sigma_dot(t) * eps


def flow_loss(v_pred: ArrayLike, target: ArrayLike) -> float:
    """Mean squared velocity residual."""
    v_pred, target = np.asarray(v_pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    _check_same_shape(v_pred, target)
    return float(np.mean((v_pred - target) ** 2))


class WeightMode(str, enum.Enum):
    LITERAL = "literal"  # ((v - target) * w) ** 2, i.e. squared error scaled by w**2
    SQUARED_ERROR_WEIGHT = "squared_error_weight"  # w * (v - target) ** 2


def weighted_flow_loss(
    v_pred: ArrayLike,
    target: ArrayLike,
    weight_map: ArrayLike,
    mode: WeightMode | str = WeightMode.LITERAL,
) -> float:
    v_pred, target = np.asarray(v_pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    _check_same_shape(v_pred, target)
    weight = np.asarray(weight_map, dtype=np.float64)
    if np.any(weight < 0):
        raise ValueError("weight map has negative entries")
    residual = v_pred - target
    try:
        weight = np.broadcast_to(weight, residual.shape)
    except ValueError as exc:
        raise ValueError(f"weight map {weight.shape} does not broadcast to {residual.shape}") from exc
    mode = WeightMode(mode)
    if mode is WeightMode.LITERAL:
        return float(np.mean((residual * weight) ** 2))
    return float(np.mean(weight * residual**2))


@dataclass(frozen=True)
class DPOInputs:
    logp_policy_win: float
    logp_ref_win: float
    logp_policy_lose: float
    logp_ref_lose: float
    beta: float = 1.0

    def __post_init__(self) -> None:
        values = (self.logp_policy_win, self.logp_ref_win, self.logp_policy_lose, self.logp_ref_lose, self.beta)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("DPO inputs must be finite")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def margin(self) -> float:
        return (self.logp_policy_win - self.logp_ref_win) - (self.logp_policy_lose - self.logp_ref_lose)


def softplus(x: float) -> float:
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def dpo_loss(inputs: DPOInputs) -> float:
    """``-log sigmoid(beta * margin)`` evaluated as ``softplus(-beta * margin)``."""
    return softplus(-inputs.beta * inputs.margin)


SEGMENT_ORDER = ("prompt", "reflection", "image")


@dataclass(frozen=True)
class ConditioningSequence:
    tokens: np.ndarray
    positions: np.ndarray
    segment_lengths: dict[str, int] = field(default_factory=dict)

    @property
    def boundaries(self) -> tuple[int, int]:
        """Offsets where the reflection and image segments start."""
        p = self.segment_lengths["prompt"]
        return p, p + self.segment_lengths["reflection"]

    def segment(self, name: str) -> np.ndarray:
        start = 0
        for seg in SEGMENT_ORDER:
            length = self.segment_lengths[seg]
            if seg == name:
                return self.tokens[start : start + length]
            start += length
        raise KeyError(name)

    @classmethod
    def from_segments(cls, segments: Sequence[tuple[str, np.ndarray]]) -> "ConditioningSequence":
        names = tuple(name for name, _ in segments)
        if names != SEGMENT_ORDER:
            raise ValueError(f"segments must be ordered {SEGMENT_ORDER}, got {names}")
        return assemble_conditioning(*(arr for _, arr in segments))


def _as_tokens(arr: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a (tokens, dim) matrix, got shape {arr.shape}")
    return arr


def assemble_conditioning(e_p: ArrayLike, e_cs: ArrayLike, v_img: ArrayLike) -> ConditioningSequence:
    """Concatenate prompt, joint reflection and image tokens into one conditioning sequence."""
    parts = [_as_tokens(a, n) for a, n in zip((e_p, e_cs, v_img), SEGMENT_ORDER)]
    dims = {p.shape[1] for p in parts if p.shape[0] > 0}
    if len(dims) > 1:
        raise ValueError(f"token dimension mismatch: {sorted(dims)}")
    dim = dims.pop() if dims else parts[0].shape[1]
    tokens = np.concatenate([p.reshape(-1, dim) for p in parts], axis=0)
    return ConditioningSequence(
        tokens=tokens,
        positions=np.arange(tokens.shape[0], dtype=np.int64),
        segment_lengths={name: p.shape[0] for name, p in zip(SEGMENT_ORDER, parts)},
    )
