"""Independent reference implementations used to check the package code.

None of these import the functions they check; they follow the definitions
directly and favour obviousness over speed.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


def achievable_alignments(alphabet: str, max_len: int) -> dict[tuple[str, str], tuple[int, int, int, int]]:
    """(C, I, D, S) of the preferred alignment for every string pair up to ``max_len``.

    For each pair, enumerate the set of every (C, S) pair reachable by some
    alignment (I and D then follow from the lengths), then pick minimum cost,
    then maximum C, then minimum S. The sets are encoded as bitmasks with bit
    ``C * stride + S`` so the enumeration over all ~1.2M pairs stays fast.
    """
    stride = max_len + 1
    strings = [""]
    for n in range(1, max_len + 1):
        strings += ["".join(p) for p in itertools.product(alphabet, repeat=n)]
    index = {s: i for i, s in enumerate(strings)}
    count = len(strings)
    # reach[i][j]: bitmask of (C, S) over all alignments of strings[i] vs strings[j]
    reach = [[0] * count for _ in range(count)]
    order = sorted(range(count), key=lambda k: len(strings[k]))
    for i in order:
        a = strings[i]
        tail_a = index[a[1:]] if a else None
        for j in order:
            b = strings[j]
            if not a and not b:
                reach[i][j] = 1
                continue
            mask = 0
            tail_b = index[b[1:]] if b else None
            if a:  # delete a[0]
                mask |= reach[tail_a][j]
            if b:  # insert b[0]
                mask |= reach[i][tail_b]
            if a and b:
                sub = reach[tail_a][tail_b]
                mask |= (sub << stride) if a[0] == b[0] else (sub << 1)
            reach[i][j] = mask
    picked: dict[tuple[int, int, int], tuple[int, int, int, int]] = {}

    def pick(mask: int, n: int, m: int) -> tuple[int, int, int, int]:
        best = None
        bit = 0
        while mask:
            if mask & 1:
                c, s = divmod(bit, stride)
                d, ins = n - c - s, m - c - s
                key = (ins + d + s, -c, s)
                if best is None or key < best[0]:
                    best = (key, (c, ins, d, s))
            mask >>= 1
            bit += 1
        return best[1]

    result = {}
    for i, a in enumerate(strings):
        row = reach[i]
        for j, b in enumerate(strings):
            k = (row[j], len(a), len(b))
            if k not in picked:
                picked[k] = pick(*k)
            result[(a, b)] = picked[k]
    return result


def brute_force_alignment(a: str, b: str) -> tuple[int, int, int, int]:
    """Enumerate every alignment explicitly by recursion; for tiny strings only."""
    options = []

    def walk(i: int, j: int, c: int, ins: int, d: int, s: int) -> None:
        if i == len(a) and j == len(b):
            options.append((ins + d + s, -c, s, (c, ins, d, s)))
            return
        if i < len(a):
            walk(i + 1, j, c, ins, d + 1, s)
        if j < len(b):
            walk(i, j + 1, c, ins + 1, d, s)
        if i < len(a) and j < len(b):
            if a[i] == b[j]:
                walk(i + 1, j + 1, c + 1, ins, d, s)
            else:
                walk(i + 1, j + 1, c, ins, d, s + 1)

    walk(0, 0, 0, 0, 0, 0)
    return min(options)[3]


def metrics_from_counts(c: int, ins: int, d: int, s: int) -> dict[str, Fraction]:
    total = c + ins + d + s
    precision = Fraction(c, c + ins + s)
    recall = Fraction(c, c + d + s)
    return {
        "accuracy": Fraction(c, total),
        "precision": precision,
        "recall": recall,
        "f_score": 2 * precision * recall / (precision + recall),
    }


def weight_map_oracle(masks: list[tuple[tuple[int, int, int, int], str]], width: int, height: int) -> list[list[float]]:
    """Per-pixel three-case evaluation.

    A pixel (x, y) is the unit square [x, x+1) x [y, y+1). It belongs to a
    mask when that square has positive-area overlap with the box scaled to
    pixel units (so partially covered pixels count, making the mask a full
    cover of the box). Any Minor cover gives 0.2, else any Major cover 0.6,
    else 1.0.
    """
    scaled = []
    for (ymin, xmin, ymax, xmax), size_class in masks:
        scaled.append(
            (
                Fraction(xmin * width, 1000),
                Fraction(ymin * height, 1000),
                Fraction(xmax * width, 1000),
                Fraction(ymax * height, 1000),
                size_class,
            )
        )
    grid = []
    for y in range(height):
        row = []
        for x in range(width):
            classes = {k for x0, y0, x1, y1, k in scaled if x < x1 and x0 < x + 1 and y < y1 and y0 < y + 1}
            row.append(0.2 if "minor" in classes else 0.6 if "major" in classes else 1.0)
        grid.append(row)
    return grid


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def expected_pairs(sets: list[dict]) -> dict[str, tuple[str, str]]:
    """Reference preference-pair filter: plain loops over the raw manifest rows."""
    out = {}
    for row in sets:
        rewards = [c["reward"] for c in row["candidates"]]
        hi, lo = max(rewards), min(rewards)
        if hi == lo:
            continue
        win = rewards.index(hi)
        lose = rewards.index(lo)
        if hi - lo > 0.025 and row["verdict"] == "1":
            out[row["prompt_id"]] = (row["candidates"][win]["image"], row["candidates"][lose]["image"])
    return out


def weight_map_oracle_int(masks: list[tuple[tuple[int, int, int, int], str]], width: int, height: int):
    """Same three-case rule as ``weight_map_oracle`` with exact integer comparisons, vectorised.

    Pixel column x overlaps the scaled interval (xmin*W/1000, xmax*W/1000)
    iff ``1000*x < xmax*W`` and ``xmin*W < 1000*(x+1)``.
    """
    import numpy as np

    xs = np.arange(width)
    ys = np.arange(height)
    minor = np.zeros((height, width), dtype=bool)
    major = np.zeros((height, width), dtype=bool)
    for (ymin, xmin, ymax, xmax), size_class in masks:
        col = (1000 * xs < xmax * width) & (xmin * width < 1000 * (xs + 1))
        row = (1000 * ys < ymax * height) & (ymin * height < 1000 * (ys + 1))
        hit = row[:, None] & col[None, :]
        if size_class == "minor":
            minor |= hit
        else:
            major |= hit
    return np.where(minor, 0.2, np.where(major, 0.6, 1.0))
