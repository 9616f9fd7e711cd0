"""Exact (MD5) and near (difference-hash) duplicate removal."""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from PIL import Image

from posterkit.curation.records import PosterRecord

DUPLICATE_EXACT = "duplicate_exact"
DUPLICATE_NEAR = "duplicate_near"
IO_ERROR = "io"


def md5_digest(data: bytes) -> str:
    return hashlib.md5(data).hexdigest()


def dhash(image: Image.Image, hash_size: int = 8) -> int:
    """64-bit difference hash: sign of horizontal gradients on a (size+1) x size thumbnail."""
    gray = image.convert("L").resize((hash_size + 1, hash_size), Image.Resampling.BOX)
    px = np.asarray(gray, dtype=np.int16)
    bits = (px[:, 1:] > px[:, :-1]).ravel()
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value


def hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


def _read_file(path: str) -> bytes:
    return Path(path).read_bytes()


def exact_dedup(
    records: Iterable[PosterRecord],
    read_bytes: Callable[[str], bytes] = _read_file,
) -> tuple[list[PosterRecord], list[PosterRecord]]:
    """Keep the smallest id of every group of byte-identical files.

    Records that already carry ``content_hash`` are not re-read.
    Returns ``(survivors, rejected)``, both sorted by id.
    """
    survivors: list[PosterRecord] = []
    rejected: list[PosterRecord] = []
    seen: set[str] = set()
    for record in sorted(records, key=lambda r: r.id):
        if record.content_hash is None:
            try:
                record.content_hash = md5_digest(read_bytes(record.path))
            except OSError as exc:
                record.reject(f"{IO_ERROR}: {exc.strerror or exc}")
                rejected.append(record)
                continue
        if record.content_hash in seen:
            record.reject(DUPLICATE_EXACT)
            rejected.append(record)
        else:
            seen.add(record.content_hash)
            survivors.append(record)
    return survivors, rejected


def near_dedup(
    records: Iterable[PosterRecord],
    hamming_threshold: int = 8,
) -> tuple[list[PosterRecord], list[PosterRecord]]:
    """Reject records within ``hamming_threshold`` bits of an earlier accepted record.

    Earlier means smaller id. Every record must have ``phash`` set.
    """
    survivors: list[PosterRecord] = []
    rejected: list[PosterRecord] = []
    kept = np.empty(0, dtype=np.uint64)
    for record in sorted(records, key=lambda r: r.id):
        if record.phash is None:
            raise ValueError(f"record {record.id} has no perceptual hash")
        h = np.uint64(record.phash)
        if kept.size and int(np.bitwise_count(kept ^ h).min()) <= hamming_threshold:
            record.reject(DUPLICATE_NEAR)
            rejected.append(record)
            continue
        kept = np.append(kept, h)
        survivors.append(record)
    return survivors, rejected
