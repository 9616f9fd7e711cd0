"""JSONL manifests and atomically published stage outputs."""

from __future__ import annotations

import contextlib
import hashlib
import json
import shutil
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

SCHEMA_VERSION = 1


class ManifestError(ValueError):
    pass


def dumps(record: dict[str, Any]) -> str:
    """Canonical one-line JSON: sorted keys, no whitespace padding, UTF-8."""
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    """Load every record up front so malformed input fails before any output exists."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"input manifest {path} does not exist")
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}:{lineno}: expected a JSON object")
            records.append(obj)
    return records


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> str:
    """Write records and return the SHA-256 of the written bytes."""
    digest = hashlib.sha256()
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            line = dumps({"schema_version": SCHEMA_VERSION, **record}) + "\n"
            fh.write(line)
            digest.update(line.encode("utf-8"))
    return digest.hexdigest()


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def require_unique(records: Iterable[dict[str, Any]], key: str, source: str) -> None:
    seen: set[str] = set()
    for record in records:
        if key not in record:
            raise ManifestError(f"{source}: record without {key!r}: {dumps(record)[:200]}")
        value = str(record[key])
        if value in seen:
            raise ManifestError(f"{source}: duplicate {key} {value!r}")
        seen.add(value)


@contextlib.contextmanager
def staged_output(final: str | Path) -> Iterator[Path]:
    """Yield a scratch directory that replaces ``final`` only if the block succeeds."""
    final = Path(final)
    final.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{final.name}.", dir=final.parent))
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    if final.exists():
        old = final.with_name(f".{final.name}.old")
        shutil.rmtree(old, ignore_errors=True)
        final.rename(old)
        scratch.rename(final)
        shutil.rmtree(old, ignore_errors=True)
    else:
        scratch.rename(final)
