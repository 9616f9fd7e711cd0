"""Categorized font library with glyph-coverage filtering."""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from fontTools.ttLib import TTFont, TTLibError

from posterkit.errors import ConfigError
from posterkit.forge.config import FontClass, GenerationConfig

FONT_SUFFIXES = (".ttf", ".otf")
SYSTEM_FONT_DIRS = ("/usr/share/fonts", "/usr/local/share/fonts", "/Library/Fonts", "C:/Windows/Fonts")


class FontCoverageError(LookupError):
    """No font in the library can render every glyph of the content."""


@dataclass(frozen=True)
class FontEntry:
    font_id: str
    path: str
    font_class: FontClass
    coverage: frozenset[int]

    def covers(self, text: str) -> bool:
        return all(ord(ch) in self.coverage for ch in text if not ch.isspace())

    @property
    def has_lowercase(self) -> bool:
        return all(ord(ch) in self.coverage for ch in string.ascii_lowercase)


def read_coverage(path: Path | str) -> frozenset[int]:
    with TTFont(str(path), lazy=True) as font:
        cmap = font.getBestCmap() or {}
    return frozenset(cmap)


class FontLibrary:
    """Fonts usable for rendering; entries lacking lowercase glyphs are dropped on construction."""

    def __init__(self, entries: Iterable[FontEntry]) -> None:
        entries = sorted(entries, key=lambda e: e.font_id)
        self.rejected = [e.font_id for e in entries if not e.has_lowercase]
        self.entries: tuple[FontEntry, ...] = tuple(e for e in entries if e.has_lowercase)
        if not self.entries:
            raise ConfigError("font library is empty after filtering fonts without lowercase glyphs")
        self._by_id = {e.font_id: e for e in self.entries}

    def __getitem__(self, font_id: str) -> FontEntry:
        return self._by_id[font_id]

    def __len__(self) -> int:
        return len(self.entries)

    def manifest(self) -> list[dict]:
        return [{"font_id": e.font_id, "class": e.font_class.value} for e in self.entries]

    @classmethod
    def from_directory(cls, directory: Path | str) -> "FontLibrary":
        """Scan a font directory.

        The class of each font comes from ``fonts.json`` (``{"relative/path.ttf":
        "stylized"}``) when present, otherwise from a ``stylized/`` or
        ``classic/`` parent folder; anything else is classic.
        """
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigError(f"font directory {directory} does not exist")
        overrides: dict[str, str] = {}
        manifest = directory / "fonts.json"
        if manifest.exists():
            overrides = json.loads(manifest.read_text(encoding="utf-8"))
        paths = sorted(p for p in directory.rglob("*") if p.suffix.lower() in FONT_SUFFIXES)
        return cls(_entries_for(paths, directory, overrides))

    @classmethod
    def from_paths(cls, paths: Sequence[Path | str], stylized: Sequence[Path | str] = ()) -> "FontLibrary":
        styl = {str(Path(p)) for p in stylized}
        all_paths = [Path(p) for p in [*paths, *stylized]]
        overrides = {str(p): ("stylized" if str(p) in styl else "classic") for p in all_paths}
        return cls(_entries_for(all_paths, None, overrides))


def _entries_for(paths: Sequence[Path], root: Path | None, overrides: dict[str, str]) -> list[FontEntry]:
    entries = []
    for path in paths:
        rel = path.relative_to(root).as_posix() if root is not None else str(path)
        try:
            coverage = read_coverage(path)
        except (TTLibError, OSError) as exc:
            raise ConfigError(f"cannot read font {path}: {exc}") from exc
        if rel in overrides:
            font_class = FontClass(overrides[rel])
        elif root is not None and FontClass.STYLIZED.value in path.relative_to(root).parts[:-1]:
            font_class = FontClass.STYLIZED
        else:
            font_class = FontClass.CLASSIC
        font_id = path.relative_to(root).with_suffix("").as_posix() if root is not None else path.stem
        entries.append(FontEntry(font_id, str(path), font_class, coverage))
    return entries


def discover_system_fonts(limit: int = 64) -> list[Path]:
    found: list[Path] = []
    for root in SYSTEM_FONT_DIRS:
        base = Path(root)
        if base.is_dir():
            found.extend(sorted(p for p in base.rglob("*") if p.suffix.lower() in FONT_SUFFIXES))
    return found[:limit]


def select_font(
    rng: np.random.Generator, library: FontLibrary, content: str, config: GenerationConfig
) -> FontEntry:
    """Draw a font able to render ``content``.

    The class is drawn first (stylized with ``config.stylized_font_fraction``)
    when both classes have a covering font; otherwise whichever class covers
    the text is used.
    """
    covering = [e for e in library.entries if e.covers(content)]
    if not covering:
        raise FontCoverageError(f"no font covers {content!r}")
    by_class = {
        cls_: [e for e in covering if e.font_class is cls_] for cls_ in (FontClass.CLASSIC, FontClass.STYLIZED)
    }
    draw = rng.random()
    if by_class[FontClass.CLASSIC] and by_class[FontClass.STYLIZED]:
        pool = by_class[FontClass.STYLIZED] if draw < config.stylized_font_fraction else by_class[FontClass.CLASSIC]
    else:
        pool = covering
    return pool[int(rng.integers(len(pool)))]
