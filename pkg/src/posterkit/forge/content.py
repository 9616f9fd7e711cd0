"""Text content for rendered instances: template grammar phrases and random alphanumerics."""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from posterkit.errors import ConfigError
from posterkit.forge.config import GenerationConfig

ALPHANUMERIC = string.ascii_letters + string.digits
ALNUM_LENGTH = (3, 12)
MAX_CONTENT_CHARS = 48

CASINGS = ("as_is", "lower", "upper", "title", "sentence")
PUNCTUATION_SUFFIXES = ("", "", "", "", "!", ".", "?", "...", ":")


def _has_control(text: str) -> bool:
    return any(unicodedata.category(ch).startswith("C") for ch in text)


def read_word_list(path: Path | str, text: str | None = None) -> list[str]:
    """One entry per line; blank lines and ``#`` comments are skipped."""
    raw = Path(path).read_text(encoding="utf-8") if text is None else text
    entries = []
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if _has_control(line):
            raise ConfigError(f"{path}: entry {line!r} contains control characters")
        entries.append(line)
    return entries


@dataclass(frozen=True)
class Grammar:
    templates: tuple[str, ...]
    vocabulary: Mapping[str, tuple[str, ...]]
    casings: tuple[str, ...] = CASINGS
    punctuation: tuple[str, ...] = PUNCTUATION_SUFFIXES
    slots: frozenset[str] = field(init=False)

    def __post_init__(self) -> None:
        if not self.templates:
            raise ConfigError("grammar has no templates")
        vocab = {k.upper(): tuple(v) for k, v in self.vocabulary.items()}
        object.__setattr__(self, "vocabulary", vocab)
        object.__setattr__(self, "slots", frozenset(vocab))
        for template in self.templates:
            for token in template.split():
                if token.isupper() and token.isalpha() and not vocab.get(token):
                    raise ConfigError(f"template {template!r} uses empty or unknown vocabulary {token!r}")
        bad = set(self.casings) - set(CASINGS)
        if bad or not self.casings:
            raise ConfigError(f"unknown casing styles: {sorted(bad)}")
        if not self.punctuation:
            raise ConfigError("punctuation choices must not be empty (use [''] for none)")

    @classmethod
    def from_directory(cls, directory: Path | str | None = None) -> "Grammar":
        """Load ``templates.txt`` plus one ``<slot>.txt`` word list per slot.

        Without a directory the packaged default vocabulary is used.
        """
        if directory is None:
            root = resources.files("posterkit.forge") / "vocab"
            files = {p.name: p.read_text(encoding="utf-8") for p in root.iterdir() if p.name.endswith(".txt")}
        else:
            directory = Path(directory)
            if not directory.is_dir():
                raise ConfigError(f"vocabulary directory {directory} does not exist")
            files = {p.name: p.read_text(encoding="utf-8") for p in sorted(directory.glob("*.txt"))}
        if "templates.txt" not in files:
            raise ConfigError("vocabulary directory lacks templates.txt")
        templates = read_word_list("templates.txt", files.pop("templates.txt"))
        vocab = {name[: -len(".txt")]: tuple(read_word_list(name, text)) for name, text in sorted(files.items())}
        return cls(tuple(templates), vocab)


def _apply_casing(text: str, casing: str) -> str:
    if casing == "lower":
        return text.lower()
    if casing == "upper":
        return text.upper()
    if casing == "title":
        return " ".join(w[:1].upper() + w[1:] for w in text.split(" "))
    if casing == "sentence":
        return text[:1].upper() + text[1:]
    return text


def _choice(rng: np.random.Generator, items: Sequence[str]) -> str:
    return items[int(rng.integers(len(items)))]


def grammar_phrase(rng: np.random.Generator, grammar: Grammar) -> str:
    template = _choice(rng, grammar.templates)
    words = [
        _choice(rng, grammar.vocabulary[tok]) if tok in grammar.slots else tok
        for tok in template.split()
    ]
    phrase = _apply_casing(" ".join(words), _choice(rng, grammar.casings))
    return phrase + _choice(rng, grammar.punctuation)


def random_alphanumeric(rng: np.random.Generator) -> str:
    length = int(rng.integers(ALNUM_LENGTH[0], ALNUM_LENGTH[1] + 1))
    return "".join(ALPHANUMERIC[i] for i in rng.integers(len(ALPHANUMERIC), size=length))


def generate_text_content(rng: np.random.Generator, config: GenerationConfig, grammar: Grammar) -> str:
    if rng.random() < config.alphanumeric_fraction:
        return random_alphanumeric(rng)
    for _ in range(8):
        phrase = grammar_phrase(rng, grammar)
        if 1 <= len(phrase) <= MAX_CONTENT_CHARS:
            return phrase
    # long-vocabulary fallback: first word only, hard-capped
    return phrase.split(" ")[0][:MAX_CONTENT_CHARS]
