"""Shared decoding for JSON-object responses returned by vision-language models."""

from __future__ import annotations

import json


class ResponseParseError(ValueError):
    """A model response did not match the expected JSON shape."""

    def __init__(self, message: str, fragment: str = "") -> None:
        super().__init__(f"{message}: {fragment!r}" if fragment else message)
        self.fragment = fragment


def load_json_object(response: str) -> dict:
    """Decode a response that should be a single JSON object.

    A lone surrounding ```json fence is tolerated; anything else outside the
    object is an error.
    """
    text = response.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        if len(lines) >= 2 and lines[-1].strip() == "```":
            text = "\n".join(lines[1:-1]).strip()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ResponseParseError(f"malformed JSON ({exc.msg})", response[:200]) from exc
    if not isinstance(obj, dict):
        raise ResponseParseError("expected a JSON object", response[:200])
    return obj
