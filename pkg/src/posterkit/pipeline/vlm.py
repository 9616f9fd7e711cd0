"""Vision-language model exchanges: prompt templates, live client, content-addressed capture/replay."""

from __future__ import annotations

import base64
import enum
import hashlib
import json
import logging
import os
import string
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

import httpx

from posterkit.responses import ResponseParseError

log = logging.getLogger(__name__)

TEMPLATE_IDS = ("scorer", "caption", "mask", "alignment", "best_of_six", "feedback", "ocr", "preference")

ENDPOINT_ENV = "POSTERKIT_VLM_ENDPOINT"
API_KEY_ENV = "POSTERKIT_VLM_API_KEY"
MODEL_ENV = "POSTERKIT_VLM_MODEL"

REPLAY_MISS = "replay_miss"
CLIENT_ERROR = "client_error"
PARSE_ERROR = "parse_error"


def load_template(template_id: str) -> str:
    if template_id not in TEMPLATE_IDS:
        raise KeyError(f"unknown template {template_id!r}")
    return (resources.files("posterkit.pipeline") / "templates" / f"{template_id}.txt").read_text(encoding="utf-8")


def template_fields(template_id: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(load_template(template_id)) if name}


def render_template(template_id: str, **values: str) -> str:
    expected = template_fields(template_id)
    if set(values) != expected:
        raise ValueError(f"template {template_id!r} needs fields {sorted(expected)}, got {sorted(values)}")
    return load_template(template_id).format(**values)


@dataclass(frozen=True)
class Attachment:
    name: str
    data: bytes = field(repr=False)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.data).hexdigest()

    @classmethod
    def from_path(cls, path: str | Path) -> "Attachment":
        path = Path(path)
        return cls(path.name, path.read_bytes())


def exchange_key(template_id: str, rendered_prompt: str, attachment_digests: Sequence[str]) -> str:
    payload = json.dumps(
        {"template_id": template_id, "prompt": rendered_prompt, "attachments": list(attachment_digests)},
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseStore:
    """Raw responses on disk under ``<root>/<key[:2]>/<key>.txt`` with a JSON sidecar.

    Writes go through a temp file and ``os.replace``, so concurrent inserts of
    distinct keys are safe and readers never see partial files.
    """

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.txt"

    def get(self, key: str) -> str | None:
        try:
            return self.path(key).read_text(encoding="utf-8")
        except FileNotFoundError:
            return None

    def put(self, key: str, response: str, meta: Mapping[str, Any] | None = None) -> Path:
        target = self.path(key)
        target.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(target, response.encode("utf-8"))
        if meta is not None:
            _atomic_write(target.with_suffix(".json"), json.dumps(dict(meta), sort_keys=True).encode("utf-8"))
        return target


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class TransientClientError(RuntimeError):
    """Retryable failure: timeouts, connection errors, rate limits, 5xx."""


class VlmClient(Protocol):
    def complete(self, prompt: str, attachments: Sequence[Attachment]) -> str: ...


class OpenAICompatibleClient:
    """Chat-completions style HTTP client sending images as data URLs."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        model: str = "gemini-2.5-flash",
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    @classmethod
    def from_env(cls) -> "OpenAICompatibleClient | None":
        endpoint = os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            return None
        return cls(endpoint, os.environ.get(API_KEY_ENV), os.environ.get(MODEL_ENV, "gemini-2.5-flash"))

    def complete(self, prompt: str, attachments: Sequence[Attachment]) -> str:
        content: list[dict] = [{"type": "text", "text": prompt}]
        for att in attachments:
            mime = "image/jpeg" if att.name.lower().endswith((".jpg", ".jpeg")) else "image/png"
            url = f"data:{mime};base64,{base64.b64encode(att.data).decode('ascii')}"
            content.append({"type": "image_url", "image_url": {"url": url}})
        body = {"model": self.model, "temperature": 0, "messages": [{"role": "user", "content": content}]}
        try:
            resp = self._http.post(self.endpoint, json=body)
        except httpx.TransportError as exc:
            raise TransientClientError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientClientError(f"HTTP {resp.status_code}")
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]


class Mode(str, enum.Enum):
    LIVE = "live"
    REPLAY = "replay"


@dataclass
class VlmExchange:
    template_id: str
    rendered_prompt: str
    attachments: tuple[str, ...]
    key: str
    mode: Mode
    raw_response: str | None = None
    parsed: Any = None
    error: str | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.error is None


class VlmGateway:
    """Routes template requests to the response store (replay) or a live client.

    In replay mode the client is never touched. In live mode a stored response
    is reused when present; fresh responses are persisted before parsing.
    """

    def __init__(
        self,
        store: ResponseStore,
        mode: Mode,
        client: VlmClient | None = None,
        max_retries: int = 4,
        backoff_base: float = 1.0,
        backoff_cap: float = 30.0,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if mode is Mode.LIVE and client is None:
            raise ValueError("live mode needs a client")
        self.store = store
        self.mode = mode
        self.client = client
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.sleep = sleep

    def _call(self, prompt: str, attachments: Sequence[Attachment]) -> str:
        assert self.client is not None
        for attempt in range(self.max_retries + 1):
            try:
                return self.client.complete(prompt, attachments)
            except TransientClientError as exc:
                if attempt == self.max_retries:
                    raise
                delay = min(self.backoff_cap, self.backoff_base * 2**attempt)
                log.warning("transient VLM failure (%s); retry %d in %.1fs", exc, attempt + 1, delay)
                self.sleep(delay)
        raise AssertionError("unreachable")

    def request(
        self,
        template_id: str,
        fields: Mapping[str, str],
        attachments: Sequence[Attachment],
        parser: Callable[[str], Any],
    ) -> VlmExchange:
        prompt = render_template(template_id, **fields)
        key = exchange_key(template_id, prompt, [a.digest for a in attachments])
        exchange = VlmExchange(template_id, prompt, tuple(a.name for a in attachments), key, self.mode)
        raw = self.store.get(key)
        if raw is None:
            if self.mode is Mode.REPLAY:
                exchange.error = REPLAY_MISS
                return exchange
            try:
                raw = self._call(prompt, attachments)
            except (TransientClientError, httpx.HTTPError, KeyError, ValueError) as exc:
                exchange.error = CLIENT_ERROR
                exchange.detail = str(exc)
                return exchange
            self.store.put(key, raw, {"template_id": template_id, "attachments": [a.digest for a in attachments]})
        exchange.raw_response = raw
        try:
            exchange.parsed = parser(raw)
        except ResponseParseError as exc:
            exchange.error = PARSE_ERROR
            exchange.detail = f"{exc} (response {self.store.path(key)})"
        return exchange

    def capture(self, template_id: str, fields: Mapping[str, str], attachments: Sequence[Attachment], response: str) -> str:
        """Store a response for a request as if it had come from a live call; returns the key."""
        prompt = render_template(template_id, **fields)
        key = exchange_key(template_id, prompt, [a.digest for a in attachments])
        self.store.put(key, response, {"template_id": template_id, "attachments": [a.digest for a in attachments]})
        return key
