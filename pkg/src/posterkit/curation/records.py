from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

PENDING = "pending"
ACCEPTED = "accepted"
REJECTED = "rejected"


@dataclass
class PosterRecord:
    id: str
    path: str = ""
    content_hash: str | None = None
    phash: int | None = None
    logits: dict[str, float] | None = None
    binary_score: float | None = None
    hps_score: float | None = None
    caption: str = ""
    masks: list = field(default_factory=list)
    status: str = PENDING
    reason: str | None = None

    @property
    def alive(self) -> bool:
        return self.status != REJECTED

    def reject(self, reason: str) -> None:
        self.status = REJECTED
        self.reason = reason

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "PosterRecord":
        if "id" not in obj:
            raise ValueError(f"poster record without id: {obj!r}")
        logits = obj.get("logits")
        return cls(
            id=str(obj["id"]),
            path=str(obj.get("path", obj.get("image", ""))),
            logits={k: float(v) for k, v in logits.items()} if logits is not None else None,
            hps_score=float(obj["hps_score"]) if obj.get("hps_score") is not None else None,
            caption=str(obj.get("caption", "")),
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "path": self.path,
            "content_hash": self.content_hash,
            "phash": f"{self.phash:016x}" if self.phash is not None else None,
            "binary_score": self.binary_score,
            "hps_score": self.hps_score,
            "caption": self.caption,
            "masks": [m.to_json() for m in self.masks],
            "status": self.status,
            "reason": self.reason,
        }
