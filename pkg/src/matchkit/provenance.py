"""Chronological, invertible record of session mutations.

The timeline is a linear history with a cursor: recording a new event
truncates everything past the cursor (a new action kills the redo branch).
Events carry both a forward payload (enough to re-apply) and an inverse
payload (enough to revert exactly); applying either is the session's job.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from .errors import NothingToRedo, NothingToUndo, UnknownSeq


class EventKind(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    WEIGHT_ADJUSTED = "weight_adjusted"
    THRESHOLD_CHANGED = "threshold_changed"
    MATCHER_REGISTERED = "matcher_registered"
    VALUE_MAPPING_EDITED = "value_mapping_edited"
    FEEDBACK_RECORDED = "feedback_recorded"


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class ProvenanceEvent:
    seq: int
    timestamp: str
    kind: EventKind
    payload: dict[str, Any]
    inverse_payload: dict[str, Any]

    def to_dict(self, include_inverse: bool = False) -> dict[str, Any]:
        d: dict[str, Any] = {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "kind": self.kind.value,
            "payload": self.payload,
        }
        if include_inverse:
            d["inverse_payload"] = self.inverse_payload
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ProvenanceEvent":
        return cls(
            seq=int(d["seq"]),
            timestamp=str(d["timestamp"]),
            kind=EventKind(d["kind"]),
            payload=dict(d["payload"]),
            inverse_payload=dict(d.get("inverse_payload") or {}),
        )


@dataclass
class Timeline:
    events: list[ProvenanceEvent] = field(default_factory=list)
    cursor: int = 0  # events[:cursor] are applied; the rest are redoable

    def record(
        self,
        kind: EventKind,
        payload: dict[str, Any],
        inverse_payload: dict[str, Any],
        timestamp: str | None = None,
    ) -> ProvenanceEvent:
        del self.events[self.cursor :]
        event = ProvenanceEvent(
            seq=len(self.events) + 1,
            timestamp=timestamp or now_iso(),
            kind=kind,
            payload=payload,
            inverse_payload=inverse_payload,
        )
        self.events.append(event)
        self.cursor = len(self.events)
        return event

    @property
    def can_undo(self) -> bool:
        return self.cursor > 0

    @property
    def can_redo(self) -> bool:
        return self.cursor < len(self.events)

    def step_back(self) -> ProvenanceEvent:
        """Move the cursor back one event and return it (to be reverted)."""
        if not self.can_undo:
            raise NothingToUndo("timeline cursor is at the beginning")
        self.cursor -= 1
        return self.events[self.cursor]

    def step_forward(self) -> ProvenanceEvent:
        """Move the cursor forward one event and return it (to be re-applied)."""
        if not self.can_redo:
            raise NothingToRedo("timeline cursor is at the tip")
        event = self.events[self.cursor]
        self.cursor += 1
        return event

    def check_seq(self, seq: int) -> None:
        if not 0 <= seq <= len(self.events):
            raise UnknownSeq(f"seq {seq} outside 0..{len(self.events)}")

    def to_dict(self, include_inverse: bool = False) -> dict[str, Any]:
        return {
            "cursor": self.cursor,
            "events": [e.to_dict(include_inverse=include_inverse) for e in self.events],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Timeline":
        events = [ProvenanceEvent.from_dict(e) for e in d.get("events", [])]
        cursor = int(d.get("cursor", len(events)))
        if not 0 <= cursor <= len(events):
            raise ValueError("timeline cursor out of range")
        return cls(events=events, cursor=cursor)
