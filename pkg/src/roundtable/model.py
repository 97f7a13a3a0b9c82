"""Shared domain types and the append-only room transcript store.

Transcripts are JSONL: one event object per line, UTF-8, LF-terminated.
Line schema is exactly ``seq, ts_ms, room, author, kind, text?, thread_of?,
emoji?, payload?`` — unknown fields are rejected on load.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, IO, Iterable, Optional

EVENT_KINDS = frozenset({
    "message",
    "reaction",
    "typing_start",
    "typing_stop",
    "join",
    "leave",
    "settings_change",
    "proposal",
    "vote",
})

# kinds that carry conversational content and feed the provider context
CONTENT_KINDS = frozenset({"message", "reaction"})

_EVENT_FIELDS = ("seq", "ts_ms", "room", "author", "kind", "text", "thread_of", "emoji", "payload")


class TranscriptError(ValueError):
    """An event violates a transcript invariant, or a line is malformed."""


class UnknownRoomError(KeyError):
    """The referenced room does not exist in the store."""


class ReactionToken(str, Enum):
    """Closed set of reaction tokens the agent may emit instead of text."""

    SMILE = "SMILE"
    LAUGH = "LAUGH"
    LIKE = "LIKE"
    CHECK = "CHECK"
    HEART = "HEART"
    THUMBS_UP = "THUMBS_UP"
    THUMBS_DOWN = "THUMBS_DOWN"
    QUESTION = "QUESTION"
    EXCLAMATION = "EXCLAMATION"
    COOL = "COOL"


@dataclass(frozen=True)
class Participant:
    """A room member. Names are unique per room; exactly one agent per room."""

    name: str
    kind: str  # "human" | "agent"
    is_admin: bool = False

    def __post_init__(self) -> None:
        if not self.name or "\n" in self.name:
            raise ValueError("participant name must be non-empty and contain no newline")
        if self.kind not in ("human", "agent"):
            raise ValueError(f"participant kind must be human or agent, got {self.kind!r}")


@dataclass(frozen=True)
class ChatEvent:
    """One transcript record. ``seq=0`` means not yet appended."""

    room: str
    author: str
    kind: str
    ts_ms: int
    seq: int = 0
    text: Optional[str] = None
    thread_of: Optional[int] = None
    emoji: Optional[str] = None
    payload: Optional[dict] = None

    def to_json_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "seq": self.seq,
            "ts_ms": self.ts_ms,
            "room": self.room,
            "author": self.author,
            "kind": self.kind,
        }
        if self.text is not None:
            d["text"] = self.text
        if self.thread_of is not None:
            d["thread_of"] = self.thread_of
        if self.emoji is not None:
            d["emoji"] = self.emoji
        if self.payload is not None:
            d["payload"] = self.payload
        return d

    def to_json_line(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False, separators=(", ", ": "))

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "ChatEvent":
        if not isinstance(d, dict):
            raise TranscriptError("event must be a JSON object")
        unknown = set(d) - set(_EVENT_FIELDS)
        if unknown:
            raise TranscriptError(f"unknown event fields: {sorted(unknown)}")
        for name in ("seq", "ts_ms", "room", "author", "kind"):
            if name not in d:
                raise TranscriptError(f"event missing required field {name!r}")
        ev = cls(
            room=d["room"],
            author=d["author"],
            kind=d["kind"],
            ts_ms=d["ts_ms"],
            seq=d["seq"],
            text=d.get("text"),
            thread_of=d.get("thread_of"),
            emoji=d.get("emoji"),
            payload=d.get("payload"),
        )
        ev.validate_fields()
        return ev

    def validate_fields(self) -> None:
        """Check per-event invariants that need no room context."""
        if self.kind not in EVENT_KINDS:
            raise TranscriptError(f"unknown event kind {self.kind!r}")
        if not isinstance(self.seq, int) or isinstance(self.seq, bool):
            raise TranscriptError("seq must be an integer")
        if not isinstance(self.ts_ms, int) or isinstance(self.ts_ms, bool):
            raise TranscriptError("ts_ms must be an integer")
        if not isinstance(self.room, str) or not self.room:
            raise TranscriptError("room must be a non-empty string")
        if not isinstance(self.author, str) or not self.author or "\n" in self.author:
            raise TranscriptError("author must be a non-empty string without newlines")
        if self.kind == "message" and not self.text:
            raise TranscriptError("message events require non-empty text")
        if self.kind == "reaction":
            if not self.emoji:
                raise TranscriptError("reaction events require emoji")
            if self.thread_of is None:
                raise TranscriptError("reaction events require thread_of")
        if self.thread_of is not None and (not isinstance(self.thread_of, int) or isinstance(self.thread_of, bool)):
            raise TranscriptError("thread_of must be an integer seq")
        if self.text is not None and not isinstance(self.text, str):
            raise TranscriptError("text must be a string")
        if self.emoji is not None and not isinstance(self.emoji, str):
            raise TranscriptError("emoji must be a string")
        if self.payload is not None and not isinstance(self.payload, dict):
            raise TranscriptError("payload must be an object")


@dataclass(frozen=True)
class AgentDecision:
    """A parsed provider decision block."""

    source: str
    target: str
    reply: str
    value: int
    verdict: str  # "SUBMIT" | "PASS"
    reaction: Optional[ReactionToken] = None

    def __post_init__(self) -> None:
        if not (0 <= self.value <= 100):
            raise ValueError(f"value must be in [0, 100], got {self.value}")
        if self.verdict not in ("SUBMIT", "PASS"):
            raise ValueError(f"verdict must be SUBMIT or PASS, got {self.verdict!r}")
        if self.verdict == "SUBMIT" and not self.reply.strip() and self.reaction is None:
            raise ValueError("SUBMIT decisions need a reply or a reaction")

    @property
    def is_submit(self) -> bool:
        return self.verdict == "SUBMIT"

    def has_content(self) -> bool:
        return bool(self.reply.strip()) or self.reaction is not None


class Roster:
    """Participants of one room: many humans, exactly one agent."""

    def __init__(self, agent_name: str) -> None:
        self._agent = Participant(agent_name, "agent")
        self._humans: dict[str, Participant] = {}

    @property
    def agent_name(self) -> str:
        return self._agent.name

    @property
    def names(self) -> list[str]:
        return [self._agent.name] + list(self._humans)

    @property
    def human_names(self) -> list[str]:
        return list(self._humans)

    def add_human(self, name: str, is_admin: bool = False) -> Participant:
        p = Participant(name, "human", is_admin)
        if name in self._humans or name == self._agent.name:
            raise ValueError(f"name {name!r} already taken in room")
        self._humans[name] = p
        return p

    def remove_human(self, name: str) -> None:
        self._humans.pop(name, None)

    def kind_of(self, name: str) -> str:
        if name == self._agent.name:
            return "agent"
        return "human"

    def __contains__(self, name: str) -> bool:
        return name == self._agent.name or name in self._humans


class RoomTranscript:
    """Append-only, seq-ordered event log for one room.

    Single writer: all appends for a room go through this object; readers
    may snapshot ``events`` freely.
    """

    def __init__(self, room: str, log_path: Optional[Path] = None) -> None:
        self.room = room
        self.events: list[ChatEvent] = []
        self._message_seqs: set[int] = set()
        self._log_path = Path(log_path) if log_path else None
        self._log_file: Optional[IO[str]] = None

    def append(self, event: ChatEvent) -> ChatEvent:
        """Assign the next seq, persist, and return the stored event.

        Rejects (and leaves the transcript unchanged) on any invariant
        violation, including a thread_of that references no existing message.
        """
        if event.room != self.room:
            raise TranscriptError(f"event room {event.room!r} != transcript room {self.room!r}")
        event = dataclasses.replace(event, seq=len(self.events) + 1)
        event.validate_fields()
        if event.thread_of is not None and event.thread_of not in self._message_seqs:
            raise TranscriptError(f"unknown parent: thread_of={event.thread_of}")
        self.events.append(event)
        if event.kind == "message":
            self._message_seqs.add(event.seq)
        if self._log_path is not None:
            if self._log_file is None:
                self._log_path.parent.mkdir(parents=True, exist_ok=True)
                self._log_file = self._log_path.open("a", encoding="utf-8")
            self._log_file.write(event.to_json_line() + "\n")
            self._log_file.flush()
        return event

    def context_window(self, max_events: int) -> list[ChatEvent]:
        """Last ``max_events`` message/reaction events, in seq order.

        Typing and governance events carry no conversational content and are
        excluded from provider context.
        """
        if max_events < 1:
            raise ValueError("max_events must be >= 1")
        content = [e for e in self.events if e.kind in CONTENT_KINDS]
        return content[-max_events:]

    def message(self, seq: int) -> Optional[ChatEvent]:
        if 1 <= seq <= len(self.events):
            ev = self.events[seq - 1]
            if ev.kind == "message":
                return ev
        return None

    def close(self) -> None:
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None


class TranscriptStore:
    """Per-room transcripts, optionally persisted under a directory."""

    def __init__(self, root_dir: Optional[Path] = None) -> None:
        self._root = Path(root_dir) if root_dir else None
        self._rooms: dict[str, RoomTranscript] = {}

    def create_room(self, room: str) -> RoomTranscript:
        if room in self._rooms:
            raise ValueError(f"room {room!r} already exists")
        path = self._root / f"{room}.jsonl" if self._root else None
        t = RoomTranscript(room, path)
        self._rooms[room] = t
        return t

    def room(self, room: str) -> RoomTranscript:
        try:
            return self._rooms[room]
        except KeyError:
            raise UnknownRoomError(room) from None

    def append_event(self, room: str, event: ChatEvent) -> ChatEvent:
        return self.room(room).append(event)

    def rooms(self) -> list[str]:
        return list(self._rooms)

    def close(self) -> None:
        for t in self._rooms.values():
            t.close()


def load_transcript(path: Path | str) -> list[ChatEvent]:
    """Load and validate a JSONL transcript; errors carry the line number."""
    events: list[ChatEvent] = []
    last_seq_by_room: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                ev = ChatEvent.from_json_dict(raw)
            except (json.JSONDecodeError, TranscriptError) as exc:
                raise TranscriptError(f"{path}:{lineno}: {exc}") from None
            last = last_seq_by_room.get(ev.room, 0)
            if ev.seq <= last:
                raise TranscriptError(f"{path}:{lineno}: seq {ev.seq} not increasing (last was {last})")
            last_seq_by_room[ev.room] = ev.seq
            events.append(ev)
    return events


def dump_transcript(events: Iterable[ChatEvent], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_json_line() + "\n")
