"""Live chat service: rooms, sessions, and the wire protocol.

Frames are newline-delimited JSON over any ordered byte stream (plain TCP
here). Each room runs one serialized loop that owns its transcript,
settings, and pipeline; connection handlers only parse frames and enqueue
them, so a slow provider call never reorders a room and malformed input
never takes down a neighbor's session.
"""

from __future__ import annotations

import asyncio
import functools
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .decisionlog import DecisionLog
from .governance import (
    Applied,
    BehaviorPreset,
    Denied,
    GovernanceError,
    Governor,
    ProposalOpened,
    builtin_presets,
)
from .model import ChatEvent, RoomTranscript, Roster
from .pipeline import PipelineConfig, RoomPipeline
from .provider import Provider, PromptConfig, default_prompt_config
from .settings import AgentSettings

log = logging.getLogger(__name__)

DEFAULT_BACKLOG = 100

CLIENT_FRAMES = frozenset({
    "hello", "post", "react", "typing", "settings_get", "settings_set",
    "preset_apply", "vote",
})
SERVER_FRAMES = frozenset({"event", "settings_state", "proposal_state", "error"})


class FrameError(ValueError):
    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


def parse_frame(line: str) -> dict:
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise FrameError("bad_frame", f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("type"), str):
        raise FrameError("bad_frame", "frame must be an object with a string 'type'")
    if obj["type"] not in CLIENT_FRAMES:
        raise FrameError("bad_frame", f"unknown frame type {obj['type']!r}")
    return obj


def encode_frame(obj: dict) -> bytes:
    return (json.dumps(obj, ensure_ascii=False) + "\n").encode("utf-8")


def error_frame(code: str, detail: str) -> dict:
    return {"type": "error", "error": code, "detail": detail}


def now_ms() -> int:
    return time.time_ns() // 1_000_000


@dataclass
class Session:
    name: str
    room: str
    writer: asyncio.StreamWriter

    def send(self, frame: dict) -> None:
        if not self.writer.is_closing():
            self.writer.write(encode_frame(frame))


class RoomRuntime:
    """One room's serialized loop: every mutation flows through its queue."""

    def __init__(self, pipeline: RoomPipeline, backlog: int = DEFAULT_BACKLOG):
        self.pipeline = pipeline
        self.backlog = backlog
        self.sessions: dict[str, Session] = {}
        self.queue: asyncio.Queue = asyncio.Queue()
        self.task: Optional[asyncio.Task] = None
        self._timer: Optional[asyncio.TimerHandle] = None

    @property
    def room(self) -> str:
        return self.pipeline.room

    def start(self) -> None:
        self.task = asyncio.get_running_loop().create_task(self._run())

    async def stop(self) -> None:
        if self.task is not None:
            self.task.cancel()
            try:
                await self.task
            except asyncio.CancelledError:
                pass
        if self._timer is not None:
            self._timer.cancel()
        self.pipeline.transcript.close()

    def broadcast_events(self, events: list[ChatEvent]) -> None:
        for ev in events:
            frame = {"type": "event", "event": ev.to_json_dict()}
            for session in self.sessions.values():
                session.send(frame)

    def broadcast(self, frame: dict) -> None:
        for session in self.sessions.values():
            session.send(frame)

    def settings_state(self) -> dict:
        return {"type": "settings_state", "settings": self.pipeline.settings.to_json_dict()}

    def proposal_state(self, vote_state=None) -> dict:
        p = self.pipeline.governor.open_proposal
        if vote_state is not None:
            body = {
                "id": vote_state.proposal_id, "yes": vote_state.yes, "no": vote_state.no,
                "eligible": vote_state.eligible, "state": vote_state.state,
            }
        elif p is not None:
            body = {
                "id": p.id, "proposer": p.proposer, "patch": p.patch,
                "eligible": len(p.eligible), "yes": p.yes_count(), "no": p.no_count(),
                "state": p.state,
            }
        else:
            body = None
        return {"type": "proposal_state", "proposal": body}

    async def _run(self) -> None:
        loop = asyncio.get_running_loop()
        while True:
            item = await self.queue.get()
            try:
                await self._handle(loop, item)
            except Exception:
                log.exception("room %s: error handling %r", self.room, item[0])
            self._arm_timer(loop)

    def _arm_timer(self, loop: asyncio.AbstractEventLoop) -> None:
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None
        due = self.pipeline.next_due()
        if due is not None:
            delay = max(0.0, (due - now_ms()) / 1000.0)
            self._timer = loop.call_later(delay, self.queue.put_nowait, ("tick",))

    async def _handle(self, loop: asyncio.AbstractEventLoop, item: tuple) -> None:
        kind = item[0]
        if kind == "tick":
            events = await loop.run_in_executor(
                None, functools.partial(self.pipeline.advance_clock, now_ms())
            )
            self.broadcast_events(events)
            return
        if kind == "hello":
            _, session = item
            self.sessions[session.name] = session
            for ev in self.pipeline.transcript.events[-self.backlog :]:
                session.send({"type": "event", "event": ev.to_json_dict()})
            events = await self._pipe(loop, ChatEvent(
                room=self.room, author=session.name, kind="join", ts_ms=now_ms(),
            ))
            self.broadcast_events(events)
            return
        if kind == "goodbye":
            _, session = item
            if self.sessions.get(session.name) is session:
                del self.sessions[session.name]
                events = await self._pipe(loop, ChatEvent(
                    room=self.room, author=session.name, kind="leave", ts_ms=now_ms(),
                ))
                self.broadcast_events(events)
            return
        _, session, frame = item
        await self._handle_frame(loop, session, frame)

    async def _pipe(self, loop, event: ChatEvent) -> list[ChatEvent]:
        return await loop.run_in_executor(
            None, functools.partial(self.pipeline.handle_event, event)
        )

    async def _handle_frame(self, loop, session: Session, frame: dict) -> None:
        ftype = frame["type"]
        ts = now_ms()
        if ftype == "post":
            text = frame.get("text")
            if not isinstance(text, str) or not text:
                session.send(error_frame("bad_frame", "post needs non-empty 'text'"))
                return
            event = ChatEvent(room=self.room, author=session.name, kind="message",
                              ts_ms=ts, text=text, thread_of=frame.get("thread_of"))
        elif ftype == "react":
            event = ChatEvent(room=self.room, author=session.name, kind="reaction",
                              ts_ms=ts, emoji=frame.get("emoji"),
                              thread_of=frame.get("thread_of"))
        elif ftype == "typing":
            state = frame.get("state")
            if state not in ("start", "stop"):
                session.send(error_frame("bad_frame", "typing 'state' must be start|stop"))
                return
            event = ChatEvent(room=self.room, author=session.name,
                              kind=f"typing_{state}", ts_ms=ts)
        elif ftype == "settings_get":
            session.send(self.settings_state())
            return
        elif ftype == "settings_set":
            patch = frame.get("patch")
            if not isinstance(patch, dict):
                session.send(error_frame("bad_frame", "settings_set needs object 'patch'"))
                return
            outcome, events = self.pipeline.request_settings_change(session.name, patch, ts)
            self._after_governance(session, outcome, events)
            return
        elif ftype == "preset_apply":
            preset = frame.get("preset")
            if not isinstance(preset, str):
                session.send(error_frame("bad_frame", "preset_apply needs string 'preset'"))
                return
            outcome, events = self.pipeline.apply_preset(session.name, preset, ts)
            self._after_governance(session, outcome, events)
            return
        elif ftype == "vote":
            proposal = frame.get("proposal")
            ballot = frame.get("ballot")
            open_p = self.pipeline.governor.open_proposal
            if proposal is None and open_p is not None:
                proposal = open_p.id
            try:
                vote_state, events = self.pipeline.cast_vote(
                    session.name, proposal or "", ballot or "", ts
                )
            except GovernanceError as exc:
                session.send(error_frame("denied", str(exc)))
                return
            self.broadcast_events(events)
            self.broadcast(self.proposal_state(vote_state))
            if vote_state.applied is not None:
                self.broadcast(self.settings_state())
            return
        else:
            session.send(error_frame("bad_frame", f"unhandled type {ftype!r}"))
            return
        try:
            events = await self._pipe(loop, event)
        except (ValueError, KeyError) as exc:
            session.send(error_frame("bad_event", str(exc)))
            return
        self.broadcast_events(events)

    def _after_governance(self, session: Session, outcome, events: list[ChatEvent]) -> None:
        self.broadcast_events(events)
        if isinstance(outcome, Applied):
            self.broadcast(self.settings_state())
        elif isinstance(outcome, ProposalOpened):
            self.broadcast(self.proposal_state(outcome.vote_state))
            if outcome.vote_state.applied is not None:
                self.broadcast(self.settings_state())
        elif isinstance(outcome, Denied):
            session.send(error_frame("denied", outcome.reason))


class ChatServer:
    def __init__(
        self,
        rooms: dict[str, RoomRuntime],
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.rooms = rooms
        self.host = host
        self.port = port
        self._server: Optional[asyncio.AbstractServer] = None

    @property
    def address(self) -> tuple[str, int]:
        sock = self._server.sockets[0]
        return sock.getsockname()[:2]

    async def start(self) -> None:
        for runtime in self.rooms.values():
            runtime.start()
        self._server = await asyncio.start_server(self._on_connection, self.host, self.port)
        host, port = self.address
        log.info("listening on %s:%d, rooms: %s", host, port, ", ".join(self.rooms))

    async def serve_forever(self) -> None:
        await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for runtime in self.rooms.values():
            await runtime.stop()

    async def _on_connection(self, reader: asyncio.StreamReader,
                             writer: asyncio.StreamWriter) -> None:
        session: Optional[Session] = None
        runtime: Optional[RoomRuntime] = None
        try:
            line = await reader.readline()
            if not line:
                return
            try:
                hello = parse_frame(line.decode("utf-8", "replace"))
            except FrameError as exc:
                writer.write(encode_frame(error_frame(exc.code, exc.detail)))
                return
            if hello["type"] != "hello":
                writer.write(encode_frame(error_frame("bad_frame", "first frame must be hello")))
                return
            room, name = hello.get("room"), hello.get("name")
            runtime = self.rooms.get(room)
            if runtime is None:
                writer.write(encode_frame(error_frame("unknown_room", f"no room {room!r}")))
                return
            if (
                not isinstance(name, str) or not name.strip()
                or name == runtime.pipeline.agent_name
                or name in runtime.sessions
            ):
                writer.write(encode_frame(error_frame("name_taken",
                                                      f"name {name!r} unavailable")))
                return
            if name not in runtime.pipeline.roster:
                runtime.pipeline.roster.add_human(name)
            session = Session(name=name, room=room, writer=writer)
            runtime.queue.put_nowait(("hello", session))
            while True:
                line = await reader.readline()
                if not line:
                    break
                text = line.decode("utf-8", "replace").strip()
                if not text:
                    continue
                try:
                    frame = parse_frame(text)
                except FrameError as exc:
                    session.send(error_frame(exc.code, exc.detail))
                    continue
                declared = frame.get("name", session.name)
                if declared != session.name:
                    session.send(error_frame("bad_frame", "frame name != hello name"))
                    continue
                if frame["type"] == "hello":
                    session.send(error_frame("bad_frame", "already said hello"))
                    continue
                runtime.queue.put_nowait(("frame", session, frame))
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            if session is not None and runtime is not None:
                runtime.queue.put_nowait(("goodbye", session))
            try:
                writer.close()
            except Exception:
                pass


def build_room(
    name: str,
    settings: AgentSettings,
    provider: Provider,
    *,
    agent_name: str = "Nova",
    presets: Optional[dict[str, BehaviorPreset]] = None,
    transcript_dir: Optional[str | Path] = None,
    prompt_config: Optional[PromptConfig] = None,
    config: PipelineConfig = PipelineConfig(),
    backlog: int = DEFAULT_BACKLOG,
) -> RoomRuntime:
    roster = Roster(agent_name)
    governor = Governor(settings.copy(), roster,
                        presets=presets if presets is not None else builtin_presets())
    base = Path(transcript_dir) if transcript_dir is not None else None
    transcript = RoomTranscript(name, log_path=base / f"{name}.jsonl" if base else None)
    decision_log = DecisionLog(base / f"{name}.decisions.jsonl" if base else None)
    pipeline = RoomPipeline(transcript, governor, provider,
                            prompt_config or default_prompt_config(agent_name),
                            decision_log, config)
    return RoomRuntime(pipeline, backlog=backlog)
