"""Shared test helpers."""

from __future__ import annotations

import pytest

from roundtable import AgentSettings, ChatEvent
from roundtable.settings import RatePolicy

AGENT = "Nova"
ROOM = "test"


def msg(author: str, text: str, ts: int = 1_000, seq: int = 0, **kw) -> ChatEvent:
    return ChatEvent(room=ROOM, author=author, kind="message", ts_ms=ts,
                     seq=seq, text=text, **kw)


def join(author: str, ts: int = 0) -> ChatEvent:
    return ChatEvent(room=ROOM, author=author, kind="join", ts_ms=ts)


@pytest.fixture
def settings() -> AgentSettings:
    return AgentSettings()


@pytest.fixture
def eager_settings() -> AgentSettings:
    """Proactive, no delay, no cap — posts land as soon as the gate passes."""
    return AgentSettings(rate=RatePolicy(initial_delay_ms=0, max_posts_per_minute=10_000))
