"""Response gating: who a message addresses, whether the agent contributes,
when the contribution fires, and where it lands.

All functions here are pure; the event-driven loop that wires them to a live
room lives in ``pipeline.py``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional

from .model import AgentDecision, ChatEvent, ReactionToken
from .settings import THRESHOLDS, AgentSettings, RatePolicy

# addressee classes
AGENT = "agent"
OTHER = "other"
UNADDRESSED = "unaddressed"

# override tags recorded in provenance / the decision log
FORCE_REPLY = "force_reply"
FORCE_REPLY_CONFLICT = "force_reply_conflict"
SUPPRESS_OTHER = "suppress_other"
SETTINGS_INTENT = "settings_intent"

PREVIEW_MARKER = "…"  # single-char ellipsis keeps the preview inside its budget


@dataclass(frozen=True)
class AddresseeClass:
    """Exactly one class per message; OTHER carries the first-mentioned name."""

    kind: str  # AGENT | OTHER | UNADDRESSED
    name: Optional[str] = None
    also_mentions: tuple[str, ...] = ()  # other roster names present when kind == AGENT

    def label(self) -> str:
        if self.kind == OTHER:
            return f"other:{self.name}"
        return self.kind


def _mention_pattern(name: str) -> re.Pattern[str]:
    # case-insensitive whole-word match, optional leading "@", punctuation-delimited
    return re.compile(rf"(?<![\w@])@?{re.escape(name)}(?!\w)", re.IGNORECASE)


def classify_addressee(message: ChatEvent, roster_names: list[str], agent_name: str) -> AddresseeClass:
    """Classify who a human message is addressed to, by name detection.

    Deliberately no fuzzy matching: a false "directly addressed" forces a
    reply, which is worse than a miss. A message naming both the agent and
    another member is agent-addressed (the forced-reply rule is
    unconditional); the other names ride along in ``also_mentions``.
    """
    text = message.text or ""
    others = [n for n in roster_names if n != agent_name and n != message.author]
    other_hits: list[tuple[int, str]] = []
    for name in others:
        m = _mention_pattern(name).search(text)
        if m:
            other_hits.append((m.start(), name))
    other_hits.sort()
    if _mention_pattern(agent_name).search(text):
        return AddresseeClass(AGENT, agent_name, tuple(name for _, name in other_hits))
    if other_hits:
        return AddresseeClass(OTHER, other_hits[0][1])
    return AddresseeClass(UNADDRESSED)


def should_invoke(addressee: AddresseeClass, settings: AgentSettings, author_kind: str) -> bool:
    """Whether this message warrants generating a candidate response.

    The agent never triggers on its own (or any non-human) messages. Reactive
    mode responds only when directly addressed; proactive mode considers
    everything except messages addressed to someone else.
    """
    if author_kind != "human":
        return False
    if settings.mode == "reactive":
        return addressee.kind == AGENT
    return addressee.kind != OTHER


def apply_threshold(value: int, level: str) -> bool:
    """True iff ``value`` meets the level's setpoint (>=, so 75 posts at medium)."""
    if not 0 <= value <= 100:
        raise ValueError(f"value must be in [0, 100], got {value}")
    return value >= THRESHOLDS[level]


@dataclass(frozen=True)
class Placement:
    mode: str  # "channel" | "thread" | "truncated"
    parent_seq: Optional[int] = None  # thread parent (the triggering message)
    preview: Optional[str] = None  # channel preview when truncated


def truncate_preview(text: str, preview_chars: int) -> str:
    """First <= preview_chars characters, cut at a whitespace boundary, plus marker."""
    budget = max(preview_chars - len(PREVIEW_MARKER), 1)
    cut = text[:budget]
    boundary = max(cut.rfind(ch) for ch in (" ", "\t", "\n"))
    if boundary > 0:
        cut = cut[:boundary]
    return cut.rstrip() + PREVIEW_MARKER


def place(reply: str, settings: AgentSettings, trigger_seq: int) -> Placement:
    """Pick where a reply lands: channel, thread, or truncated-with-threaded-full-text."""
    if not reply:
        raise ValueError("cannot place an empty reply")
    if settings.placement == "thread":
        return Placement("thread", trigger_seq)
    lm = settings.long_message
    if lm.enabled and len(reply) > lm.trigger_chars:
        return Placement("truncated", trigger_seq, truncate_preview(reply, lm.preview_chars))
    return Placement("channel")


@dataclass
class Provenance:
    """How an action came to be: the decision behind it and any override."""

    addressee: AddresseeClass
    decision: Optional[AgentDecision] = None
    override: Optional[str] = None
    gate_passed: Optional[bool] = None
    reinvoked: bool = False
    note: Optional[str] = None


@dataclass
class AgentAction:
    kind: str  # "post" | "react" | "silent"
    trigger_seq: int
    provenance: Provenance
    reply: str = ""
    reaction: Optional[ReactionToken] = None
    placement: Optional[Placement] = None
    merged_from: tuple[int, ...] = ()  # extra trigger seqs folded in by consolidation

    def __post_init__(self) -> None:
        if self.kind == "silent" and (self.reply or self.reaction):
            raise ValueError("silent actions carry no reply or reaction")
        if self.kind == "post" and not self.reply:
            raise ValueError("post actions need a non-empty reply")


def decide(
    message: ChatEvent,
    settings: AgentSettings,
    decision: AgentDecision,
    addressee: AddresseeClass,
) -> AgentAction:
    """Turn a provider decision into an action, applying the override rules.

    Directly-addressed messages contribute regardless of value or verdict;
    everything else posts only on SUBMIT above the configured threshold.
    """
    forced = addressee.kind == AGENT
    if forced:
        override = FORCE_REPLY_CONFLICT if addressee.also_mentions else FORCE_REPLY
        prov = Provenance(addressee, decision, override=override)
        if decision.reaction is not None:
            return AgentAction("react", message.seq, prov, reaction=decision.reaction)
        if decision.reply.strip():
            return AgentAction("post", message.seq, prov, reply=decision.reply,
                               placement=place(decision.reply, settings, message.seq))
        # provider failure left nothing to say; stay silent rather than invent
        prov.note = "forced trigger but decision carried no content"
        return AgentAction("silent", message.seq, prov)

    passed = decision.is_submit and apply_threshold(decision.value, settings.threshold)
    prov = Provenance(addressee, decision, gate_passed=passed)
    if not passed or not decision.has_content():
        return AgentAction("silent", message.seq, prov)
    if decision.reaction is not None:
        return AgentAction("react", message.seq, prov, reaction=decision.reaction)
    return AgentAction("post", message.seq, prov, reply=decision.reply,
                       placement=place(decision.reply, settings, message.seq))


@dataclass(frozen=True)
class Scheduled:
    at_ms: int


@dataclass(frozen=True)
class Suppressed:
    reason: str  # "speak-first" | "rate-cap"


@dataclass(frozen=True)
class Deferred:
    until: str = "typing-stop"


ScheduleResult = Scheduled | Suppressed | Deferred


@dataclass
class RoomActivity:
    """The slice of room state the scheduler reads."""

    typing: set[str] = field(default_factory=set)  # humans currently typing
    agent_post_times: list[int] = field(default_factory=list)  # ts_ms of agent posts
    human_message_count: int = 0  # human messages before the current trigger


def schedule(
    action: AgentAction,
    rate: RatePolicy,
    activity: RoomActivity,
    *,
    now_ms: int,
    trigger_ts_ms: int,
) -> ScheduleResult:
    """Apply the rate rules in order: speak-first, typing hold, delay, cap.

    Forced contributions (direct address) skip the two suppressions — the
    override rule is unconditional — but still wait out holds and delays.
    The delay anchors to the trigger, so a reply resumed after a typing hold
    does not wait the delay twice.
    """
    forced = action.provenance.override in (FORCE_REPLY, FORCE_REPLY_CONFLICT, SETTINGS_INTENT)
    if not forced and not rate.speak_first and activity.human_message_count == 0:
        return Suppressed("speak-first")
    if rate.hold_while_typing and activity.typing:
        return Deferred()
    if not forced and rate.max_posts_per_minute >= 0:
        recent = sum(1 for t in activity.agent_post_times if now_ms - 60_000 < t <= now_ms)
        if recent >= rate.max_posts_per_minute:
            return Suppressed("rate-cap")
    return Scheduled(max(now_ms, trigger_ts_ms + rate.initial_delay_ms))


@dataclass
class PendingAction:
    """An action waiting to fire, with its schedule state."""

    action: AgentAction
    at_ms: int
    deferred: bool = False
    stale: bool = False


def consolidate(pending: list[PendingAction], window_ms: int) -> list[PendingAction]:
    """Merge scheduled posts whose fire times fall within one window.

    Greedy grouping from the earliest post: members within ``window_ms`` of
    the group opener merge into a single bulleted post scheduled at the
    latest member's time. Reactions, deferred actions, and singletons pass
    through untouched. A zero window disables merging.
    """
    if window_ms <= 0 or len(pending) < 2:
        return list(pending)
    mergeable = sorted(
        (p for p in pending if p.action.kind == "post" and not p.deferred),
        key=lambda p: (p.at_ms, p.action.trigger_seq),
    )
    rest = [p for p in pending if p.action.kind != "post" or p.deferred]
    out: list[PendingAction] = []
    i = 0
    while i < len(mergeable):
        group = [mergeable[i]]
        j = i + 1
        while j < len(mergeable) and mergeable[j].at_ms - mergeable[i].at_ms <= window_ms:
            group.append(mergeable[j])
            j += 1
        i = j
        if len(group) == 1:
            out.append(group[0])
            continue
        last = group[-1]

        def lines(a: AgentAction) -> list[str]:
            # an already-merged member contributes its bullets as-is
            return a.reply.splitlines() if a.merged_from else [f"- {a.reply}"]

        bullets = "\n".join(line for p in group for line in lines(p.action))
        member_seqs = [s for p in group for s in (*p.action.merged_from, p.action.trigger_seq)]
        # placement is dropped: the merged text is longer than any member, so
        # the pipeline re-places it against current settings before posting
        merged = replace(
            last.action,
            reply=bullets,
            placement=None,
            merged_from=tuple(s for s in member_seqs if s != last.action.trigger_seq),
        )
        stale = any(p.stale for p in group)
        out.append(PendingAction(merged, last.at_ms, stale=stale))
    return sorted(out + rest, key=lambda p: (p.at_ms, p.action.trigger_seq))
