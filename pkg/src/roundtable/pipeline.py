"""The room pipeline: one serialized decision loop per room.

Sans-IO by design — callers own the clock. The replay harness drives it
with simulated time taken from event timestamps; the live service drives
it with wall-clock time and timers. Both paths share every rule, which is
what makes replayed decision logs trustworthy evidence about the service.

Event flow per human message: classify addressee → conversational-control
hooks → should_invoke → provider generate/parse → decide (overrides +
threshold gate) → schedule (delays, holds, caps) → emit (placement,
truncation, consolidation), with one DecisionRecord tracking the journey.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional

from . import gating
from .decisionlog import DecisionLog, DecisionRecord
from .gating import (
    AgentAction,
    Deferred,
    RoomActivity,
    Scheduled,
    Suppressed,
    classify_addressee,
    decide,
    place,
    schedule,
    should_invoke,
)
from .governance import (
    Applied,
    Denied,
    GovernanceError,
    Governor,
    PendingIntent,
    ProposalOpened,
    classify_confirmation,
    confirmation_text,
    detect_settings_intent,
)
from .model import AgentDecision, ChatEvent, RoomTranscript
from .provider import (
    ParseError,
    PromptConfig,
    Provider,
    assemble_prompt,
    map_reaction,
    parse_decision,
    synthetic_pass,
)

log = logging.getLogger(__name__)

DEFAULT_CONTEXT_LIMIT = 40


@dataclass(frozen=True)
class PipelineConfig:
    context_limit: int = DEFAULT_CONTEXT_LIMIT
    auto_apply_intents: bool = False  # confirm-before-apply unless set
    confirm_window_ms: int = 120_000
    retry_parse_once: bool = False  # regenerate once on malformed output


@dataclass
class _Pending:
    """A scheduled or deferred action plus the records it must finalize."""

    action: AgentAction
    records: list[DecisionRecord]
    at_ms: Optional[int] = None  # None while deferred
    deferred: bool = False
    stale: bool = False
    reinvoked: bool = False


class RoomPipeline:
    def __init__(
        self,
        transcript: RoomTranscript,
        governor: Governor,
        provider: Provider,
        prompt_config: PromptConfig,
        decision_log: Optional[DecisionLog] = None,
        config: PipelineConfig = PipelineConfig(),
    ):
        self.transcript = transcript
        self.governor = governor
        self.roster = governor.roster
        self.provider = provider
        self.base_prompt_config = prompt_config
        self.decision_log = decision_log if decision_log is not None else DecisionLog()
        self.config = config
        self.activity = RoomActivity()
        self.pending: list[_Pending] = []
        self.pending_intent: Optional[PendingIntent] = None
        self._prompt_patch = governor.preset_prompt(governor.settings.preset)
        self._trigger_alias: dict[int, int] = {}  # output seq -> caller's id for provider matching
        self._stored_for_input: dict[int, int] = {}  # inverse, for replay seq remapping

    # -- public surface ----------------------------------------------------

    @property
    def settings(self):
        return self.governor.settings

    @property
    def room(self) -> str:
        return self.transcript.room

    @property
    def agent_name(self) -> str:
        return self.roster.agent_name

    def handle_event(self, event: ChatEvent, *, input_seq: Optional[int] = None) -> list[ChatEvent]:
        """Append one inbound event and run the loop; returns all appended events.

        Time advances to ``event.ts_ms``: actions due strictly earlier fire
        first (human event wins ties), then the event is appended and
        processed, then actions due now fire.
        """
        now = event.ts_ms
        out = self.advance_clock(now, before_event=True)
        stored = self.transcript.append(event)
        out.append(stored)
        if input_seq is not None:
            self._trigger_alias[stored.seq] = input_seq
            self._stored_for_input[input_seq] = stored.seq
        self._track(stored)
        if stored.kind == "message" and self.roster.kind_of(stored.author) == "human":
            out.extend(self._on_human_message(stored, now))
        elif stored.kind in ("settings_change", "proposal", "vote"):
            if self.roster.kind_of(stored.author) == "human":
                out.extend(self._on_command(stored, now))
        out.extend(self.advance_clock(now, before_event=False))
        return out

    def advance_clock(self, now_ms: int, *, before_event: bool = False) -> list[ChatEvent]:
        """Fire pending actions whose time has come (used by live timers too)."""
        out: list[ChatEvent] = []
        while True:
            due = [
                p for p in self.pending
                if not p.deferred and p.at_ms is not None
                and (p.at_ms < now_ms if before_event else p.at_ms <= now_ms)
            ]
            if not due:
                return out
            nxt = min(due, key=lambda p: (p.at_ms, p.action.trigger_seq))
            self.pending.remove(nxt)
            out.extend(self._fire(nxt, nxt.at_ms))

    def next_due(self) -> Optional[int]:
        times = [p.at_ms for p in self.pending if not p.deferred and p.at_ms is not None]
        return min(times) if times else None

    def stored_seq_for(self, input_seq: int) -> Optional[int]:
        """The room seq an input event landed on (replay seq remapping)."""
        return self._stored_for_input.get(input_seq)

    def finish(self, now_ms: int) -> list[ChatEvent]:
        """Drain every pending action (end of replay / shutdown).

        Typing flags are treated as stopped; deferred actions resume and
        everything fires at max(due, now). A transcript ending mid-hold must
        not strand a forced reply.
        """
        self.activity.typing.clear()
        out: list[ChatEvent] = []
        self._resume_deferred(now_ms)
        while self.pending:
            nxt = min(
                (p for p in self.pending if p.at_ms is not None),
                key=lambda p: (p.at_ms, p.action.trigger_seq),
            )
            self.pending.remove(nxt)
            out.extend(self._fire(nxt, max(nxt.at_ms, now_ms)))
        self.decision_log.flush()
        return out

    # -- governance entry points (service frames) ---------------------------

    def request_settings_change(self, actor: str, patch: dict, now_ms: int, via: str = "direct"):
        outcome = self.governor.request_change(actor, patch, via=via)
        return outcome, self._governance_events(outcome, now_ms)

    def apply_preset(self, actor: str, preset_id: str, now_ms: int):
        outcome, prompt_patch = self.governor.apply_preset(actor, preset_id)
        events = self._governance_events(outcome, now_ms)
        return outcome, events

    def cast_vote(self, actor: str, proposal_id: str, ballot: str, now_ms: int):
        vote_state = self.governor.cast_vote(proposal_id, actor, ballot)
        events = [
            self._append(ChatEvent(
                room=self.room, author=actor, kind="vote", ts_ms=now_ms,
                payload={"proposal": proposal_id, "ballot": ballot},
            ))
        ]
        if vote_state.applied is not None:
            events.append(self._notice(vote_state.applied, now_ms))
        return vote_state, events

    # -- internals -----------------------------------------------------------

    def _append(self, event: ChatEvent) -> ChatEvent:
        stored = self.transcript.append(event)
        self._track(stored)
        return stored

    def _track(self, event: ChatEvent) -> None:
        """Keep activity/roster state in step with every appended event."""
        author = event.author
        if event.kind == "message":
            self.activity.typing.discard(author)  # posting implies not typing
            if self.roster.kind_of(author) == "human":
                self.activity.human_message_count += 1
            elif author == self.agent_name:
                self.activity.agent_post_times.append(event.ts_ms)
        elif event.kind == "typing_start":
            if self.roster.kind_of(author) == "human":
                self.activity.typing.add(author)
        elif event.kind == "typing_stop":
            self.activity.typing.discard(author)
        elif event.kind == "join":
            if author != self.agent_name and author not in self.roster:
                self.roster.add_human(author)
        elif event.kind == "leave":
            self.roster.remove_human(author)
        if not self.activity.typing:
            self._resume_deferred(event.ts_ms)

    def _on_human_message(self, msg: ChatEvent, now: int) -> list[ChatEvent]:
        # the arrival of new content makes every waiting action stale
        for p in self.pending:
            if p.action.trigger_seq != msg.seq:
                p.stale = True

        if self.pending_intent is not None:
            consumed, events = self._resolve_intent(msg, now)
            if consumed:
                return events

        # count of human messages *before* this trigger, for the speak-first rule
        self.activity.human_message_count -= 1
        try:
            return self._gate(msg, now)
        finally:
            self.activity.human_message_count += 1

    def _gate(self, msg: ChatEvent, now: int) -> list[ChatEvent]:
        addressee = classify_addressee(msg, self.roster.names, self.agent_name)
        record = self.decision_log.open_record(msg.seq, addressee.label())

        if addressee.kind == gating.AGENT:
            intent = detect_settings_intent(msg, self.agent_name, self.settings)
            if intent is not None:
                return self._on_intent(msg, intent, addressee, record, now)

        record.invoked = should_invoke(addressee, self.settings, "human")
        if not record.invoked:
            record.finalize()
            self.decision_log.flush()
            return []

        decision = self._invoke_provider(msg)
        record.set_decision(decision.value, decision.verdict)
        action = decide(msg, self.settings, decision, addressee)
        record.override = action.provenance.override
        record.gate_result = action.provenance.gate_passed
        if action.kind == "silent":
            record.finalize()
            self.decision_log.flush()
            return []
        return self._schedule_action(action, [record], now, msg.ts_ms)

    def _invoke_provider(self, trigger: ChatEvent) -> AgentDecision:
        prompt = assemble_prompt(self._effective_prompt_config(),
                                 self.transcript.context_window(self.config.context_limit))
        alias = self._trigger_alias.get(trigger.seq)
        seen = trigger if alias is None else dataclasses.replace(trigger, seq=alias)
        raw = self.provider.generate(prompt, seen)
        try:
            return parse_decision(raw)
        except ParseError as exc:
            log.warning("room %s trigger %d: %s", self.room, trigger.seq, exc)
            if self.config.retry_parse_once:
                try:
                    return parse_decision(self.provider.generate(prompt, seen))
                except ParseError as exc2:
                    log.warning("room %s trigger %d retry: %s", self.room, trigger.seq, exc2)
            return synthetic_pass(source=trigger.author)

    def _effective_prompt_config(self) -> PromptConfig:
        cfg = dataclasses.replace(self.base_prompt_config, style=self.settings.style)
        if self._prompt_patch:
            cfg = dataclasses.replace(
                cfg, system_text=cfg.system_text.rstrip() + "\n" + self._prompt_patch
            )
        return cfg

    def _schedule_action(
        self,
        action: AgentAction,
        records: list[DecisionRecord],
        now: int,
        trigger_ts: int,
    ) -> list[ChatEvent]:
        result = schedule(action, self.settings.rate, self.activity,
                          now_ms=now, trigger_ts_ms=trigger_ts)
        record = records[-1]
        if isinstance(result, Suppressed):
            record.set_schedule("suppressed", result.reason)
            record.finalize()
            self.decision_log.flush()
            return []
        if isinstance(result, Deferred):
            record.set_schedule("deferred", True)
            self.pending.append(_Pending(action, records, deferred=True))
            return []
        assert isinstance(result, Scheduled)
        record.set_schedule("scheduled", result.at_ms)
        self.pending.append(_Pending(action, records, at_ms=result.at_ms))
        self._consolidate()
        return []

    def _resume_deferred(self, now: int) -> None:
        if self.settings.rate.hold_while_typing and self.activity.typing:
            return
        for p in list(self.pending):
            if not p.deferred:
                continue
            trigger = self.transcript.events[p.action.trigger_seq - 1]
            result = schedule(p.action, self.settings.rate, self.activity,
                              now_ms=now, trigger_ts_ms=trigger.ts_ms)
            record = p.records[-1]
            if isinstance(result, Suppressed):
                record.set_schedule("suppressed", result.reason)
                record.finalize()
                self.decision_log.flush()
                self.pending.remove(p)
            elif isinstance(result, Scheduled):
                p.deferred = False
                p.at_ms = result.at_ms
                record.set_schedule("scheduled", result.at_ms)
        self._consolidate()

    def _consolidate(self) -> None:
        window = self.settings.rate.consolidate_window_ms
        scheduled = [p for p in self.pending if not p.deferred and p.at_ms is not None]
        if window <= 0 or len(scheduled) < 2:
            return
        by_trigger = {p.action.trigger_seq: p for p in scheduled}
        plain = [gating.PendingAction(p.action, p.at_ms, stale=p.stale) for p in scheduled]
        merged = gating.consolidate(plain, window)
        if len(merged) == len(plain):
            return
        keep = [p for p in self.pending if p.action.trigger_seq not in by_trigger]
        for m in merged:
            members = [by_trigger[s] for s in (*m.action.merged_from, m.action.trigger_seq)]
            records = [r for p in members for r in p.records]
            reinvoked = any(p.reinvoked for p in members)
            keep.append(_Pending(m.action, records, at_ms=m.at_ms, stale=m.stale,
                                 reinvoked=reinvoked))
        self.pending = keep

    def _fire(self, pending: _Pending, now: int) -> list[ChatEvent]:
        action = pending.action
        # consolidated posts are exempt from the stale rule: re-invoking for
        # the carrier trigger alone cannot stand in for the merged members
        if pending.stale and not pending.reinvoked and not action.merged_from:
            refreshed = self._reinvoke(action)
            if refreshed is None:
                for r in pending.records:
                    r.finalize()
                self.decision_log.flush()
                return []
            action = refreshed
        return self._emit(action, pending.records, now)

    def _reinvoke(self, action: AgentAction) -> Optional[AgentAction]:
        """Fresh decision over the moved-on conversation; None drops the action."""
        trigger = self.transcript.events[action.trigger_seq - 1]
        decision = self._invoke_provider(trigger)
        fresh = decide(trigger, self.settings, decision, action.provenance.addressee)
        fresh.provenance.reinvoked = True
        if fresh.kind == "silent":
            log.info("room %s trigger %d: stale action dropped after re-invocation",
                     self.room, action.trigger_seq)
            return None
        fresh.merged_from = action.merged_from
        return fresh

    def _emit(self, action: AgentAction, records: list[DecisionRecord], now: int) -> list[ChatEvent]:
        out: list[ChatEvent] = []
        if action.kind == "react":
            emoji = map_reaction(action.reaction)
            stored = self._append(ChatEvent(
                room=self.room, author=self.agent_name, kind="reaction", ts_ms=now,
                emoji=emoji, thread_of=action.trigger_seq,
            ))
            out.append(stored)
            final = {"reaction": emoji}
        else:
            placement = action.placement or place(action.reply, self.settings,
                                                  action.trigger_seq)
            if placement.mode == "truncated":
                full = self._append(ChatEvent(
                    room=self.room, author=self.agent_name, kind="message", ts_ms=now,
                    text=action.reply, thread_of=placement.parent_seq,
                ))
                preview = self._append(ChatEvent(
                    room=self.room, author=self.agent_name, kind="message", ts_ms=now,
                    text=placement.preview,
                    payload={"truncated": True, "full_seq": full.seq},
                ))
                out.extend([full, preview])
                final = {"posted_seq": preview.seq}
            else:
                stored = self._append(ChatEvent(
                    room=self.room, author=self.agent_name, kind="message", ts_ms=now,
                    text=action.reply,
                    thread_of=placement.parent_seq if placement.mode == "thread" else None,
                ))
                out.append(stored)
                final = {"posted_seq": stored.seq}
        for record in records:
            record.finalize(final)
        self.decision_log.flush()
        return out

    # -- conversational control ----------------------------------------------

    def _on_intent(
        self,
        msg: ChatEvent,
        intent,
        addressee,
        record: DecisionRecord,
        now: int,
    ) -> list[ChatEvent]:
        record.override = gating.SETTINGS_INTENT
        if self.config.auto_apply_intents:
            outcome, events = self.request_settings_change(
                msg.author, intent.patch, now, via="conversation"
            )
            if isinstance(outcome, Applied):
                ack = self._append(ChatEvent(
                    room=self.room, author=self.agent_name, kind="message", ts_ms=now,
                    text=f"Done — {outcome.summary}.",
                ))
            else:
                reason = outcome.reason if isinstance(outcome, Denied) else "vote opened"
                ack = self._append(ChatEvent(
                    room=self.room, author=self.agent_name, kind="message", ts_ms=now,
                    text=f"I can't apply that directly: {reason}.",
                ))
            events.append(ack)
            record.set_schedule("scheduled", now)
            record.finalize({"posted_seq": ack.seq})
            self.decision_log.flush()
            return events
        self.pending_intent = PendingIntent(
            intent=intent, actor=msg.author, opened_ts_ms=msg.ts_ms,
            window_ms=self.config.confirm_window_ms,
        )
        text = confirmation_text(intent, self.settings, self.agent_name)
        action = AgentAction(
            kind="post", trigger_seq=msg.seq, reply=text,
            provenance=gating.Provenance(addressee, None, override=gating.SETTINGS_INTENT),
            placement=place(text, self.settings, msg.seq),
        )
        return self._schedule_action(action, [record], now, msg.ts_ms)

    def _resolve_intent(self, msg: ChatEvent, now: int) -> tuple[bool, list[ChatEvent]]:
        """Returns (consumed, events); resolution messages are not gated."""
        pending = self.pending_intent
        if pending.expired(msg.ts_ms):
            log.info("room %s: settings intent from %s expired unconfirmed",
                     self.room, pending.actor)
            self.pending_intent = None
            return False, []
        verdict = classify_confirmation(msg.text)
        if verdict is None:
            return False, []
        self.pending_intent = None
        if verdict == "no":
            log.info("room %s: settings intent declined", self.room)
            return True, []
        outcome, events = self.request_settings_change(
            pending.actor, pending.intent.patch, now, via="conversation"
        )
        if isinstance(outcome, Denied):
            events.append(self._append(ChatEvent(
                room=self.room, author=self.agent_name, kind="message", ts_ms=now,
                text=f"I can't apply that: {outcome.reason}.",
            )))
        return True, events

    # -- governance event emission --------------------------------------------

    def _on_command(self, event: ChatEvent, now: int) -> list[ChatEvent]:
        """Human-authored governance events in the input stream act as commands."""
        payload = event.payload or {}
        if event.kind in ("settings_change", "proposal"):
            patch = payload.get("patch")
            if not isinstance(patch, dict):
                log.warning("room %s seq %d: %s event without a patch payload",
                            self.room, event.seq, event.kind)
                return []
            outcome, events = self.request_settings_change(event.author, patch, now)
            if isinstance(outcome, Denied):
                log.warning("room %s seq %d: change denied: %s",
                            self.room, event.seq, outcome.reason)
            return events
        if event.kind == "vote":
            ballot = payload.get("ballot")
            proposal = self.governor.open_proposal
            proposal_id = payload.get("proposal") or (proposal.id if proposal else None)
            if ballot not in ("yes", "no") or proposal_id is None:
                log.warning("room %s seq %d: unusable vote payload", self.room, event.seq)
                return []
            try:
                state = self.governor.cast_vote(proposal_id, event.author, ballot)
            except GovernanceError as exc:
                log.warning("room %s seq %d: %s", self.room, event.seq, exc)
                return []
            if state.applied is not None:
                return [self._notice(state.applied, now)]
            return []
        return []

    def _governance_events(self, outcome, now: int) -> list[ChatEvent]:
        events: list[ChatEvent] = []
        if isinstance(outcome, Applied):
            events.append(self._notice(outcome, now))
        elif isinstance(outcome, ProposalOpened):
            p = outcome.proposal
            events.append(self._append(ChatEvent(
                room=self.room, author=p.proposer, kind="proposal", ts_ms=now,
                text=f"proposal {p.id}: {self._patch_summary(p.patch)}",
                payload={"id": p.id, "patch": p.patch, "proposer": p.proposer,
                         "eligible": list(p.eligible)},
            )))
            events.append(self._append(ChatEvent(
                room=self.room, author=p.proposer, kind="vote", ts_ms=now,
                payload={"proposal": p.id, "ballot": "yes"},
            )))
            if outcome.vote_state.applied is not None:
                events.append(self._notice(outcome.vote_state.applied, now))
        return events

    def _patch_summary(self, patch: dict) -> str:
        from .settings import describe_patch

        return describe_patch(patch, self.settings)

    def _notice(self, applied: Applied, now: int) -> ChatEvent:
        """The one visible settings_change notice per applied change."""
        self._prompt_patch = self.governor.preset_prompt(applied.settings.preset)
        return self._append(ChatEvent(
            room=self.room, author=self.agent_name, kind="settings_change", ts_ms=now,
            text=f"settings: {applied.summary}",
            payload={"actor": applied.actor, "via": applied.via, "summary": applied.summary},
        ))
