"""Deterministic replay, participation metrics, and parameter sweeps.

Replay feeds a recorded transcript's events through the room pipeline on a
simulated clock (time is each event's ts_ms), so identical inputs always
yield identical outputs — the decision log doubles as a regression oracle.
Sweeps rerun the same transcript across a settings axis and tabulate how
participation shifts.
"""

from __future__ import annotations

import dataclasses
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .decisionlog import DecisionLog
from .governance import BehaviorPreset, Governor, builtin_presets
from .model import (
    AgentDecision,
    ChatEvent,
    RoomTranscript,
    Roster,
    TranscriptError,
    load_transcript,
)
from .pipeline import PipelineConfig, RoomPipeline
from .provider import (
    Provider,
    PromptConfig,
    ProviderScript,
    ScriptedProvider,
    default_prompt_config,
    serialize_decision,
)
from .settings import AgentSettings, apply_patch

log = logging.getLogger(__name__)

DEFAULT_AGENT_NAME = "Nova"

FORCED_OVERRIDES = ("force_reply", "force_reply_conflict")

METRIC_FIELDS = (
    "agent_message_share",
    "agent_post_count",
    "forced_reply_count",
    "suppressed_count",
    "mean_reply_delay_ms",
    "typing_interruptions",
)


@dataclass(frozen=True)
class Metrics:
    agent_message_share: float
    agent_post_count: int
    forced_reply_count: int
    suppressed_count: int
    mean_reply_delay_ms: float
    typing_interruptions: int

    def as_row(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_FIELDS}


@dataclass
class ReplayResult:
    agent_name: str
    events: list[ChatEvent]
    records: list[dict]
    decision_lines: list[str]
    in_to_out: dict[int, int]
    metrics: Optional[Metrics] = None
    violations: list[str] = field(default_factory=list)

    def contributed_input_seqs(self) -> set[int]:
        """Input seqs of triggers that drew a post or reaction."""
        out_to_in = {v: k for k, v in self.in_to_out.items()}
        return {
            out_to_in[r["trigger_seq"]]
            for r in self.records
            if r.get("final") is not None and r["trigger_seq"] in out_to_in
        }

    def event_by_seq(self, seq: int) -> ChatEvent:
        return self.events[seq - 1]


def _pre_scan_roster(events: Sequence[ChatEvent], agent_name: str) -> Roster:
    roster = Roster(agent_name)
    for ev in events:
        if ev.author != agent_name and ev.author not in roster:
            roster.add_human(ev.author)
    return roster


def replay(
    transcript: Union[str, Path, Sequence[ChatEvent]],
    script: Union[ProviderScript, Provider],
    settings: AgentSettings,
    *,
    agent_name: str = DEFAULT_AGENT_NAME,
    out_dir: Optional[Union[str, Path]] = None,
    prompt_config: Optional[PromptConfig] = None,
    presets: Optional[dict[str, BehaviorPreset]] = None,
    config: PipelineConfig = PipelineConfig(),
) -> ReplayResult:
    """Run one transcript through the pipeline under simulated time."""
    if isinstance(transcript, (str, Path)):
        events = load_transcript(transcript)
    else:
        events = list(transcript)
    for prev, cur in zip(events, events[1:]):
        if cur.ts_ms < prev.ts_ms:
            raise TranscriptError(
                f"timestamps must be non-decreasing: seq {cur.seq} at {cur.ts_ms} "
                f"after {prev.ts_ms}"
            )
    room = events[0].room if events else "replay"
    for ev in events:
        if ev.room != room:
            raise TranscriptError(f"replay handles one room; saw {ev.room!r} and {room!r}")

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    roster = _pre_scan_roster(events, agent_name)
    governor = Governor(settings.copy(), roster,
                        presets=presets if presets is not None else builtin_presets())
    provider = ScriptedProvider(script) if isinstance(script, ProviderScript) else script
    transcript_out = RoomTranscript(
        room, log_path=out_path / "transcript.jsonl" if out_path else None
    )
    decision_log = DecisionLog(out_path / "decisions.jsonl" if out_path else None)
    pipeline = RoomPipeline(transcript_out, governor, provider,
                            prompt_config or default_prompt_config(agent_name),
                            decision_log, config)

    in_to_out: dict[int, int] = {}
    last_ts = 0
    for ev in events:
        thread_of = ev.thread_of
        if thread_of is not None:
            if thread_of not in in_to_out:
                raise TranscriptError(
                    f"seq {ev.seq}: thread_of={thread_of} precedes no replayed message"
                )
            thread_of = in_to_out[thread_of]
        fresh = dataclasses.replace(ev, seq=0, thread_of=thread_of)
        pipeline.handle_event(fresh, input_seq=ev.seq)
        in_to_out[ev.seq] = pipeline.stored_seq_for(ev.seq)
        last_ts = ev.ts_ms
    pipeline.finish(last_ts)
    decision_log.close()
    transcript_out.close()

    result = ReplayResult(
        agent_name=agent_name,
        events=list(transcript_out.events),
        records=[r.to_json_dict() for r in decision_log.records],
        decision_lines=decision_log.lines(),
        in_to_out=in_to_out,
    )
    result.violations = verify_replay(result, events)
    result.metrics = compute_metrics(result)
    if out_path is not None:
        (out_path / "metrics.tsv").write_text(metrics_tsv([("replay", result.metrics)]),
                                              encoding="utf-8")
        (out_path / "metrics.txt").write_text(metrics_table([("replay", result.metrics)]),
                                              encoding="utf-8")
    return result


def verify_replay(result: ReplayResult, inputs: Sequence[ChatEvent]) -> list[str]:
    """Replay invariants; any entry is a hard failure (nonzero exit in the CLI)."""
    violations: list[str] = []
    for i, ev in enumerate(result.events, start=1):
        if ev.seq != i:
            violations.append(f"output seq not contiguous at position {i}: {ev.seq}")
            break
    # the human-authored subsequence of the output must equal the input exactly,
    # up to re-sequencing (thread parents compared through the seq map)
    human_inputs = [e for e in inputs if e.author != result.agent_name]
    human_outputs = [e for e in result.events if e.author != result.agent_name]
    if len(human_inputs) != len(human_outputs):
        violations.append(
            f"human event count changed: {len(human_inputs)} in, {len(human_outputs)} out"
        )
    else:
        for src, out in zip(human_inputs, human_outputs):
            mapped_thread = (
                result.in_to_out.get(src.thread_of) if src.thread_of is not None else None
            )
            same = (
                src.author == out.author and src.kind == out.kind
                and src.ts_ms == out.ts_ms and src.text == out.text
                and src.emoji == out.emoji and src.payload == out.payload
                and mapped_thread == out.thread_of
            )
            if not same:
                violations.append(f"human event diverged: input seq {src.seq}")
    human_message_seqs = {
        e.seq for e in result.events
        if e.kind == "message" and e.author != result.agent_name
    }
    last_trigger = 0
    for record in result.records:
        seq = record["trigger_seq"]
        if seq not in human_message_seqs:
            violations.append(f"decision record for non-human-message seq {seq}")
        if seq <= last_trigger:
            violations.append(f"decision records out of order at seq {seq}")
        last_trigger = seq
    return violations


def compute_metrics(result: ReplayResult) -> Metrics:
    agent = result.agent_name
    messages = [e for e in result.events if e.kind == "message"]
    agent_posts = [e for e in messages if e.author == agent]
    share = len(agent_posts) / len(messages) if messages else 0.0

    forced = sum(
        1 for r in result.records
        if r.get("override") in FORCED_OVERRIDES and r.get("final") is not None
    )
    suppressed = sum(1 for r in result.records if "suppressed" in r)

    delays = []
    for r in result.records:
        final = r.get("final") or {}
        if "posted_seq" in final:
            trigger = result.event_by_seq(r["trigger_seq"])
            posted = result.event_by_seq(final["posted_seq"])
            delays.append(posted.ts_ms - trigger.ts_ms)
    mean_delay = sum(delays) / len(delays) if delays else 0.0

    typing: set[str] = set()
    interruptions = 0
    for ev in result.events:
        if ev.kind == "typing_start" and ev.author != agent:
            typing.add(ev.author)
        elif ev.kind == "typing_stop":
            typing.discard(ev.author)
        elif ev.kind == "message":
            if ev.author == agent and typing:
                interruptions += 1
            typing.discard(ev.author)

    return Metrics(
        agent_message_share=round(share, 6),
        agent_post_count=len(agent_posts),
        forced_reply_count=forced,
        suppressed_count=suppressed,
        mean_reply_delay_ms=round(mean_delay, 3),
        typing_interruptions=interruptions,
    )


# -- sweeps ------------------------------------------------------------------


def sweep(
    transcript: Union[str, Path, Sequence[ChatEvent]],
    script: Union[ProviderScript, Provider],
    settings: AgentSettings,
    *,
    axis: str = "threshold",
    values: Sequence = ("high", "medium", "low"),
    agent_name: str = DEFAULT_AGENT_NAME,
    out_dir: Optional[Union[str, Path]] = None,
    **replay_kwargs,
) -> list[tuple[str, ReplayResult]]:
    """One replay per axis value; returns [(label, result), ...] in given order."""
    if isinstance(transcript, (str, Path)):
        events = load_transcript(transcript)
    else:
        events = list(transcript)
    rows: list[tuple[str, ReplayResult]] = []
    base = Path(out_dir) if out_dir is not None else None
    for value in values:
        if axis == "threshold":
            patched = apply_patch(settings, {"threshold": value})
        elif axis == "max_posts_per_minute":
            patched = apply_patch(settings, {"rate": {"max_posts_per_minute": int(value)}})
        else:
            raise ValueError(f"unknown sweep axis: {axis!r}")
        label = str(value)
        row_dir = base / f"{axis}_{label}" if base is not None else None
        rows.append((label, replay(events, script, patched, agent_name=agent_name,
                                   out_dir=row_dir, **replay_kwargs)))
    if base is not None:
        base.mkdir(parents=True, exist_ok=True)
        pairs = [(label, r.metrics) for label, r in rows]
        (base / "metrics.tsv").write_text(metrics_tsv(pairs), encoding="utf-8")
        (base / "metrics.txt").write_text(metrics_table(pairs), encoding="utf-8")
    return rows


def metrics_tsv(rows: Sequence[tuple[str, Metrics]]) -> str:
    lines = ["setting\t" + "\t".join(METRIC_FIELDS)]
    for label, metrics in rows:
        row = metrics.as_row()
        lines.append(label + "\t" + "\t".join(str(row[f]) for f in METRIC_FIELDS))
    return "\n".join(lines) + "\n"


def metrics_table(rows: Sequence[tuple[str, Metrics]]) -> str:
    headers = ["setting", *METRIC_FIELDS]
    table = [headers] + [
        [label, *(str(m.as_row()[f]) for f in METRIC_FIELDS)] for label, m in rows
    ]
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    out = []
    for i, row in enumerate(table):
        out.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


# -- seeded generators (property tests and demos) -----------------------------

_WORDS = (
    "idea", "candidate", "tool", "molecule", "criteria", "vote", "agenda", "sketch",
    "draft", "metric", "notes", "plan", "question", "review", "option", "test",
)


def generate_transcript(
    seed: int,
    *,
    n_messages: int = 30,
    n_humans: int = 4,
    agent_name: str = DEFAULT_AGENT_NAME,
    address_prob: float = 0.15,
    other_address_prob: float = 0.1,
    typing_prob: float = 0.1,
    room: str = "sim",
    start_ts_ms: int = 1_000_000,
) -> list[ChatEvent]:
    """Seeded random room traffic; same seed, same transcript."""
    rng = random.Random(seed)
    humans = [f"User {i + 1}" for i in range(n_humans)]
    events: list[ChatEvent] = []
    ts = start_ts_ms
    seq = 0

    def emit(**kw) -> None:
        nonlocal seq
        seq += 1
        events.append(ChatEvent(room=room, seq=seq, ts_ms=ts, **kw))

    for human in humans:
        emit(author=human, kind="join")
        ts += rng.randint(50, 500)
    for _ in range(n_messages):
        author = rng.choice(humans)
        ts += rng.randint(500, 8000)
        if rng.random() < typing_prob:
            emit(author=author, kind="typing_start")
            ts += rng.randint(300, 3000)
        words = rng.choices(_WORDS, k=rng.randint(2, 9))
        text = " ".join(words)
        roll = rng.random()
        if roll < address_prob:
            text = f"{agent_name}, {text}"
        elif roll < address_prob + other_address_prob:
            target = rng.choice([h for h in humans if h != author])
            text = f"{target}, {text}"
        emit(author=author, kind="message", text=text)
    return events


def generate_script(
    seed: int,
    events: Sequence[ChatEvent],
    *,
    agent_name: str = DEFAULT_AGENT_NAME,
    submit_prob: float = 0.7,
    reaction_prob: float = 0.1,
) -> ProviderScript:
    """A scripted decision per human message, values spread across [0, 100]."""
    from .provider import ScriptRule

    rng = random.Random(seed)
    rules = []
    for ev in events:
        if ev.kind != "message" or ev.author == agent_name:
            continue
        value = rng.randint(0, 100)
        verdict = "SUBMIT" if rng.random() < submit_prob else "PASS"
        if rng.random() < reaction_prob:
            reply = "<LIKE>"
        else:
            reply = f"thoughts on {ev.text.split()[-1]} ({rng.randint(1, 999)})"
        decision = AgentDecision(source=ev.author, target="all", reply=reply,
                                 value=value, verdict=verdict)
        rules.append(ScriptRule(emit=serialize_decision(decision, agent_name), seq=ev.seq))
    return ProviderScript(rules=tuple(rules))
