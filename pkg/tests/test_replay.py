"""Deterministic replays: verification, metrics, sweeps, generators, CLI."""

from __future__ import annotations

import dataclasses
import json

import pytest

from roundtable import (
    AgentDecision,
    AgentSettings,
    ChatEvent,
    PromptConfig,
    ProviderScript,
    ScriptRule,
    compute_metrics,
    dump_transcript,
    generate_script,
    generate_transcript,
    replay,
    serialize_decision,
    sweep,
)
from roundtable.cli import main as cli_main
from roundtable.model import TranscriptError
from roundtable.replay import METRIC_FIELDS, verify_replay
from roundtable.settings import RatePolicy

from conftest import AGENT, join, msg

PROMPT = PromptConfig(agent_name=AGENT, system_text="You are {{agent_name}}.",
                      one_shot=f"User: hi\n{AGENT}: hello")


def block(value, reply, verdict="SUBMIT", source="alice"):
    return serialize_decision(
        AgentDecision(source=source, target="all", reply=reply, value=value,
                      verdict=verdict), AGENT)


def rule(substring, value, reply, verdict="SUBMIT"):
    return ScriptRule(emit=block(value, reply, verdict), substring=substring)


def seqd(events):
    """Stamp input seqs the way a stored transcript would carry them."""
    return [dataclasses.replace(e, seq=i) for i, e in enumerate(events, start=1)]


BASE_EVENTS = seqd([
    join("alice", ts=0),
    join("bob", ts=100),
    msg("alice", "shall we begin?", ts=1_000),
    msg("bob", f"{AGENT}, any ideas?", ts=6_000),
    msg("alice", "sounds good", ts=12_000),
])

BASE_SCRIPT = ProviderScript(rules=(
    rule("begin", 20, "", verdict="PASS"),
    rule("ideas", 95, "Here are two."),
    rule("sounds good", 30, "", verdict="PASS"),
))

EAGER = AgentSettings(rate=RatePolicy(initial_delay_ms=0, max_posts_per_minute=10_000))


class TestReplayBasics:
    def test_clean_replay_has_no_violations(self):
        result = replay(BASE_EVENTS, BASE_SCRIPT, EAGER.copy(),
                        agent_name=AGENT, prompt_config=PROMPT)
        assert result.violations == []
        agent_posts = [e for e in result.events if e.author == AGENT]
        assert [e.text for e in agent_posts] == ["Here are two."]
        assert agent_posts[0].ts_ms == 6_000

    def test_seq_remapping_tracks_insertions(self):
        result = replay(BASE_EVENTS, BASE_SCRIPT, EAGER.copy(),
                        agent_name=AGENT, prompt_config=PROMPT)
        # inputs 1-4 land unshifted; the agent post displaces input 5 by one
        assert result.in_to_out == {1: 1, 2: 2, 3: 3, 4: 4, 5: 6}

    def test_thread_of_remapped_through_agent_insertions(self):
        events = seqd([
            join("alice", ts=0),
            join("bob", ts=100),
            msg("alice", f"{AGENT}, thoughts?", ts=1_000),
            msg("bob", "replying in thread", ts=8_000, thread_of=3),
        ])
        script = ProviderScript(rules=(rule("thoughts", 90, "One thought."),))
        result = replay(events, script, EAGER.copy(),
                        agent_name=AGENT, prompt_config=PROMPT)
        assert result.violations == []
        out_reply = [e for e in result.events if e.author == "bob"
                     and e.kind == "message"][0]
        # the agent posted at out-seq 4, so bob's parent stayed at 3
        assert out_reply.thread_of == result.in_to_out[3] == 3
        assert out_reply.seq == 5

    def test_thread_of_to_unseen_message_rejected(self):
        events = seqd([
            join("alice", ts=0),
            msg("alice", "dangling", ts=1_000, thread_of=99),
        ])
        with pytest.raises(TranscriptError, match="thread_of=99"):
            replay(events, BASE_SCRIPT, EAGER.copy(),
                   agent_name=AGENT, prompt_config=PROMPT)

    def test_decreasing_timestamps_rejected(self):
        events = seqd([
            join("alice", ts=1_000),
            msg("alice", "back in time", ts=500),
        ])
        with pytest.raises(TranscriptError, match="non-decreasing"):
            replay(events, BASE_SCRIPT, EAGER.copy(),
                   agent_name=AGENT, prompt_config=PROMPT)

    def test_mixed_rooms_rejected(self):
        events = seqd([join("alice", ts=0),
                       ChatEvent(room="other", author="alice", kind="message",
                                 ts_ms=1_000, text="hi")])
        with pytest.raises(TranscriptError, match="one room"):
            replay(events, BASE_SCRIPT, EAGER.copy(),
                   agent_name=AGENT, prompt_config=PROMPT)

    def test_contributed_input_seqs(self):
        result = replay(BASE_EVENTS, BASE_SCRIPT, EAGER.copy(),
                        agent_name=AGENT, prompt_config=PROMPT)
        assert result.contributed_input_seqs() == {4}

    def test_output_files_written(self, tmp_path):
        out = tmp_path / "run"
        replay(BASE_EVENTS, BASE_SCRIPT, EAGER.copy(),
               agent_name=AGENT, prompt_config=PROMPT, out_dir=out)
        for name in ("transcript.jsonl", "decisions.jsonl", "metrics.tsv",
                     "metrics.txt"):
            assert (out / name).exists(), name
        header = (out / "metrics.tsv").read_text().splitlines()[0]
        assert header == "setting\t" + "\t".join(METRIC_FIELDS)


class TestVerifyReplay:
    def _clean(self):
        return replay(BASE_EVENTS, BASE_SCRIPT, EAGER.copy(),
                      agent_name=AGENT, prompt_config=PROMPT)

    def test_detects_mutated_human_text(self):
        result = self._clean()
        idx = next(i for i, e in enumerate(result.events)
                   if e.author == "alice" and e.kind == "message")
        result.events[idx] = dataclasses.replace(result.events[idx],
                                                 text="tampered")
        violations = verify_replay(result, BASE_EVENTS)
        assert any("diverged" in v for v in violations)

    def test_detects_dropped_human_event(self):
        result = self._clean()
        result.events = [e for e in result.events
                         if not (e.author == "alice" and e.text == "sounds good")]
        violations = verify_replay(result, BASE_EVENTS)
        assert any("count changed" in v for v in violations)

    def test_detects_noncontiguous_seqs(self):
        result = self._clean()
        result.events[2] = dataclasses.replace(result.events[2], seq=42)
        violations = verify_replay(result, BASE_EVENTS)
        assert any("contiguous" in v for v in violations)

    def test_detects_record_for_wrong_seq(self):
        result = self._clean()
        result.records[0]["trigger_seq"] = 1  # a join, not a human message
        violations = verify_replay(result, BASE_EVENTS)
        assert any("non-human-message" in v for v in violations)


class TestMetrics:
    def test_crafted_scenario(self):
        events = seqd([
            join("alice", ts=0),
            join("bob", ts=50),
            join("carol", ts=60),
            msg("alice", f"{AGENT}, hello?", ts=1_000),
            msg("bob", "idea please", ts=5_000),
            ChatEvent(room="test", author="carol", kind="typing_start", ts_ms=9_000),
            msg("alice", "more ideas", ts=10_000),
            # lands after the third post (fires at 12_000), so the cap of
            # three is now exhausted and this one gets suppressed
            msg("bob", "and more", ts=12_100),
        ])
        script = ProviderScript(rules=(
            rule("hello", 95, "hi there"),
            rule("idea please", 80, "one idea"),
            rule("more ideas", 85, "another"),
            rule("and more", 90, "yet more"),
        ))
        settings = AgentSettings(rate=RatePolicy(
            initial_delay_ms=2_000, max_posts_per_minute=3,
            hold_while_typing=False))
        result = replay(events, script, settings,
                        agent_name=AGENT, prompt_config=PROMPT)
        assert result.violations == []
        m = result.metrics
        assert m.agent_post_count == 3
        assert m.agent_message_share == round(3 / 7, 6)
        assert m.forced_reply_count == 1
        assert m.suppressed_count == 1
        assert m.mean_reply_delay_ms == 2000.0
        assert m.typing_interruptions == 1

    def test_empty_transcript(self):
        result = replay([], BASE_SCRIPT, EAGER.copy(),
                        agent_name=AGENT, prompt_config=PROMPT)
        m = result.metrics
        assert m.agent_post_count == 0
        assert m.agent_message_share == 0.0
        assert m.mean_reply_delay_ms == 0.0

    def test_as_row_covers_all_fields(self):
        result = replay(BASE_EVENTS, BASE_SCRIPT, EAGER.copy(),
                        agent_name=AGENT, prompt_config=PROMPT)
        row = result.metrics.as_row()
        assert set(row) == set(METRIC_FIELDS)


class TestSweep:
    def _events_and_script(self):
        events = seqd([
            join("alice", ts=0),
            join("bob", ts=100),
            msg("alice", "warmup", ts=1_000),
            msg("bob", "stretch", ts=5_000),
            msg("alice", "sprint", ts=9_000),
        ])
        script = ProviderScript(rules=(
            rule("warmup", 95, "energetic"),
            rule("stretch", 80, "measured"),
            rule("sprint", 60, "tepid"),
        ))
        return events, script

    def test_threshold_sweep_orders_and_labels(self):
        events, script = self._events_and_script()
        rows = sweep(events, script, EAGER.copy(), axis="threshold",
                     values=("high", "medium", "low"),
                     agent_name=AGENT, prompt_config=PROMPT)
        assert [label for label, _ in rows] == ["high", "medium", "low"]
        counts = [r.metrics.agent_post_count for _, r in rows]
        assert counts == [1, 2, 3]
        assert all(r.violations == [] for _, r in rows)

    def test_rate_axis(self):
        events, script = self._events_and_script()
        rows = sweep(events, script,
                     AgentSettings(threshold="low",
                                   rate=RatePolicy(initial_delay_ms=0)),
                     axis="max_posts_per_minute", values=(1, 60),
                     agent_name=AGENT, prompt_config=PROMPT)
        assert [label for label, _ in rows] == ["1", "60"]
        assert rows[0][1].metrics.agent_post_count == 1
        assert rows[1][1].metrics.agent_post_count == 3

    def test_unknown_axis(self):
        events, script = self._events_and_script()
        with pytest.raises(ValueError, match="axis"):
            sweep(events, script, EAGER.copy(), axis="tone", values=("x",),
                  agent_name=AGENT, prompt_config=PROMPT)

    def test_sweep_output_tree(self, tmp_path):
        events, script = self._events_and_script()
        out = tmp_path / "sweep"
        sweep(events, script, EAGER.copy(), axis="threshold",
              values=("high", "low"), agent_name=AGENT,
              prompt_config=PROMPT, out_dir=out)
        assert (out / "metrics.tsv").exists()
        assert (out / "metrics.txt").exists()
        for label in ("high", "low"):
            assert (out / f"threshold_{label}" / "transcript.jsonl").exists()
        tsv = (out / "metrics.tsv").read_text().splitlines()
        assert len(tsv) == 3  # header + one row per value
        assert tsv[1].startswith("high\t")


class TestGenerators:
    def test_transcript_deterministic_per_seed(self):
        a = generate_transcript(7, n_messages=25, agent_name=AGENT)
        b = generate_transcript(7, n_messages=25, agent_name=AGENT)
        assert [e.to_json_dict() for e in a] == [e.to_json_dict() for e in b]
        c = generate_transcript(8, n_messages=25, agent_name=AGENT)
        assert [e.to_json_dict() for e in a] != [e.to_json_dict() for e in c]

    def test_transcript_is_replayable(self):
        events = generate_transcript(11, n_messages=40, agent_name=AGENT)
        script = generate_script(11, events, agent_name=AGENT)
        result = replay(events, script, AgentSettings(),
                        agent_name=AGENT, prompt_config=PROMPT)
        assert result.violations == []

    def test_script_deterministic_per_seed(self):
        events = generate_transcript(3, n_messages=20, agent_name=AGENT)
        s1 = generate_script(3, events, agent_name=AGENT)
        s2 = generate_script(3, events, agent_name=AGENT)
        assert [r.emit for r in s1.rules] == [r.emit for r in s2.rules]

    def test_replay_is_deterministic(self):
        events = generate_transcript(21, n_messages=35, agent_name=AGENT)
        script = generate_script(21, events, agent_name=AGENT)
        r1 = replay(events, script, AgentSettings(), agent_name=AGENT,
                    prompt_config=PROMPT)
        r2 = replay(events, script, AgentSettings(), agent_name=AGENT,
                    prompt_config=PROMPT)
        assert r1.decision_lines == r2.decision_lines
        assert ([e.to_json_line() for e in r1.events]
                == [e.to_json_line() for e in r2.events])


class TestCli:
    def _write_inputs(self, tmp_path):
        transcript = tmp_path / "transcript.jsonl"
        dump_transcript(BASE_EVENTS, transcript)
        script = tmp_path / "script.json"
        script.write_text(json.dumps([
            {"match": {"substring": "ideas"}, "emit": block(95, "Here are two.")},
        ]), encoding="utf-8")
        return transcript, script

    def test_replay_command_exits_zero(self, tmp_path, capsys):
        transcript, script = self._write_inputs(tmp_path)
        code = cli_main(["replay", "--transcript", str(transcript),
                         "--script", str(script),
                         "--agent-name", AGENT,
                         "--out", str(tmp_path / "out")])
        assert code == 0
        captured = capsys.readouterr()
        assert "agent_post_count" in captured.out
        assert (tmp_path / "out" / "decisions.jsonl").exists()

    def test_sweep_command_exits_zero(self, tmp_path, capsys):
        transcript, script = self._write_inputs(tmp_path)
        code = cli_main(["sweep", "--transcript", str(transcript),
                         "--script", str(script),
                         "--agent-name", AGENT,
                         "--thresholds", "high,low",
                         "--out", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "high" in out and "low" in out

    def test_replay_command_missing_file(self, tmp_path):
        with pytest.raises((SystemExit, FileNotFoundError)):
            cli_main(["replay", "--transcript", str(tmp_path / "nope.jsonl"),
                      "--script", str(tmp_path / "nope.json")])
