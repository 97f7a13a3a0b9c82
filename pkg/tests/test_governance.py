"""Settings governance: policies, voting, presets, and conversational control."""

from __future__ import annotations

import itertools
import json

import pytest

from roundtable import (
    AgentSettings,
    Applied,
    Denied,
    GovernanceError,
    Governor,
    PendingIntent,
    ProposalOpened,
    Roster,
    builtin_presets,
    classify_confirmation,
    detect_settings_intent,
    load_presets,
)
from roundtable.governance import confirm_and_apply, confirmation_text, parse_presets
from roundtable.settings import GovernancePolicy

from conftest import msg


def make_governor(policy="open", admins=(), humans=("alice", "bob", "carol"),
                  settings=None):
    roster = Roster("Nova")
    for name in humans:
        roster.add_human(name)
    s = settings or AgentSettings()
    s.governance = GovernancePolicy(policy=policy, admins=list(admins))
    return Governor(s, roster)


class TestOpenPolicy:
    def test_any_member_applies(self):
        gov = make_governor("open")
        out = gov.request_change("alice", {"threshold": "low"})
        assert isinstance(out, Applied)
        assert gov.settings.threshold == "low"
        assert out.summary == "threshold: medium -> low"
        assert out.actor == "alice" and out.via == "direct"

    def test_non_member_denied(self):
        gov = make_governor("open")
        assert isinstance(gov.request_change("mallory", {"threshold": "low"}), Denied)
        assert gov.settings.threshold == "medium"

    def test_agent_cannot_change_itself(self):
        gov = make_governor("open")
        assert isinstance(gov.request_change("Nova", {"threshold": "low"}), Denied)

    def test_invalid_patch_denied_not_raised(self):
        gov = make_governor("open")
        out = gov.request_change("alice", {"threshold": "extreme"})
        assert isinstance(out, Denied)
        assert "invalid patch" in out.reason

    def test_empty_patch_denied(self):
        gov = make_governor("open")
        assert isinstance(gov.request_change("alice", {}), Denied)


class TestAdminPolicy:
    def test_admin_applies_others_denied(self):
        gov = make_governor("admin", admins=["alice"])
        assert isinstance(gov.request_change("bob", {"threshold": "low"}), Denied)
        assert gov.settings.threshold == "medium"
        assert isinstance(gov.request_change("alice", {"threshold": "low"}), Applied)
        assert gov.settings.threshold == "low"


class TestVotePolicy:
    def test_proposal_opens_with_auto_yes(self):
        gov = make_governor("vote")
        out = gov.request_change("alice", {"threshold": "low"})
        assert isinstance(out, ProposalOpened)
        assert out.proposal.proposer == "alice"
        assert out.proposal.ballots == {"alice": "yes"}
        assert out.vote_state.yes == 1
        assert gov.settings.threshold == "medium"  # not yet applied

    def test_majority_applies(self):
        gov = make_governor("vote")  # 3 eligible
        opened = gov.request_change("alice", {"threshold": "low"})
        state = gov.cast_vote(opened.proposal.id, "bob", "yes")
        assert state.state == "applied"
        assert state.applied is not None
        assert state.applied.via == f"vote:{opened.proposal.id}"
        assert gov.settings.threshold == "low"
        assert gov.open_proposal is None

    def test_rejection_when_majority_impossible(self):
        gov = make_governor("vote", humans=("alice", "bob"))
        opened = gov.request_change("alice", {"threshold": "low"})
        state = gov.cast_vote(opened.proposal.id, "bob", "no")
        # 1 yes of 2: yes can never exceed half
        assert state.state == "rejected"
        assert gov.settings.threshold == "medium"
        assert gov.open_proposal is None

    def test_single_member_instant_apply(self):
        gov = make_governor("vote", humans=("alice",))
        out = gov.request_change("alice", {"threshold": "low"})
        assert isinstance(out, ProposalOpened)
        assert out.vote_state.state == "applied"
        assert gov.settings.threshold == "low"

    def test_revote_replaces(self):
        gov = make_governor("vote", humans=("alice", "bob", "carol", "dan", "eve"))
        opened = gov.request_change("alice", {"threshold": "low"})
        gov.cast_vote(opened.proposal.id, "bob", "no")
        state = gov.cast_vote(opened.proposal.id, "bob", "yes")
        assert state.yes == 2 and state.no == 0
        assert state.state == "open"

    def test_one_open_proposal_at_a_time(self):
        gov = make_governor("vote")
        gov.request_change("alice", {"threshold": "low"})
        out = gov.request_change("bob", {"mode": "reactive"})
        assert isinstance(out, Denied)

    def test_ineligible_voter(self):
        gov = make_governor("vote")
        opened = gov.request_change("alice", {"threshold": "low"})
        gov.roster.add_human("late-joiner")
        with pytest.raises(GovernanceError, match="not eligible"):
            gov.cast_vote(opened.proposal.id, "late-joiner", "yes")

    def test_vote_on_closed_or_unknown_proposal(self):
        gov = make_governor("vote", humans=("alice",))
        opened = gov.request_change("alice", {"threshold": "low"})  # instant apply
        with pytest.raises(GovernanceError):
            gov.cast_vote(opened.proposal.id, "alice", "yes")
        with pytest.raises(GovernanceError):
            gov.cast_vote("p999", "alice", "yes")

    def test_bad_ballot(self):
        gov = make_governor("vote")
        opened = gov.request_change("alice", {"threshold": "low"})
        with pytest.raises(GovernanceError, match="ballot"):
            gov.cast_vote(opened.proposal.id, "bob", "abstain")

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_strict_majority_exhaustive(self, n):
        """Every ballot sequence over every roster size: applied iff yes > n/2."""
        humans = tuple(f"u{i}" for i in range(n))
        for ballots in itertools.product(("yes", "no"), repeat=n - 1):
            gov = make_governor("vote", humans=humans)
            opened = gov.request_change("u0", {"threshold": "low"})
            state = opened.vote_state
            for voter, ballot in zip(humans[1:], ballots):
                if state.state != "open":
                    break
                state = gov.cast_vote(opened.proposal.id, voter, ballot)
            yes_total = 1 + sum(1 for b in ballots if b == "yes")
            applied = gov.settings.threshold == "low"
            if state.state == "open":
                # never resolved (possible only if somebody never voted)
                assert applied is False
            else:
                expected = state.yes * 2 > n
                assert applied is expected
                # with all ballots cast the full-count rule must agree
                if state.yes + state.no == n:
                    assert expected == (yes_total * 2 > n)


class TestPresets:
    def test_builtin_presets_parse(self):
        presets = builtin_presets()
        assert "summarizer" in presets and "brainstormer" in presets
        assert presets["summarizer"].settings_patch["threshold"] == "high"
        assert presets["summarizer"].settings_patch["style"]["bulleted_lists"] is True
        assert presets["brainstormer"].settings_patch["threshold"] == "low"
        assert presets["brainstormer"].settings_patch["rate"]["speak_first"] is False

    def test_apply_preset(self):
        roster = Roster("Nova")
        roster.add_human("alice")
        gov = Governor(AgentSettings(), roster, presets=builtin_presets())
        outcome, prompt_patch = gov.apply_preset("alice", "summarizer")
        assert isinstance(outcome, Applied)
        assert outcome.via == "preset:summarizer"
        assert gov.settings.threshold == "high"
        assert gov.settings.preset == "summarizer"
        assert prompt_patch  # summarizer ships a prompt adjustment
        assert gov.preset_prompt("summarizer") == prompt_patch

    def test_unknown_preset(self):
        gov = make_governor("open")
        outcome, prompt_patch = gov.apply_preset("alice", "chaos-goblin")
        assert isinstance(outcome, Denied)
        assert prompt_patch is None

    def test_preset_respects_policy(self):
        gov = make_governor("admin", admins=["alice"])
        gov.presets = builtin_presets()
        outcome, _ = gov.apply_preset("bob", "summarizer")
        assert isinstance(outcome, Denied)

    def test_load_presets_file(self, tmp_path):
        path = tmp_path / "presets.json"
        path.write_text(json.dumps([
            {"id": "x", "label": "X", "settings_patch": {"threshold": "low"}},
        ]), encoding="utf-8")
        assert load_presets(path)["x"].prompt_patch == ""

    @pytest.mark.parametrize("data", [
        {"id": "x"},
        [{"id": "x", "label": "X"}],
        [{"id": "x", "label": "X", "settings_patch": {}, "bogus": 1}],
        [{"id": "x", "label": "X", "settings_patch": {}},
         {"id": "x", "label": "X2", "settings_patch": {}}],
    ])
    def test_parse_presets_rejects(self, data):
        with pytest.raises(ValueError):
            parse_presets(data)


class TestIntentDetection:
    def test_quiet_from_medium_steps_to_high(self):
        intent = detect_settings_intent(
            msg("a", "Nova, you reply too often"), "Nova", AgentSettings())
        assert intent is not None
        assert intent.patch == {"threshold": "high"}

    def test_quiet_from_high_halves_cap(self):
        s = AgentSettings(threshold="high")
        intent = detect_settings_intent(msg("a", "Nova, quiet down"), "Nova", s)
        assert intent.patch == {"rate": {"max_posts_per_minute": 3}}

    def test_talky_from_reactive_goes_proactive(self):
        s = AgentSettings(mode="reactive")
        intent = detect_settings_intent(msg("a", "Nova, chime in more"), "Nova", s)
        assert intent.patch == {"mode": "proactive"}

    def test_talky_from_low_doubles_cap(self):
        s = AgentSettings(threshold="low")
        intent = detect_settings_intent(msg("a", "Nova, speak up more"), "Nova", s)
        assert intent.patch == {"rate": {"max_posts_per_minute": 12}}

    def test_reactive_request(self):
        intent = detect_settings_intent(
            msg("a", "Nova, only speak when spoken to"), "Nova", AgentSettings())
        assert intent.patch == {"mode": "reactive"}
        assert intent.confidence >= 0.9

    def test_reactive_noop_when_already_reactive(self):
        s = AgentSettings(mode="reactive")
        intent = detect_settings_intent(
            msg("a", "Nova, only speak when spoken to"), "Nova", s)
        assert intent is None

    def test_shorter(self):
        intent = detect_settings_intent(
            msg("a", "Nova, your replies are too long"), "Nova", AgentSettings())
        assert intent.patch == {"style": {"max_reply_chars": 240}}

    def test_longer(self):
        intent = detect_settings_intent(
            msg("a", "Nova, could you elaborate more?"), "Nova", AgentSettings())
        assert intent.patch == {"style": {"min_reply_chars": 200}}

    def test_plain_chat_is_not_an_intent(self):
        for text in ("Nova, what do you think?", "let's get lunch",
                     "Nova, summarize the plan"):
            assert detect_settings_intent(msg("a", text), "Nova",
                                          AgentSettings()) is None


class TestConfirmation:
    @pytest.mark.parametrize("text", ["yes", "Yes!", "yep", "sure", "ok", "go ahead",
                                      "sounds good", "do it", "Okay, thanks"])
    def test_yes(self, text):
        assert classify_confirmation(text) == "yes"

    @pytest.mark.parametrize("text", ["no", "No.", "nope", "cancel", "never mind",
                                      "don't", "leave it for now", "please don't"])
    def test_no(self, text):
        assert classify_confirmation(text) == "no"

    @pytest.mark.parametrize("text", ["what does that mean?", "maybe later",
                                      "the yes men is a good film", None, ""])
    def test_neither(self, text):
        assert classify_confirmation(text) is None

    def test_confirm_and_apply_flow(self):
        gov = make_governor("open")
        intent = detect_settings_intent(msg("alice", "Nova, quiet down"), "Nova",
                                        gov.settings)
        pending = PendingIntent(intent=intent, actor="alice", opened_ts_ms=1_000)
        text = confirmation_text(intent, gov.settings, "Nova")
        assert "threshold: medium -> high" in text

        status, outcome = confirm_and_apply(gov, pending, msg("alice", "hm", ts=2_000))
        assert status == "pending" and gov.settings.threshold == "medium"

        status, outcome = confirm_and_apply(gov, pending, msg("alice", "yes", ts=3_000))
        assert status == "confirmed"
        assert isinstance(outcome, Applied) and outcome.via == "conversation"
        assert gov.settings.threshold == "high"

    def test_decline_never_mutates(self):
        gov = make_governor("open")
        intent = detect_settings_intent(msg("alice", "Nova, quiet down"), "Nova",
                                        gov.settings)
        pending = PendingIntent(intent=intent, actor="alice", opened_ts_ms=1_000)
        status, outcome = confirm_and_apply(gov, pending, msg("alice", "no", ts=2_000))
        assert status == "declined" and outcome is None
        assert gov.settings.threshold == "medium"

    def test_window_expiry(self):
        gov = make_governor("open")
        intent = detect_settings_intent(msg("alice", "Nova, quiet down"), "Nova",
                                        gov.settings)
        pending = PendingIntent(intent=intent, actor="alice", opened_ts_ms=1_000,
                                window_ms=120_000)
        late = msg("alice", "yes", ts=1_000 + 120_001)
        status, outcome = confirm_and_apply(gov, pending, late)
        assert status == "expired"
        assert gov.settings.threshold == "medium"
