"""Who may change the agent's behavior, and how.

Three policies: open (any member), admin (listed names), vote (strict
majority of the humans present when the proposal opened). On top of that,
a rule-based detector lets members adjust settings conversationally, with
an explicit confirmation step before anything is applied.
"""

from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .model import ChatEvent, Roster
from .settings import AgentSettings, SettingsError, apply_patch, describe_patch

log = logging.getLogger(__name__)

DEFAULT_CONFIRM_WINDOW_MS = 120_000

_THRESHOLD_ORDER = ("low", "medium", "high")

# phrase tables for conversational control; checked in this order
REACTIVE_PHRASES = (
    "leave the rest to us", "only when asked", "only speak when spoken",
    "wait to be asked", "stop jumping in", "reply only when", "respond only when",
)
QUIET_PHRASES = (
    "too frequently", "too often", "less often", "be quiet", "quiet down",
    "tone it down", "slow down", "back off", "pause", "fewer replies", "less chatty",
)
TALKY_PHRASES = (
    "more ideas", "jump in", "more often", "speak up", "chime in", "more active",
)
SHORTER_PHRASES = ("shorter", "too long", "more concise", "briefer", "keep it brief")
LONGER_PHRASES = ("longer", "more detail", "elaborate more", "expand more")

_YES_WORDS = frozenset({"yes", "y", "yeah", "yep", "sure", "ok", "okay", "confirm",
                        "affirmative", "please"})
_NO_WORDS = frozenset({"no", "n", "nope", "nah", "cancel", "negative"})
_YES_PHRASES = ("go ahead", "do it", "sounds good", "make it so")
_NO_PHRASES = ("never mind", "nevermind", "don't", "do not", "leave it")


class GovernanceError(Exception):
    pass


@dataclass(frozen=True)
class Intent:
    """A detected settings request: the patch it implies and the cue matched."""

    patch: dict
    phrase: str
    confidence: float


@dataclass
class Proposal:
    id: str
    proposer: str
    patch: dict
    eligible: tuple[str, ...]  # human roster snapshot at open time
    ballots: dict[str, str] = field(default_factory=dict)  # name -> yes|no
    state: str = "open"  # open | applied | rejected

    def yes_count(self) -> int:
        return sum(1 for b in self.ballots.values() if b == "yes")

    def no_count(self) -> int:
        return sum(1 for b in self.ballots.values() if b == "no")


@dataclass(frozen=True)
class Applied:
    settings: AgentSettings
    summary: str  # "threshold: medium -> low" style, old and new values
    actor: str
    via: str  # direct | vote:<id> | preset:<id> | conversation


@dataclass(frozen=True)
class VoteState:
    proposal_id: str
    yes: int
    no: int
    eligible: int
    state: str
    applied: Optional[Applied] = None


@dataclass(frozen=True)
class ProposalOpened:
    proposal: Proposal
    vote_state: VoteState  # after the proposer's automatic yes ballot


@dataclass(frozen=True)
class Denied:
    reason: str


@dataclass(frozen=True)
class BehaviorPreset:
    id: str
    label: str
    settings_patch: dict
    prompt_patch: str = ""


def load_presets(path: str | Path) -> dict[str, BehaviorPreset]:
    """Presets file: JSON array of {id, label, settings_patch, prompt_patch?}."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return parse_presets(data, source=str(path))


def builtin_presets() -> dict[str, BehaviorPreset]:
    raw = resources.files("roundtable").joinpath("assets", "presets.json").read_text("utf-8")
    return parse_presets(json.loads(raw), source="assets/presets.json")


def parse_presets(data: object, source: str = "presets") -> dict[str, BehaviorPreset]:
    path = source
    if not isinstance(data, list):
        raise ValueError(f"{path}: presets must be a JSON array")
    out: dict[str, BehaviorPreset] = {}
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise ValueError(f"{path}: preset {i} must be an object")
        unknown = set(entry) - {"id", "label", "settings_patch", "prompt_patch"}
        if unknown:
            raise ValueError(f"{path}: preset {i} has unknown fields {sorted(unknown)}")
        for name in ("id", "label"):
            if not isinstance(entry.get(name), str) or not entry[name]:
                raise ValueError(f"{path}: preset {i} needs a non-empty {name!r}")
        if not isinstance(entry.get("settings_patch"), dict):
            raise ValueError(f"{path}: preset {i} needs an object 'settings_patch'")
        preset = BehaviorPreset(
            id=entry["id"], label=entry["label"],
            settings_patch=entry["settings_patch"],
            prompt_patch=entry.get("prompt_patch", ""),
        )
        if preset.id in out:
            raise ValueError(f"{path}: duplicate preset id {preset.id!r}")
        out[preset.id] = preset
    return out


class Governor:
    """Owns a room's settings and routes every change through its policy."""

    def __init__(
        self,
        settings: AgentSettings,
        roster: Roster,
        presets: Optional[dict[str, BehaviorPreset]] = None,
    ):
        settings.validate()
        self.settings = settings
        self.roster = roster
        self.presets = presets or {}
        self.open_proposal: Optional[Proposal] = None
        self._proposal_counter = 0

    # -- change requests -------------------------------------------------

    def request_change(self, actor: str, patch: dict, via: str = "direct"):
        """Route a settings patch through the governance policy.

        Returns Applied, ProposalOpened, or Denied. Total: bad input comes
        back as Denied rather than an exception.
        """
        if actor not in self.roster or self.roster.kind_of(actor) != "human":
            return Denied("only human room members can change settings")
        try:
            apply_patch(self.settings, patch)
        except SettingsError as exc:
            return Denied(f"invalid patch: {exc}")
        if not patch:
            return Denied("empty patch")

        policy = self.settings.governance.policy
        if policy == "admin" and actor not in self.settings.governance.admins:
            return Denied("settings changes require an admin under the admin policy")
        if policy == "vote":
            if self.open_proposal is not None and self.open_proposal.state == "open":
                return Denied(f"proposal {self.open_proposal.id} is already open")
            self._proposal_counter += 1
            proposal = Proposal(
                id=f"p{self._proposal_counter}", proposer=actor, patch=dict(patch),
                eligible=tuple(self.roster.human_names),
            )
            self.open_proposal = proposal
            vote_state = self.cast_vote(proposal.id, actor, "yes")
            return ProposalOpened(proposal, vote_state)
        return self._apply(actor, patch, via)

    def _apply(self, actor: str, patch: dict, via: str) -> Applied:
        summary = describe_patch(patch, self.settings)
        self.settings = apply_patch(self.settings, patch)
        log.info("settings applied by %s via %s: %s", actor, via, summary)
        return Applied(settings=self.settings, summary=summary, actor=actor, via=via)

    # -- voting -----------------------------------------------------------

    def cast_vote(self, proposal_id: str, actor: str, ballot: str) -> VoteState:
        proposal = self.open_proposal
        if proposal is None or proposal.id != proposal_id:
            raise GovernanceError(f"no such proposal: {proposal_id}")
        if proposal.state != "open":
            raise GovernanceError(f"proposal {proposal_id} is already {proposal.state}")
        if actor not in proposal.eligible:
            raise GovernanceError(f"{actor} is not eligible to vote on {proposal_id}")
        if ballot not in ("yes", "no"):
            raise GovernanceError("ballot must be 'yes' or 'no'")
        proposal.ballots[actor] = ballot  # re-vote replaces the prior ballot
        return self._tally(proposal)

    def _tally(self, proposal: Proposal) -> VoteState:
        n = len(proposal.eligible)
        yes, no = proposal.yes_count(), proposal.no_count()
        applied = None
        if yes * 2 > n:
            proposal.state = "applied"
            self.open_proposal = None
            applied = self._apply(proposal.proposer, proposal.patch, via=f"vote:{proposal.id}")
        else:
            uncast = n - len(proposal.ballots)
            if (yes + uncast) * 2 <= n:  # yes can no longer exceed half
                proposal.state = "rejected"
                self.open_proposal = None
        return VoteState(proposal_id=proposal.id, yes=yes, no=no, eligible=n,
                         state=proposal.state, applied=applied)

    # -- presets ----------------------------------------------------------

    def apply_preset(self, actor: str, preset_id: str):
        """Returns (outcome, prompt_patch); prompt_patch only on Applied."""
        preset = self.presets.get(preset_id)
        if preset is None:
            return Denied(f"unknown preset {preset_id!r}"), None
        patch = dict(preset.settings_patch)
        patch["preset"] = preset.id
        outcome = self.request_change(actor, patch, via=f"preset:{preset.id}")
        prompt_patch = preset.prompt_patch if isinstance(outcome, Applied) else None
        return outcome, prompt_patch

    def preset_prompt(self, preset_id: Optional[str]) -> str:
        if preset_id and preset_id in self.presets:
            return self.presets[preset_id].prompt_patch
        return ""


# -- conversational control ------------------------------------------------


def _step_threshold(current: str, direction: int) -> Optional[str]:
    idx = _THRESHOLD_ORDER.index(current) + direction
    if 0 <= idx < len(_THRESHOLD_ORDER):
        return _THRESHOLD_ORDER[idx]
    return None


def _quiet_patch(settings: AgentSettings) -> dict:
    stepped = _step_threshold(settings.threshold, +1)
    if stepped is not None:
        return {"threshold": stepped}
    cap = settings.rate.max_posts_per_minute
    return {"rate": {"max_posts_per_minute": max(1, cap // 2)}}


def _talky_patch(settings: AgentSettings) -> dict:
    if settings.mode == "reactive":
        return {"mode": "proactive"}
    stepped = _step_threshold(settings.threshold, -1)
    if stepped is not None:
        return {"threshold": stepped}
    cap = settings.rate.max_posts_per_minute
    return {"rate": {"max_posts_per_minute": min(60, cap * 2)}}


def _shorter_patch(settings: AgentSettings) -> dict:
    cur = settings.style.max_reply_chars
    new_max = 240 if cur is None else max(40, cur // 2)
    patch: dict = {"style": {"max_reply_chars": new_max}}
    cur_min = settings.style.min_reply_chars
    if cur_min is not None and cur_min > new_max:
        patch["style"]["min_reply_chars"] = new_max
    return patch


def _longer_patch(settings: AgentSettings) -> dict:
    cur = settings.style.max_reply_chars
    if cur is not None:
        return {"style": {"max_reply_chars": min(4000, cur * 2)}}
    return {"style": {"min_reply_chars": 200}}


def detect_settings_intent(
    message: ChatEvent, agent_name: str, settings: AgentSettings
) -> Optional[Intent]:
    """Rule-based detector over a fixed phrase table; None for anything else.

    Deliberately not model-based: the mapping from phrase to patch must be
    predictable to the people being governed by it. Steps are relative to
    the current settings, so "quieter" from medium lands on high, and from
    high halves the rate cap instead.
    """
    text = (message.text or "").lower()
    if not text:
        return None
    tables = (
        (REACTIVE_PHRASES, lambda: {"mode": "reactive"}, 0.9),
        (QUIET_PHRASES, lambda: _quiet_patch(settings), 0.8),
        (TALKY_PHRASES, lambda: _talky_patch(settings), 0.8),
        (SHORTER_PHRASES, lambda: _shorter_patch(settings), 0.7),
        (LONGER_PHRASES, lambda: _longer_patch(settings), 0.7),
    )
    for phrases, build, confidence in tables:
        for phrase in phrases:
            if phrase in text:
                patch = build()
                # drop no-op requests ("be reactive" when already reactive)
                if patch == {"mode": settings.mode}:
                    return None
                return Intent(patch=patch, phrase=phrase, confidence=confidence)
    return None


def classify_confirmation(text: Optional[str]) -> Optional[str]:
    """"yes", "no", or None when the reply is neither."""
    if not text:
        return None
    lowered = text.lower()
    first = lowered.split()[0].strip(string.punctuation) if lowered.split() else ""
    if first in _NO_WORDS or any(p in lowered for p in _NO_PHRASES):
        return "no"
    if first in _YES_WORDS or any(p in lowered for p in _YES_PHRASES):
        return "yes"
    return None


@dataclass
class PendingIntent:
    """An intent awaiting confirmation; expires after its window."""

    intent: Intent
    actor: str
    opened_ts_ms: int
    window_ms: int = DEFAULT_CONFIRM_WINDOW_MS

    def expired(self, now_ms: int) -> bool:
        return now_ms - self.opened_ts_ms > self.window_ms


def confirmation_text(intent: Intent, settings: AgentSettings, agent_name: str) -> str:
    summary = describe_patch(intent.patch, settings)
    return f"Got it — change my settings to {summary}? Reply yes to confirm."


def confirm_and_apply(
    governor: Governor, pending: PendingIntent, reply: ChatEvent
) -> tuple[str, Optional[object]]:
    """Advance the confirm-before-apply flow with one human reply.

    Returns (status, outcome): status is one of "expired", "confirmed",
    "declined", "pending"; outcome is the request_change result when
    confirmed. Nothing mutates before an affirmative reply exists.
    """
    if pending.expired(reply.ts_ms):
        return "expired", None
    verdict = classify_confirmation(reply.text)
    if verdict == "yes":
        outcome = governor.request_change(pending.actor, pending.intent.patch,
                                          via="conversation")
        return "confirmed", outcome
    if verdict == "no":
        return "declined", None
    return "pending", None
