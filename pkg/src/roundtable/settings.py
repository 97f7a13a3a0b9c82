"""The agent's runtime control surface and its JSON file format.

Settings travel as JSON objects mirroring the dataclass field names below.
Patches are partial nested dicts; merging validates the result before it is
adopted, so a bad patch can never leave a room half-configured.
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

# contribution threshold setpoints on the provider's 0-100 value scale
THRESHOLDS = {"high": 90, "medium": 75, "low": 50}

MODES = ("proactive", "reactive")
PLACEMENTS = ("channel", "thread")
TONES = ("neutral", "friendly", "formal")
GOVERNANCE_POLICIES = ("open", "admin", "vote")


class SettingsError(ValueError):
    """A settings document or patch failed validation; names the field."""

    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass
class RatePolicy:
    initial_delay_ms: int = 2000
    hold_while_typing: bool = True
    max_posts_per_minute: int = 6
    speak_first: bool = True
    consolidate_window_ms: int = 0  # 0 disables consolidation


@dataclass
class StylePolicy:
    tone: str = "neutral"
    min_reply_chars: int | None = None
    max_reply_chars: int | None = None
    bulleted_lists: bool = False


@dataclass
class LongMessagePolicy:
    enabled: bool = True
    trigger_chars: int = 1000  # strict ">": a reply of exactly this length posts whole
    preview_chars: int = 280


@dataclass
class GovernancePolicy:
    policy: str = "open"
    admins: list[str] = field(default_factory=list)


@dataclass
class AgentSettings:
    """Everything group members can change about the agent at runtime."""

    mode: str = "proactive"
    threshold: str = "medium"
    placement: str = "channel"
    long_message: LongMessagePolicy = field(default_factory=LongMessagePolicy)
    rate: RatePolicy = field(default_factory=RatePolicy)
    style: StylePolicy = field(default_factory=StylePolicy)
    governance: GovernancePolicy = field(default_factory=GovernancePolicy)
    preset: str | None = None

    def threshold_value(self) -> int:
        return THRESHOLDS[self.threshold]

    def validate(self) -> "AgentSettings":
        if self.mode not in MODES:
            raise SettingsError("mode", f"must be one of {MODES}, got {self.mode!r}")
        if self.threshold not in THRESHOLDS:
            raise SettingsError("threshold", f"must be one of {tuple(THRESHOLDS)}, got {self.threshold!r}")
        if self.placement not in PLACEMENTS:
            raise SettingsError("placement", f"must be one of {PLACEMENTS}, got {self.placement!r}")
        lm = self.long_message
        if not isinstance(lm.preview_chars, int) or lm.preview_chars < 1:
            raise SettingsError("long_message.preview_chars", "must be an integer >= 1")
        if not isinstance(lm.trigger_chars, int) or lm.trigger_chars < lm.preview_chars:
            raise SettingsError("long_message.trigger_chars", "must be an integer >= preview_chars")
        rate = self.rate
        for name in ("initial_delay_ms", "max_posts_per_minute", "consolidate_window_ms"):
            v = getattr(rate, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise SettingsError(f"rate.{name}", "must be a non-negative integer")
        st = self.style
        if st.tone not in TONES:
            raise SettingsError("style.tone", f"must be one of {TONES}, got {st.tone!r}")
        for name in ("min_reply_chars", "max_reply_chars"):
            v = getattr(st, name)
            if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
                raise SettingsError(f"style.{name}", "must be an integer >= 1 or null")
        if st.min_reply_chars is not None and st.max_reply_chars is not None and st.min_reply_chars > st.max_reply_chars:
            raise SettingsError("style.min_reply_chars", "must be <= max_reply_chars")
        gov = self.governance
        if gov.policy not in GOVERNANCE_POLICIES:
            raise SettingsError("governance.policy", f"must be one of {GOVERNANCE_POLICIES}, got {gov.policy!r}")
        if gov.policy == "admin" and not gov.admins:
            raise SettingsError("governance.admins", "admin policy requires a non-empty admin list")
        if self.preset is not None and not isinstance(self.preset, str):
            raise SettingsError("preset", "must be a string or null")
        return self

    def to_json_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def copy(self) -> "AgentSettings":
        return copy.deepcopy(self)


_SECTIONS = {
    "long_message": LongMessagePolicy,
    "rate": RatePolicy,
    "style": StylePolicy,
    "governance": GovernancePolicy,
}


def settings_from_dict(d: dict[str, Any], *, base: AgentSettings | None = None) -> AgentSettings:
    """Build settings from a (possibly partial) JSON object over ``base``.

    Unknown fields raise ``SettingsError`` naming the offending field.
    """
    if not isinstance(d, dict):
        raise SettingsError("settings", "must be a JSON object")
    out = base.copy() if base is not None else AgentSettings()
    top_fields = {f.name for f in dataclasses.fields(AgentSettings)}
    for key, value in d.items():
        if key not in top_fields:
            raise SettingsError(key, "unknown settings field")
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise SettingsError(key, "must be an object")
            section = getattr(out, key)
            sub_fields = {f.name for f in dataclasses.fields(_SECTIONS[key])}
            for sub_key, sub_value in value.items():
                if sub_key not in sub_fields:
                    raise SettingsError(f"{key}.{sub_key}", "unknown settings field")
                setattr(section, sub_key, copy.deepcopy(sub_value))
        else:
            setattr(out, key, copy.deepcopy(value))
    return out.validate()


def apply_patch(settings: AgentSettings, patch: dict[str, Any]) -> AgentSettings:
    """Merge a partial patch into a copy of ``settings``; validates the result."""
    return settings_from_dict(patch, base=settings)


def load_settings(path: Path | str) -> AgentSettings:
    with open(path, encoding="utf-8") as fh:
        return settings_from_dict(json.load(fh))


def save_settings(settings: AgentSettings, path: Path | str) -> None:
    Path(path).write_text(json.dumps(settings.to_json_dict(), indent=2) + "\n", encoding="utf-8")


def _flatten(prefix: str, value: Any, out: list[tuple[str, Any]]) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    else:
        out.append((prefix, value))


def describe_patch(patch: dict[str, Any], current: AgentSettings | None = None) -> str:
    """Human-readable one-liner like ``threshold: medium -> low``."""
    flat: list[tuple[str, Any]] = []
    _flatten("", patch, flat)
    parts = []
    cur = current.to_json_dict() if current is not None else {}
    for dotted, new in flat:
        node: Any = cur
        for piece in dotted.split("."):
            node = node.get(piece, "?") if isinstance(node, dict) else "?"
        old = node
        if current is not None:
            parts.append(f"{dotted}: {old} -> {new}")
        else:
            parts.append(f"{dotted} -> {new}")
    return ", ".join(parts) if parts else "(no changes)"
