"""Decision generation and parsing.

The agent's backend receives an assembled prompt and returns raw text that
should contain one JSON decision block::

    {"source": "User 7", "target": "Nova", "Nova's reply": "I am here!",
     "value": 90, "decision": "<SUBMIT>"}

``parse_decision`` turns that raw text back into an ``AgentDecision``, coping
with junk around the block. Two backends are provided: a deterministic
scripted one for replay and tests, and a remote text-generation client.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Protocol

import requests

from .model import AgentDecision, ChatEvent, ReactionToken
from .settings import StylePolicy

log = logging.getLogger(__name__)

TOKEN_ENV_VAR = "ROUNDTABLE_PROVIDER_TOKEN"
DEFAULT_TIMEOUT_S = 10.0

# Emoji names for reaction tokens. "+1" doubles for LIKE and THUMBS_UP.
REACTION_EMOJI = {
    ReactionToken.SMILE: "slightly_smiling_face",
    ReactionToken.LAUGH: "laughing",
    ReactionToken.LIKE: "+1",
    ReactionToken.CHECK: "white_check_mark",
    ReactionToken.HEART: "heart",
    ReactionToken.THUMBS_UP: "+1",
    ReactionToken.THUMBS_DOWN: "-1",
    ReactionToken.QUESTION: "question",
    ReactionToken.EXCLAMATION: "exclamation",
    ReactionToken.COOL: "sunglasses",
}

# a reply consisting solely of <TOKEN NAME> is a reaction, not text
_REACTION_SHAPE = re.compile(r"^\s*<([A-Z][A-Z _-]*)>\s*$")
_VERDICTS = {"<SUBMIT>": "SUBMIT", "<PASS>": "PASS"}
_CANDIDATE_CAP = 64  # bound scanning work on pathological brace nesting

NO_JSON = "no_json"
MISSING_FIELD = "missing_field"
BAD_VALUE = "bad_value"
BAD_VERDICT = "bad_verdict"
UNKNOWN_REACTION = "unknown_reaction"


class ParseError(Exception):
    """Typed parse failure; callers degrade to a synthetic PASS decision."""

    def __init__(self, code: str, detail: str, field_name: Optional[str] = None):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail
        self.field_name = field_name


def map_reaction(token: ReactionToken) -> str:
    return REACTION_EMOJI[token]


def synthetic_pass(source: str = "", target: str = "all") -> AgentDecision:
    """The safe do-nothing decision used when generation or parsing fails."""
    return AgentDecision(source=source, target=target, reply="", value=0, verdict="PASS")


DEFAULT_PASS_BLOCK = '{"source": "", "target": "all", "reply": "", "value": 0, "decision": "<PASS>"}'


def _balanced_span(raw: str, start: int) -> Optional[str]:
    """The brace-balanced substring opening at ``start``, honouring JSON strings."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return raw[start : i + 1]
    return None


def _token_to_reaction(name: str) -> ReactionToken:
    canonical = re.sub(r"[ -]+", "_", name.strip())
    try:
        return ReactionToken[canonical]
    except KeyError:
        raise ParseError(UNKNOWN_REACTION, f"unknown reaction token <{name}>") from None


def _validate_block(obj: dict) -> AgentDecision:
    for name in ("source", "target"):
        if not isinstance(obj.get(name), str):
            raise ParseError(MISSING_FIELD, f"field {name!r} absent or not a string", name)
    reply_key = None
    if isinstance(obj.get("reply"), str):
        reply_key = "reply"
    else:
        for key, val in obj.items():
            if key.lower().endswith("'s reply") and isinstance(val, str):
                reply_key = key
                break
    if reply_key is None:
        raise ParseError(MISSING_FIELD, "no reply field (expected 'reply' or \"<name>'s reply\")", "reply")
    reply = obj[reply_key]

    if "value" not in obj:
        raise ParseError(MISSING_FIELD, "field 'value' absent", "value")
    value = obj["value"]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(BAD_VALUE, f"value must be an integer, got {value!r}")
    if not 0 <= value <= 100:
        raise ParseError(BAD_VALUE, f"value {value} outside [0, 100]")

    if "decision" not in obj:
        raise ParseError(MISSING_FIELD, "field 'decision' absent", "decision")
    raw_verdict = obj["decision"]
    if not isinstance(raw_verdict, str) or raw_verdict.strip() not in _VERDICTS:
        raise ParseError(BAD_VERDICT, f"decision must be <SUBMIT> or <PASS>, got {raw_verdict!r}")
    verdict = _VERDICTS[raw_verdict.strip()]

    reaction = None
    m = _REACTION_SHAPE.match(reply)
    if m:
        reaction = _token_to_reaction(m.group(1))
        reply = ""
    if verdict == "SUBMIT" and not reply.strip() and reaction is None:
        raise ParseError(MISSING_FIELD, "SUBMIT decision carries no reply content", "reply")
    return AgentDecision(
        source=obj["source"], target=obj["target"], reply=reply, value=value,
        verdict=verdict, reaction=reaction,
    )


def parse_decision(raw: str) -> AgentDecision:
    """Extract the first valid decision block from arbitrary text.

    Candidates are brace-balanced spans tried left to right, so junk objects
    in leading prose do not mask a later valid block. Raises ParseError with
    the first structured failure when nothing validates.
    """
    if not isinstance(raw, str):
        raise ParseError(NO_JSON, f"expected text, got {type(raw).__name__}")
    first_error: Optional[ParseError] = None
    tried = 0
    pos = raw.find("{")
    while pos != -1 and tried < _CANDIDATE_CAP:
        span = _balanced_span(raw, pos)
        if span is not None:
            tried += 1
            try:
                obj = json.loads(span)
            except ValueError:
                obj = None
            if isinstance(obj, dict):
                try:
                    return _validate_block(obj)
                except ParseError as exc:
                    if first_error is None:
                        first_error = exc
        pos = raw.find("{", pos + 1)
    if first_error is not None:
        raise first_error
    raise ParseError(NO_JSON, "no JSON object found in provider output")


def serialize_decision(decision: AgentDecision, agent_name: str = "agent") -> str:
    """Canonical block text such that parse_decision round-trips it."""
    reply = decision.reply
    if decision.reaction is not None:
        reply = f"<{decision.reaction.name.replace('_', ' ')}>"
    block = {
        "source": decision.source,
        "target": decision.target,
        f"{agent_name}'s reply": reply,
        "value": decision.value,
        "decision": f"<{decision.verdict}>",
    }
    return json.dumps(block, ensure_ascii=False)


@dataclass(frozen=True)
class GenParams:
    creativity: float = 0.7  # maps linearly onto the endpoint's sampling temperature
    max_output_tokens: int = 256

    def __post_init__(self) -> None:
        if not 0.0 <= self.creativity <= 1.0:
            raise ValueError(f"creativity must be in [0, 1], got {self.creativity}")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class PromptConfig:
    agent_name: str
    system_text: str
    one_shot: str
    style: StylePolicy = field(default_factory=StylePolicy)
    gen_params: GenParams = field(default_factory=GenParams)
    max_prompt_chars: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.agent_name.strip():
            raise ValueError("agent_name must be non-empty")
        if not self.system_text.strip():
            raise ValueError("system_text must be non-empty")


def _style_directives(style: StylePolicy, agent_name: str) -> list[str]:
    out: list[str] = []
    if style.tone == "friendly":
        out.append(f"{agent_name} keeps a warm, friendly tone.")
    elif style.tone == "formal":
        out.append(f"{agent_name} keeps a precise, formal tone.")
    if style.min_reply_chars is not None and style.max_reply_chars is not None:
        out.append(
            f"{agent_name} keeps replies between {style.min_reply_chars} and "
            f"{style.max_reply_chars} characters."
        )
    elif style.max_reply_chars is not None:
        out.append(f"{agent_name} keeps replies under {style.max_reply_chars} characters.")
    elif style.min_reply_chars is not None:
        out.append(f"{agent_name} writes at least {style.min_reply_chars} characters per reply.")
    if style.bulleted_lists:
        out.append(f"When listing items, {agent_name} uses short bulleted lists.")
    return out


def render_line(event: ChatEvent) -> str:
    return f"{event.author}: {event.text}"


def assemble_prompt(config: PromptConfig, context: list[ChatEvent]) -> str:
    """System section, one-shot example, then the live conversation.

    Only utterances are rendered (reactions and typing carry no prompt
    content). When the prompt exceeds the length budget, the oldest live
    lines fall off first; the one-shot is never dropped.
    """
    name = config.agent_name
    system = config.system_text.replace("{{agent_name}}", name).rstrip()
    directives = _style_directives(config.style, name)
    if directives:
        system += "\n" + "\n".join(directives)
    one_shot = config.one_shot.replace("{{agent_name}}", name).strip()
    lines = [render_line(e) for e in context if e.kind == "message"]

    def render(live: list[str]) -> str:
        parts = [system, "", "<CONVERSATION>", one_shot, "</CONVERSATION>", "", "<CONVERSATION>"]
        parts.extend(live)
        parts.append(f"{name}:")
        return "\n".join(parts)

    prompt = render(lines)
    if config.max_prompt_chars is not None:
        while len(prompt) > config.max_prompt_chars and lines:
            lines = lines[1:]
            prompt = render(lines)
    return prompt


class Provider(Protocol):
    def generate(self, prompt: str, trigger: ChatEvent) -> str:
        """Produce raw decision-block text for the triggering message."""


@dataclass(frozen=True)
class ScriptRule:
    """Matches a trigger by seq and/or text substring; first match wins."""

    emit: str
    seq: Optional[int] = None
    substring: Optional[str] = None

    def matches(self, trigger: ChatEvent) -> bool:
        if self.seq is not None and trigger.seq != self.seq:
            return False
        if self.substring is not None and self.substring not in (trigger.text or ""):
            return False
        return True


@dataclass(frozen=True)
class ProviderScript:
    rules: tuple[ScriptRule, ...] = ()
    default: str = DEFAULT_PASS_BLOCK

    def emit_for(self, trigger: ChatEvent) -> str:
        for rule in self.rules:
            if rule.matches(trigger):
                return rule.emit
        return self.default


def load_script(path: str | Path) -> ProviderScript:
    """Script file: JSON array of {"match": {"seq"?, "substring"?}, "emit"}."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError(f"{path}: script must be a JSON array of rules")
    rules = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or set(entry) - {"match", "emit"}:
            raise ValueError(f"{path}: rule {i} must be an object with keys 'match' and 'emit'")
        if not isinstance(entry.get("emit"), str):
            raise ValueError(f"{path}: rule {i} needs a string 'emit'")
        match = entry.get("match", {})
        if not isinstance(match, dict) or set(match) - {"seq", "substring"}:
            raise ValueError(f"{path}: rule {i} match keys are 'seq' and 'substring'")
        rules.append(ScriptRule(emit=entry["emit"], seq=match.get("seq"),
                                substring=match.get("substring")))
    return ProviderScript(rules=tuple(rules))


class ScriptedProvider:
    """Deterministic backend: emits scripted raw text keyed on the trigger."""

    def __init__(self, script: ProviderScript):
        self.script = script

    def generate(self, prompt: str, trigger: ChatEvent) -> str:
        return self.script.emit_for(trigger)


class RemoteProvider:
    """Client for a generic text-generation endpoint.

    Request: ``{"prompt", "max_tokens", "temperature"}``; response:
    ``{"text"}``. Any transport failure or malformed response degrades to a
    PASS block — a silent agent is the safe failure mode.
    """

    def __init__(
        self,
        url: str,
        gen_params: GenParams = GenParams(),
        timeout_s: float = DEFAULT_TIMEOUT_S,
        token: Optional[str] = None,
        session: Optional[requests.Session] = None,
    ):
        self.url = url
        self.gen_params = gen_params
        self.timeout_s = timeout_s
        self.token = token if token is not None else os.environ.get(TOKEN_ENV_VAR)
        self.session = session or requests.Session()

    def generate(self, prompt: str, trigger: ChatEvent) -> str:
        payload = {
            "prompt": prompt,
            "max_tokens": self.gen_params.max_output_tokens,
            "temperature": self.gen_params.creativity,
        }
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = self.session.post(self.url, json=payload, headers=headers,
                                     timeout=self.timeout_s)
            resp.raise_for_status()
            text = resp.json().get("text")
        except (requests.RequestException, ValueError) as exc:
            log.warning("provider request failed (%s); passing", exc)
            return DEFAULT_PASS_BLOCK
        if not isinstance(text, str):
            log.warning("provider response missing 'text'; passing")
            return DEFAULT_PASS_BLOCK
        return text


def _read_asset(name: str) -> str:
    return resources.files("roundtable").joinpath("assets", name).read_text("utf-8")


def default_prompt_config(agent_name: str, style: StylePolicy | None = None,
                          **kwargs) -> PromptConfig:
    """PromptConfig backed by the packaged prompt assets."""
    return PromptConfig(
        agent_name=agent_name,
        system_text=_read_asset("system_prompt.txt"),
        one_shot=_read_asset("one_shot.txt"),
        style=style or StylePolicy(),
        **kwargs,
    )
