"""Replay a short stand-up conversation and print what the agent did.

The provider here is a script keyed on trigger text, so runs are exactly
reproducible — the same mechanism the test suite uses for golden replays.
"""

import dataclasses

from roundtable import (
    AgentDecision,
    AgentSettings,
    ChatEvent,
    ProviderScript,
    ScriptRule,
    replay,
    serialize_decision,
)
from roundtable.settings import RatePolicy

AGENT = "Nova"
ROOM = "standup"


def ev(author, kind, ts, **kw):
    return ChatEvent(room=ROOM, author=author, kind=kind, ts_ms=ts, **kw)


def block(value, reply, verdict="SUBMIT"):
    decision = AgentDecision(source="team", target="all", reply=reply,
                             value=value, verdict=verdict)
    return serialize_decision(decision, AGENT)


def build_inputs():
    events = [
        ev("Ada", "join", 0),
        ev("Grace", "join", 200),
        ev("Ada", "message", 10_000, text="Morning! Standup time."),
        ev("Grace", "message", 22_000, text="Shipping the importer today."),
        ev("Ada", "message", 35_000,
           text="Nova, anything risky in the deploy queue?"),
        ev("Grace", "message", 61_000, text="I can review after lunch."),
        ev("Ada", "message", 80_000, text="Great, that's everyone."),
    ]
    events = [dataclasses.replace(e, seq=i) for i, e in enumerate(events, 1)]

    script = ProviderScript(rules=(
        ScriptRule(substring="Standup", emit=block(15, "", verdict="PASS")),
        ScriptRule(substring="importer", emit=block(40, "", verdict="PASS")),
        ScriptRule(substring="deploy queue",
                   emit=block(85, "Two migrations are pending; run them "
                                  "before the importer ships.")),
        ScriptRule(substring="after lunch",
                   emit=block(78, "I'll queue the review reminders.")),
        ScriptRule(emit=block(20, "", verdict="PASS")),
    ))
    return events, script


def main():
    events, script = build_inputs()
    settings = AgentSettings(rate=RatePolicy(initial_delay_ms=2_000))
    result = replay(events, script, settings, agent_name=AGENT)

    print("conversation as replayed:")
    for event in result.events:
        if event.kind == "message":
            mark = ">>" if event.author == AGENT else "  "
            print(f"  {mark} [{event.ts_ms / 1000:7.1f}s] {event.author}: {event.text}")

    print("\ndecision log:")
    for line in result.decision_lines:
        print("  " + line)

    print("\nmetrics:")
    for name, value in result.metrics.as_row().items():
        print(f"  {name:24s} {value}")

    if result.violations:
        print("\nINVARIANT VIOLATIONS:")
        for violation in result.violations:
            print("  " + violation)


if __name__ == "__main__":
    main()
