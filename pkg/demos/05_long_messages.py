"""Long replies: channel preview plus the full text in a thread."""

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
from roundtable.settings import LongMessagePolicy, RatePolicy

AGENT = "Nova"

ESSAY = (
    "Here is the long version. The importer stalls because the batch size "
    "was tuned for the old schema; each row now carries the audit columns, "
    "so the same byte budget holds fewer rows and the retry loop amplifies "
    "the slowdown. Three options. One: halve the batch size, which is safe "
    "but makes the nightly run about forty minutes longer. Two: strip the "
    "audit columns during import and backfill them afterwards, which keeps "
    "the nightly window but adds a second pass and a failure mode if the "
    "backfill dies midway. Three: move the importer to the streaming path, "
    "which fixes the problem properly but needs a week of work and a "
    "migration for the checkpoint table. My order of preference is three, "
    "then one, then two: the streaming path pays for itself within a "
    "quarter, and option two's partial-failure state has bitten us before. "
    "If the week is unaffordable right now, take option one today and "
    "schedule three for the next cycle; the two compose cleanly, and the "
    "checkpoint migration can land behind a flag so the cutover is a "
    "config flip rather than a deploy."
)


def main():
    events = [
        ChatEvent(room="demo", author="Ada", kind="join", ts_ms=0, seq=1),
        ChatEvent(room="demo", author="Ada", kind="message", ts_ms=1_000, seq=2,
                  text=f"{AGENT}, walk us through the importer problem?"),
    ]
    block = serialize_decision(
        AgentDecision(source="Ada", target="all", reply=ESSAY, value=95,
                      verdict="SUBMIT"), AGENT)
    script = ProviderScript(rules=(ScriptRule(emit=block),))
    settings = AgentSettings(
        rate=RatePolicy(initial_delay_ms=0),
        long_message=LongMessagePolicy(trigger_chars=1_000, preview_chars=280),
    )

    result = replay(events, script, settings, agent_name=AGENT)
    full = next(e for e in result.events
                if e.author == AGENT and e.thread_of is not None)
    preview = next(e for e in result.events
                   if e.author == AGENT and e.payload is not None)

    print(f"reply length: {len(ESSAY)} chars (trigger is >1000)\n")
    print(f"channel preview ({len(preview.text)} chars):")
    print(f"  {preview.text}\n")
    print(f"preview payload: {preview.payload}")
    print(f"full text in thread of message {full.thread_of}, "
          f"byte-identical: {full.text == ESSAY}")


if __name__ == "__main__":
    main()
