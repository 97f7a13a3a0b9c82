"""Walk single messages through the gate, one stage at a time.

The pipeline automates classify -> invoke -> decide -> schedule; this script
runs the same calls by hand so you can see each intermediate value.
"""

from roundtable import (
    AgentDecision,
    AgentSettings,
    ChatEvent,
    classify_addressee,
    decide,
    should_invoke,
)

AGENT = "Nova"
ROSTER = [AGENT, "Ada", "Grace", "Edsger"]


def trace(text, value, verdict, settings):
    message = ChatEvent(room="demo", author="Ada", kind="message",
                        ts_ms=1_000, seq=1, text=text)
    addressee = classify_addressee(message, ROSTER, AGENT)
    invoked = should_invoke(addressee, settings, "human")

    print(f"  {message.author}: {text!r}")
    print(f"    addressed to : {addressee.label()}")
    print(f"    invoke model : {invoked}")
    if not invoked:
        print("    outcome      : (model never called)")
        print()
        return

    decision = AgentDecision(source="Ada", target="all",
                             reply="Something worth saying.",
                             value=value, verdict=verdict)
    action = decide(message, settings, decision, addressee)
    print(f"    model said   : {verdict} at value {value}")
    print(f"    outcome      : {action.kind}"
          + (f" (override={action.provenance.override})"
             if action.provenance.override else ""))
    print()


def main():
    proactive = AgentSettings()  # mode=proactive, threshold=medium (75)
    reactive = AgentSettings(mode="reactive")

    print("proactive mode, medium threshold")
    trace("What should we name the project?", 80, "SUBMIT", proactive)
    trace("I slept badly, ignore me.", 60, "SUBMIT", proactive)
    trace("Nova, what do you think?", 10, "PASS", proactive)  # forced anyway
    trace("Grace, can you take this one?", 99, "SUBMIT", proactive)

    print("reactive mode: silent unless spoken to")
    trace("What should we name the project?", 99, "SUBMIT", reactive)
    trace("@Nova any objection?", 5, "PASS", reactive)


if __name__ == "__main__":
    main()
