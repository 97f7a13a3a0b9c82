"""Three ways the room changes the agent's settings.

1. direct patch under the open policy
2. a majority vote
3. asking the agent in plain language ("Nova, quiet down a bit")
"""

from roundtable import (
    AgentSettings,
    DecisionLog,
    Governor,
    PipelineConfig,
    PromptConfig,
    ProviderScript,
    ChatEvent,
    RoomPipeline,
    RoomTranscript,
    Roster,
    ScriptedProvider,
    builtin_presets,
)

AGENT = "Nova"


def make_room(policy="open", members=("Ada", "Grace", "Edsger")):
    roster = Roster(AGENT)
    for name in members:
        roster.add_human(name)
    settings = AgentSettings()
    settings.governance.policy = policy
    governor = Governor(settings, roster, presets=builtin_presets())
    prompt = PromptConfig(agent_name=AGENT, system_text="You are {{agent_name}}.",
                          one_shot=f"Ada: hi\n{AGENT}: hello")
    provider = ScriptedProvider(ProviderScript(rules=()))
    pipeline = RoomPipeline(RoomTranscript("demo"), governor, provider, prompt,
                            DecisionLog(), PipelineConfig())
    return pipeline


def show(events):
    for event in events:
        label = event.kind if event.kind != "message" else "post"
        body = event.text
        if event.kind == "vote":
            body = (event.payload or {}).get("ballot")
        print(f"    [{label}] {event.author}: {body}")


def direct_patch():
    print("open policy: any member applies a patch directly")
    pipeline = make_room("open")
    outcome, events = pipeline.request_settings_change(
        "Ada", {"threshold": "low", "rate": {"initial_delay_ms": 500}}, 1_000)
    print(f"  outcome: {type(outcome).__name__} — {outcome.summary}")
    show(events)
    print()


def majority_vote():
    print("vote policy: proposals need a strict majority of the roster")
    pipeline = make_room("vote")
    outcome, events = pipeline.request_settings_change(
        "Ada", {"mode": "reactive"}, 2_000)
    print(f"  Ada proposes; her own ballot counts: "
          f"{outcome.vote_state.yes}/{outcome.vote_state.eligible} yes")
    show(events)

    state, events = pipeline.cast_vote("Grace", outcome.proposal.id, "yes", 3_000)
    print(f"  Grace votes yes -> {state.state}")
    show(events)
    print(f"  mode is now: {pipeline.settings.mode}")
    print()


def conversational():
    print("conversational: the agent hears an instruction and asks first")
    pipeline = make_room("open")
    events = pipeline.handle_event(ChatEvent(
        room="demo", author="Ada", kind="message", ts_ms=5_000,
        text=f"{AGENT}, please quiet down a bit"))
    show(e for e in events if e.author == AGENT)

    events = pipeline.handle_event(ChatEvent(
        room="demo", author="Ada", kind="message", ts_ms=9_000, text="yes"))
    show(e for e in events if e.author == AGENT)
    print(f"  threshold is now: {pipeline.settings.threshold}")
    print()


def presets():
    print("presets: one id swaps settings and prompt flavor together")
    pipeline = make_room("open")
    outcome, events = pipeline.apply_preset("Grace", "summarizer", 12_000)
    print(f"  outcome: {outcome.summary}")
    show(events)


if __name__ == "__main__":
    direct_patch()
    majority_vote()
    conversational()
    presets()
