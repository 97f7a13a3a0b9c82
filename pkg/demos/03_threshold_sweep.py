"""Sweep the decision threshold over one seeded conversation.

Raising the bar monotonically shrinks the set of messages the agent answers;
the sweep table makes the trade-off visible at a glance.
"""

from roundtable import (
    AgentSettings,
    generate_script,
    generate_transcript,
    sweep,
)
from roundtable.replay import metrics_table
from roundtable.settings import RatePolicy

AGENT = "Nova"
SEED = 20_240


def main():
    events = generate_transcript(SEED, n_messages=40, n_humans=4,
                                 agent_name=AGENT)
    script = generate_script(SEED, events, agent_name=AGENT)

    # the per-minute cap would entangle the levels (a chattier low setting
    # can exhaust the cap and skip messages a higher one answers), so the
    # sweep lifts it and lets the threshold act alone
    settings = AgentSettings(rate=RatePolicy(max_posts_per_minute=10_000))

    rows = sweep(events, script, settings, axis="threshold",
                 values=("high", "medium", "low"), agent_name=AGENT)

    print(metrics_table([(label, r.metrics) for label, r in rows]))

    posted = {label: r.contributed_input_seqs() for label, r in rows}
    print("messages answered (input seq):")
    for label in ("high", "medium", "low"):
        print(f"  {label:7s} {sorted(posted[label])}")
    assert posted["high"] <= posted["medium"] <= posted["low"]
    print("\nsubset chain high <= medium <= low holds.")


if __name__ == "__main__":
    main()
