"""Run the TCP service in-process and talk to it over real sockets.

Frames are newline-delimited JSON, so any language with a socket and a JSON
parser can be a client; this script plays two humans from asyncio tasks.
"""

import asyncio
import json

from roundtable import (
    AgentDecision,
    AgentSettings,
    ChatServer,
    ProviderScript,
    ScriptRule,
    ScriptedProvider,
    build_room,
    serialize_decision,
)
from roundtable.settings import RatePolicy

AGENT = "Nova"


def block(value, reply):
    decision = AgentDecision(source="room", target="all", reply=reply,
                             value=value, verdict="SUBMIT")
    return serialize_decision(decision, AGENT)


class Member:
    def __init__(self, name, reader, writer):
        self.name = name
        self.reader = reader
        self.writer = writer

    @classmethod
    async def join(cls, host, port, name):
        reader, writer = await asyncio.open_connection(host, port)
        member = cls(name, reader, writer)
        await member.send({"type": "hello", "name": name, "room": "kitchen"})
        return member

    async def send(self, frame):
        self.writer.write((json.dumps(frame) + "\n").encode())
        await self.writer.drain()

    async def recv(self):
        line = await asyncio.wait_for(self.reader.readline(), 5.0)
        return json.loads(line)

    async def wait_for_message(self, author):
        while True:
            frame = await self.recv()
            if frame["type"] == "event":
                event = frame["event"]
                if event["kind"] == "message" and event["author"] == author:
                    return event
            print(f"    ({self.name} sees {frame['type']}"
                  + (f"/{frame['event']['kind']}" if frame["type"] == "event" else "")
                  + ")")


async def main():
    provider = ScriptedProvider(ProviderScript(rules=(
        ScriptRule(substring="stuck", emit=block(92, "Try read-only mode; the "
                                                     "lock holder is the backup job.")),
    )))
    settings = AgentSettings(rate=RatePolicy(initial_delay_ms=300,
                                             max_posts_per_minute=10_000))
    room = build_room("kitchen", settings, provider, agent_name=AGENT)
    server = ChatServer({"kitchen": room})
    await server.start()
    host, port = server.address
    print(f"server listening on {host}:{port}\n")

    try:
        ada = await Member.join(host, port, "Ada")
        grace = await Member.join(host, port, "Grace")

        print("Ada posts a question the agent can answer:")
        await ada.send({"type": "post", "name": "Ada",
                        "text": "Anyone know why the db console is stuck?"})
        event = await grace.wait_for_message(AGENT)
        print(f"  {AGENT} (after {settings.rate.initial_delay_ms}ms delay): "
              f"{event['text']}\n")

        print("Grace lowers the threshold over the wire:")
        await grace.send({"type": "settings_set", "name": "Grace",
                          "patch": {"threshold": "low"}})
        while True:
            frame = await grace.recv()
            if frame["type"] == "settings_state":
                print(f"  broadcast settings_state: threshold="
                      f"{frame['settings']['threshold']}")
                break
    finally:
        await server.stop()
    print("\nserver stopped.")


if __name__ == "__main__":
    asyncio.run(main())
