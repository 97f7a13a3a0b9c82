"""Command-line entry points: serve, replay, sweep."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path

from .governance import builtin_presets, load_presets
from .provider import (
    Provider,
    ProviderScript,
    RemoteProvider,
    ScriptedProvider,
    default_prompt_config,
    load_script,
)
from .replay import DEFAULT_AGENT_NAME, replay, sweep
from .service import ChatServer, build_room
from .settings import AgentSettings, load_settings

log = logging.getLogger(__name__)


def _build_provider(spec: str) -> Provider:
    kind, _, rest = spec.partition(":")
    if kind == "scripted" and rest:
        return ScriptedProvider(load_script(rest))
    if kind == "remote" and rest:
        return RemoteProvider(rest)
    raise SystemExit(f"--provider must be scripted:FILE or remote:URL, got {spec!r}")


def _load_rooms(path: str | None) -> list[dict]:
    if path is None:
        return [{"name": "main"}]
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise SystemExit("--rooms file must be a non-empty JSON array")
    rooms = []
    for entry in data:
        if isinstance(entry, str):
            rooms.append({"name": entry})
        elif isinstance(entry, dict) and isinstance(entry.get("name"), str):
            rooms.append(entry)
        else:
            raise SystemExit(f"bad room entry: {entry!r}")
    return rooms


def _cmd_serve(args: argparse.Namespace) -> int:
    host, _, port_s = args.bind.rpartition(":")
    if not host or not port_s.isdigit():
        raise SystemExit(f"--bind must be HOST:PORT, got {args.bind!r}")
    settings = load_settings(args.settings) if args.settings else AgentSettings()
    presets = load_presets(args.presets) if args.presets else builtin_presets()
    provider = _build_provider(args.provider)
    if args.transcript_dir:
        Path(args.transcript_dir).mkdir(parents=True, exist_ok=True)
    rooms = {}
    for entry in _load_rooms(args.rooms):
        agent = entry.get("agent_name", args.agent_name)
        rooms[entry["name"]] = build_room(
            entry["name"], settings.copy(), provider,
            agent_name=agent, presets=presets,
            transcript_dir=args.transcript_dir,
            prompt_config=default_prompt_config(agent),
        )
    server = ChatServer(rooms, host=host, port=int(port_s))

    async def _run() -> None:
        try:
            await server.serve_forever()
        finally:
            await server.stop()

    try:
        asyncio.run(_run())
    except KeyboardInterrupt:
        pass
    return 0


def _report(result, out_dir: str | None) -> int:
    from .replay import metrics_table

    print(metrics_table([("metrics", result.metrics)]))
    if result.violations:
        for violation in result.violations:
            print(f"invariant violation: {violation}", file=sys.stderr)
        return 1
    if out_dir:
        print(f"wrote transcript, decision log, and metrics under {out_dir}")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    settings = load_settings(args.settings) if args.settings else AgentSettings()
    result = replay(
        args.transcript,
        load_script(args.script),
        settings,
        agent_name=args.agent_name,
        out_dir=args.out,
        presets=load_presets(args.presets) if args.presets else None,
    )
    return _report(result, args.out)


def _cmd_sweep(args: argparse.Namespace) -> int:
    from .replay import metrics_table

    levels = [t.strip() for t in args.thresholds.split(",") if t.strip()]
    if not levels:
        raise SystemExit("--thresholds must name at least one level")
    settings = load_settings(args.settings) if args.settings else AgentSettings()
    rows = sweep(
        args.transcript,
        load_script(args.script),
        settings,
        axis="threshold",
        values=levels,
        agent_name=args.agent_name,
        out_dir=args.out,
    )
    print(metrics_table([(label, res.metrics) for label, res in rows]))
    bad = 0
    for label, res in rows:
        for violation in res.violations:
            print(f"[{label}] invariant violation: {violation}", file=sys.stderr)
            bad += 1
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roundtable",
        description="Group chat with an embedded agent: live server and replay tools.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the live chat service")
    p_serve.add_argument("--bind", default="127.0.0.1:8765", metavar="HOST:PORT")
    p_serve.add_argument("--rooms", metavar="FILE", help="JSON array of room names/objects")
    p_serve.add_argument("--settings", metavar="FILE", help="agent settings JSON")
    p_serve.add_argument("--presets", metavar="FILE", help="behavior presets JSON")
    p_serve.add_argument("--provider", default="remote:http://127.0.0.1:8900/generate",
                         metavar="scripted:FILE|remote:URL")
    p_serve.add_argument("--transcript-dir", metavar="DIR")
    p_serve.add_argument("--agent-name", default=DEFAULT_AGENT_NAME)
    p_serve.set_defaults(func=_cmd_serve)

    p_replay = sub.add_parser("replay", help="re-run a recorded transcript deterministically")
    p_replay.add_argument("--transcript", required=True, metavar="F")
    p_replay.add_argument("--script", required=True, metavar="F")
    p_replay.add_argument("--settings", metavar="F")
    p_replay.add_argument("--out", metavar="DIR")
    p_replay.add_argument("--presets", metavar="F")
    p_replay.add_argument("--agent-name", default=DEFAULT_AGENT_NAME)
    p_replay.set_defaults(func=_cmd_replay)

    p_sweep = sub.add_parser("sweep", help="replay across threshold levels and compare")
    p_sweep.add_argument("--transcript", required=True, metavar="F")
    p_sweep.add_argument("--script", required=True, metavar="F")
    p_sweep.add_argument("--thresholds", default="high,medium,low")
    p_sweep.add_argument("--settings", metavar="F")
    p_sweep.add_argument("--out", metavar="DIR")
    p_sweep.add_argument("--agent-name", default=DEFAULT_AGENT_NAME)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
