"""The decision log: one JSONL record per evaluated human message.

The log is the replayable account of every gating evaluation — who the
trigger addressed, whether the provider ran, the verdict and score, any
override, how the action was scheduled, and what finally happened. Records
are buffered and written in trigger order: a deferred action can outlive
the evaluation of later triggers, so completion order is not write order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

SCHEDULE_KEYS = ("scheduled", "suppressed", "deferred")


@dataclass
class DecisionRecord:
    trigger_seq: int
    addressee: str  # "agent" | "other:<name>" | "unaddressed"
    invoked: bool = False
    decision: Optional[dict] = None  # {"value": int, "verdict": "SUBMIT"|"PASS"}
    override: Optional[str] = None
    gate_result: Optional[bool] = None
    schedule_key: Optional[str] = None  # one of SCHEDULE_KEYS
    schedule_value: Any = None
    final: Optional[dict] = None  # {"posted_seq": int} | {"reaction": str}
    finalized: bool = False

    def set_decision(self, value: int, verdict: str) -> None:
        self.decision = {"value": value, "verdict": verdict}

    def set_schedule(self, key: str, value: Any) -> None:
        if key not in SCHEDULE_KEYS:
            raise ValueError(f"bad schedule key: {key}")
        self.schedule_key = key
        self.schedule_value = value

    def finalize(self, final: Optional[dict] = None) -> None:
        if final is not None:
            self.final = final
        self.finalized = True

    def to_json_dict(self) -> dict:
        out: dict[str, Any] = {
            "trigger_seq": self.trigger_seq,
            "addressee": self.addressee,
            "invoked": self.invoked,
            "decision": self.decision,
            "override": self.override,
            "gate_result": self.gate_result,
        }
        if self.schedule_key is not None:
            out[self.schedule_key] = self.schedule_value
        out["final"] = self.final
        return out

    def to_json_line(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False, separators=(", ", ": "))


class DecisionLog:
    """Ordered record store; optionally mirrored to a JSONL file.

    Triggers are evaluated in seq order, so records are created in order;
    ``flush`` writes the longest finalized prefix not yet written.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self.records: list[DecisionRecord] = []
        self._written = 0
        self._fh = open(path, "w", encoding="utf-8") if path is not None else None

    def open_record(self, trigger_seq: int, addressee: str) -> DecisionRecord:
        record = DecisionRecord(trigger_seq=trigger_seq, addressee=addressee)
        self.records.append(record)
        return record

    def flush(self) -> None:
        while self._written < len(self.records) and self.records[self._written].finalized:
            if self._fh is not None:
                self._fh.write(self.records[self._written].to_json_line() + "\n")
            self._written += 1
        if self._fh is not None:
            self._fh.flush()

    def lines(self) -> list[str]:
        return [r.to_json_line() for r in self.records]

    def close(self) -> None:
        self.flush()
        if self._fh is not None:
            unwritten = self.records[self._written :]
            if unwritten:
                raise RuntimeError(
                    f"{len(unwritten)} decision records never finalized "
                    f"(first trigger_seq={unwritten[0].trigger_seq})"
                )
            self._fh.close()
            self._fh = None


def read_decision_log(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{i}: bad decision record: {exc}") from exc
    return out
