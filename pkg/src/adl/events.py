"""Trace events: one JSON object per reduction worth observing.

The export format is JSON lines with schema {"step": N, "kind": ...};
field order is fixed so identical runs serialize to identical bytes.
"""

from __future__ import annotations

import json

COMM = "comm"
SPAWN = "spawn"
CLONE = "clone"
CHOOSE_COMMIT = "choose_commit"
TERMINATE = "terminate"
SUSPEND_ALL = "suspend_all"
ASSIGN = "assign"


class Event:
    __slots__ = ("step", "kind", "data")

    def __init__(self, step: int, kind: str, **data):
        self.step = step
        self.kind = kind
        self.data = data

    def to_dict(self) -> dict:
        out = {"step": self.step, "kind": self.kind}
        for k in sorted(self.data):
            out[k] = self.data[k]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def __repr__(self):
        return f"Event({self.to_json()})"

    def __eq__(self, other):
        return (isinstance(other, Event) and self.step == other.step
                and self.kind == other.kind and self.data == other.data)


def trace_to_jsonl(events) -> str:
    return "\n".join(e.to_json() for e in events)


def canonical_trace(events, rebase_steps=True, rename_ids=True):
    """Events with behaviour ids renamed by first appearance and steps
    rebased to 1.  Two runs of the same behaviour then compare equal even
    when absolute ids and step offsets differ."""
    idmap: dict = {}

    def rn(v):
        if not rename_ids:
            return v
        if v not in idmap:
            idmap[v] = len(idmap)
        return idmap[v]

    out = []
    base = events[0].step - 1 if (events and rebase_steps) else 0
    for e in events:
        data = dict(e.data)
        for key in ("bid", "of", "sender", "receiver"):
            if key in data:
                data[key] = rn(data[key])
        out.append(Event(e.step - base, e.kind, **data))
    return out
