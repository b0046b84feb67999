"""The value universe and the process objects that inhabit it.

Data values (integers, strings, views, ...) compare structurally; values
with identity (connections, locations, behaviours, closures) compare by
identity, which is exactly what the language-level ``=`` operator does.

Behaviours carry their own small-step machine state: a stack of block
frames over an environment chain.  The engine owns all mutation.
"""

from __future__ import annotations

from dataclasses import dataclass

from adl.types import (
    ANY,
    BEHAVIOUR,
    BOOLEAN,
    INTEGER,
    REAL,
    STRING,
    AbstractionT,
    ConnectionT,
    FunctionT,
    LocationT,
    SequenceT,
    Type,
    ViewT,
)


class Value:
    pass


@dataclass(frozen=True)
class IntV(Value):
    value: int


@dataclass(frozen=True)
class RealV(Value):
    value: float


@dataclass(frozen=True)
class BoolV(Value):
    value: bool


@dataclass(frozen=True)
class StrV(Value):
    value: str


@dataclass(frozen=True)
class AnyV(Value):
    """A value of any type packaged with a witness of that type."""

    value: Value
    witness: Type


@dataclass
class SeqV(Value):
    items: list
    elem_type: Type


@dataclass
class ViewV(Value):
    fields: list  # ordered [(name, Value)]

    def get(self, name: str):
        for n, v in self.fields:
            if n == name:
                return v
        return None


class ConnectionV(Value):
    """A channel identity; rendezvous matches on union-find class."""

    def __init__(self, conn_id: int, payload: tuple[Type, ...]):
        self.conn_id = conn_id
        self.payload = payload
        self._parent: ConnectionV = self


def conn_find(c: ConnectionV) -> ConnectionV:
    root = c
    while root._parent is not root:
        root = root._parent
    # Path compression.
    while c._parent is not c:
        c, c._parent = c._parent, root
    return root


def conn_unify(a: ConnectionV, b: ConnectionV) -> ConnectionV:
    """Merge the channel classes of a and b; payload types must agree.

    The representative is the member with the smallest id, keeping event
    traces stable however unifications arrive.
    """
    if a.payload != b.payload:
        raise ValueError(
            f"cannot unify connection[{', '.join(map(str, a.payload))}] "
            f"with connection[{', '.join(map(str, b.payload))}]"
        )
    ra, rb = conn_find(a), conn_find(b)
    if ra is rb:
        return ra
    if rb.conn_id < ra.conn_id:
        ra, rb = rb, ra
    rb._parent = ra
    return ra


class LocationV(Value):
    """A typed mutable cell; assignment must preserve the content type."""

    def __init__(self, loc_id: int, content: Value, content_type: Type):
        self.loc_id = loc_id
        self.content = content
        self.content_type = content_type


class AbstractionV(Value):
    """Parameterized template over behaviours; applying yields a behaviour."""

    def __init__(self, params, body, env: "Env", name: str | None = None):
        self.params = params  # [(name, Type)]
        self.body = body      # hypercode node
        self.env = env
        self.name = name


class FunctionV(Value):
    def __init__(self, params, result: Type, body, env: "Env | None",
                 name: str | None = None, native=None):
        self.params = params
        self.result = result
        self.body = body
        self.env = env
        self.name = name
        self.native = native  # optional python callable(args) -> Value


class Env:
    """A scope frame: mutable bindings plus a link to the enclosing frame."""

    __slots__ = ("bindings", "parent")

    def __init__(self, parent: "Env | None" = None, bindings: dict | None = None):
        self.bindings = bindings if bindings is not None else {}
        self.parent = parent

    def lookup(self, name: str):
        env = self
        while env is not None:
            if name in env.bindings:
                return env.bindings[name]
            env = env.parent
        raise KeyError(name)

    def bind(self, name: str, value: Value):
        self.bindings[name] = value

    def chain(self):
        env = self
        while env is not None:
            yield env
            env = env.parent


# Behaviour states.
RUNNING = "running"
BLOCKED_SEND = "blocked_send"
BLOCKED_RECV = "blocked_receive"
BLOCKED_CHOOSE = "blocked_choose"
SUSPENDED = "suspended"
TERMINATED = "terminated"
ERRORED = "error"

BLOCKED_STATES = (BLOCKED_SEND, BLOCKED_RECV, BLOCKED_CHOOSE)


class ReplicateCtx:
    """Tracks one active copy of a replicate body.

    A fresh clone is spawned, atomically with the copy's first completed
    communication; a copy that finishes its body without communicating just
    falls through, which terminates the replicate.
    """

    __slots__ = ("node", "env", "cloned")

    def __init__(self, node, env: Env):
        self.node = node
        self.env = env
        self.cloned = False


FRAME_BLOCK = "block"
FRAME_REP = "repbody"
FRAME_WHILE = "whilebody"


class Frame:
    __slots__ = ("env", "items", "pos", "kind", "free_names", "rep_ctx")

    def __init__(self, env: Env, items, kind: str = FRAME_BLOCK, rep_ctx=None):
        self.env = env
        self.items = items
        self.pos = 0
        self.kind = kind
        self.free_names: list[str] = []
        self.rep_ctx = rep_ctx

    def exhausted(self) -> bool:
        return self.pos >= len(self.items)

    def head(self):
        return self.items[self.pos]


class Behaviour(Value):
    """An executing or suspended process.

    Either a primitive behaviour (frames over an environment) or a
    composition (labelled parts executing in parallel); a composition has
    no frames of its own.
    """

    def __init__(self, bid: int, frames=None, base_env: Env | None = None,
                 label: str | None = None, parts=None):
        self.bid = bid
        self.label = label
        self.frames: list[Frame] = frames or []
        self.base_env = base_env
        self.parts = parts  # [(label|None, Behaviour)] for compositions
        self.pending_unifs: list | None = None  # unresolved where-clause pairs
        self.state = SUSPENDED
        self.saved_state: str | None = None
        self.owner: tuple[int, int] | None = None  # (composition bid, part index)
        self.comm_count = 0
        self.error: str | None = None
        # Blocked-state payload:
        self.wait_conn: ConnectionV | None = None
        self.wait_payload: list | None = None   # evaluated send arguments
        self.wait_binders: list | None = None   # [(name, Type)] for receive
        self.choose_guards: list | None = None  # cached guard analysis
        self.choose_node = None

    def is_composition(self) -> bool:
        return self.parts is not None

    def alive(self) -> bool:
        return self.state not in (TERMINATED, ERRORED)

    def rep_ctxs(self):
        return [f.rep_ctx for f in self.frames if f.rep_ctx is not None]

    def own_envs(self):
        """Environment frames created by this behaviour (innermost first),
        stopping at (and excluding) base_env."""
        seen = []
        if self.frames:
            for env in self.frames[-1].env.chain():
                if env is self.base_env:
                    break
                seen.append(env)
        return seen

    def __repr__(self):
        tag = "composition" if self.is_composition() else "behaviour"
        label = f" {self.label!r}" if self.label else ""
        return f"<{tag} #{self.bid}{label} {self.state}>"


def type_of_value(v: Value) -> Type:
    """The runtime type tag carried by a value (rule: any-values are Any)."""
    if isinstance(v, IntV):
        return INTEGER
    if isinstance(v, RealV):
        return REAL
    if isinstance(v, BoolV):
        return BOOLEAN
    if isinstance(v, StrV):
        return STRING
    if isinstance(v, AnyV):
        return ANY
    if isinstance(v, SeqV):
        return SequenceT(v.elem_type)
    if isinstance(v, ViewV):
        return ViewT(tuple((n, type_of_value(fv)) for n, fv in v.fields))
    if isinstance(v, LocationV):
        return LocationT(v.content_type)
    if isinstance(v, ConnectionV):
        return ConnectionT(v.payload)
    if isinstance(v, AbstractionV):
        return AbstractionT(tuple(t for _, t in v.params))
    if isinstance(v, FunctionV):
        return FunctionT(tuple(t for _, t in v.params), v.result)
    if isinstance(v, Behaviour):
        return BEHAVIOUR
    raise TypeError(f"not a value: {v!r}")


def values_equal(a: Value, b: Value) -> bool:
    """Language-level ``=``: structural on data, identity on the rest."""
    if isinstance(a, (ConnectionV, LocationV, AbstractionV, FunctionV, Behaviour)):
        return a is b
    return a == b


def render_value(v: Value, depth: int = 0) -> str:
    """Compact single-line display used in traces and the REPL."""
    if isinstance(v, IntV):
        return str(v.value)
    if isinstance(v, RealV):
        return repr(v.value)
    if isinstance(v, BoolV):
        return "true" if v.value else "false"
    if isinstance(v, StrV):
        return '"' + v.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if depth > 4:
        return "..."
    if isinstance(v, AnyV):
        return f"any({render_value(v.value, depth + 1)})"
    if isinstance(v, SeqV):
        return "sequence{ " + ", ".join(render_value(x, depth + 1) for x in v.items) + " }"
    if isinstance(v, ViewV):
        inner = ", ".join(f"{n} = {render_value(fv, depth + 1)}" for n, fv in v.fields)
        return "view{ " + inner + " }"
    if isinstance(v, LocationV):
        return f"<location#{v.loc_id} {render_value(v.content, depth + 1)}>"
    if isinstance(v, ConnectionV):
        return f"<connection#{v.conn_id}>"
    if isinstance(v, AbstractionV):
        name = v.name or "_"
        return f"<abstraction {name}/{len(v.params)}>"
    if isinstance(v, FunctionV):
        name = v.name or "_"
        return f"<function {name}/{len(v.params)}>"
    if isinstance(v, Behaviour):
        return repr(v)
    return repr(v)
