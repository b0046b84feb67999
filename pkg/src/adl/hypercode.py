"""Hyper-code: the single program representation.

A program is a tree of nodes; a node may be a *link* carrying the id of a
value bound in a ValueStore.  Links are how executing state appears inside
source: two links with one id denote the same value, not copies.  Display
hints on links are cosmetic and never affect equality or execution.

The module also owns the wire format: UTF-8 JSON with a `defs` table that
holds each referenced value exactly once, so sharing survives a roundtrip.
"""

from __future__ import annotations

import json

from adl import values as V
from adl.types import Type, parse_type, render_type

ValueId = int


### Nodes

# kind -> (min children, max children or None)
ARITY = {
    "lit": (0, 0),
    "name": (0, 0),
    "link": (0, 0),
    "val": (1, 1),
    "abs": (1, 1),
    "fun": (1, 1),
    "block": (0, None),
    "send": (1, None),
    "recv": (1, 1),
    "rep": (1, 1),
    "choose": (2, None),
    "comp": (1, None),
    "decomp": (1, 1),
    "connnew": (0, 0),
    "locnew": (1, 1),
    "assign": (2, 2),
    "deref": (1, 1),
    "viewlit": (0, None),
    "seqlit": (0, None),
    "idx": (1, 1),
    "dot": (1, 1),
    "app": (1, None),
    "if": (2, 3),
    "while": (2, 2),
    "bin": (2, 2),
    "un": (1, 1),
    "free": (0, 0),
    "anyin": (1, 1),
    "anyout": (1, 1),
    "program": (0, None),
}


class Node:
    __slots__ = ("kind", "children", "attrs", "span")

    def __init__(self, kind: str, children=None, attrs=None, span=None):
        self.kind = kind
        self.children: list[Node] = children if children is not None else []
        self.attrs: dict = attrs if attrs is not None else {}
        self.span = span  # (line, col) or None

    def __repr__(self):
        return f"Node({self.kind}, {len(self.children)} children)"


def node_equal(a: Node, b: Node) -> bool:
    """Structural equality: spans and link hints are ignored, link ids are
    compared literally (sharing is by id)."""
    if a.kind != b.kind or len(a.children) != len(b.children):
        return False
    ka = {k: v for k, v in a.attrs.items() if k != "hint"}
    kb = {k: v for k, v in b.attrs.items() if k != "hint"}
    if ka != kb:
        return False
    return all(node_equal(x, y) for x, y in zip(a.children, b.children))


def node_equal_modulo_ids(a: Node, b: Node) -> bool:
    """Like node_equal but link ids are compared by co-reference topology
    (first-appearance numbering), for comparing trees across stores."""
    ma: dict = {}
    mb: dict = {}

    def walk(x: Node, y: Node) -> bool:
        if x.kind != y.kind or len(x.children) != len(y.children):
            return False
        if x.kind == "link":
            ca = ma.setdefault(x.attrs["id"], len(ma))
            cb = mb.setdefault(y.attrs["id"], len(mb))
            return ca == cb
        ka = {k: v for k, v in x.attrs.items() if k != "hint"}
        kb = {k: v for k, v in y.attrs.items() if k != "hint"}
        if ka != kb:
            return False
        return all(walk(c, d) for c, d in zip(x.children, y.children))

    return walk(a, b)


def validate(n: Node, path="root"):
    """Check node kinds and arity constraints over the whole tree."""
    if n.kind not in ARITY:
        raise HyperCodeError(f"{path}: unknown node kind {n.kind!r}")
    lo, hi = ARITY[n.kind]
    if len(n.children) < lo or (hi is not None and len(n.children) > hi):
        raise HyperCodeError(
            f"{path}: {n.kind} node has {len(n.children)} children, "
            f"expected {lo}" + ("" if hi == lo else f"..{hi if hi is not None else 'n'}")
        )
    for i, c in enumerate(n.children):
        validate(c, f"{path}.{i}")


def copy_tree(n: Node) -> Node:
    return Node(n.kind, [copy_tree(c) for c in n.children], dict(n.attrs), n.span)


def iter_nodes(n: Node):
    yield n
    for c in n.children:
        yield from iter_nodes(c)


def child_at(n: Node, path) -> Node:
    cur = n
    for i in path:
        cur = cur.children[i]
    return cur


def make_link(vid: ValueId, hint: str | None = None) -> Node:
    attrs = {"id": vid}
    if hint is not None:
        attrs["hint"] = hint
    return Node("link", attrs=attrs)


def lit(value, tyname: str) -> Node:
    return Node("lit", attrs={"t": tyname, "v": value})


def name(ident: str) -> Node:
    return Node("name", attrs={"name": ident})


class HyperCodeError(Exception):
    pass


### Value store

class IdAlloc:
    """Shared id counters for stores, connections, locations, behaviours.

    Never hands out an id twice; decoding may reserve specific ids so that
    a restored run keeps its original numbering.
    """

    __slots__ = ("vid", "cid", "lid", "bid")

    def __init__(self):
        self.vid = 0
        self.cid = 0
        self.lid = 0
        self.bid = 0

    def next_vid(self):
        n = self.vid
        self.vid += 1
        return n

    def next_cid(self):
        n = self.cid
        self.cid += 1
        return n

    def next_lid(self):
        n = self.lid
        self.lid += 1
        return n

    def next_bid(self):
        n = self.bid
        self.bid += 1
        return n

    def reserve(self, kind: str, n: int):
        cur = getattr(self, kind)
        if n >= cur:
            setattr(self, kind, n + 1)


class ValueStore:
    """Maps ValueId to values.  Ids are never reused; entries never change."""

    def __init__(self, ids: IdAlloc | None = None):
        self.ids = ids if ids is not None else IdAlloc()
        self._entries: dict[int, V.Value] = {}
        self._interned: dict[int, int] = {}  # id(value) -> vid

    def bind(self, value: V.Value) -> ValueId:
        vid = self.ids.next_vid()
        self._entries[vid] = value
        return vid

    def bind_at(self, vid: ValueId, value: V.Value):
        if vid in self._entries:
            raise HyperCodeError(f"value id {vid} already bound")
        self.ids.reserve("vid", vid)
        self._entries[vid] = value

    def lookup(self, vid: ValueId) -> V.Value:
        try:
            return self._entries[vid]
        except KeyError:
            raise HyperCodeError(f"unknown value id {vid}") from None

    def has(self, vid: ValueId) -> bool:
        return vid in self._entries

    def intern(self, value: V.Value) -> ValueId:
        """Bind value if this exact object is not already bound; the same
        object always maps to the same id, which is what makes repeated
        reification share links."""
        key = id(value)
        vid = self._interned.get(key)
        if vid is not None and self._entries.get(vid) is value:
            return vid
        vid = self.bind(value)
        self._interned[key] = vid
        return vid

    def __len__(self):
        return len(self._entries)

    def items(self):
        return self._entries.items()


def store_bind(store: ValueStore, value: V.Value) -> ValueId:
    return store.bind(value)


def store_lookup(store: ValueStore, vid: ValueId) -> V.Value:
    return store.lookup(vid)


### Continuation reconstruction

def block(items, span=None) -> Node:
    return Node("block", list(items), span=span)


def continuation_of(b: V.Behaviour) -> Node:
    """Rebuild the hyper-code a suspended behaviour has left to run.

    Frames rebuild innermost-first: the inner continuation becomes the
    first item before the enclosing frame's remaining items.  A while
    frame's loop node is still at the enclosing position, so iteration is
    preserved; an unentered replicate copy folds back into its replicate
    node.
    """
    if b.is_composition():
        raise HyperCodeError("composition has no single continuation")
    cur: Node | None = None
    for f in reversed(b.frames):
        remaining = list(f.items[f.pos:])
        if f.kind == V.FRAME_REP and f.rep_ctx is not None and not f.rep_ctx.cloned:
            if f.pos == 0:
                # Copy not yet started: the replicate itself is the rest.
                remaining = [f.rep_ctx.node]
            else:
                # Mid-copy before its first communication: sequential
                # approximation (finish this copy, then replicate afresh).
                remaining = remaining + [f.rep_ctx.node]
        if cur is not None:
            remaining = [cur] + remaining
        cur = block(remaining)
    if cur is None:
        cur = block([])
    return cur


### Serialization

class SerializeError(HyperCodeError):
    pass


def _ty(t: Type) -> str:
    return render_type(t)


class Encoder:
    def __init__(self, store: ValueStore):
        self.store = store
        self.defs: dict[int, object] = {}

    def node(self, n: Node) -> dict:
        k = n.kind
        if k == "lit":
            return {"k": "lit", "t": n.attrs["t"], "v": n.attrs["v"]}
        if k == "name":
            return {"k": "name", "name": n.attrs["name"]}
        if k == "link":
            vid = n.attrs["id"]
            if not self.store.has(vid):
                raise SerializeError(f"link to unknown value id {vid}")
            self._define(vid)
            out = {"k": "link", "id": vid}
            if n.attrs.get("hint") is not None:
                out["hint"] = n.attrs["hint"]
            return out
        if k == "val":
            return {"k": "val", "name": n.attrs["name"], "e": self.node(n.children[0])}
        if k == "abs":
            return {"k": "abs",
                    "params": [[p, _ty(t)] for p, t in n.attrs["params"]],
                    "body": self.node(n.children[0])}
        if k == "fun":
            return {"k": "fun",
                    "params": [[p, _ty(t)] for p, t in n.attrs["params"]],
                    "result": _ty(n.attrs["result"]),
                    "body": self.node(n.children[0])}
        if k == "block":
            return {"k": "block", "items": [self.node(c) for c in n.children]}
        if k == "send":
            return {"k": "send", "conn": self.node(n.children[0]),
                    "args": [self.node(c) for c in n.children[1:]]}
        if k == "recv":
            return {"k": "recv", "conn": self.node(n.children[0]),
                    "binders": [[p, _ty(t)] for p, t in n.attrs["binders"]]}
        if k == "rep":
            return {"k": "rep", "body": self.node(n.children[0])}
        if k == "choose":
            return {"k": "choose", "branches": [self.node(c) for c in n.children]}
        if k == "comp":
            return {"k": "comp",
                    "labels": list(n.attrs["labels"]),
                    "parts": [self.node(c) for c in n.children],
                    "unifs": [list(u) for u in n.attrs["unifs"]]}
        if k == "decomp":
            return {"k": "decomp", "e": self.node(n.children[0])}
        if k == "connnew":
            return {"k": "connnew", "payload": [_ty(t) for t in n.attrs["payload"]]}
        if k == "locnew":
            return {"k": "locnew", "e": self.node(n.children[0])}
        if k == "assign":
            return {"k": "assign", "lhs": self.node(n.children[0]),
                    "rhs": self.node(n.children[1])}
        if k == "deref":
            return {"k": "deref", "e": self.node(n.children[0])}
        if k == "viewlit":
            return {"k": "viewlit", "names": list(n.attrs["names"]),
                    "fields": [self.node(c) for c in n.children]}
        if k == "seqlit":
            return {"k": "seqlit", "items": [self.node(c) for c in n.children]}
        if k == "idx":
            return {"k": "idx", "e": self.node(n.children[0]), "i": n.attrs["index"]}
        if k == "dot":
            return {"k": "dot", "e": self.node(n.children[0]), "field": n.attrs["field"]}
        if k == "app":
            return {"k": "app", "f": self.node(n.children[0]),
                    "args": [self.node(c) for c in n.children[1:]]}
        if k == "if":
            out = {"k": "if", "cond": self.node(n.children[0]),
                   "then": self.node(n.children[1])}
            if len(n.children) == 3:
                out["else"] = self.node(n.children[2])
            return out
        if k == "while":
            return {"k": "while", "cond": self.node(n.children[0]),
                    "body": self.node(n.children[1])}
        if k == "bin":
            return {"k": "bin", "op": n.attrs["op"], "l": self.node(n.children[0]),
                    "r": self.node(n.children[1])}
        if k == "un":
            return {"k": "un", "op": n.attrs["op"], "e": self.node(n.children[0])}
        if k == "free":
            return {"k": "free", "names": list(n.attrs["names"])}
        if k == "anyin":
            return {"k": "anyin", "e": self.node(n.children[0])}
        if k == "anyout":
            return {"k": "anyout", "e": self.node(n.children[0]), "ty": _ty(n.attrs["ty"])}
        if k == "program":
            return {"k": "program", "items": [self.node(c) for c in n.children]}
        raise SerializeError(f"cannot serialize node kind {k!r}")

    def value(self, v: V.Value):
        """Inline encoding for data; identity-bearing values go through the
        defs table as {"ref": id} so sharing is kept."""
        if isinstance(v, V.IntV):
            return {"t": "integer", "v": v.value}
        if isinstance(v, V.RealV):
            return {"t": "real", "v": v.value}
        if isinstance(v, V.BoolV):
            return {"t": "boolean", "v": v.value}
        if isinstance(v, V.StrV):
            return {"t": "string", "v": v.value}
        if isinstance(v, V.AnyV):
            return {"t": "any", "witness": _ty(v.witness), "v": self.value(v.value)}
        if isinstance(v, V.SeqV):
            return {"t": "sequence", "elem": _ty(v.elem_type),
                    "items": [self.value(x) for x in v.items]}
        if isinstance(v, V.ViewV):
            return {"t": "view", "fields": [[n, self.value(x)] for n, x in v.fields]}
        vid = self.store.intern(v)
        self._define(vid)
        return {"ref": vid}

    def _define(self, vid: int):
        if vid in self.defs:
            return
        self.defs[vid] = None  # placeholder breaks reference cycles
        self.defs[vid] = self._encode_def(self.store.lookup(vid))

    def _encode_def(self, v: V.Value):
        if isinstance(v, V.ConnectionV):
            return {"t": "connection", "cid": v.conn_id,
                    "payload": [_ty(t) for t in v.payload],
                    "cls": V.conn_find(v).conn_id}
        if isinstance(v, V.LocationV):
            return {"t": "location", "lid": v.loc_id,
                    "ctype": _ty(v.content_type),
                    "content": self.value(v.content)}
        if isinstance(v, V.AbstractionV):
            return {"t": "abstraction",
                    "params": [[p, _ty(t)] for p, t in v.params],
                    "body": self.node(v.body),
                    "env": self._encode_env(v.env),
                    "name": v.name}
        if isinstance(v, V.FunctionV):
            out = {"t": "function",
                   "params": [[p, _ty(t)] for p, t in v.params],
                   "result": _ty(v.result),
                   "body": self.node(v.body) if v.body is not None else None,
                   "env": self._encode_env(v.env) if v.env is not None else [],
                   "name": v.name}
            if v.native is not None:
                out["native"] = v.name
            return out
        if isinstance(v, V.Behaviour):
            return self._encode_behaviour(v)
        # A plain data value that was bound in the store directly.
        return self.value(v)

    def _encode_behaviour(self, b: V.Behaviour):
        if b.state not in (V.SUSPENDED, V.TERMINATED, V.ERRORED):
            raise SerializeError(
                f"behaviour #{b.bid} is {b.state}; only suspended behaviours serialize"
            )
        out: dict = {"t": "behaviour"}
        if b.is_composition():
            out["composition"] = True
            out["parts"] = [[label, self.value(part)] for label, part in b.parts]
            out["pending"] = [list(p) for p in (b.pending_unifs or [])]
            out["cont"] = {"k": "block", "items": []}
            out["env"] = []
        else:
            out["cont"] = self.node(continuation_of(b))
            out["env"] = self._encode_chain(b)
        out["state"] = "suspended" if b.state == V.SUSPENDED else b.state
        out["bid"] = b.bid
        if b.label is not None:
            out["label"] = b.label
        if b.saved_state is not None:
            out["saved"] = b.saved_state
        if b.owner is not None:
            out["owner"] = list(b.owner)
        out["comm"] = b.comm_count
        return out

    def _encode_chain(self, b: V.Behaviour):
        """Flatten the behaviour's whole visible environment, outermost
        first, so rebinding in order reproduces shadowing."""
        env = b.frames[-1].env if b.frames else b.base_env
        return self._encode_env(env)

    def _encode_env(self, env: V.Env | None):
        scopes = list(env.chain()) if env is not None else []
        out = []
        for scope in reversed(scopes):
            for name_, val in scope.bindings.items():
                out.append([name_, self.value(val)])
        return out

    def finish(self, root: Node) -> str:
        doc = {"version": 1, "root": self.node(root),
               "defs": {str(k): v for k, v in self.defs.items()}}
        return json.dumps(doc, separators=(",", ":"))


def serialize(h: Node, store: ValueStore) -> str:
    enc = Encoder(store)
    return enc.finish(h)


class Decoder:
    """Rebuilds a tree and its referenced values inside a store.

    Original ids are kept when still free in the target store (so a
    roundtrip through a fresh store is id-stable); occupied ids are
    remapped to fresh ones, preserving co-reference.
    """

    def __init__(self, store: ValueStore, native_resolver=None):
        self.store = store
        self.natives = native_resolver
        self.idmap: dict[int, int] = {}
        self.shells: dict[int, V.Value] = {}
        self.conn_classes: dict[int, list[V.ConnectionV]] = {}
        self.owners: list[tuple[V.Behaviour, list]] = []

    def load(self, text: str) -> Node:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SerializeError(f"malformed hyper-code at offset {e.pos}: {e.msg}") from None
        return self.load_doc(doc)

    def load_doc(self, doc) -> Node:
        if not isinstance(doc, dict) or "root" not in doc:
            # A bare node document is accepted for convenience.
            if isinstance(doc, dict) and "k" in doc:
                return self.node(doc)
            raise SerializeError("document has no root")
        if doc.get("version") != 1:
            raise SerializeError(f"unsupported schema version {doc.get('version')!r}")
        self.begin_defs(doc.get("defs", {}))
        root = self.node(doc["root"])
        self.finish_defs()
        return root

    def begin_defs(self, defs: dict):
        self.rawdefs = {int(k): v for k, v in defs.items()}
        # Phase 1: allocate shells so cycles and shared refs resolve.
        for old in sorted(self.rawdefs):
            raw = self.rawdefs[old]
            shell = self._shell(raw)
            if shell is None:
                continue  # inline data, decoded in phase 2
            new = old if not self.store.has(old) else None
            if new is None:
                self.idmap[old] = self.store.bind(shell)
            else:
                self.store.bind_at(old, shell)
                self.idmap[old] = old
            self.shells[old] = shell

    def finish_defs(self):
        for old in sorted(self.rawdefs):
            raw = self.rawdefs[old]
            if old in self.shells:
                self._fill(self.shells[old], raw)
            else:
                new = old if not self.store.has(old) else None
                value = self.value(raw)
                if new is None:
                    self.idmap[old] = self.store.bind(value)
                else:
                    self.store.bind_at(old, value)
                    self.idmap[old] = old
        # Restore channel unification classes deterministically.
        for cls in sorted(self.conn_classes):
            members = sorted(self.conn_classes[cls], key=lambda c: c.conn_id)
            for other in members[1:]:
                V.conn_unify(members[0], other)
        for b, owner in self.owners:
            b.owner = (owner[0], owner[1])
        self.rawdefs = {}

    def _shell(self, raw):
        t = raw.get("t") if isinstance(raw, dict) else None
        if t == "connection":
            cid = raw["cid"]
            if cid is not None:
                self.store.ids.reserve("cid", cid)
            else:
                cid = self.store.ids.next_cid()
            c = V.ConnectionV(cid, tuple(parse_type(s) for s in raw["payload"]))
            self.conn_classes.setdefault(raw.get("cls", cid), []).append(c)
            return c
        if t == "location":
            lid = raw["lid"]
            if lid is not None:
                self.store.ids.reserve("lid", lid)
            else:
                lid = self.store.ids.next_lid()
            return V.LocationV(lid, V.IntV(0), parse_type(raw["ctype"]))
        if t == "abstraction":
            return V.AbstractionV([], None, V.Env(), raw.get("name"))
        if t == "function":
            return V.FunctionV([], None, None, None, raw.get("name"))
        if t == "behaviour":
            bid = raw.get("bid")
            if bid is not None:
                self.store.ids.reserve("bid", bid)
            else:
                bid = self.store.ids.next_bid()
            return V.Behaviour(bid)
        return None

    def _fill(self, shell: V.Value, raw: dict):
        t = raw["t"]
        if t == "connection":
            return
        if t == "location":
            shell.content = self.value(raw["content"])
            return
        if t == "abstraction":
            shell.params = [(p, parse_type(s)) for p, s in raw["params"]]
            shell.body = self.node(raw["body"])
            shell.env = self._decode_env(raw.get("env", []))
            return
        if t == "function":
            shell.params = [(p, parse_type(s)) for p, s in raw["params"]]
            shell.result = parse_type(raw["result"])
            shell.body = self.node(raw["body"]) if raw.get("body") is not None else None
            shell.env = self._decode_env(raw.get("env", []))
            if raw.get("native"):
                if self.natives is None:
                    raise SerializeError(f"no resolver for native function {raw['native']!r}")
                shell.native = self.natives(raw["native"])
            return
        if t == "behaviour":
            b: V.Behaviour = shell
            b.label = raw.get("label")
            b.comm_count = raw.get("comm", 0)
            state = raw.get("state", "suspended")
            b.state = {"suspended": V.SUSPENDED}.get(state, state)
            b.saved_state = raw.get("saved")
            if raw.get("owner") is not None:
                self.owners.append((b, raw["owner"]))
            if raw.get("composition"):
                b.parts = [(label, self.value(enc)) for label, enc in raw["parts"]]
                b.pending_unifs = [tuple(p) for p in raw.get("pending", [])]
                b.frames = []
            else:
                cont = self.node(raw["cont"])
                env = self._decode_env(raw.get("env", []))
                items = cont.children if cont.kind in ("block", "program") else [cont]
                b.frames = [V.Frame(env, items)]
                b.base_env = env
            return
        raise SerializeError(f"unknown def tag {t!r}")

    def _decode_env(self, pairs) -> V.Env:
        env = V.Env()
        for name_, enc in pairs:
            env.bind(name_, self.value(enc))
        return env

    def value(self, enc) -> V.Value:
        if not isinstance(enc, dict):
            raise SerializeError(f"malformed value encoding: {enc!r}")
        if "ref" in enc:
            old = enc["ref"]
            if old in self.shells:
                return self.shells[old]
            if old in self.idmap:
                return self.store.lookup(self.idmap[old])
            raise SerializeError(f"reference to missing definition {old}")
        t = enc.get("t")
        if t == "integer":
            return V.IntV(enc["v"])
        if t == "real":
            return V.RealV(float(enc["v"]))
        if t == "boolean":
            return V.BoolV(bool(enc["v"]))
        if t == "string":
            return V.StrV(enc["v"])
        if t == "any":
            return V.AnyV(self.value(enc["v"]), parse_type(enc["witness"]))
        if t == "sequence":
            return V.SeqV([self.value(x) for x in enc["items"]], parse_type(enc["elem"]))
        if t == "view":
            return V.ViewV([(n, self.value(x)) for n, x in enc["fields"]])
        raise SerializeError(f"unknown value tag {t!r}")

    def node(self, raw) -> Node:
        if not isinstance(raw, dict) or "k" not in raw:
            raise SerializeError(f"malformed node encoding: {raw!r}")
        k = raw["k"]
        try:
            if k == "lit":
                return lit(raw["v"], raw["t"])
            if k == "name":
                return name(raw["name"])
            if k == "link":
                old = raw["id"]
                vid = self.idmap.get(old, old)
                if not self.store.has(vid):
                    raise SerializeError(f"link to unknown value id {old}")
                return make_link(vid, raw.get("hint"))
            if k == "val":
                return Node("val", [self.node(raw["e"])], {"name": raw["name"]})
            if k == "abs":
                return Node("abs", [self.node(raw["body"])],
                            {"params": tuple((p, parse_type(s)) for p, s in raw["params"])})
            if k == "fun":
                return Node("fun", [self.node(raw["body"])],
                            {"params": tuple((p, parse_type(s)) for p, s in raw["params"]),
                             "result": parse_type(raw["result"])})
            if k == "block":
                return Node("block", [self.node(c) for c in raw["items"]])
            if k == "send":
                return Node("send", [self.node(raw["conn"])] + [self.node(c) for c in raw["args"]])
            if k == "recv":
                return Node("recv", [self.node(raw["conn"])],
                            {"binders": tuple((p, parse_type(s)) for p, s in raw["binders"])})
            if k == "rep":
                return Node("rep", [self.node(raw["body"])])
            if k == "choose":
                return Node("choose", [self.node(c) for c in raw["branches"]])
            if k == "comp":
                return Node("comp", [self.node(c) for c in raw["parts"]],
                            {"labels": tuple(raw["labels"]),
                             "unifs": tuple(tuple(u) for u in raw["unifs"])})
            if k == "decomp":
                return Node("decomp", [self.node(raw["e"])])
            if k == "connnew":
                return Node("connnew", attrs={"payload": tuple(parse_type(s) for s in raw["payload"])})
            if k == "locnew":
                return Node("locnew", [self.node(raw["e"])])
            if k == "assign":
                return Node("assign", [self.node(raw["lhs"]), self.node(raw["rhs"])])
            if k == "deref":
                return Node("deref", [self.node(raw["e"])])
            if k == "viewlit":
                return Node("viewlit", [self.node(c) for c in raw["fields"]],
                            {"names": tuple(raw["names"])})
            if k == "seqlit":
                return Node("seqlit", [self.node(c) for c in raw["items"]])
            if k == "idx":
                return Node("idx", [self.node(raw["e"])], {"index": raw["i"]})
            if k == "dot":
                return Node("dot", [self.node(raw["e"])], {"field": raw["field"]})
            if k == "app":
                return Node("app", [self.node(raw["f"])] + [self.node(c) for c in raw["args"]])
            if k == "if":
                kids = [self.node(raw["cond"]), self.node(raw["then"])]
                if "else" in raw:
                    kids.append(self.node(raw["else"]))
                return Node("if", kids)
            if k == "while":
                return Node("while", [self.node(raw["cond"]), self.node(raw["body"])])
            if k == "bin":
                return Node("bin", [self.node(raw["l"]), self.node(raw["r"])], {"op": raw["op"]})
            if k == "un":
                return Node("un", [self.node(raw["e"])], {"op": raw["op"]})
            if k == "free":
                return Node("free", attrs={"names": tuple(raw["names"])})
            if k == "anyin":
                return Node("anyin", [self.node(raw["e"])])
            if k == "anyout":
                return Node("anyout", [self.node(raw["e"])], {"ty": parse_type(raw["ty"])})
            if k == "program":
                return Node("program", [self.node(c) for c in raw["items"]])
        except KeyError as e:
            raise SerializeError(f"node {k!r} missing field {e.args[0]!r}") from None
        raise SerializeError(f"unknown node kind {k!r}")


def deserialize(text: str, store: ValueStore, native_resolver=None) -> Node:
    dec = Decoder(store, native_resolver)
    return dec.load(text)
