"""Structural type checking over hyper-code.

Checking is flow-sensitive inside blocks: a `value` binding or a receive
binder is visible to the statements after it in the same block.  All
errors are collected, not just the first; a failed subexpression gets the
poison type so one mistake does not cascade.

Equality of types is structural throughout; view field order matters, and
`any` never converts implicitly (inject with `any(e)`, recover with
`project(e, T)`).
"""

from __future__ import annotations

from dataclasses import dataclass

from adl import values as V
from adl.hypercode import Node, ValueStore
from adl.types import (
    ANY,
    BEHAVIOUR,
    BOOLEAN,
    DECOMPOSED_SEQ,
    ERROR,
    INTEGER,
    REAL,
    STRING,
    UNIT,
    AbstractionT,
    ConnectionT,
    ErrorT,
    FunctionT,
    LocationT,
    SequenceT,
    Type,
    ViewT,
    render_type,
    type_equal,
)

_LIT_TYPES = {"integer": INTEGER, "real": REAL, "boolean": BOOLEAN, "string": STRING}


@dataclass
class TypeError_:
    span: object
    message: str
    expected: Type | None = None
    found: Type | None = None

    def __str__(self):
        if self.span is not None:
            return f"{self.span.line}:{self.span.column}: {self.message}"
        return self.message


class TypeEnv:
    """Scoped name-to-type frames, innermost lookup wins."""

    __slots__ = ("bindings", "parent")

    def __init__(self, parent: "TypeEnv | None" = None, bindings: dict | None = None):
        self.bindings = bindings if bindings is not None else {}
        self.parent = parent

    def lookup(self, name: str) -> Type | None:
        env = self
        while env is not None:
            t = env.bindings.get(name)
            if t is not None:
                return t
            env = env.parent
        return None

    def bind(self, name: str, t: Type):
        self.bindings[name] = t

    def child(self) -> "TypeEnv":
        return TypeEnv(self)


def env_from_values(value_env: V.Env | None) -> TypeEnv:
    """A TypeEnv mirroring a runtime environment chain."""
    if value_env is None:
        return TypeEnv()
    scopes = list(value_env.chain())
    tenv = None
    for scope in reversed(scopes):
        tenv = TypeEnv(tenv)
        for name, val in scope.bindings.items():
            tenv.bind(name, V.type_of_value(val))
    return tenv if tenv is not None else TypeEnv()


class Checker:
    def __init__(self, store: ValueStore | None = None):
        self.store = store
        self.errors: list[TypeError_] = []

    def error(self, node: Node, message: str, expected=None, found=None) -> Type:
        span = node.span if node.span else None
        self.errors.append(TypeError_(span, message, expected, found))
        return ERROR

    def mismatch(self, node: Node, what: str, expected: Type, found: Type) -> Type:
        if isinstance(found, ErrorT) or isinstance(expected, ErrorT):
            return ERROR
        return self.error(
            node,
            f"{what}: expected {render_type(expected)}, found {render_type(found)}",
            expected, found,
        )

    ### statements

    def check_program(self, program: Node, env: TypeEnv) -> Type:
        for item in program.children:
            self.statement(item, env)
        return UNIT

    def statement(self, n: Node, env: TypeEnv) -> Type:
        k = n.kind
        if k == "val":
            rhs = n.children[0]
            if rhs.kind == "abs":
                # Bindings of abstraction/function literals are recursive.
                env.bind(n.attrs["name"], AbstractionT(tuple(t for _, t in rhs.attrs["params"])))
                self.expr(rhs, env)
            elif rhs.kind == "fun":
                env.bind(n.attrs["name"],
                         FunctionT(tuple(t for _, t in rhs.attrs["params"]), rhs.attrs["result"]))
                self.expr(rhs, env)
            else:
                env.bind(n.attrs["name"], self.expr(rhs, env))
            return UNIT
        if k == "assign":
            lt = self.expr(n.children[0], env)
            rt = self.expr(n.children[1], env)
            if isinstance(lt, LocationT):
                if not type_equal(lt.of, rt):
                    self.mismatch(n, "assignment", lt.of, rt)
            elif not isinstance(lt, ErrorT):
                self.error(n, f"assignment target is {render_type(lt)}, not a location")
            return UNIT
        if k == "free":
            for name in n.attrs["names"]:
                if env.lookup(name) is None:
                    self.error(n, f"free of unbound name {name!r}")
            return UNIT
        if k == "if":
            ct = self.expr(n.children[0], env)
            if not isinstance(ct, ErrorT) and not type_equal(ct, BOOLEAN):
                self.mismatch(n.children[0], "condition", BOOLEAN, ct)
            self.block_body(n.children[1], env)
            if len(n.children) == 3:
                self.block_body(n.children[2], env)
            return UNIT
        if k == "while":
            ct = self.expr(n.children[0], env)
            if not isinstance(ct, ErrorT) and not type_equal(ct, BOOLEAN):
                self.mismatch(n.children[0], "condition", BOOLEAN, ct)
            self.block_body(n.children[1], env)
            return UNIT
        if k == "recv":
            t = self.recv(n, env, bind_into=env)
            return t
        if k == "block":
            # Statement blocks run inline; names listed in free{} survive
            # the scope, everything else is restricted to it.
            inner = env.child()
            for item in n.children:
                self.statement(item, inner)
            for item in n.children:
                if item.kind == "free":
                    for name in item.attrs["names"]:
                        t = inner.lookup(name)
                        if t is not None:
                            env.bind(name, t)
            return UNIT
        # Any expression may stand as a statement; its value is discarded
        # (behaviour-typed results are scheduled by the runtime).
        self.expr(n, env)
        return UNIT

    def block_body(self, block: Node, env: TypeEnv) -> Type:
        inner = env.child()
        for item in block.children:
            self.statement(item, inner)
        return BEHAVIOUR

    ### expressions

    def expr(self, n: Node, env: TypeEnv) -> Type:
        k = n.kind
        if k == "lit":
            return _LIT_TYPES[n.attrs["t"]]
        if k == "name":
            t = env.lookup(n.attrs["name"])
            if t is None:
                return self.error(n, f"unbound name {n.attrs['name']!r}")
            return t
        if k == "link":
            if self.store is None:
                return self.error(n, "link used without a value store")
            try:
                return V.type_of_value(self.store.lookup(n.attrs["id"]))
            except Exception:
                return self.error(n, f"link to unknown value id {n.attrs['id']}")
        if k == "block":
            return self.block_body(n, env)
        if k == "abs":
            inner = env.child()
            for pname, pt in n.attrs["params"]:
                inner.bind(pname, pt)
            self.block_body(n.children[0], inner)
            return AbstractionT(tuple(t for _, t in n.attrs["params"]))
        if k == "fun":
            inner = env.child()
            for pname, pt in n.attrs["params"]:
                inner.bind(pname, pt)
            bt = self.expr(n.children[0], inner)
            result = n.attrs["result"]
            if not isinstance(bt, ErrorT) and not type_equal(bt, result):
                self.mismatch(n.children[0], "function body", result, bt)
            return FunctionT(tuple(t for _, t in n.attrs["params"]), result)
        if k == "send":
            ct = self.expr(n.children[0], env)
            args = [self.expr(c, env) for c in n.children[1:]]
            if isinstance(ct, ConnectionT):
                if len(args) != len(ct.payload):
                    self.error(n, f"send arity {len(args)} does not match "
                                  f"connection arity {len(ct.payload)}")
                else:
                    for i, (at, pt) in enumerate(zip(args, ct.payload)):
                        if not isinstance(at, ErrorT) and not type_equal(at, pt):
                            self.mismatch(n.children[1 + i], f"send argument {i + 1}", pt, at)
            elif not isinstance(ct, ErrorT):
                self.error(n.children[0], f"via target is {render_type(ct)}, not a connection")
            return BEHAVIOUR
        if k == "recv":
            # In expression position the binders scope over nothing.
            return self.recv(n, env, bind_into=None)
        if k == "rep":
            self.block_body(n.children[0], env)
            return BEHAVIOUR
        if k == "choose":
            for br in n.children:
                self.block_body(br, env)
            return BEHAVIOUR
        if k == "comp":
            seen = set()
            for label in n.attrs["labels"]:
                if label is not None:
                    if label in seen:
                        self.error(n, f"duplicate part label {label!r}")
                    seen.add(label)
            for c in n.children:
                pt = self.expr(c, env)
                if not isinstance(pt, ErrorT) and not type_equal(pt, BEHAVIOUR):
                    self.mismatch(c, "compose part", BEHAVIOUR, pt)
            for ll, ln, rl, rn in n.attrs["unifs"]:
                for lab in (ll, rl):
                    if lab not in seen:
                        self.error(n, f"where clause names unknown part {lab!r}")
            return BEHAVIOUR
        if k == "decomp":
            et = self.expr(n.children[0], env)
            if not isinstance(et, ErrorT) and not type_equal(et, BEHAVIOUR):
                self.mismatch(n.children[0], "decompose", BEHAVIOUR, et)
            return DECOMPOSED_SEQ
        if k == "connnew":
            return ConnectionT(n.attrs["payload"])
        if k == "locnew":
            it = self.expr(n.children[0], env)
            if isinstance(it, ErrorT):
                return ERROR
            return LocationT(it)
        if k == "deref":
            lt = self.expr(n.children[0], env)
            if isinstance(lt, LocationT):
                return lt.of
            if isinstance(lt, ErrorT):
                return ERROR
            return self.error(n, f"deref of {render_type(lt)}, not a location")
        if k == "viewlit":
            fields = []
            for name, c in zip(n.attrs["names"], n.children):
                fields.append((name, self.expr(c, env)))
            if any(isinstance(t, ErrorT) for _, t in fields):
                return ERROR
            return ViewT(tuple(fields))
        if k == "seqlit":
            if not n.children:
                return SequenceT(ANY)
            ts = [self.expr(c, env) for c in n.children]
            if any(isinstance(t, ErrorT) for t in ts):
                return ERROR
            head = ts[0]
            for i, t in enumerate(ts[1:], start=2):
                if not type_equal(t, head):
                    return self.mismatch(n.children[i - 1], f"sequence element {i}", head, t)
            return SequenceT(head)
        if k == "idx":
            st = self.expr(n.children[0], env)
            if n.attrs["index"] < 1:
                self.error(n, "sequence indexing is 1-based")
            if isinstance(st, SequenceT):
                return st.of
            if isinstance(st, ErrorT):
                return ERROR
            return self.error(n, f"indexing into {render_type(st)}, not a sequence")
        if k == "dot":
            vt = self.expr(n.children[0], env)
            if isinstance(vt, ViewT):
                for fname, ft in vt.fields:
                    if fname == n.attrs["field"]:
                        return ft
                return self.error(n, f"view has no field {n.attrs['field']!r} "
                                     f"(fields: {', '.join(f for f, _ in vt.fields)})")
            if isinstance(vt, ErrorT):
                return ERROR
            return self.error(n, f"projection from {render_type(vt)}, not a view")
        if k == "app":
            ft = self.expr(n.children[0], env)
            args = [self.expr(c, env) for c in n.children[1:]]
            if isinstance(ft, (AbstractionT, FunctionT)):
                params = ft.params
                if len(args) != len(params):
                    self.error(n, f"call arity {len(args)} does not match "
                                  f"declared arity {len(params)}")
                else:
                    for i, (at, pt) in enumerate(zip(args, params)):
                        if not isinstance(at, ErrorT) and not type_equal(at, pt):
                            self.mismatch(n.children[1 + i], f"argument {i + 1}", pt, at)
                return BEHAVIOUR if isinstance(ft, AbstractionT) else ft.result
            if isinstance(ft, ErrorT):
                return ERROR
            return self.error(n, f"call of {render_type(ft)}, not an abstraction or function")
        if k == "bin":
            return self.binop(n, env)
        if k == "un":
            et = self.expr(n.children[0], env)
            if isinstance(et, ErrorT):
                return ERROR
            if n.attrs["op"] == "not":
                if not type_equal(et, BOOLEAN):
                    return self.mismatch(n, "not", BOOLEAN, et)
                return BOOLEAN
            if type_equal(et, INTEGER) or type_equal(et, REAL):
                return et
            return self.error(n, f"negation of {render_type(et)}")
        if k == "anyin":
            self.expr(n.children[0], env)
            return ANY
        if k == "anyout":
            et = self.expr(n.children[0], env)
            if not isinstance(et, ErrorT) and not type_equal(et, ANY):
                self.mismatch(n.children[0], "project", ANY, et)
            return n.attrs["ty"]
        if k in ("val", "assign", "free", "if", "while"):
            return self.statement(n, env)
        return self.error(n, f"unexpected node kind {k!r}")

    def recv(self, n: Node, env: TypeEnv, bind_into: TypeEnv | None) -> Type:
        ct = self.expr(n.children[0], env)
        binders = n.attrs["binders"]
        if isinstance(ct, ConnectionT):
            if len(binders) != len(ct.payload):
                self.error(n, f"receive arity {len(binders)} does not match "
                              f"connection arity {len(ct.payload)}")
            else:
                for i, ((bname, bt), pt) in enumerate(zip(binders, ct.payload)):
                    if not type_equal(bt, pt):
                        self.mismatch(n, f"receive binder {bname!r}", pt, bt)
        elif not isinstance(ct, ErrorT):
            self.error(n.children[0], f"via target is {render_type(ct)}, not a connection")
        if bind_into is not None:
            for bname, bt in binders:
                bind_into.bind(bname, bt)
        return BEHAVIOUR

    def binop(self, n: Node, env: TypeEnv) -> Type:
        op = n.attrs["op"]
        lt = self.expr(n.children[0], env)
        rt = self.expr(n.children[1], env)
        if isinstance(lt, ErrorT) or isinstance(rt, ErrorT):
            return ERROR
        if op in ("and", "or"):
            for t, c in ((lt, n.children[0]), (rt, n.children[1])):
                if not type_equal(t, BOOLEAN):
                    self.mismatch(c, op, BOOLEAN, t)
            return BOOLEAN
        if op in ("=", "~="):
            if not type_equal(lt, rt):
                return self.mismatch(n, "comparison", lt, rt)
            return BOOLEAN
        if op in ("<", "<=", ">", ">="):
            if not type_equal(lt, rt):
                return self.mismatch(n, "comparison", lt, rt)
            if not (type_equal(lt, INTEGER) or type_equal(lt, REAL) or type_equal(lt, STRING)):
                return self.error(n, f"ordering is not defined on {render_type(lt)}")
            return BOOLEAN
        if op == "++":
            if not type_equal(lt, rt):
                return self.mismatch(n, "concatenation", lt, rt)
            if type_equal(lt, STRING) or isinstance(lt, SequenceT):
                return lt
            return self.error(n, f"concatenation is not defined on {render_type(lt)}")
        # arithmetic: + - * /
        if not type_equal(lt, rt):
            return self.mismatch(n, op, lt, rt)
        if type_equal(lt, INTEGER) or type_equal(lt, REAL):
            return lt
        return self.error(n, f"arithmetic on {render_type(lt)}")


def check(h: Node, store: ValueStore | None = None,
          env: TypeEnv | None = None) -> list[TypeError_]:
    """Typecheck a tree; returns all errors found (empty list if clean)."""
    ck = Checker(store)
    tenv = env if env is not None else TypeEnv()
    if h.kind == "program":
        ck.check_program(h, tenv)
    else:
        ck.expr(h, tenv)
    return ck.errors


def infer(h: Node, store: ValueStore | None = None,
          env: TypeEnv | None = None) -> tuple[Type, list[TypeError_]]:
    """Principal type of an expression plus any errors collected."""
    ck = Checker(store)
    tenv = env if env is not None else TypeEnv()
    t = ck.expr(h, tenv) if h.kind != "program" else ck.check_program(h, tenv)
    return t, ck.errors
