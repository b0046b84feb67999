"""A persistent environment wrapped around one engine.

Top-level `value` declarations live in the session environment and
survive across loaded files and interactive input; every other top-level
statement becomes a behaviour scheduled on the engine.  The session also
owns the snapshot format and the scripted external world (connections
and counter functions standing in for pre-existing environment values).
"""

from __future__ import annotations

import json

from adl import hypercode as H
from adl import reflection
from adl import syntax
from adl import typecheck
from adl import types as T
from adl import values as V
from adl.runtime import Engine, AdlFault

SNAPSHOT_FORMAT = "adl-snapshot"


class SessionError(Exception):
    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or []


def _check_errors(node, store, env):
    return typecheck.check(node, store, typecheck.env_from_values(env))


class Session:
    def __init__(self, seed: int = 0, store: H.ValueStore | None = None):
        self.store = store if store is not None else H.ValueStore()
        self.engine = Engine(seed=seed, store=self.store)
        self.env = V.Env()
        self.history: list[str] = []
        self.counters: dict[str, int] = {}
        self._native_impls: dict[str, object] = {}

    ### external world (test doubles for pre-existing environment values)

    def bind_external_connection(self, name: str, payload) -> V.ConnectionV:
        conn = V.ConnectionV(self.store.ids.next_cid(), tuple(payload))
        self.env.bind(name, conn)
        self.store.intern(conn)
        return conn

    def bind_counter(self, name: str) -> V.FunctionV:
        """A native function of no arguments that counts its calls and
        returns the running count."""
        self.counters.setdefault(name, 0)
        impl = self._counter_impl(name)
        fn = V.FunctionV([], T.INTEGER, None, None, name=name, native=impl)
        self.env.bind(name, fn)
        self.store.intern(fn)
        return fn

    def _counter_impl(self, name: str):
        def call(args):
            self.counters[name] = self.counters.get(name, 0) + 1
            return V.IntV(self.counters[name])

        self._native_impls[name] = call
        return call

    def native_resolver(self, name: str):
        impl = self._native_impls.get(name)
        if impl is None:
            # Counter natives restore themselves by name.
            impl = self._counter_impl(name)
            self.counters.setdefault(name, 0)
        return impl

    ### program loading

    def load_text(self, text: str, origin: str = "<input>"):
        """Parse, typecheck and start a program: value items bind into the
        session environment, other statements become running behaviours."""
        try:
            prog = syntax.parse(text, self.store)
        except syntax.ParseFailure as e:
            raise SessionError(
                "\n".join(f"{origin}:{err}" for err in e.errors),
                errors=e.errors) from None
        errors = _check_errors(prog, self.store, self.env)
        if errors:
            raise SessionError(
                "\n".join(f"{origin}:{e}" for e in errors), errors=errors)
        self.history.append(text)
        self.run_items(prog.children)
        return prog

    def run_items(self, items):
        for item in items:
            if item.kind == "val":
                try:
                    v = self.engine.eval(item.children[0], self.env)
                except AdlFault as e:
                    raise SessionError(str(e)) from None
                self.env.bind(item.attrs["name"], v)
                if isinstance(v, V.Behaviour) and v.label is None:
                    v.label = item.attrs["name"]
            else:
                self.spawn_node(item)

    def spawn_node(self, node) -> V.Behaviour:
        """Schedule a statement as a behaviour over the session scope.
        Setup is not a reduction, so no event is emitted."""
        b = V.Behaviour(self.store.ids.next_bid(),
                        [V.Frame(V.Env(self.env), [node])], self.env)
        b.state = V.RUNNING
        self.engine.register(b)
        return b

    def eval_text(self, text: str):
        try:
            expr = syntax.parse_expr_text(text, self.store)
        except syntax.ParseFailure as e:
            raise SessionError("\n".join(str(err) for err in e.errors),
                               errors=e.errors) from None
        errors = _check_errors(expr, self.store, self.env)
        if errors:
            raise SessionError("\n".join(str(e) for e in errors), errors=errors)
        self.history.append(text)
        try:
            v = self.engine.eval(expr, self.env)
        except AdlFault as e:
            raise SessionError(str(e)) from None
        self.env.bind("it", v)
        return v

    ### running

    def run(self, max_steps: int = 100000) -> str:
        return self.engine.run(max_steps)

    def quiesce(self, target, max_steps: int = 100000) -> str:
        b = self._behaviour_of(target)
        return self.engine.await_quiescence(b, max_steps)

    def _behaviour_of(self, target) -> V.Behaviour:
        if isinstance(target, V.Behaviour):
            return target
        if isinstance(target, int):
            b = self.engine.behaviours.get(target)
            if b is None:
                raise SessionError(f"no behaviour #{target}")
            return b
        try:
            v = self.env.lookup(target)
        except KeyError:
            raise SessionError(f"unbound name {target!r}") from None
        if not isinstance(v, V.Behaviour):
            raise SessionError(f"{target!r} is not a behaviour")
        return v

    ### evolution operations

    def decompose(self, target) -> V.SeqV:
        b = self._behaviour_of(target)
        try:
            seq = self.engine.decompose(b)
        except AdlFault as e:
            raise SessionError(str(e)) from None
        self.env.bind("it", seq)
        return seq

    def suspend(self, target):
        self.engine.suspend_tree(self._behaviour_of(target))

    def reify(self, target):
        if isinstance(target, str):
            try:
                v = self.env.lookup(target)
            except KeyError:
                raise SessionError(f"unbound name {target!r}") from None
        else:
            v = target
        try:
            return reflection.reify(v, self.store)
        except reflection.ReflectionError as e:
            raise SessionError(str(e)) from None

    def reflect_text(self, text: str):
        node = reflection._parse_fragment(text, self.store)
        return self.reflect_node(node)

    def reflect_node(self, node):
        try:
            v = reflection.reflect(node, self.store, self.engine, self.env)
        except reflection.ReflectionError as e:
            raise SessionError(str(e), errors=e.errors) from None
        self.env.bind("it", v)
        return v

    def compose(self, labelled_parts, unifications=()) -> V.Behaviour:
        parts = [(label, self._behaviour_of(p)) for label, p in labelled_parts]
        try:
            return self.engine.compose_parts(parts, list(unifications))
        except AdlFault as e:
            raise SessionError(str(e)) from None

    def execute(self, target) -> V.Behaviour:
        b = self._behaviour_of(target)
        try:
            return self.engine.execute(b)
        except AdlFault as e:
            raise SessionError(str(e)) from None

    def conn_of(self, target, name: str) -> V.ConnectionV:
        """A connection visible inside a behaviour, by source name; the
        handle evolution scripts use to address endpoints of live parts."""
        b = self._behaviour_of(target)
        c = self.engine.find_conn_in_part(b, name)
        if c is None:
            raise SessionError(f"no connection {name!r} in behaviour #{b.bid}")
        return c

    ### scripted stimuli

    def inject_send(self, conn, values) -> V.Behaviour:
        c = self._conn_arg(conn)
        args = [reflection.reify(v, self.store) for v in values]
        node = H.Node("send", [reflection.reify(c, self.store)] + args)
        return self.spawn_node(node)

    def inject_drain(self, conn, count: int) -> V.Behaviour:
        c = self._conn_arg(conn)
        items = []
        for i in range(count):
            binders = tuple((f"drained_{i}_{j}", t)
                            for j, t in enumerate(c.payload))
            items.append(H.Node("recv", [reflection.reify(c, self.store)],
                                {"binders": binders}))
        return self.spawn_node(H.block(items))

    def _conn_arg(self, conn) -> V.ConnectionV:
        if isinstance(conn, V.ConnectionV):
            return conn
        try:
            v = self.env.lookup(conn)
        except KeyError:
            raise SessionError(f"unbound name {conn!r}") from None
        if not isinstance(v, V.ConnectionV):
            raise SessionError(f"{conn!r} is not a connection")
        return v

    ### introspection for the control API

    def systems(self):
        out = []
        for b in self.engine.live():
            out.append({
                "id": b.bid,
                "label": b.label,
                "state": b.state,
                "commCount": b.comm_count,
                "composition": b.is_composition(),
            })
        return out

    ### snapshots

    def snapshot_json(self) -> str:
        eng = self.engine
        if not eng.is_quiescent():
            raise SessionError("snapshot requires a quiescent engine")
        frozen = eng.freeze()
        try:
            enc = H.Encoder(self.store)
            session = [[name, enc.value(v)]
                       for name, v in self.env.bindings.items()]
            behaviours = [enc.value(b) for b in eng.live()]
            doc = {"version": 1, "root": enc.node(H.block([])),
                   "defs": {str(k): v for k, v in enc.defs.items()}}
            ids = self.store.ids
            payload = {
                "format": SNAPSHOT_FORMAT,
                "version": 1,
                "seed": eng.seed,
                "step": eng.step_count,
                "rng": _rng_to_json(eng.rng.getstate()),
                "ids": {"vid": ids.vid, "cid": ids.cid,
                        "lid": ids.lid, "bid": ids.bid},
                "counters": dict(self.counters),
                "session": session,
                "behaviours": behaviours,
                "doc": doc,
            }
            return json.dumps(payload, separators=(",", ":"))
        finally:
            eng.unfreeze(frozen)

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.snapshot_json())

    @classmethod
    def from_snapshot_json(cls, text: str, natives=None) -> "Session":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as e:
            raise SessionError(f"malformed snapshot: {e.msg}") from None
        if payload.get("format") != SNAPSHOT_FORMAT or payload.get("version") != 1:
            raise SessionError("not an adl snapshot")
        sess = cls(seed=payload.get("seed", 0))
        sess.counters.update(payload.get("counters", {}))
        if natives:
            sess._native_impls.update(natives)
        dec = H.Decoder(sess.store, sess.native_resolver)
        try:
            dec.load_doc(payload["doc"])
            eng = sess.engine
            for enc_b in payload.get("behaviours", []):
                eng.register(dec.value(enc_b))
            for name, enc_v in payload.get("session", []):
                sess.env.bind(name, dec.value(enc_v))
        except H.SerializeError as e:
            raise SessionError(str(e)) from None
        ids = sess.store.ids
        for kind, n in payload.get("ids", {}).items():
            if kind in ("vid", "cid", "lid", "bid"):
                ids.reserve(kind, n - 1)
        eng.step_count = payload.get("step", 0)
        eng.rng.setstate(_rng_from_json(payload["rng"]))
        for bid in sorted(eng.behaviours):
            eng.settle(eng.behaviours[bid])
        for bid in sorted(eng.behaviours):
            eng.resume(eng.behaviours[bid])
        return sess

    @classmethod
    def load(cls, path: str, natives=None) -> "Session":
        with open(path, encoding="utf-8") as f:
            return cls.from_snapshot_json(f.read(), natives)


def _rng_to_json(state):
    version, internal, gauss = state
    return [version, list(internal), gauss]


def _rng_from_json(raw):
    version, internal, gauss = raw
    return (version, tuple(internal), gauss)


### scripted scenarios (the --scenario file)

def apply_externals(sess: Session, externals: dict):
    for name, spec in externals.items():
        if spec == "counter":
            sess.bind_counter(name)
            continue
        ty = T.parse_type(spec)
        if not isinstance(ty, T.ConnectionT):
            raise SessionError(
                f"external {name!r}: expected 'counter' or a connection type")
        sess.bind_external_connection(name, ty.payload)


def run_script(sess: Session, scenario: dict, max_steps: int = 100000):
    """Phases of sends and drains, each run to quiescence in order.
    Externals must already be bound (apply_externals runs before the
    program loads, since the program names them)."""
    results = []
    for phase in scenario.get("phases", []):
        for conn_name, values in phase.get("sends", []):
            sess.inject_send(conn_name, [_pyval(v) for v in values])
        for conn_name, count in phase.get("drains", []):
            sess.inject_drain(conn_name, count)
        results.append(sess.run(max_steps))
    return results


def _pyval(v) -> V.Value:
    if isinstance(v, bool):
        return V.BoolV(v)
    if isinstance(v, int):
        return V.IntV(v)
    if isinstance(v, float):
        return V.RealV(v)
    if isinstance(v, str):
        return V.StrV(v)
    raise SessionError(f"cannot inject value {v!r}")
