"""The reduction engine: one seeded scheduler over all behaviours.

Every state change happens inside step(), which performs exactly one
reduction picked uniformly (seeded RNG) among the currently enabled ones:
an internal advance of a running behaviour, a rendezvous between a blocked
sender and receiver with matching connection classes, or a choose commit.
Replicate clones jump the queue so that cloning is atomic with the copy's
first communication.

This module is written as plain interpretable Python that also compiles
verbatim as a C extension; keep it free of syntax the compiler cannot
digest (no dataclasses, no match statements, no postponed annotations).
"""

import bisect
import random

from adl import events as E
from adl import hypercode as H
from adl import types as T
from adl import values as V

PROGRESSED = "progressed"
QUIESCENT = "quiescent"
TERMINATED = "terminated"
TIMED_OUT = "timed_out"

_CONN_ENDPOINT = T.ViewT((("name", T.STRING), ("conn", T.ANY)))


class AdlFault(Exception):
    """A runtime fault; terminates the faulting behaviour only."""


def first_action(n):
    """Classify the first action of a branch body: ("send"|"recv", conn
    expr) for communications, ("internal", None) for everything else."""
    while n.kind == "block":
        if not n.children:
            return ("internal", None)
        n = n.children[0]
    if n.kind == "send":
        return ("send", n.children[0])
    if n.kind == "recv":
        return ("recv", n.children[0])
    return ("internal", None)


class Engine:
    def __init__(self, seed=0, store=None):
        self.store = store if store is not None else H.ValueStore()
        self.ids = self.store.ids
        self.seed = seed
        self.rng = random.Random(seed)
        self.step_count = 0
        self.trace = []
        self.behaviours = {}
        self.live_bids = []
        self.pending_clones = []
        self.listeners = []

    ### bookkeeping

    def emit(self, kind, **data):
        ev = E.Event(self.step_count, kind, **data)
        self.trace.append(ev)
        for fn in self.listeners:
            fn(ev)

    def register(self, b):
        self.behaviours[b.bid] = b
        bisect.insort(self.live_bids, b.bid)
        return b

    def live(self):
        """Alive behaviours in bid order; dead entries are dropped from
        the scan list as they are found (terminated states are final)."""
        out = []
        keep = []
        for bid in self.live_bids:
            b = self.behaviours.get(bid)
            if b is None or not b.alive():
                continue
            keep.append(bid)
            out.append(b)
        if len(keep) != len(self.live_bids):
            self.live_bids = keep
        return out

    def make_behaviour(self, node, env, label=None):
        """A fresh suspended behaviour from a behaviour-shaped node."""
        items = list(node.children) if node.kind == "block" else [node]
        b = V.Behaviour(self.ids.next_bid(),
                        [V.Frame(V.Env(env), items)], env, label)
        b.saved_state = V.RUNNING
        return self.register(b)

    def instantiate(self, absv, args):
        params = absv.params
        if len(args) != len(params):
            raise AdlFault("application arity %d does not match declared arity %d"
                           % (len(args), len(params)))
        penv = V.Env(absv.env)
        for (pname, pt), a in zip(params, args):
            at = V.type_of_value(a)
            if not T.type_equal(at, pt):
                raise AdlFault("argument %r: expected %s, found %s"
                               % (pname, T.render_type(pt), T.render_type(at)))
            penv.bind(pname, a)
        body = absv.body
        items = list(body.children) if body.kind == "block" else [body]
        b = V.Behaviour(self.ids.next_bid(), [V.Frame(V.Env(penv), items)], penv)
        b.saved_state = V.RUNNING
        return self.register(b)

    def call_function(self, fn, args):
        params = fn.params
        if len(args) != len(params):
            raise AdlFault("call arity %d does not match declared arity %d"
                           % (len(args), len(params)))
        for (pname, pt), a in zip(params, args):
            at = V.type_of_value(a)
            if not T.type_equal(at, pt):
                raise AdlFault("argument %r: expected %s, found %s"
                               % (pname, T.render_type(pt), T.render_type(at)))
        if fn.native is not None:
            return fn.native(args)
        env = V.Env(fn.env)
        for (pname, _), a in zip(params, args):
            env.bind(pname, a)
        out = self.eval(fn.body, env)
        rt = V.type_of_value(out)
        if not T.type_equal(rt, fn.result):
            raise AdlFault("function %s returned %s, declared %s"
                           % (fn.name or "<anonymous>", T.render_type(rt),
                              T.render_type(fn.result)))
        return out

    ### expression evaluation (atomic: never blocks, may fault)

    def eval(self, n, env):
        k = n.kind
        if k == "lit":
            t = n.attrs["t"]
            v = n.attrs["v"]
            if t == "integer":
                return V.IntV(v)
            if t == "real":
                return V.RealV(float(v))
            if t == "boolean":
                return V.BoolV(bool(v))
            return V.StrV(v)
        if k == "name":
            try:
                return env.lookup(n.attrs["name"])
            except KeyError:
                raise AdlFault("unbound name %r" % n.attrs["name"])
        if k == "link":
            try:
                return self.store.lookup(n.attrs["id"])
            except H.HyperCodeError as e:
                raise AdlFault(str(e))
        if k in ("block", "rep", "choose", "send", "recv"):
            return self.make_behaviour(n, env)
        if k == "abs":
            return V.AbstractionV(list(n.attrs["params"]), n.children[0], env)
        if k == "fun":
            return V.FunctionV(list(n.attrs["params"]), n.attrs["result"],
                               n.children[0], env)
        if k == "app":
            callee = self.eval(n.children[0], env)
            args = [self.eval(c, env) for c in n.children[1:]]
            if isinstance(callee, V.AbstractionV):
                return self.instantiate(callee, args)
            if isinstance(callee, V.FunctionV):
                return self.call_function(callee, args)
            raise AdlFault("call of %s, not an abstraction or function"
                           % T.render_type(V.type_of_value(callee)))
        if k == "comp":
            return self.eval_compose(n, env)
        if k == "decomp":
            bv = self.eval(n.children[0], env)
            if not isinstance(bv, V.Behaviour):
                raise AdlFault("decompose of a non-behaviour")
            return self.decompose(bv)
        if k == "connnew":
            return V.ConnectionV(self.ids.next_cid(), tuple(n.attrs["payload"]))
        if k == "locnew":
            init = self.eval(n.children[0], env)
            return V.LocationV(self.ids.next_lid(), init, V.type_of_value(init))
        if k == "deref":
            lv = self.eval(n.children[0], env)
            if not isinstance(lv, V.LocationV):
                raise AdlFault("deref of a non-location")
            return lv.content
        if k == "viewlit":
            fields = []
            for fname, c in zip(n.attrs["names"], n.children):
                fields.append((fname, self.eval(c, env)))
            return V.ViewV(fields)
        if k == "seqlit":
            items = [self.eval(c, env) for c in n.children]
            if not items:
                return V.SeqV([], T.ANY)
            elem = V.type_of_value(items[0])
            for i, it in enumerate(items[1:]):
                ty = V.type_of_value(it)
                if not T.type_equal(ty, elem):
                    raise AdlFault("sequence element %d is %s, expected %s"
                                   % (i + 2, T.render_type(ty), T.render_type(elem)))
            return V.SeqV(items, elem)
        if k == "idx":
            sv = self.eval(n.children[0], env)
            if not isinstance(sv, V.SeqV):
                raise AdlFault("indexing into a non-sequence")
            i = n.attrs["index"]
            if i < 1 or i > len(sv.items):
                raise AdlFault("index %d out of range 1..%d" % (i, len(sv.items)))
            return sv.items[i - 1]
        if k == "dot":
            vv = self.eval(n.children[0], env)
            if not isinstance(vv, V.ViewV):
                raise AdlFault("projection from a non-view")
            got = vv.get(n.attrs["field"])
            if got is None:
                raise AdlFault("view has no field %r" % n.attrs["field"])
            return got
        if k == "bin":
            return self.binop(n, env)
        if k == "un":
            ev = self.eval(n.children[0], env)
            if n.attrs["op"] == "not":
                if not isinstance(ev, V.BoolV):
                    raise AdlFault("not applied to a non-boolean")
                return V.BoolV(not ev.value)
            if isinstance(ev, V.IntV):
                return V.IntV(-ev.value)
            if isinstance(ev, V.RealV):
                return V.RealV(-ev.value)
            raise AdlFault("negation of a non-number")
        if k == "anyin":
            inner = self.eval(n.children[0], env)
            return V.AnyV(inner, V.type_of_value(inner))
        if k == "anyout":
            av = self.eval(n.children[0], env)
            if not isinstance(av, V.AnyV):
                raise AdlFault("project of a non-any value")
            want = n.attrs["ty"]
            if not T.type_equal(av.witness, want):
                raise AdlFault("projection failure: value is %s, requested %s"
                               % (T.render_type(av.witness), T.render_type(want)))
            return av.value
        raise AdlFault("cannot evaluate %s here" % k)

    def binop(self, n, env):
        op = n.attrs["op"]
        if op == "and" or op == "or":
            l = self.eval(n.children[0], env)
            if not isinstance(l, V.BoolV):
                raise AdlFault("%s applied to a non-boolean" % op)
            if op == "and" and not l.value:
                return V.BoolV(False)
            if op == "or" and l.value:
                return V.BoolV(True)
            r = self.eval(n.children[1], env)
            if not isinstance(r, V.BoolV):
                raise AdlFault("%s applied to a non-boolean" % op)
            return r
        l = self.eval(n.children[0], env)
        r = self.eval(n.children[1], env)
        if op == "=":
            return V.BoolV(V.values_equal(l, r))
        if op == "~=":
            return V.BoolV(not V.values_equal(l, r))
        if op == "++":
            if isinstance(l, V.StrV) and isinstance(r, V.StrV):
                return V.StrV(l.value + r.value)
            if isinstance(l, V.SeqV) and isinstance(r, V.SeqV):
                if not l.items:
                    elem = r.elem_type
                elif not r.items:
                    elem = l.elem_type
                elif T.type_equal(l.elem_type, r.elem_type):
                    elem = l.elem_type
                else:
                    raise AdlFault("concatenation of sequences with different element types")
                return V.SeqV(l.items + r.items, elem)
            raise AdlFault("concatenation needs two strings or two sequences")
        if op in ("<", "<=", ">", ">="):
            ok = (isinstance(l, V.IntV) and isinstance(r, V.IntV)) \
                or (isinstance(l, V.RealV) and isinstance(r, V.RealV)) \
                or (isinstance(l, V.StrV) and isinstance(r, V.StrV))
            if not ok:
                raise AdlFault("ordering comparison on mismatched operands")
            a, b = l.value, r.value
            if op == "<":
                return V.BoolV(a < b)
            if op == "<=":
                return V.BoolV(a <= b)
            if op == ">":
                return V.BoolV(a > b)
            return V.BoolV(a >= b)
        # arithmetic
        if isinstance(l, V.IntV) and isinstance(r, V.IntV):
            a, b = l.value, r.value
            if op == "+":
                return V.IntV(a + b)
            if op == "-":
                return V.IntV(a - b)
            if op == "*":
                return V.IntV(a * b)
            if b == 0:
                raise AdlFault("division by zero")
            return V.IntV(a // b)
        if isinstance(l, V.RealV) and isinstance(r, V.RealV):
            a, b = l.value, r.value
            if op == "+":
                return V.RealV(a + b)
            if op == "-":
                return V.RealV(a - b)
            if op == "*":
                return V.RealV(a * b)
            if b == 0.0:
                raise AdlFault("division by zero")
            return V.RealV(a / b)
        raise AdlFault("arithmetic on mismatched operands")

    ### compose / decompose

    def eval_compose(self, n, env):
        labels = n.attrs["labels"]
        parts = []
        for c in n.children:
            pv = self.eval(c, env)
            if not isinstance(pv, V.Behaviour):
                raise AdlFault("compose part is not a behaviour")
            parts.append(pv)
        return self.compose_parts(list(zip(labels, parts)), n.attrs["unifs"])

    def compose_parts(self, labelled_parts, unifications):
        """Composition from already-built behaviours; unifications are
        (label, name, label, name) tuples like a where clause. Parts start
        executing the moment the composition exists."""
        seen = set()
        for label, part in labelled_parts:
            if label is not None:
                if label in seen:
                    raise AdlFault("composition labels %r twice" % label)
                seen.add(label)
            if part.state in (V.TERMINATED, V.ERRORED):
                raise AdlFault("part %r is %s; only live behaviours compose"
                               % (label, part.state))
        comp = V.Behaviour(self.ids.next_bid(), parts=list(labelled_parts))
        comp.state = V.RUNNING
        comp.pending_unifs = []
        self.register(comp)
        for idx, (label, part) in enumerate(comp.parts):
            part.owner = (comp.bid, idx)
            if part.label is None:
                part.label = label
            self.resume(part)
        for u in unifications:
            self.add_unification(comp, u)
        return comp

    def label_index(self, comp, label):
        for i, (l, _) in enumerate(comp.parts):
            if l == label:
                return i
        raise AdlFault("composition has no part labelled %r" % label)

    def find_conn_in_part(self, part, name):
        if part.is_composition():
            for _, m in part.parts:
                c = self.find_conn_in_part(m, name)
                if c is not None:
                    return c
            return None
        if part.frames:
            env = part.frames[-1].env
            try:
                val = env.lookup(name)
                if isinstance(val, V.ConnectionV):
                    return val
            except KeyError:
                pass
            for f in part.frames:
                for it in f.items:
                    for node in H.iter_nodes(it):
                        if node.kind == "link" and node.attrs.get("hint") == name:
                            try:
                                val = self.store.lookup(node.attrs["id"])
                            except H.HyperCodeError:
                                continue
                            if isinstance(val, V.ConnectionV):
                                return val
        return None

    def resolve_ref(self, comp, label, name):
        idx = self.label_index(comp, label)
        part = comp.parts[idx][1]
        c = self.find_conn_in_part(part, name)
        if c is not None:
            return c
        for ob in self.live():
            if ob.owner == (comp.bid, idx) and ob is not part:
                c = self.find_conn_in_part(ob, name)
                if c is not None:
                    return c
        return None

    def add_unification(self, comp, unif):
        ll, ln, rl, rn = unif
        self.label_index(comp, ll)
        self.label_index(comp, rl)
        lc = self.resolve_ref(comp, ll, ln)
        rc = self.resolve_ref(comp, rl, rn)
        if lc is not None and rc is not None:
            self.unify(lc, rc)
        else:
            # One side lives inside a part that has not yet declared it;
            # keep trying as the parts run.
            comp.pending_unifs.append((ll, ln, rl, rn))

    def try_pending_unifs(self):
        for comp in self.live():
            pend = getattr(comp, "pending_unifs", None)
            if not pend:
                continue
            still = []
            for unif in pend:
                ll, ln, rl, rn = unif
                try:
                    lc = self.resolve_ref(comp, ll, ln)
                    rc = self.resolve_ref(comp, rl, rn)
                    if lc is not None and rc is not None:
                        self.unify(lc, rc)
                    else:
                        still.append(unif)
                except AdlFault as e:
                    comp.state = V.ERRORED
                    comp.error = str(e)
                    self.emit(E.TERMINATE, bid=comp.bid, error=str(e))
                    self._finish_owners(comp)
            comp.pending_unifs = still

    def unify(self, c1, c2):
        try:
            return V.conn_unify(c1, c2)
        except ValueError as e:
            raise AdlFault(str(e))

    def decompose(self, bv):
        if not bv.is_composition():
            raise AdlFault("decompose of a non-composed behaviour")
        if bv.state in (V.TERMINATED, V.ERRORED):
            raise AdlFault("decompose of a terminated composition")
        cset = self.constituents(bv)
        if self.has_internal_enabled(cset):
            raise AdlFault("decompose of a composition that is not at quiescence")
        elements = []
        for idx in range(len(bv.parts)):
            label, part = bv.parts[idx]
            members = [part] if part.alive() else []
            for ob in self.live():
                if ob is part:
                    continue
                if ob.owner == (bv.bid, idx):
                    members.append(ob)
            for m in members:
                self.suspend(m)
                m.owner = None
            if len(members) == 1:
                elem_b = members[0]
            elif not members:
                elem_b = part
            else:
                elem_b = V.Behaviour(self.ids.next_bid(),
                                     parts=[(None, m) for m in members])
                elem_b.pending_unifs = []
                for midx, m in enumerate(members):
                    m.owner = (elem_b.bid, midx)
                self.register(elem_b)
            elem_b.label = label
            conns = self.collect_connections(elem_b)
            elements.append(V.ViewV([
                ("label", V.StrV(label if label is not None else "")),
                ("bhvr", elem_b),
                ("connections", conns),
            ]))
        bv.parts = []
        bv.state = V.TERMINATED
        self.emit(E.TERMINATE, bid=bv.bid)
        return V.SeqV(elements, T.DECOMPOSED_ELEM)

    def collect_connections(self, b):
        """Free connection endpoints of a behaviour, by source name: names
        in the continuation resolving to connections, plus link hints."""
        pairs = []
        seen = set()

        def visit_primitive(pb):
            if not pb.frames:
                return
            cont = H.continuation_of(pb)
            envc = pb.frames[-1].env
            for node in H.iter_nodes(cont):
                if node.kind == "name":
                    nm = node.attrs["name"]
                    if nm in seen:
                        continue
                    try:
                        val = envc.lookup(nm)
                    except KeyError:
                        continue
                    if isinstance(val, V.ConnectionV):
                        seen.add(nm)
                        pairs.append((nm, val))
                elif node.kind == "link":
                    hint = node.attrs.get("hint")
                    if not hint or hint in seen:
                        continue
                    try:
                        val = self.store.lookup(node.attrs["id"])
                    except H.HyperCodeError:
                        continue
                    if isinstance(val, V.ConnectionV):
                        seen.add(hint)
                        pairs.append((hint, val))
            # Connections still in scope stay addressable from outside even
            # once the remaining code no longer names them, so they belong
            # to the element's interface too.
            for env in envc.chain():
                for nm, val in env.bindings.items():
                    if nm in seen:
                        continue
                    if isinstance(val, V.ConnectionV):
                        seen.add(nm)
                        pairs.append((nm, val))

        def visit(x):
            if x.is_composition():
                for _, m in x.parts:
                    visit(m)
            else:
                visit_primitive(x)

        visit(b)
        views = [V.ViewV([("name", V.StrV(nm)),
                          ("conn", V.AnyV(c, T.ConnectionT(c.payload)))])
                 for nm, c in pairs]
        return V.SeqV(views, _CONN_ENDPOINT)

    ### suspension and resumption

    def suspend(self, b):
        if b.is_composition():
            if b.state not in (V.TERMINATED, V.ERRORED, V.SUSPENDED):
                b.saved_state = b.state
                b.state = V.SUSPENDED
            for _, m in b.parts:
                self.suspend(m)
            return
        if b.state in (V.RUNNING,) + V.BLOCKED_STATES:
            b.saved_state = b.state
            b.state = V.SUSPENDED

    def resume(self, b):
        if b.state in (V.TERMINATED, V.ERRORED):
            return
        if b.is_composition():
            if b.state == V.SUSPENDED:
                b.state = b.saved_state if b.saved_state else V.RUNNING
                b.saved_state = None
            for _, m in b.parts:
                self.resume(m)
            return
        if b.state == V.SUSPENDED:
            restored = b.saved_state if b.saved_state else V.RUNNING
            if restored in V.BLOCKED_STATES and b.wait_conn is None \
                    and b.choose_guards is None:
                # A snapshot-restored behaviour has no wait data; it must
                # re-run its blocking item to rebuild it.
                restored = V.RUNNING
            b.state = restored
            b.saved_state = None

    def suspend_tree(self, handle):
        """Suspend a behaviour together with every constituent reachable
        through parts and owner chains.  Queued clones belonging to the
        handle are materialized first so suspension captures them."""
        while True:
            cset = self.constituents(handle)
            idx = -1
            for i in range(len(self.pending_clones)):
                if self.pending_clones[i][0] in cset:
                    idx = i
                    break
            if idx < 0:
                break
            origin_bid, ctx = self.pending_clones.pop(idx)
            self.step_count += 1
            self.do_clone(origin_bid, ctx)
        for bid in sorted(self.constituents(handle)):
            self.suspend(self.behaviours[bid])

    def suspend_all(self):
        """Suspend every live behaviour; consumes one step and is traced."""
        while self.pending_clones:
            origin_bid, ctx = self.pending_clones.pop(0)
            self.step_count += 1
            self.do_clone(origin_bid, ctx)
        self.step_count += 1
        for b in self.live():
            self.suspend(b)
        self.emit(E.SUSPEND_ALL)

    def freeze(self):
        """Silently suspend for snapshotting: no event, no step, and the
        previous states are returned so they can be restored in-process."""
        saved = {}
        for b in self.live():
            saved[b.bid] = (b.state, b.saved_state)
            if b.state in (V.RUNNING,) + V.BLOCKED_STATES:
                b.saved_state = b.state
                b.state = V.SUSPENDED
        return saved

    def unfreeze(self, saved):
        for bid, (state, saved_state) in saved.items():
            b = self.behaviours.get(bid)
            if b is not None:
                b.state = state
                b.saved_state = saved_state

    def settle(self, b):
        """Advance a snapshot-restored behaviour to its saved blocked state
        without counting steps or emitting events."""
        if b.is_composition():
            return
        if b.saved_state in V.BLOCKED_STATES:
            b.state = V.RUNNING
            guard = 0
            while b.state == V.RUNNING and guard < 10000:
                self.advance(b, silent=True)
                guard += 1
            b.saved_state = b.state
            b.state = V.SUSPENDED

    def execute(self, b):
        """Schedule a suspended behaviour (or resume a suspended one)."""
        if b.state in (V.TERMINATED, V.ERRORED):
            raise AdlFault("cannot execute a terminated behaviour")
        self.resume(b)
        return b

    ### the scheduler

    def comm_match(self, s, r):
        return V.conn_find(s.wait_conn) is V.conn_find(r.wait_conn)

    def choose_eligible(self, b, cset=None):
        out = []
        guards = b.choose_guards or []
        for i in range(len(guards)):
            kind, conn = guards[i]
            if kind == "internal":
                out.append(i)
                continue
            want = "recv" if kind == "send" else "send"
            found = False
            root = V.conn_find(conn)
            for other in self.live():
                if other is b:
                    continue
                if cset is not None and other.bid not in cset:
                    continue
                if want == "recv" and other.state == V.BLOCKED_RECV \
                        and V.conn_find(other.wait_conn) is root:
                    found = True
                elif want == "send" and other.state == V.BLOCKED_SEND \
                        and V.conn_find(other.wait_conn) is root:
                    found = True
                elif other.state == V.BLOCKED_CHOOSE:
                    for gk, gc in (other.choose_guards or []):
                        if gk == want and gc is not None \
                                and V.conn_find(gc) is root:
                            found = True
                            break
                if found:
                    break
            if found:
                out.append(i)
        return out

    def enabled(self):
        reds = []
        alive = self.live()
        senders = []
        receivers = []
        for b in alive:
            if b.is_composition():
                continue
            if b.state == V.RUNNING:
                reds.append(("adv", b.bid))
            elif b.state == V.BLOCKED_SEND:
                senders.append(b)
            elif b.state == V.BLOCKED_RECV:
                receivers.append(b)
        for s in senders:
            for r in receivers:
                if self.comm_match(s, r):
                    reds.append(("comm", s.bid, r.bid))
        for b in alive:
            if not b.is_composition() and b.state == V.BLOCKED_CHOOSE:
                if self.choose_eligible(b):
                    reds.append(("choose", b.bid))
        return reds

    def is_quiescent(self):
        return not self.pending_clones and not self.enabled()

    def step(self):
        if self.pending_clones:
            origin_bid, ctx = self.pending_clones.pop(0)
            self.step_count += 1
            self.do_clone(origin_bid, ctx)
            self.try_pending_unifs()
            return PROGRESSED
        reds = self.enabled()
        if not reds:
            if self.live():
                return QUIESCENT
            return TERMINATED
        pick = reds[self.rng.randrange(len(reds))]
        self.step_count += 1
        if pick[0] == "adv":
            self.advance(self.behaviours[pick[1]])
        elif pick[0] == "comm":
            self.complete_comm(self.behaviours[pick[1]], self.behaviours[pick[2]])
        else:
            self.commit_choose(self.behaviours[pick[1]])
        self.try_pending_unifs()
        return PROGRESSED

    def run(self, max_steps=100000):
        steps = 0
        while steps < max_steps:
            r = self.step()
            if r != PROGRESSED:
                return r
            steps += 1
        return TIMED_OUT

    def constituents(self, handle):
        cset = set()
        cset.add(handle.bid)
        changed = True
        while changed:
            changed = False
            for b in self.live():
                if b.bid not in cset and b.owner is not None \
                        and b.owner[0] in cset:
                    cset.add(b.bid)
                    changed = True
            for bid in list(cset):
                b = self.behaviours.get(bid)
                if b is not None and b.parts:
                    for _, p in b.parts:
                        if p.bid not in cset:
                            cset.add(p.bid)
                            changed = True
        return cset

    def has_internal_enabled(self, cset):
        for origin_bid, _ in self.pending_clones:
            if origin_bid in cset:
                return True
        senders = []
        receivers = []
        for bid in sorted(cset):
            b = self.behaviours.get(bid)
            if b is None or b.is_composition():
                continue
            if b.state == V.RUNNING:
                return True
            if b.state == V.BLOCKED_SEND:
                senders.append(b)
            elif b.state == V.BLOCKED_RECV:
                receivers.append(b)
            elif b.state == V.BLOCKED_CHOOSE:
                if self.choose_eligible(b, cset):
                    return True
        for s in senders:
            for r in receivers:
                if self.comm_match(s, r):
                    return True
        return False

    def await_quiescence(self, handle, max_steps=100000):
        used = 0
        while True:
            cset = self.constituents(handle)
            if not self.has_internal_enabled(cset):
                return QUIESCENT
            if used >= max_steps:
                return TIMED_OUT
            r = self.step()
            used += 1
            if r != PROGRESSED:
                return QUIESCENT

    ### reductions

    def do_clone(self, origin_bid, ctx):
        origin = self.behaviours.get(origin_bid)
        body = ctx.node.children[0]
        items = list(body.children) if body.kind == "block" else [body]
        nb = V.Behaviour(self.ids.next_bid(),
                         [V.Frame(V.Env(ctx.env), items, V.FRAME_REP,
                                  V.ReplicateCtx(ctx.node, ctx.env))],
                         ctx.env)
        nb.state = V.RUNNING
        nb.owner = origin.owner if origin is not None else None
        self.register(nb)
        self.emit(E.CLONE, bid=nb.bid, of=origin_bid)

    def complete_comm(self, s, r):
        payload = s.wait_payload or []
        rf = r.frames[-1]
        for (bname, _), val in zip(r.wait_binders or [], payload):
            rf.env.bind(bname, val)
        conn_cls = V.conn_find(s.wait_conn).conn_id
        summary = [V.render_value(v) for v in payload]
        for p in (s, r):
            p.state = V.RUNNING
            p.frames[-1].pos += 1
            p.comm_count += 1
            p.wait_conn = None
            p.wait_payload = None
            p.wait_binders = None
        self.emit(E.COMM, conn=conn_cls, payload=summary,
                  sender=s.bid, receiver=r.bid)
        for p in (s, r):
            for f in p.frames:
                if f.rep_ctx is not None and not f.rep_ctx.cloned:
                    f.rep_ctx.cloned = True
                    self.pending_clones.append((p.bid, f.rep_ctx))

    def commit_choose(self, b):
        elig = self.choose_eligible(b)
        branch_idx = elig[self.rng.randrange(len(elig))]
        branch = b.choose_node.children[branch_idx]
        f = b.frames[-1]
        f.pos += 1
        items = list(branch.children) if branch.kind == "block" else [branch]
        b.frames.append(V.Frame(V.Env(f.env), items))
        b.state = V.RUNNING
        b.choose_guards = None
        b.choose_node = None
        self.emit(E.CHOOSE_COMMIT, bid=b.bid, branch=branch_idx)

    def advance(self, b, silent=False):
        try:
            self._advance(b, silent)
        except AdlFault as e:
            b.state = V.ERRORED
            b.error = str(e)
            b.frames = []
            if not silent:
                self.emit(E.TERMINATE, bid=b.bid, error=str(e))
        if b.state in (V.TERMINATED, V.ERRORED):
            self._finish_owners(b, silent)

    def _finish_owners(self, b, silent=False):
        # A parallel composition of finished parts is itself finished;
        # walk up the owner chain in the same step, since nothing inside
        # can ever reduce again.
        while b.owner is not None:
            comp = self.behaviours.get(b.owner[0])
            b = comp
            if comp is None or not comp.is_composition() \
                    or comp.state != V.RUNNING:
                return
            dead = (V.TERMINATED, V.ERRORED)
            if any(p.state not in dead for _, p in comp.parts):
                return
            err = None
            for _, p in comp.parts:
                if p.state == V.ERRORED:
                    err = p.error
            for ob in self.behaviours.values():
                if ob.owner is not None and ob.owner[0] == comp.bid:
                    if ob.state not in dead:
                        return
                    if ob.state == V.ERRORED:
                        err = ob.error
            if err is None:
                comp.state = V.TERMINATED
                if not silent:
                    self.emit(E.TERMINATE, bid=comp.bid)
            else:
                comp.state = V.ERRORED
                comp.error = err
                if not silent:
                    self.emit(E.TERMINATE, bid=comp.bid, error=err)

    def _advance(self, b, silent=False):
        # Unwinding exhausted frames is bookkeeping, not a reduction: pop
        # them all before doing work, so a behaviour terminates in the
        # same step whether its stack was built directly or restored
        # flattened from a snapshot.
        while b.frames:
            f = b.frames[-1]
            if not f.exhausted():
                break
            parent = f.env.parent
            for name in f.free_names:
                if parent is not None and name in f.env.bindings:
                    parent.bindings[name] = f.env.bindings[name]
            b.frames.pop()
        if not b.frames:
            b.state = V.TERMINATED
            if not silent:
                self.emit(E.TERMINATE, bid=b.bid)
            return
        f = b.frames[-1]
        item = f.items[f.pos]
        k = item.kind
        if k == "val":
            v = self.eval(item.children[0], f.env)
            f.env.bind(item.attrs["name"], v)
            f.pos += 1
            return
        if k == "assign":
            lv = self.eval(item.children[0], f.env)
            if not isinstance(lv, V.LocationV):
                raise AdlFault("assignment target is not a location")
            rv = self.eval(item.children[1], f.env)
            rt = V.type_of_value(rv)
            if not T.type_equal(rt, lv.content_type):
                raise AdlFault("assignment of %s into location[%s]"
                               % (T.render_type(rt), T.render_type(lv.content_type)))
            lv.content = rv
            if not silent:
                self.emit(E.ASSIGN, loc=lv.loc_id)
            f.pos += 1
            return
        if k == "send":
            conn = self.eval(item.children[0], f.env)
            if not isinstance(conn, V.ConnectionV):
                raise AdlFault("via target is not a connection")
            args = [self.eval(c, f.env) for c in item.children[1:]]
            if len(args) != len(conn.payload):
                raise AdlFault("send arity %d does not match connection arity %d"
                               % (len(args), len(conn.payload)))
            for a, pt in zip(args, conn.payload):
                at = V.type_of_value(a)
                if not T.type_equal(at, pt):
                    raise AdlFault("send of %s along connection[%s]"
                                   % (T.render_type(at),
                                      ", ".join(T.render_type(p) for p in conn.payload)))
            b.state = V.BLOCKED_SEND
            b.wait_conn = conn
            b.wait_payload = args
            return
        if k == "recv":
            conn = self.eval(item.children[0], f.env)
            if not isinstance(conn, V.ConnectionV):
                raise AdlFault("via target is not a connection")
            binders = item.attrs["binders"]
            if len(binders) != len(conn.payload):
                raise AdlFault("receive arity %d does not match connection arity %d"
                               % (len(binders), len(conn.payload)))
            for (bname, bt), pt in zip(binders, conn.payload):
                if not T.type_equal(bt, pt):
                    raise AdlFault("receive binder %r is %s, connection carries %s"
                                   % (bname, T.render_type(bt), T.render_type(pt)))
            b.state = V.BLOCKED_RECV
            b.wait_conn = conn
            b.wait_binders = list(binders)
            return
        if k == "choose":
            guards = []
            for branch in item.children:
                kind, conn_node = first_action(branch)
                if kind == "internal":
                    guards.append(("internal", None))
                else:
                    conn = self.eval(conn_node, f.env)
                    if not isinstance(conn, V.ConnectionV):
                        raise AdlFault("via target is not a connection")
                    guards.append((kind, conn))
            b.state = V.BLOCKED_CHOOSE
            b.choose_guards = guards
            b.choose_node = item
            return
        if k == "rep":
            body = item.children[0]
            items = list(body.children) if body.kind == "block" else [body]
            ctx = V.ReplicateCtx(item, f.env)
            f.pos += 1
            b.frames.append(V.Frame(V.Env(f.env), items, V.FRAME_REP, ctx))
            return
        if k == "block":
            f.pos += 1
            b.frames.append(V.Frame(V.Env(f.env), list(item.children)))
            return
        if k == "if":
            cond = self.eval(item.children[0], f.env)
            if not isinstance(cond, V.BoolV):
                raise AdlFault("if condition is not a boolean")
            f.pos += 1
            if cond.value:
                chosen = item.children[1]
            elif len(item.children) == 3:
                chosen = item.children[2]
            else:
                return
            items = list(chosen.children) if chosen.kind == "block" else [chosen]
            b.frames.append(V.Frame(V.Env(f.env), items))
            return
        if k == "while":
            cond = self.eval(item.children[0], f.env)
            if not isinstance(cond, V.BoolV):
                raise AdlFault("while condition is not a boolean")
            if cond.value:
                body = item.children[1]
                items = list(body.children) if body.kind == "block" else [body]
                b.frames.append(V.Frame(V.Env(f.env), items, V.FRAME_WHILE))
            else:
                f.pos += 1
            return
        if k == "free":
            for name in item.attrs["names"]:
                if name not in f.env.bindings:
                    raise AdlFault("free of name %r not bound in this block" % name)
                if name not in f.free_names:
                    f.free_names.append(name)
            f.pos += 1
            return
        if k == "app":
            callee = self.eval(item.children[0], f.env)
            args = [self.eval(c, f.env) for c in item.children[1:]]
            if isinstance(callee, V.AbstractionV):
                inst = self.instantiate(callee, args)
                self.schedule(inst, b.owner, silent)
            elif isinstance(callee, V.FunctionV):
                self.call_function(callee, args)
            else:
                raise AdlFault("call of %s, not an abstraction or function"
                               % T.render_type(V.type_of_value(callee)))
            f.pos += 1
            return
        # Any other expression statement: evaluate, schedule behaviours.
        v = self.eval(item, f.env)
        if isinstance(v, V.Behaviour):
            self.schedule(v, b.owner, silent)
        f.pos += 1

    def schedule(self, b, owner=None, silent=False):
        if b.state == V.SUSPENDED:
            if owner is not None and b.owner is None:
                b.owner = owner
            self.resume(b)
            if not silent:
                self.emit(E.SPAWN, bid=b.bid)
        return b
