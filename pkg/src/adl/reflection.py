"""Moving between running values and their hyper-code representations.

Four operations connect the two domains: reify lifts a value into a
tree whose leaves link back to the live values it closes over, reflect
evaluates such a tree back into a value against the same store, execute
schedules a behaviour, and transform edits trees without touching the
values they link to.  Together they are the mechanism for evolving a
system that is still running.
"""

from __future__ import annotations

from adl import hypercode as H
from adl import syntax
from adl import typecheck
from adl import types as T
from adl import values as V
from adl.hypercode import Node, ValueStore
from adl.runtime import AdlFault


class ReflectionError(Exception):
    def __init__(self, message: str, errors=None):
        super().__init__(message)
        self.errors = errors or []


### reify: value -> representation

def reify(e: V.Value, store: ValueStore) -> Node:
    if isinstance(e, V.IntV):
        return H.lit(e.value, "integer")
    if isinstance(e, V.RealV):
        return H.lit(e.value, "real")
    if isinstance(e, V.BoolV):
        return H.lit(e.value, "boolean")
    if isinstance(e, V.StrV):
        return H.lit(e.value, "string")
    if isinstance(e, V.AnyV):
        return Node("anyin", [reify(e.value, store)])
    if isinstance(e, V.SeqV):
        return Node("seqlit", [reify(x, store) for x in e.items])
    if isinstance(e, V.ViewV):
        names = tuple(n for n, _ in e.fields)
        return Node("viewlit", [reify(x, store) for _, x in e.fields],
                    {"names": names})
    if isinstance(e, (V.ConnectionV, V.LocationV)):
        # Identity-bearing values reify as links; expanding a location to
        # its current contents would fork state on reflect.
        return H.make_link(store.intern(e))
    if isinstance(e, V.AbstractionV):
        body = _capture(e.body, e.env, store, {p for p, _ in e.params})
        return Node("abs", [body], {"params": tuple(e.params)})
    if isinstance(e, V.FunctionV):
        if e.native is not None:
            return H.make_link(store.intern(e), e.name)
        body = _capture(e.body, e.env, store, {p for p, _ in e.params})
        return Node("fun", [body], {"params": tuple(e.params),
                                    "result": e.result})
    if isinstance(e, V.Behaviour):
        return _reify_behaviour(e, store)
    raise ReflectionError(f"cannot reify {type(e).__name__}")


def _reify_behaviour(b: V.Behaviour, store: ValueStore) -> Node:
    if b.state not in (V.SUSPENDED, V.TERMINATED, V.ERRORED):
        raise ReflectionError(f"behaviour #{b.bid} is {b.state}; "
                              "suspend it before reifying")
    if b.is_composition():
        labels = []
        parts = []
        for label, part in b.parts:
            labels.append(label)
            parts.append(H.make_link(store.intern(part), label))
        return Node("comp", parts, {"labels": tuple(labels), "unifs": ()})
    cont = H.continuation_of(b)
    env = b.frames[-1].env if b.frames else b.base_env
    return _capture(cont, env, store, set())


def _capture(node: Node, env: V.Env | None, store: ValueStore, bound) -> Node:
    """Copy a tree, replacing free names that resolve in env with links.

    Names introduced inside the tree (value declarations, receive binders,
    parameters) shadow the environment and stay textual.
    """

    def lookup(nm):
        e = env
        while e is not None:
            if nm in e.bindings:
                return e.bindings[nm]
            e = e.parent
        return None

    def walk(n: Node, bound: set) -> Node:
        k = n.kind
        if k == "name":
            nm = n.attrs["name"]
            if nm not in bound:
                v = lookup(nm)
                if v is not None:
                    return H.make_link(store.intern(v), nm)
            return Node("name", [], dict(n.attrs), n.span)
        if k in ("block", "program"):
            inner = set(bound)
            items = []
            for item in n.children:
                if item.kind == "val":
                    rhs = item.children[0]
                    if rhs.kind in ("abs", "fun"):
                        # Recursive binding: the name is visible in its
                        # own body.
                        inner.add(item.attrs["name"])
                        items.append(Node("val", [walk(rhs, inner)],
                                          dict(item.attrs), item.span))
                    else:
                        items.append(Node("val", [walk(rhs, inner)],
                                          dict(item.attrs), item.span))
                        inner.add(item.attrs["name"])
                elif item.kind == "recv":
                    items.append(walk(item, inner))
                    for bn, _ in item.attrs["binders"]:
                        inner.add(bn)
                else:
                    items.append(walk(item, inner))
            return Node(k, items, dict(n.attrs), n.span)
        if k in ("abs", "fun"):
            inner = bound | {p for p, _ in n.attrs["params"]}
            return Node(k, [walk(n.children[0], inner)], dict(n.attrs), n.span)
        return Node(k, [walk(c, bound) for c in n.children],
                    dict(n.attrs), n.span)

    return walk(node, set(bound))


### reflect: representation -> value

def reflect(r: Node, store: ValueStore, engine, env: V.Env | None = None) -> V.Value:
    """Typecheck a tree against its links (plus an optional ambient
    environment) and evaluate it into a value."""
    tenv = typecheck.env_from_values(env)
    errors = typecheck.check(r, store, tenv)
    if errors:
        raise ReflectionError(
            "; ".join(str(e) for e in errors), errors=errors)
    use = env if env is not None else V.Env()
    try:
        if r.kind == "program":
            r = H.block(list(r.children))
        v = engine.eval(r, use)
    except AdlFault as e:
        raise ReflectionError(str(e)) from None
    if isinstance(v, V.Behaviour) and v.is_composition():
        # Compositions evaluate live; a reflected entity must wait for
        # execute like any other behaviour-shaped result.
        engine.suspend_tree(v)
    return v


def execute(e: V.Value, engine) -> V.Behaviour:
    if not isinstance(e, V.Behaviour):
        raise ReflectionError(
            f"cannot execute {T.render_type(V.type_of_value(e))}")
    try:
        return engine.execute(e)
    except AdlFault as err:
        raise ReflectionError(str(err)) from None


### transform: representation -> representation

class ReplaceSubtree:
    def __init__(self, path, tree: Node):
        self.path = list(path)
        self.tree = tree


class ReplaceWithText:
    def __init__(self, path, text: str):
        self.path = list(path)
        self.text = text


class RelinkValue:
    def __init__(self, old_id: int, new_id: int):
        self.old_id = old_id
        self.new_id = new_id


def transform(r: Node, edit, store: ValueStore | None = None) -> Node:
    """Apply one edit, returning a new tree; r itself is never touched."""
    out = H.copy_tree(r)
    if isinstance(edit, RelinkValue):
        for n in H.iter_nodes(out):
            if n.kind == "link" and n.attrs["id"] == edit.old_id:
                n.attrs["id"] = edit.new_id
        H.validate(out)
        return out
    if isinstance(edit, ReplaceWithText):
        replacement = _parse_fragment(edit.text, store)
        edit = ReplaceSubtree(edit.path, replacement)
    if not isinstance(edit, ReplaceSubtree):
        raise ReflectionError(f"unknown edit {type(edit).__name__}")
    if not edit.path:
        H.validate(edit.tree)
        return H.copy_tree(edit.tree)
    try:
        parent = H.child_at(out, edit.path[:-1])
        idx = edit.path[-1]
        if not 0 <= idx < len(parent.children):
            raise IndexError(idx)
        parent.children[idx] = H.copy_tree(edit.tree)
    except (IndexError, H.HyperCodeError):
        raise ReflectionError(f"no node at path {edit.path}") from None
    H.validate(out)
    return out


def _parse_fragment(text: str, store: ValueStore | None) -> Node:
    """Replacement text is usually an expression; a statement list is
    accepted too and becomes a block."""
    try:
        return syntax.parse_expr_text(text, store)
    except syntax.ParseFailure:
        pass
    try:
        prog = syntax.parse(text, store)
    except syntax.ParseFailure as e:
        raise ReflectionError("; ".join(str(err) for err in e.errors),
                              errors=e.errors) from None
    return H.block(list(prog.children))


def edit_from_json(d: dict, store: ValueStore | None = None):
    op = d.get("op")
    if op == "replace_subtree":
        dec = H.Decoder(store if store is not None else H.ValueStore())
        return ReplaceSubtree(d["path"], dec.node(d["tree"]))
    if op == "replace_text":
        return ReplaceWithText(d["path"], d["text"])
    if op == "relink":
        return RelinkValue(d["old"], d["new"])
    raise ReflectionError(f"unknown edit op {op!r}")
