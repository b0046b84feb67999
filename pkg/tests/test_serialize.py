"""Hyper-code serialization: JSON roundtrips, link defs, id stability."""

import json

import pytest

from adl import hypercode as H
from adl import syntax
from adl import types as T
from adl import values as V


def roundtrip(text, store=None):
    store = store or H.ValueStore()
    node = syntax.parse_program(text, store)
    blob = H.serialize(node, store)
    back = H.deserialize(blob, H.ValueStore())
    return node, back, blob


FULL_SURFACE = """
value n = 3;
value s = "hi";
value c = connection(integer, string);
value l = location(0);
value f = abstraction(k: integer) { via c send k, s };
value g = function(k: integer) -> integer { k * 2 };
replicate { via c receive a : integer, b : string };
choose{ { via c send 1, s } or { l := 1 } };
if deref l < 2 then { f(1) } else { f(2) };
while deref l < 1 do { l := deref l + 1 };
value sys = compose{ one as f(1) and two as f(2)
                     where { one::c unifies two::c } };
{ value inner = 1; free{ inner } };
"""


def test_every_construct_roundtrips():
    node, back, _ = roundtrip(FULL_SURFACE)
    assert H.node_equal(node, back)


def test_document_shape():
    _, _, blob = roundtrip("value x = 1;")
    doc = json.loads(blob)
    assert doc["version"] == 1
    assert doc["root"]["k"] == "program"
    assert doc["root"]["items"][0] == {
        "k": "val", "name": "x", "e": {"k": "lit", "t": "integer", "v": 1}}


def test_links_carry_their_defs():
    store = H.ValueStore()
    loc = V.LocationV(0, V.IntV(42), T.INTEGER)
    vid = store.bind(loc)
    node = syntax.parse_program("value x = deref @[%d:count];" % vid, store)
    blob = H.serialize(node, store)
    doc = json.loads(blob)
    assert str(vid) in doc["defs"]
    assert doc["defs"][str(vid)]["t"] == "location"

    fresh = H.ValueStore()
    back = H.deserialize(blob, fresh)
    link = back.children[0].children[0].children[0]
    assert link.kind == "link"
    # id preserved in a fresh store
    assert link.attrs["id"] == vid
    restored = fresh.lookup(vid)
    assert isinstance(restored, V.LocationV)
    assert restored.content == V.IntV(42)


def test_shared_value_stays_shared():
    # two links to one location decode to one object, not two copies
    store = H.ValueStore()
    loc = V.LocationV(0, V.IntV(7), T.INTEGER)
    vid = store.bind(loc)
    text = "value a = deref @[{0}:l]; value b = deref @[{0}:l];".format(vid)
    node = syntax.parse_program(text, store)
    fresh = H.ValueStore()
    back = H.deserialize(H.serialize(node, store), fresh)
    l1 = fresh.lookup(back.children[0].children[0].children[0].attrs["id"])
    l2 = fresh.lookup(back.children[1].children[0].children[0].attrs["id"])
    assert l1 is l2


def test_occupied_ids_are_remapped_not_clobbered():
    store = H.ValueStore()
    vid = store.bind(V.LocationV(0, V.IntV(1), T.INTEGER))
    node = syntax.parse_program("value x = deref @[%d:l];" % vid, store)
    blob = H.serialize(node, store)

    target = H.ValueStore()
    squatter = target.bind(V.StrV("occupied"))
    assert squatter == vid
    back = H.deserialize(blob, target)
    new_id = back.children[0].children[0].children[0].attrs["id"]
    assert new_id != vid
    assert target.lookup(vid) == V.StrV("occupied")
    assert isinstance(target.lookup(new_id), V.LocationV)


def test_unified_connections_restore_into_one_class():
    store = H.ValueStore()
    c1 = V.ConnectionV(0, (T.INTEGER,))
    c2 = V.ConnectionV(1, (T.INTEGER,))
    V.conn_unify(c1, c2)
    a, b = store.bind(c1), store.bind(c2)
    node = H.block([H.make_link(a, "c1"), H.make_link(b, "c2")])
    fresh = H.ValueStore()
    back = H.deserialize(H.serialize(node, store), fresh)
    r1 = fresh.lookup(back.children[0].attrs["id"])
    r2 = fresh.lookup(back.children[1].attrs["id"])
    assert V.conn_find(r1) is V.conn_find(r2)


def test_distinct_connections_stay_distinct():
    store = H.ValueStore()
    a = store.bind(V.ConnectionV(0, ()))
    b = store.bind(V.ConnectionV(1, ()))
    node = H.block([H.make_link(a), H.make_link(b)])
    fresh = H.ValueStore()
    back = H.deserialize(H.serialize(node, store), fresh)
    r1 = fresh.lookup(back.children[0].attrs["id"])
    r2 = fresh.lookup(back.children[1].attrs["id"])
    assert V.conn_find(r1) is not V.conn_find(r2)


def test_abstraction_env_capture_roundtrips():
    store = H.ValueStore()
    env = V.Env()
    env.bind("offset", V.IntV(10))
    body = syntax.parse_program("value r = offset + n;").children[0]
    absv = V.AbstractionV([("n", T.INTEGER)], H.block([body]), env, "adder")
    vid = store.bind(absv)
    node = H.block([H.make_link(vid, "adder")])
    fresh = H.ValueStore()
    back = H.deserialize(H.serialize(node, store), fresh)
    restored = fresh.lookup(back.children[0].attrs["id"])
    assert isinstance(restored, V.AbstractionV)
    assert restored.env.lookup("offset") == V.IntV(10)
    assert [p for p, _ in restored.params] == ["n"]


def test_running_behaviour_does_not_serialize():
    store = H.ValueStore()
    b = V.Behaviour(0, [V.Frame(V.Env(), [])])
    b.state = V.RUNNING
    vid = store.bind(b)
    with pytest.raises(H.SerializeError):
        H.serialize(H.block([H.make_link(vid)]), store)


def test_suspended_behaviour_roundtrips_continuation():
    store = H.ValueStore()
    items = syntax.parse_program("via c send 1; via c send 2;").children
    env = V.Env()
    env.bind("c", V.ConnectionV(0, (T.INTEGER,)))
    b = V.Behaviour(0, [V.Frame(V.Env(env), list(items))], env)
    b.state = V.SUSPENDED
    b.saved_state = V.RUNNING
    vid = store.bind(b)
    fresh = H.ValueStore()
    back = H.deserialize(H.serialize(H.block([H.make_link(vid)]), store), fresh)
    rb = fresh.lookup(back.children[0].attrs["id"])
    assert isinstance(rb, V.Behaviour)
    assert rb.state == V.SUSPENDED
    cont = H.continuation_of(rb)
    assert [n.kind for n in cont.children] == ["send", "send"]


def test_unsupported_version_rejected():
    with pytest.raises(H.SerializeError):
        H.deserialize('{"version":2,"root":{"k":"block","items":[]},"defs":{}}',
                      H.ValueStore())


def test_malformed_json_rejected():
    with pytest.raises(H.SerializeError):
        H.deserialize("{not json", H.ValueStore())


def test_bare_node_document_accepted():
    back = H.deserialize('{"k":"lit","t":"integer","v":5}', H.ValueStore())
    assert back.kind == "lit" and back.attrs["v"] == 5
