"""Value store: id allocation, interning, the no-reuse rule."""

import pytest

from adl import hypercode as H
from adl import values as V


def test_bind_hands_out_fresh_ids():
    store = H.ValueStore()
    a = store.bind(V.IntV(1))
    b = store.bind(V.IntV(2))
    assert a != b
    assert store.lookup(a) == V.IntV(1)
    assert store.lookup(b) == V.IntV(2)


def test_ids_are_never_reused():
    store = H.ValueStore()
    seen = set()
    for i in range(200):
        vid = store.bind(V.IntV(i))
        assert vid not in seen
        seen.add(vid)


def test_lookup_unknown_id_raises():
    store = H.ValueStore()
    with pytest.raises(H.HyperCodeError):
        store.lookup(99)


def test_bind_at_rejects_collisions():
    store = H.ValueStore()
    store.bind_at(5, V.StrV("x"))
    assert store.lookup(5) == V.StrV("x")
    with pytest.raises(H.HyperCodeError):
        store.bind_at(5, V.StrV("y"))


def test_bind_at_reserves_past_the_given_id():
    # fresh ids allocated afterwards must not collide with the reserved one
    store = H.ValueStore()
    store.bind_at(10, V.IntV(0))
    vid = store.bind(V.IntV(1))
    assert vid > 10


def test_intern_same_object_same_id():
    store = H.ValueStore()
    c = V.ConnectionV(0, ())
    assert store.intern(c) == store.intern(c)
    assert store.lookup(store.intern(c)) is c


def test_intern_distinct_objects_distinct_ids():
    # equality is not identity: two connections that print alike keep
    # separate store entries
    store = H.ValueStore()
    c1 = V.ConnectionV(0, ())
    c2 = V.ConnectionV(1, ())
    assert store.intern(c1) != store.intern(c2)


def test_id_alloc_reserve_only_moves_forward():
    ids = H.IdAlloc()
    ids.reserve("bid", 7)
    assert ids.next_bid() == 8
    ids.reserve("bid", 3)  # already past; no effect
    assert ids.next_bid() == 9


def test_link_node_shape():
    n = H.make_link(4, "count")
    assert n.kind == "link"
    assert n.children == []
    assert n.attrs == {"id": 4, "hint": "count"}
    H.validate(n)


def test_validate_rejects_unknown_kind():
    with pytest.raises(H.HyperCodeError):
        H.validate(H.Node("nonsense"))


def test_validate_rejects_bad_arity():
    # send needs at least the connection child
    with pytest.raises(H.HyperCodeError):
        H.validate(H.Node("send"))
