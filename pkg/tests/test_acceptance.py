"""Acceptance gate: headline scenarios and properties, one verdict per test.

Each test prints a [PASS]/[FAIL] line with the measured numbers so a run
of this module reads as a report.
"""

import json
import subprocess
import sys
import textwrap
from collections import Counter

from adl import events as E
from adl import session as S
from adl import syntax
from adl import types as T
from adl import values as V
from adl.runtime import QUIESCENT
from conftest import CORPUS, corpus_paths, run_corpus, scenario_path


def check(name, ok, detail=""):
    tail = f": {detail}" if detail else ""
    print(f"[{'PASS' if ok else 'FAIL'}] {name}{tail}")
    assert ok, f"{name}{tail}"


def comms(sess):
    return [e for e in sess.engine.trace if e.kind == E.COMM]


def conn_id(sess, name):
    return V.conn_find(sess.env.lookup(name)).conn_id


### 1. ten senders against the doubling replicate server

def test_doubling_server_replication_every_seed():
    text = (CORPUS / "doubling_driver.adl").read_text()
    want = Counter(str(2 * k) for k in range(1, 11))
    for seed in range(1, 21):
        sess = S.Session(seed=seed)
        sess.load_text(text)
        sess.run(5000)
        clones = [e for e in sess.engine.trace if e.kind == E.CLONE]
        out = conn_id(sess, "out_channel")
        replies = Counter(e.data["payload"][0] for e in comms(sess)
                          if e.data["conn"] == out)
        assert len(clones) == 10, f"seed {seed}: {len(clones)} clones"
        assert replies == want, f"seed {seed}: {sorted(replies)}"
    check("doubling replication", True,
          "seeds 1..20 all give replies {2,4,..,20} with exactly 10 clones")


### 2. decompose and recompose the position system

def test_position_system_decompose_recompose():
    sess = S.Session(seed=0)
    sess.load_text((CORPUS / "position_system.adl").read_text())
    sess.run(200)
    sess.suspend("system")
    seq = sess.decompose("system")
    labels = [el.get("label").value for el in seq.items]
    parts = [el.get("bhvr") for el in seq.items]
    assert len(seq.items) == 2
    assert labels == ["pos_client", "pos_server"]
    assert all(p.state == V.SUSPENDED for p in parts)
    before = len(comms(sess))
    sess.engine.compose_parts(list(zip(labels, parts)), [])
    sess.run(200)
    gained = len(comms(sess)) - before
    check("decompose roundtrip", gained >= 1,
          f"labels {labels}, both suspended, recomposition added "
          f"{gained} comms")


### 3. where-clause unification

def test_unification_enables_request_reply():
    sess = S.Session(seed=0)
    sess.load_text((CORPUS / "request_reply_unified.adl").read_text())
    sess.run(1000)
    requests = [e for e in comms(sess) if e.data["payload"] == []]
    replies = [e for e in comms(sess) if e.data["payload"] == ['"56N 2W"']]
    pairs = min(len(requests), len(replies))

    split = S.Session(seed=0)
    split.load_text((CORPUS / "request_reply_split.adl").read_text())
    status = split.run(1000)
    blocked = [b for b in split.engine.live()
               if b.state in (V.BLOCKED_SEND, V.BLOCKED_RECV)]
    check("unification", pairs >= 1 and status == QUIESCENT
          and len(comms(split)) == 0 and len(blocked) >= 2,
          f"unified: {pairs} request/reply pairs; split: quiescent at step "
          f"{split.engine.step_count} with {len(blocked)} blocked parts, 0 comms")


### 4. scripted end-to-end evolution of the experiment system

def link_token(sess, conn, hint):
    return "@[%d:%s]" % (sess.store.intern(conn), hint)


def test_experiment_evolution_end_to_end():
    scenario = json.loads(scenario_path(CORPUS / "experiment_cs.adl").read_text())
    sess = S.Session(seed=4)
    S.apply_externals(sess, scenario["externals"])
    sess.load_text((CORPUS / "experiment_cs.adl").read_text())
    S.run_script(sess, scenario, 5000)
    sess.run(5000)
    eng = sess.engine
    disp = conn_id(sess, "c_display")
    shown = [e for e in comms(sess) if e.data["conn"] == disp]
    assert len(shown) >= 3, f"only {len(shown)} views displayed"
    assert sess.counters["start_experiment"] == 1

    seq = sess.decompose("CS_system1")
    labels = [el.get("label").value for el in seq.items]
    assert labels == ["client", "server"]
    client_elem = seq.items[0].get("bhvr")
    server_elem = seq.items[1].get("bhvr")

    s_put = eng.find_conn_in_part(server_elem, "s_put")
    s_start = eng.find_conn_in_part(server_elem, "s_start")
    s_stop = eng.find_conn_in_part(server_elem, "s_stop")
    view_text = (
        "abstraction() replicate {\n"
        "  via exp_input receive current_view : string;\n"
        f"  via {link_token(sess, s_put, 's_put')} send current_view\n"
        "}")
    cmd_text = (
        "abstraction() replicate choose{\n"
        f"  {{ via {link_token(sess, s_start, 's_start')} receive }}\n"
        "  or\n"
        f"  {{ via {link_token(sess, s_stop, 's_stop')} receive;"
        " stop_experiment() }\n"
        "}")
    vp = eng.instantiate(sess.reflect_text(view_text), [])
    cp = eng.instantiate(sess.reflect_text(cmd_text), [])
    cs2 = sess.compose(
        [("client", client_elem), ("view_server", vp), ("command_server", cp)],
        [("client", "c_start", "command_server", "s_start"),
         ("client", "c_stop", "command_server", "s_stop"),
         ("client", "c_get", "view_server", "s_put")])
    sess.run(5000)

    before = len([e for e in comms(sess) if e.data["conn"] == disp])
    sess.inject_send("exp_input", [S._pyval("run 2: 10% complete")])
    sess.inject_drain("c_display", 1)
    sess.run(5000)
    after = len([e for e in comms(sess) if e.data["conn"] == disp])
    assert after > before, "no view delivered through the new view server"

    sess.inject_send("user_input", [])
    sess.run(5000)
    assert sess.counters["stop_experiment"] == 1

    spurious = eng.resolve_ref(cs2, "client", "c_start")
    sess.inject_send(spurious, [])
    sess.run(5000)
    check("scripted evolution",
          sess.counters["start_experiment"] == 1
          and sess.counters["stop_experiment"] == 1,
          f"{len(shown)} views before, {after - before} after evolution; "
          "stop routed once; post-evolution start ignored")


### 5. determinism over the corpus

def test_traces_are_deterministic():
    files = 0
    for p in corpus_paths():
        ref = None
        for _ in range(3):
            sess, _ = run_corpus(p, seed=11)
            blob = E.trace_to_jsonl(sess.engine.trace)
            if ref is None:
                ref = blob
            assert blob == ref, f"{p.stem}: traces diverged between runs"
        files += 1
    check("determinism", True,
          f"3 byte-identical serialized traces for each of {files} programs")


### 6. a reflected copy of a suspended behaviour continues like the original

SAMPLE = {"integer": V.IntV(7), "string": V.StrV("probe"),
          "boolean": V.BoolV(True), "real": V.RealV(1.5)}


def sample_for(t):
    return SAMPLE.get(T.render_type(t), V.IntV(0))


def project(e, family):
    """Observable effect of an event, or None for bookkeeping.

    Clone and terminate timing differs legitimately between an original
    and its copy: a behaviour suspended mid-iteration already delegated
    its next round to a queued clone, while the reified continuation
    re-enters the replicate inline.  What must match is the stream of
    communications, committed choices, assignments and faults.
    """
    ids = [e.data.get(k) for k in ("bid", "sender", "receiver")]
    present = [i for i in ids if i is not None]
    if present and not any(i in family for i in present):
        return None
    if e.kind == E.COMM:
        return {"kind": "comm", "conn": e.data["conn"],
                "payload": e.data["payload"]}
    if e.kind == E.CHOOSE_COMMIT:
        return {"kind": "choose", "branch": e.data["branch"]}
    if e.kind == E.ASSIGN:
        return {"kind": "assign", "loc": e.data["loc"]}
    if e.kind == E.TERMINATE and "error" in e.data:
        return {"kind": "fault", "error": e.data["error"]}
    return None


def stimulate(sess, family):
    """Feed the first thing the family is waiting on.  One stimulus at a
    time keeps at most one reduction enabled, so the two runs being
    compared see identical scheduling decisions."""
    for bid in sorted(family):
        b = sess.engine.behaviours.get(bid)
        if b is None:
            continue
        if b.state == V.BLOCKED_SEND and b.wait_conn is not None:
            sess.inject_drain(b.wait_conn, 1)
            return 1
        if b.state == V.BLOCKED_RECV and b.wait_conn is not None:
            vals = [sample_for(t) for _, t in (b.wait_binders or [])]
            sess.inject_send(b.wait_conn, vals)
            return 1
        if b.state == V.BLOCKED_CHOOSE and b.choose_guards:
            for kind, conn in b.choose_guards:
                if conn is None:
                    continue
                if kind == "send":
                    sess.inject_drain(conn, 1)
                    return 1
                cv = V.conn_find(conn)
                sess.inject_send(conn, [sample_for(t) for t in cv.payload])
                return 1
    return 0


def prepared(path, seed, cap):
    sess, _ = run_corpus(path, seed, max_steps=cap)
    for b in list(sess.engine.live()):
        if b.state != V.SUSPENDED:
            sess.engine.suspend_tree(b)
    return sess


def grow_family(events, family):
    # clones carry their origin, so the family closes over clone chains
    for e in events:
        if e.kind == E.CLONE and e.data["of"] in family:
            family.add(e.data["bid"])


def continuation(path, seed, cap, pick, use_copy, rounds=6, budget=400):
    """Resume one suspended behaviour (or its reflected copy) in
    isolation and stimulate it from its wait states."""
    sess = prepared(path, seed, cap)
    eng = sess.engine
    target = eng.behaviours[pick]
    if use_copy:
        target = sess.reflect_node(sess.reify(target))
    eng.execute(target)
    start = len(eng.trace)
    family = {target.bid}
    for _ in range(rounds):
        eng.run(budget)
        grow_family(eng.trace[start:], family)
        if not stimulate(sess, family):
            break
    eng.run(budget)
    grow_family(eng.trace[start:], family)
    out = []
    for e in eng.trace[start:]:
        p = project(e, family)
        if p is not None:
            out.append(p)
    return out


def test_reflected_copies_continue_like_originals():
    compared = 0
    for path in corpus_paths():
        for cap in (25, 2000):
            probe = prepared(path, seed=3, cap=cap)
            targets = [b.bid for b in probe.engine.behaviours.values()
                       if b.state == V.SUSPENDED and not b.is_composition()]
            for bid in targets:
                orig = continuation(path, 3, cap, bid, use_copy=False)
                copy = continuation(path, 3, cap, bid, use_copy=True)
                assert orig == copy, (
                    f"{path.stem} cap={cap} behaviour #{bid}:\n"
                    f"  original {orig}\n  copy     {copy}")
                compared += 1
    check("reflect after reify", compared > 0,
          f"{compared} suspended behaviours matched their copies' traces")


### 7. every type constructor accepts every component type

BASES = ["integer", "real", "boolean", "string", "any", "behaviour"]


def wrappers(t):
    return [
        f"connection[{t}]",
        f"connection[{t}, integer]",
        f"sequence[{t}]",
        f"location[{t}]",
        f"view[a: {t}, b: integer]",
        f"abstraction[{t}]",
        f"function[{t}] -> integer",
        f"function[integer] -> {t}",
    ]


def test_type_constructor_sweep():
    level = list(BASES)
    cases = ["connection[]", "abstraction[]", "view[]"]
    for depth in range(3):
        nxt = []
        for t in level:
            nxt.extend(wrappers(t))
        # depth 3 is the full cross product of constructors over depth-2
        # composites; thin it to keep the sweep under a second
        cases.extend(nxt if depth < 2 else nxt[::3])
        level = nxt
    assert len(cases) >= 500
    for text in cases:
        ty = T.parse_type(text)
        assert T.type_equal(ty, T.parse_type(T.render_type(ty))), text
        prog = syntax.parse(f"value f = abstraction(p : {text}) "
                            "{ value q = 1; };", None)
        declared = prog.children[0].children[0].attrs["params"][0][1]
        assert T.type_equal(declared, ty), text
    check("type sweep", True,
          f"{len(cases)} types of depth <= 3 accepted in parse_type "
          "and as declared parameter types")


### 8. choose picks branches uniformly

def test_choose_uniformity():
    text = (CORPUS / "choice_three.adl").read_text()
    trials = 10000
    counts = Counter()
    for seed in range(trials):
        sess = S.Session(seed=seed)
        sess.load_text(text)
        sess.run(100)
        ev = [e for e in sess.engine.trace if e.kind == E.CHOOSE_COMMIT]
        counts[ev[0].data["branch"]] += 1
    freqs = {k: v / trials for k, v in sorted(counts.items())}
    ok = set(freqs) == {0, 1, 2} and all(
        abs(f - 1 / 3) <= 0.05 for f in freqs.values())
    check("choose uniformity", ok,
          f"{trials} trials, branch frequencies "
          + ", ".join(f"{k}: {f:.3f}" for k, f in freqs.items())
          + " (tolerance 1/3 +- 0.05)")


### 9. snapshot, reload in a fresh process, resume

RESUME_SCRIPT = textwrap.dedent("""
    import sys
    from adl import events as E
    from adl import session as S

    sess = S.Session.load(sys.argv[1])
    sess.inject_send("exp_input", [S._pyval("run 2: 10% complete")])
    sess.inject_drain("c_display", 1)
    sess.run(5000)
    sess.inject_send("user_input", [])
    sess.run(5000)
    sys.stdout.write(E.trace_to_jsonl(sess.engine.trace))
""")


def test_snapshot_resumes_identically_in_fresh_process(tmp_path):
    path = CORPUS / "experiment_cs.adl"
    scenario = json.loads(scenario_path(path).read_text())
    sess = S.Session(seed=4)
    S.apply_externals(sess, scenario["externals"])
    sess.load_text(path.read_text())
    S.run_script(sess, scenario, 5000)
    assert sess.run(5000) == QUIESCENT
    snap = tmp_path / "experiment.snapshot.json"
    sess.save(str(snap))
    mark = len(sess.engine.trace)

    # uninterrupted continuation
    sess.inject_send("exp_input", [S._pyval("run 2: 10% complete")])
    sess.inject_drain("c_display", 1)
    sess.run(5000)
    sess.inject_send("user_input", [])
    sess.run(5000)
    suffix = E.trace_to_jsonl(sess.engine.trace[mark:])
    assert suffix, "continuation produced no events to compare"

    done = subprocess.run(
        [sys.executable, "-c", RESUME_SCRIPT, str(snap)],
        capture_output=True, text=True, timeout=60)
    assert done.returncode == 0, done.stderr
    check("snapshot roundtrip", done.stdout == suffix,
          f"resumed process reproduced the {len(sess.engine.trace) - mark} "
          "event suffix byte for byte")
