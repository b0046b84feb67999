"""Scheduler semantics: rendezvous, replication, choice, faults."""

import pytest

from adl import events as E
from adl import session as S
from adl import values as V
from adl.runtime import QUIESCENT, TERMINATED, TIMED_OUT


def run_text(text, seed=0, max_steps=5000):
    sess = S.Session(seed=seed)
    sess.load_text(text)
    status = sess.run(max_steps)
    return sess, status


def comms(sess):
    return [e for e in sess.engine.trace if e.kind == E.COMM]


def test_send_blocks_until_a_receiver_exists():
    sess, status = run_text("value c = connection(integer); via c send 1;")
    assert status == QUIESCENT
    (b,) = [x for x in sess.engine.live() if x.state == V.BLOCKED_SEND]
    assert b.wait_payload == [V.IntV(1)]


def test_receive_blocks_until_a_sender_exists():
    _, status = run_text("value c = connection(); via c receive;")
    assert status == QUIESCENT


def test_rendezvous_transfers_values():
    sess, status = run_text("""
        value c = connection(integer, string);
        value sink = connection(string);
        { via c send 7, "pos" };
        { via c receive n : integer, tag : string; via sink send tag };
        { via sink receive echoed : string };
    """)
    assert status == TERMINATED
    payloads = [e.data["payload"] for e in comms(sess)]
    assert ["7", '"pos"'] in payloads
    assert ['"pos"'] in payloads


def test_empty_connection_is_pure_coordination():
    sess, status = run_text("""
        value go = connection();
        { via go send };
        { via go receive };
    """)
    assert status == TERMINATED
    (ev,) = comms(sess)
    assert ev.data["payload"] == []


def test_comm_counts_increment_on_both_ends():
    sess, _ = run_text("""
        value c = connection();
        { via c send };
        { via c receive };
    """)
    done = [b for b in sess.engine.behaviours.values() if b.comm_count]
    assert sorted(b.comm_count for b in done) == [1, 1]


def test_replication_unfolds_lazily():
    # one clone per consumed message and none beyond demand
    sess, status = run_text("""
        value c = connection(integer);
        value srv = replicate { via c receive n : integer };
        srv;
        { via c send 1 };
        { via c send 2 };
    """)
    assert status == QUIESCENT
    assert len([e for e in sess.engine.trace if e.kind == E.CLONE]) == 2


def test_replicate_does_not_diverge_without_partners():
    # an unfolded copy blocks; the engine reaches rest instead of spinning
    _, status = run_text("""
        value c = connection();
        replicate { via c send };
    """, max_steps=200)
    assert status == QUIESCENT


def test_execution_continues_past_replicate():
    sess, status = run_text("""
        value c = connection();
        value after = connection();
        { replicate { via c receive }; via after send };
        { via after receive };
        { via c send };
    """)
    assert status == QUIESCENT
    conns = {e.data["conn"] for e in comms(sess)}
    assert len(conns) == 2


def test_recursive_server_via_self_application():
    sess, status = run_text("""
        value i = connection(integer);
        value o = connection(integer);
        value server = abstraction() {
            via i receive num : integer;
            via o send 2 * num;
            server();
        };
        server();
        { via i send 5; via o receive a : integer };
        { via i send 9; via o receive b : integer };
    """)
    assert status == QUIESCENT
    sent = [e.data["payload"][0] for e in comms(sess)
            if e.data["payload"] and e.data["payload"][0] in ("10", "18")]
    assert sorted(sent) == ["10", "18"]


def test_choose_commits_one_branch():
    sess, status = run_text("""
        value l = location(0);
        value a = { l := 1 };
        value b = { l := 2 };
        choose{ a or b };
    """)
    assert status == QUIESCENT
    commits = [e for e in sess.engine.trace if e.kind == E.CHOOSE_COMMIT]
    assert len(commits) == 1
    assert commits[0].data["branch"] in (0, 1)


def test_choose_skips_infeasible_branches():
    # no partner ever exists on dead_end, so the live branch must win
    sess, status = run_text("""
        value dead_end = connection();
        value live = connection();
        { via live send };
        choose{ { via dead_end receive } or { via live receive } };
    """)
    assert status == TERMINATED
    commits = [e for e in sess.engine.trace if e.kind == E.CHOOSE_COMMIT]
    assert [c.data["branch"] for c in commits] == [1]
    assert len(comms(sess)) == 1


def test_choose_waits_until_some_branch_is_feasible():
    sess = S.Session(seed=0)
    sess.load_text("""
        value a = connection();
        value b = connection();
        choose{ { via a receive } or { via b receive } };
    """)
    assert sess.run(500) == QUIESCENT
    sess.inject_send("b", [])
    assert sess.run(500) == TERMINATED
    commits = [e for e in sess.engine.trace if e.kind == E.CHOOSE_COMMIT]
    assert [c.data["branch"] for c in commits] == [1]


def test_assignment_and_deref():
    sess, status = run_text("""
        value total = location(0);
        value out = connection(integer);
        value n = location(1);
        {
          while deref n <= 10 do {
            total := deref total + deref n;
            n := deref n + 1
          };
          via out send deref total
        };
        { via out receive got : integer };
    """)
    assert status == TERMINATED
    final = [e.data["payload"] for e in comms(sess)]
    assert final == [["55"]]


def test_free_exports_a_name_past_its_block():
    sess, status = run_text("""
        value out = connection(integer);
        {
          { value scale = 3; value hidden = 9; free{ scale } };
          via out send scale * 14
        };
        { via out receive r : integer };
    """)
    assert status == TERMINATED
    assert comms(sess)[0].data["payload"] == ["42"]


def test_fault_terminates_only_the_faulting_behaviour():
    # the checker cannot see through any(..), so the bad projection only
    # surfaces as a runtime fault in its own behaviour
    sess, status = run_text("""
        value c = connection();
        value boxed = any(3);
        { value notaconn = project(boxed, connection[]); via notaconn send };
        { via c send };
        { via c receive };
    """)
    assert status == TERMINATED
    errored = [b for b in sess.engine.behaviours.values()
               if b.state == V.ERRORED]
    assert len(errored) == 1
    assert errored[0].error
    assert len(comms(sess)) == 1  # the healthy pair still met


def test_runtime_arity_fault():
    sess, _ = run_text("""
        value mk = abstraction(n: integer) { };
        value boxed = any(mk);
        { value g = project(boxed, abstraction[integer, integer]); g(1, 2); };
    """)
    errored = [b for b in sess.engine.behaviours.values()
               if b.state == V.ERRORED]
    assert len(errored) == 1
    assert errored[0].error


def test_mobility_connection_over_connection():
    sess, status = run_text("""
        value meta = connection(connection[integer]);
        value data = connection(integer);
        { via meta send data };
        { via meta receive ch : connection[integer]; via ch receive n : integer };
        { via data send 99 };
    """)
    assert status == TERMINATED
    assert ["99"] in [e.data["payload"] for e in comms(sess)]


def test_mobility_abstraction_over_connection():
    sess, status = run_text("""
        value work = connection(abstraction[integer]);
        value out = connection(integer);
        value worker = abstraction(n: integer) { via out send n * 10 };
        { via work send worker };
        { via work receive w : abstraction[integer]; w(4) };
        { via out receive r : integer };
    """)
    assert status == TERMINATED
    assert ["40"] in [e.data["payload"] for e in comms(sess)]


def test_same_seed_same_trace():
    text = open("tests/corpus/doubling_driver.adl").read()
    a, _ = run_text(text, seed=11)
    b, _ = run_text(text, seed=11)
    assert E.trace_to_jsonl(a.engine.trace) == E.trace_to_jsonl(b.engine.trace)


def test_different_seeds_may_schedule_differently():
    text = open("tests/corpus/doubling_driver.adl").read()
    traces = {E.trace_to_jsonl(run_text(text, seed=s)[0].engine.trace)
              for s in range(6)}
    assert len(traces) > 1


def test_run_status_vocabulary():
    _, s1 = run_text("value x = 1;")
    assert s1 == TERMINATED
    _, s2 = run_text("value c = connection(); via c send;")
    assert s2 == QUIESCENT
    _, s3 = run_text("""
        value n = location(0);
        { while true do { n := deref n + 1 } };
    """, max_steps=50)
    assert s3 == TIMED_OUT


def test_suspend_freezes_mid_conversation():
    sess = S.Session(seed=0)
    sess.load_text("""
        value c = connection(integer);
        value pump = replicate { via c receive n : integer };
        pump;
    """)
    sess.run(500)
    before = len(comms(sess))
    for b in sess.engine.live():
        sess.engine.suspend_tree(b)
    sess.inject_send("c", [S._pyval(1)])
    sess.run(500)
    assert len(comms(sess)) == before  # everyone suspended; nothing moves
    for b in sess.engine.live():
        if b.state == V.SUSPENDED:
            sess.engine.resume(b)
    sess.run(500)
    assert len(comms(sess)) == before + 1
