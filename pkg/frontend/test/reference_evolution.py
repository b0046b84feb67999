"""Native replay of the experiment evolution scenario.

Runs the client/server experiment program in-process, performs the
evolution (decompose, write two replacement servers as hyper-code with
link tokens, reflect, recompose), drives the post-evolution stimuli and
prints the full engine trace as JSON lines.  The console test performs
the same operations over HTTP against `adl serve` with the same seed;
the two traces must be byte-identical.

Usage: reference_evolution.py SEED PROGRAM SCENARIO
"""

import json
import pathlib
import sys

from adl import events as E
from adl import session as S


def main():
    seed = int(sys.argv[1])
    prog = pathlib.Path(sys.argv[2])
    scen = pathlib.Path(sys.argv[3])
    scenario = json.loads(scen.read_text())

    sess = S.Session(seed=seed)
    S.apply_externals(sess, scenario["externals"])
    sess.load_text(prog.read_text(), origin=str(prog))
    S.run_script(sess, scenario)

    eng = sess.engine
    seq = sess.decompose("CS_system1")
    client_elem = seq.items[0].get("bhvr")
    server_elem = seq.items[1].get("bhvr")

    def token(part, name):
        conn = eng.find_conn_in_part(part, name)
        assert conn is not None, name
        return "@[%d:%s]" % (sess.store.intern(conn), name)

    view_text = (
        "abstraction() replicate {\n"
        "  via exp_input receive current_view : string;\n"
        f"  via {token(server_elem, 's_put')} send current_view\n"
        "}")
    cmd_text = (
        "abstraction() replicate choose{\n"
        f"  {{ via {token(server_elem, 's_start')} receive }}\n"
        "  or\n"
        f"  {{ via {token(server_elem, 's_stop')} receive;"
        " stop_experiment() }\n"
        "}")
    vp = eng.instantiate(sess.reflect_text(view_text), [])
    cp = eng.instantiate(sess.reflect_text(cmd_text), [])
    cs2 = sess.compose(
        [("client", client_elem), ("view_server", vp), ("command_server", cp)],
        [("client", "c_start", "command_server", "s_start"),
         ("client", "c_stop", "command_server", "s_stop"),
         ("client", "c_get", "view_server", "s_put")])
    sess.run()

    sess.inject_send("exp_input", [S._pyval("run 2: 10% complete")])
    sess.inject_drain("c_display", 1)
    sess.run()

    sess.inject_send("user_input", [])
    sess.run()

    spurious = eng.resolve_ref(cs2, "client", "c_start")
    sess.inject_send(spurious, [])
    sess.run()

    assert sess.counters["start_experiment"] == 1, sess.counters
    assert sess.counters["stop_experiment"] == 1, sess.counters
    sys.stdout.write(E.trace_to_jsonl(eng.trace) + "\n")


if __name__ == "__main__":
    main()
