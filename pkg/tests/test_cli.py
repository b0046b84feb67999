"""Command line behaviour, driven in process."""

import io
import json

import pytest

from adl.cli import Repl, main
from conftest import CORPUS


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def repl_run(lines, seed=0):
    """Feed a scripted stdin to the repl; returns the printed output."""
    out = io.StringIO()
    repl = Repl(seed=seed, out=out)
    feed = iter(lines)

    def read_more():
        return next(feed, None)

    while True:
        line = read_more()
        if line is None or not repl.handle(line, read_more):
            break
    return out.getvalue()


def test_run_reports_engine_status(tmp_path, capsys):
    f = write(tmp_path, "p.adl", "value c = connection(); { via c send }; { via c receive };")
    assert main(["run", f]) == 0
    assert "engine: terminated" in capsys.readouterr().out


def test_run_exit_codes(tmp_path, capsys):
    blocked = write(tmp_path, "b.adl", "value c = connection(); { via c receive };")
    assert main(["run", blocked]) == 0
    assert "quiescent" in capsys.readouterr().out
    spin = write(tmp_path, "s.adl",
                 "value n = location(0); { while true do { n := deref n + 1 } };")
    assert main(["run", spin, "--max-steps", "50"]) == 2


def test_run_missing_file(capsys):
    assert main(["run", "/no/such/file.adl"]) == 1
    assert "file.adl" in capsys.readouterr().err


def test_run_reports_errors_with_origin(tmp_path, capsys):
    f = write(tmp_path, "bad.adl", "value x = nope;")
    assert main(["run", f]) == 1
    err = capsys.readouterr().err
    assert "bad.adl:" in err and "nope" in err


def test_run_writes_trace_jsonl(tmp_path):
    f = write(tmp_path, "p.adl",
              "value c = connection(integer); { via c send 5 }; { via c receive n : integer };")
    trace = tmp_path / "trace.jsonl"
    assert main(["run", f, "--trace", str(trace)]) == 0
    lines = trace.read_text().splitlines()
    assert lines
    kinds = [json.loads(ln)["kind"] for ln in lines]
    assert "comm" in kinds


def test_run_with_scenario_counts(tmp_path, capsys):
    f = write(tmp_path, "p.adl", "{ via go receive; hit(); };")
    scen = write(tmp_path, "s.json", json.dumps({
        "externals": {"go": "connection[]", "hit": "counter"},
        "phases": [{"sends": [["go", []]]}],
    }))
    assert main(["run", f, "--scenario", scen]) == 0
    assert "counter hit = 1" in capsys.readouterr().out


def test_check_accepts_self_contained_corpus(capsys):
    checked = 0
    for p in sorted(CORPUS.glob("*.adl")):
        if p.with_name(p.stem + ".scenario.json").exists():
            continue  # needs external bindings the checker can't assume
        assert main(["check", str(p)]) == 0, p.name
        checked += 1
    assert checked >= 5
    assert "ok" in capsys.readouterr().out


def test_check_flags_external_names(capsys):
    assert main(["check", str(CORPUS / "experiment_cs.adl")]) == 1
    assert "unbound name" in capsys.readouterr().err


def test_check_rejects_type_errors(tmp_path, capsys):
    f = write(tmp_path, "bad.adl", 'value x = 1 + "s";')
    assert main(["check", f]) == 1
    assert "bad.adl:" in capsys.readouterr().err


def test_fmt_is_idempotent(tmp_path, capsys):
    src = (CORPUS / "request_reply_unified.adl").read_text()
    f = write(tmp_path, "p.adl", src)
    assert main(["fmt", f]) == 0
    once = capsys.readouterr().out
    f2 = write(tmp_path, "p2.adl", once)
    assert main(["fmt", f2]) == 0
    assert capsys.readouterr().out == once


def test_repl_evaluates_expressions():
    out = repl_run(["1 + 2", "it * 10"])
    assert "3" in out.splitlines()
    assert "30" in out.splitlines()


def test_repl_binds_and_runs_programs():
    out = repl_run([
        "value c = connection(integer);",
        "{ via c send 21 };",
        "{ via c receive n : integer };",
        ":run",
        ":systems",
    ])
    assert "ok" in out
    assert "engine: terminated" in out


def test_repl_multiline_accumulates_until_braces_close():
    out = repl_run([
        "value c = connection();",
        "{",
        "  via c send",
        "};",
        ":run",
    ])
    assert "engine: quiescent" in out


def test_repl_reports_errors_and_continues():
    out = repl_run(["value x = ;", "2 + 2"])
    assert "error:" in out
    assert "4" in out.splitlines()


def test_repl_unknown_command():
    out = repl_run([":frobnicate"])
    assert "unknown command" in out


def test_repl_decompose_flow():
    out = repl_run([
        ":load " + str(CORPUS / "position_system.adl"),
        ":step 80",
        ":suspend system",
        ":decompose system",
    ])
    assert "label='pos_client'" in out
    assert "label='pos_server'" in out


def test_repl_save_and_restore(tmp_path):
    snap = str(tmp_path / "s.json")
    out = repl_run([
        "value c = connection(integer);",
        "{ via c receive n : integer };",
        ":run",
        ":save " + snap,
        ":load-snapshot " + snap,
        ":systems",
    ])
    assert "saved" in out and "restored" in out


def test_repl_trace_toggle_prints_events():
    out = repl_run([
        ":trace on",
        "value c = connection(); { via c send }; { via c receive };",
        ":run",
    ])
    assert '"kind":"comm"' in out
