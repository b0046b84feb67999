"""Command line front end: run, check, fmt, repl, serve."""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from adl import events as E
from adl import hypercode as H
from adl import reflection
from adl import session as S
from adl import syntax
from adl import typecheck
from adl import values as V
from adl.runtime import BACKEND, QUIESCENT, TERMINATED, TIMED_OUT


def _report(origin: str, errors, out=None):
    for e in errors:
        print(f"{origin}:{e}", file=out if out is not None else sys.stderr)


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as f:
        return f.read()


def cmd_run(args) -> int:
    try:
        text = _read(args.file)
    except OSError as e:
        print(f"{args.file}: {e.strerror}", file=sys.stderr)
        return 1
    sess = S.Session(seed=args.seed)
    scenario = None
    if args.scenario:
        try:
            scenario = json.loads(_read(args.scenario))
        except (OSError, json.JSONDecodeError) as e:
            print(f"{args.scenario}: {e}", file=sys.stderr)
            return 1
        try:
            S.apply_externals(sess, scenario.get("externals", {}))
        except Exception as e:
            print(f"{args.scenario}: {e}", file=sys.stderr)
            return 1
    try:
        sess.load_text(text, origin=args.file)
    except syntax.ParseFailure as e:
        _report(args.file, e.errors)
        return 1
    except S.SessionError as e:
        if e.errors:
            _report(args.file, e.errors)
        else:
            print(f"{args.file}: {e}", file=sys.stderr)
        return 1
    if scenario is not None:
        results = S.run_script(sess, scenario, args.max_steps)
        results.append(sess.run(args.max_steps))
    else:
        results = [sess.run(args.max_steps)]
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write(E.trace_to_jsonl(sess.engine.trace))
    for name in sorted(sess.counters):
        print(f"counter {name} = {sess.counters[name]}")
    status = results[-1]
    print(f"engine: {status} after {sess.engine.step_count} steps")
    return 2 if status == TIMED_OUT else 0


def cmd_check(args) -> int:
    try:
        text = _read(args.file)
    except OSError as e:
        print(f"{args.file}: {e.strerror}", file=sys.stderr)
        return 1
    store = H.ValueStore()
    try:
        prog = syntax.parse(text, store)
    except syntax.ParseFailure as e:
        _report(args.file, e.errors)
        return 1
    errors = typecheck.check(prog, store)
    if errors:
        _report(args.file, errors)
        return 1
    print(f"{args.file}: ok")
    return 0


def cmd_fmt(args) -> int:
    try:
        text = _read(args.file)
    except OSError as e:
        print(f"{args.file}: {e.strerror}", file=sys.stderr)
        return 1
    store = H.ValueStore()
    try:
        prog = syntax.parse(text, store)
    except syntax.ParseFailure as e:
        _report(args.file, e.errors)
        return 1
    print(syntax.render(prog))
    return 0


### the repl

def _open_delims(text: str) -> int:
    """Count unclosed brackets outside strings and comments; positive
    means the program line is still incomplete."""
    depth = 0
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "!":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == '"':
            i += 1
            while i < n and text[i] != '"':
                i += 2 if text[i] == "\\" else 1
            i += 1
            continue
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        i += 1
    return depth


class Repl:
    """Line oriented; every capability is scriptable through stdin."""

    def __init__(self, seed: int = 0, out=sys.stdout):
        self.sess = S.Session(seed=seed)
        self.out = out
        self.tracing = False
        self.sess.engine.listeners.append(self._on_event)

    def _on_event(self, ev):
        if self.tracing:
            print(ev.to_json(), file=self.out)

    def say(self, msg: str):
        print(msg, file=self.out)

    def handle(self, line: str, read_more=None) -> bool:
        """One input line; returns False when the repl should stop."""
        line = line.strip()
        if not line or line.startswith("!"):
            return True
        if not line.startswith(":"):
            text = line
            while read_more is not None and _open_delims(text) > 0:
                nxt = read_more()
                if nxt is None:
                    break
                text += "\n" + nxt.rstrip("\n")
            return self._program(text)
        parts = line.split(None, 1)
        cmd, rest = parts[0], (parts[1].strip() if len(parts) > 1 else "")
        try:
            return self._command(cmd, rest, read_more)
        except (S.SessionError, reflection.ReflectionError,
                syntax.ParseFailure, H.HyperCodeError) as e:
            self.say(f"error: {e}")
            return True

    def _program(self, line: str) -> bool:
        try:
            if line.startswith("value ") or line.endswith(";"):
                self.sess.load_text(line)
                self.say("ok")
            else:
                v = self.sess.eval_text(line)
                self.say(V.render_value(v))
        except (S.SessionError, syntax.ParseFailure) as e:
            self.say(f"error: {e}")
        return True

    def _command(self, cmd: str, rest: str, read_more) -> bool:
        sess = self.sess
        if cmd in (":quit", ":q"):
            return False
        if cmd == ":load":
            sess.load_text(_read(rest), origin=rest)
            self.say(f"loaded {rest}")
            return True
        if cmd == ":run":
            if rest:
                sess.execute(rest)
            status = sess.run()
            self.say(f"engine: {status}")
            return True
        if cmd == ":step":
            n = int(rest) if rest else 1
            for _ in range(n):
                status = sess.engine.step()
                if status != "progressed":
                    break
            self.say(f"engine: {status} at step {sess.engine.step_count}")
            return True
        if cmd == ":quiesce":
            status = sess.quiesce(rest)
            self.say(f"{rest}: {status}")
            return True
        if cmd == ":suspend":
            sess.suspend(rest)
            self.say(f"{rest}: suspended")
            return True
        if cmd == ":decompose":
            try:
                seq = sess.decompose(rest)
            except S.SessionError as e:
                if "quiescence" in str(e):
                    self.say(f"error: {e} (try :quiesce {rest} or :suspend {rest})")
                    return True
                raise
            for i, el in enumerate(seq.items, start=1):
                label = el.get("label")
                bhvr = el.get("bhvr")
                conns = el.get("connections")
                names = ", ".join(c.get("name").value for c in conns.items)
                self.say(f"{i}: label={label.value!r} behaviour=#{bhvr.bid} "
                         f"state={bhvr.state} connections=[{names}]")
            return True
        if cmd == ":reify":
            node = sess.reify(rest)
            self.say(syntax.render(node))
            return True
        if cmd == ":edit":
            node = sess.reify(rest)
            self.say(syntax.render(node))
            self.say("enter replacement, end with a line holding only '.'")
            lines = []
            while read_more is not None:
                nxt = read_more()
                if nxt is None or nxt.strip() == ".":
                    break
                lines.append(nxt)
            v = sess.reflect_text("\n".join(lines))
            self.say(f"it = {V.render_value(v)}")
            return True
        if cmd == ":reflect":
            text = _read(rest) if os.path.exists(rest) else rest
            v = sess.reflect_text(text)
            self.say(f"it = {V.render_value(v)}")
            return True
        if cmd == ":compose":
            v = sess.eval_text("compose{ " + rest + " }")
            self.say(f"it = {V.render_value(v)}")
            return True
        if cmd == ":execute":
            b = sess.execute(rest)
            self.say(f"#{b.bid}: {b.state}")
            return True
        if cmd == ":seed":
            n = int(rest)
            sess.engine.seed = n
            sess.engine.rng = random.Random(n)
            self.say(f"seed {n}")
            return True
        if cmd == ":save":
            sess.save(rest)
            self.say(f"saved {rest}")
            return True
        if cmd == ":load-snapshot":
            self.sess = S.Session.load(rest)
            self.sess.engine.listeners.append(self._on_event)
            self.say(f"restored {rest} at step {self.sess.engine.step_count}")
            return True
        if cmd == ":trace":
            self.tracing = rest == "on"
            self.say(f"trace {'on' if self.tracing else 'off'}")
            return True
        if cmd == ":systems":
            for card in sess.systems():
                self.say(f"#{card['id']} label={card['label']!r} "
                         f"state={card['state']} comms={card['commCount']}")
            return True
        self.say(f"unknown command {cmd}")
        return True


def cmd_repl(args) -> int:
    repl = Repl(seed=args.seed)
    interactive = sys.stdin.isatty()
    lines = iter(sys.stdin)

    def read_more():
        try:
            return next(lines)
        except StopIteration:
            return None

    if interactive:
        print("adl repl (:quit to leave)")
    while True:
        if interactive:
            print("adl> ", end="", flush=True)
        line = read_more()
        if line is None:
            break
        if not repl.handle(line, read_more):
            break
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from adl.server import build_app

    sess = S.Session(seed=args.seed)
    if args.scenario:
        scenario = json.loads(_read(args.scenario))
        S.apply_externals(sess, scenario.get("externals", {}))
    if args.file:
        try:
            sess.load_text(_read(args.file), origin=args.file)
        except syntax.ParseFailure as e:
            _report(args.file, e.errors)
            return 1
        except S.SessionError as e:
            if e.errors:
                _report(args.file, e.errors)
            else:
                print(e, file=sys.stderr)
            return 1
    app = build_app(sess)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="adl",
        description="Run, check and evolve architecture descriptions "
                    f"(engine backend: {BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="execute a program file")
    pr.add_argument("file")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--max-steps", type=int, default=100000)
    pr.add_argument("--trace", help="write the event trace as JSON lines")
    pr.add_argument("--scenario", help="JSON file of externals and scripted stimuli")
    pr.set_defaults(fn=cmd_run)

    pc = sub.add_parser("check", help="parse and typecheck a file")
    pc.add_argument("file")
    pc.set_defaults(fn=cmd_check)

    pf = sub.add_parser("fmt", help="parse a file and print it re-rendered")
    pf.add_argument("file")
    pf.set_defaults(fn=cmd_fmt)

    pp = sub.add_parser("repl", help="interactive session")
    pp.add_argument("--seed", type=int, default=0)
    pp.set_defaults(fn=cmd_repl)

    ps = sub.add_parser("serve", help="HTTP control API over one session")
    ps.add_argument("file", nargs="?", help="program to load before serving")
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8040)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--scenario", help="JSON file of externals to bind")
    ps.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
