"""Time the interpreted and compiled scheduler kernels on the corpus.

Runs itself twice as a subprocess, once per backend, so each kernel is
measured in a clean interpreter.  Traces must hash identically: the
compiled kernel is a build artifact of the interpreted one, never a
fork.

    python benchmarks/bench_engine.py [--repeat 3] [--seed 7]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time
from pathlib import Path

CORPUS = Path(__file__).resolve().parent.parent / "tests" / "corpus"

# (name, cap, weight): weight repeats the run inside the timed region so
# short programs still produce measurable numbers
WORKLOADS = [
    ("choice_three", 200, 200),
    ("doubling_driver", 5000, 50),
    ("experiment_cs", 5000, 50),
    ("position_system", 20000, 3),
    ("recursive_server", 5000, 100),
    ("request_reply_unified", 20000, 3),
    ("update_loop", 5000, 100),
]


def run_workload(name: str, cap: int, weight: int, seed: int):
    from adl import events as E
    from adl import session as S

    path = CORPUS / f"{name}.adl"
    scen_path = path.with_name(f"{name}.scenario.json")
    scenario = json.loads(scen_path.read_text()) if scen_path.exists() else None
    text = path.read_text()

    digest = hashlib.sha256()
    steps = 0
    t0 = time.perf_counter()
    for k in range(weight):
        sess = S.Session(seed=seed + k)
        if scenario:
            S.apply_externals(sess, scenario.get("externals", {}))
        sess.load_text(text)
        if scenario:
            S.run_script(sess, scenario, cap)
        sess.run(cap)
        digest.update(E.trace_to_jsonl(sess.engine.trace).encode())
        steps += sess.engine.step_count
    elapsed = time.perf_counter() - t0
    return {"name": name, "runs": weight, "steps": steps,
            "seconds": elapsed, "sha256": digest.hexdigest()}


def child(args) -> None:
    from adl.runtime import BACKEND

    results = [run_workload(name, cap, weight, args.seed)
               for name, cap, weight in WORKLOADS]
    print(json.dumps({"backend": BACKEND, "results": results}))


def measure(pure: bool, argv: list[str]) -> dict:
    env = dict(os.environ)
    if pure:
        env["ADL_PURE_ENGINE"] = "1"
    else:
        env.pop("ADL_PURE_ENGINE", None)
    out = subprocess.run([sys.executable, __file__, "--child"] + argv,
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--repeat", type=int, default=3,
                    help="take the best of this many timings per backend")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.child:
        child(args)
        return 0

    argv = ["--seed", str(args.seed)]
    best: dict[str, dict] = {}
    for _ in range(args.repeat):
        for pure in (False, True):
            rep = measure(pure, argv)
            prev = best.get(rep["backend"])
            if prev is None:
                best[rep["backend"]] = rep
            else:
                for old, new in zip(prev["results"], rep["results"]):
                    if new["sha256"] != old["sha256"]:
                        print(f"trace mismatch across repeats in {old['name']}",
                              file=sys.stderr)
                        return 1
                    old["seconds"] = min(old["seconds"], new["seconds"])

    if set(best) != {"pure", "compiled"}:
        print(f"expected both backends, measured: {sorted(best)} "
              "(is the extension built?)", file=sys.stderr)
        return 1

    print(f"{'workload':24s} {'steps':>8s} {'pure':>9s} {'compiled':>9s} "
          f"{'speedup':>8s}")
    total_p = total_c = 0.0
    for rp, rc in zip(best["pure"]["results"], best["compiled"]["results"]):
        if rp["sha256"] != rc["sha256"]:
            print(f"TRACE MISMATCH between backends in {rp['name']}",
                  file=sys.stderr)
            return 1
        total_p += rp["seconds"]
        total_c += rc["seconds"]
        print(f"{rp['name']:24s} {rp['steps']:>8d} {rp['seconds']:>8.3f}s "
              f"{rc['seconds']:>8.3f}s {rp['seconds'] / rc['seconds']:>7.2f}x")
    print(f"{'total':24s} {'':>8s} {total_p:>8.3f}s {total_c:>8.3f}s "
          f"{total_p / total_c:>7.2f}x")
    print("traces: identical across backends and repeats")
    return 0


if __name__ == "__main__":
    sys.exit(main())
