import json
import pathlib

from adl import session as S

CORPUS = pathlib.Path(__file__).parent / "corpus"

# these two never terminate on their own; runs get a step cap
ENDLESS = {"position_system", "request_reply_unified"}


def corpus_paths():
    return sorted(CORPUS.glob("*.adl"))


def scenario_path(path):
    return path.with_name(path.stem + ".scenario.json")


def build_session(path, seed=0):
    """Session with externals bound and the program loaded, not yet run."""
    sess = S.Session(seed=seed)
    sp = scenario_path(path)
    scenario = json.loads(sp.read_text()) if sp.exists() else None
    if scenario:
        S.apply_externals(sess, scenario.get("externals", {}))
    sess.load_text(path.read_text(), origin=path.name)
    return sess, scenario


def run_corpus(path, seed=0, max_steps=2000):
    """Load, run any scripted phases, then run to rest; returns (session,
    final status)."""
    sess, scenario = build_session(path, seed)
    if scenario:
        S.run_script(sess, scenario, max_steps=max_steps)
    status = sess.run(max_steps)
    return sess, status
