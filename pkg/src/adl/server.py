"""HTTP control API over one session.

Handlers serialize on a lock, so the engine only ever runs one command
at a time; the event stream fans out through per-consumer bounded queues
and drops consumers that stop reading.
"""

from __future__ import annotations

import json
import queue
import threading

from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse

from adl import hypercode as H
from adl import reflection
from adl import session as S
from adl import syntax
from adl import values as V
from adl.runtime import AdlFault

EVENT_BUFFER = 1000


def _card(b: V.Behaviour) -> dict:
    return {
        "id": b.bid,
        "label": b.label,
        "state": b.state,
        "commCount": b.comm_count,
        "composition": b.is_composition(),
    }


def _conn_summary(elem_conns: V.SeqV, store) -> list:
    out = []
    for c in elem_conns.items:
        anyv = c.get("conn")
        conn = anyv.value if isinstance(anyv, V.AnyV) else anyv
        out.append({"name": c.get("name").value,
                    "connectionId": V.conn_find(conn).conn_id,
                    "linkId": store.intern(conn)})
    return out


def build_app(sess: S.Session) -> FastAPI:
    app = FastAPI(title="adl control api")
    lock = threading.Lock()
    consumers: list[queue.Queue] = []

    def on_event(ev):
        dead = []
        for q in consumers:
            try:
                q.put_nowait(ev.to_json())
            except queue.Full:
                dead.append(q)
        for q in dead:
            consumers.remove(q)

    sess.engine.listeners.append(on_event)

    def behaviour_or_404(bid: int) -> V.Behaviour:
        b = sess.engine.behaviours.get(bid)
        if b is None:
            raise HTTPException(status_code=404, detail=f"no behaviour {bid}")
        return b

    @app.get("/systems")
    def systems():
        with lock:
            return sess.systems()

    @app.get("/systems/{bid}")
    def system(bid: int):
        with lock:
            return _card(behaviour_or_404(bid))

    @app.get("/systems/{bid}/hypercode")
    def hypercode(bid: int):
        with lock:
            b = behaviour_or_404(bid)
            if b.state not in (V.SUSPENDED, V.TERMINATED, V.ERRORED):
                raise HTTPException(
                    status_code=409,
                    detail=f"behaviour {bid} is {b.state}; quiesce and "
                           "suspend it first")
            node = reflection.reify(b, sess.store)
            doc = json.loads(H.serialize(node, sess.store))
            return {"hypercode": doc, "text": syntax.render(node)}

    @app.post("/systems/{bid}/quiesce")
    def quiesce(bid: int, body: dict | None = None):
        max_steps = (body or {}).get("maxSteps", 100000)
        with lock:
            b = behaviour_or_404(bid)
            status = sess.engine.await_quiescence(b, max_steps)
            return {"status": status, "step": sess.engine.step_count}

    @app.post("/systems/{bid}/suspend")
    def suspend(bid: int):
        with lock:
            b = behaviour_or_404(bid)
            sess.engine.suspend_tree(b)
            return _card(b)

    @app.post("/systems/{bid}/decompose")
    def decompose(bid: int):
        with lock:
            b = behaviour_or_404(bid)
            try:
                seq = sess.engine.decompose(b)
            except AdlFault as e:
                raise HTTPException(status_code=409, detail=str(e)) from None
            out = []
            for el in seq.items:
                out.append({
                    "label": el.get("label").value,
                    "behaviourId": el.get("bhvr").bid,
                    "state": el.get("bhvr").state,
                    "connections": _conn_summary(el.get("connections"),
                                                 sess.store),
                })
            return out

    @app.post("/systems/{bid}/execute")
    def execute(bid: int):
        with lock:
            b = behaviour_or_404(bid)
            try:
                sess.engine.execute(b)
            except AdlFault as e:
                raise HTTPException(status_code=409, detail=str(e)) from None
            return _card(b)

    @app.post("/reflect")
    def reflect(body: dict):
        with lock:
            try:
                if "text" in body:
                    node = reflection._parse_fragment(body["text"], sess.store)
                elif "hypercode" in body:
                    dec = H.Decoder(sess.store, sess.native_resolver)
                    node = dec.load_doc(body["hypercode"])
                else:
                    raise HTTPException(status_code=422,
                                        detail="need 'text' or 'hypercode'")
                v = sess.reflect_node(node)
                if body.get("instantiate") and isinstance(v, V.AbstractionV):
                    if v.params:
                        raise HTTPException(
                            status_code=422,
                            detail={"errors": ["cannot auto-instantiate an "
                                               "abstraction with parameters"]})
                    v = sess.engine.instantiate(v, [])
            except (S.SessionError, reflection.ReflectionError) as e:
                raise HTTPException(
                    status_code=422,
                    detail={"errors": [str(x) for x in e.errors] or [str(e)]},
                ) from None
            except H.SerializeError as e:
                raise HTTPException(status_code=422,
                                    detail={"errors": [str(e)]}) from None
            if isinstance(v, V.Behaviour):
                return {"behaviourId": v.bid, "state": v.state}
            return {"value": V.render_value(v),
                    "type": _type_text(v)}

    @app.post("/compose")
    def compose(body: dict):
        parts = []
        for p in body.get("parts", []):
            parts.append((p.get("label"), p["behaviourId"]))
        unifs = []
        for pair in body.get("unifications", []):
            left, right = pair
            ll, ln = _split_ref(left)
            rl, rn = _split_ref(right)
            unifs.append((ll, ln, rl, rn))
        with lock:
            try:
                resolved = [(label, behaviour_or_404(bid)) for label, bid in parts]
                comp = sess.engine.compose_parts(resolved, unifs)
            except AdlFault as e:
                raise HTTPException(status_code=422, detail=str(e)) from None
            return {"behaviourId": comp.bid, "state": comp.state}

    def _conn_ref(body: dict):
        """Stimuli address a connection by session name or by link id."""
        if "linkId" in body:
            try:
                v = sess.store.lookup(int(body["linkId"]))
            except (H.HyperCodeError, ValueError):
                raise HTTPException(status_code=422,
                                    detail=f"unknown link {body['linkId']!r}") \
                    from None
            if not isinstance(v, V.ConnectionV):
                raise HTTPException(status_code=422,
                                    detail="link is not a connection")
            return v
        if "conn" in body:
            return body["conn"]
        raise HTTPException(status_code=422, detail="need 'conn' or 'linkId'")

    @app.post("/inject")
    def inject(body: dict):
        with lock:
            try:
                b = sess.inject_send(_conn_ref(body),
                                     [S._pyval(v) for v in body.get("values", [])])
            except S.SessionError as e:
                raise HTTPException(status_code=422, detail=str(e)) from None
            return {"behaviourId": b.bid}

    @app.post("/drain")
    def drain(body: dict):
        with lock:
            try:
                b = sess.inject_drain(_conn_ref(body),
                                      int(body.get("count", 1)))
            except S.SessionError as e:
                raise HTTPException(status_code=422, detail=str(e)) from None
            return {"behaviourId": b.bid}

    @app.get("/counters")
    def counters():
        with lock:
            return dict(sess.counters)

    @app.post("/engine/step")
    def engine_step(body: dict | None = None):
        n = (body or {}).get("n", 1)
        with lock:
            status = "quiescent"
            for _ in range(n):
                status = sess.engine.step()
                if status != "progressed":
                    break
            return {"status": status, "step": sess.engine.step_count}

    @app.post("/engine/run")
    def engine_run(body: dict | None = None):
        max_steps = (body or {}).get("maxSteps", 100000)
        with lock:
            status = sess.engine.run(max_steps)
            return {"status": status, "step": sess.engine.step_count}

    @app.get("/events")
    def events(replay: int = 0):
        q: queue.Queue = queue.Queue(maxsize=EVENT_BUFFER)
        backlog = []
        with lock:
            if replay:
                backlog = [ev.to_json() for ev in sess.engine.trace]
            consumers.append(q)

        def stream():
            try:
                for item in backlog:
                    yield f"data: {item}\n\n"
                while True:
                    try:
                        item = q.get(timeout=15.0)
                    except queue.Empty:
                        yield ": keep-alive\n\n"
                        continue
                    yield f"data: {item}\n\n"
            finally:
                if q in consumers:
                    consumers.remove(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def _split_ref(ref: str):
    if "::" not in ref:
        raise HTTPException(status_code=422,
                            detail=f"bad connection reference {ref!r}; "
                                   "expected label::name")
    label, name = ref.split("::", 1)
    return label, name


def _type_text(v: V.Value) -> str:
    from adl import types as T
    return T.render_type(V.type_of_value(v))
