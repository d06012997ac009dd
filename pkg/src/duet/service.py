"""Live duet session service: wire protocol, replay, and the network layer.

The protocol state machine (`DuetService.handle`) is a pure function of
(loaded checkpoints, per-connection state, message) and is fully testable
without sockets; the websocket layer is a thin asyncio shell around it that
also serves the browser UI's static files on the same port.

Wire schema v1 (JSON text frames, one session per connection):

    {"v": 1, "kind": "INIT",  "payload": {"checkpoint": "<name>",
                                          "seed": ["P60", ...], "tempo": 60}}
    {"v": 1, "kind": "INIT_ACK", "session": "s1",
             "payload": {"seed": [...], "seed_steps": N}}
    {"v": 1, "kind": "STEP", "session": "s1",
             "payload": {"step": 0, "token": "P60"}}
    {"v": 1, "kind": "STEP_ACK", "session": "s1",
             "payload": {"step": 0, "token": "P62"}}
    {"v": 1, "kind": "SWITCH", "session": "s1", "payload": {"step": 48}}
    {"v": 1, "kind": "SWITCH_ACK", ...}
    {"v": 1, "kind": "END", "session": "s1"} -> END reply carrying the duet
    token file; {"v": 1, "kind": "ERROR", "payload": {"code", "message"}}

Step indices start at 0 and must increase by exactly 1; during the seed
region the STEP_ACK token comes from the seed.  Errors never change state.
"""
from __future__ import annotations

import asyncio
import json
import logging
import mimetypes
from dataclasses import dataclass
from http import HTTPStatus
from pathlib import Path

from .corpus import Duet
from .generate import BoundaryError, Session, SessionError, duet_file_dict
from .models import DuetModel
from .rewards import RewardEnsemble, score_episode
from .score import Scheme, ScoreError, TokenSeq, beat_subdivision

log = logging.getLogger("duet.service")

WIRE_VERSION = 1
KINDS = ("INIT", "INIT_ACK", "STEP", "STEP_ACK", "SWITCH", "SWITCH_ACK", "END", "ERROR")
HEARTBEAT_SECONDS = 5.0
IDLE_TIMEOUT_SECONDS = 30.0


@dataclass(frozen=True)
class SessionState:
    session_id: str
    session: Session


def _error(code: str, message: str, session: str | None = None) -> dict:
    msg = {"v": WIRE_VERSION, "kind": "ERROR", "payload": {"code": code, "message": message}}
    if session:
        msg["session"] = session
    return msg


def _resolve_seed(policy: DuetModel, labels: list[str]) -> list[int]:
    """Seed labels to ids; generic HOLDs follow the running sounding pitch."""
    from .score import HOLD_LABEL, Scheme, step_states, TokenSeq

    ids: list[int] = []
    vocab = policy.vocab
    for lab in labels:
        try:
            ids.append(vocab.id(lab))
        except ScoreError:
            if lab != HOLD_LABEL or vocab.scheme is not Scheme.MULTI_HOLD:
                raise
            states = step_states(TokenSeq(tuple(ids), policy.scheme))
            pitch = states[-1][0] if states else None
            ids.append(vocab.rest_id if pitch is None else vocab.hold_token(pitch))
    return ids


class DuetService:
    """Protocol handler over read-only checkpoints; one SessionState per connection."""

    def __init__(self, policies: dict[str, DuetModel], default: str | None = None,
                 ensemble: RewardEnsemble | None = None):
        if not policies:
            raise ValueError("service needs at least one loaded policy")
        self.policies = policies
        self.default = default or sorted(policies)[0]
        self.ensemble = ensemble

    def handle(self, state: SessionState | None, msg) -> tuple[SessionState | None, dict]:
        """Process one message; returns (new state, reply). Errors leave state as-is."""
        sid = state.session_id if state else None
        if not isinstance(msg, dict):
            return state, _error("E_SCHEMA", "message must be a JSON object", sid)
        if msg.get("v") != WIRE_VERSION:
            return state, _error("E_SCHEMA", f"unsupported wire version {msg.get('v')!r}", sid)
        kind = msg.get("kind")
        payload = msg.get("payload") or {}
        if kind not in ("INIT", "STEP", "SWITCH", "END"):
            return state, _error("E_SCHEMA", f"unknown kind {kind!r}", sid)
        if kind == "INIT":
            return self._init(state, payload)
        if state is None:
            return state, _error("E_STATE", f"{kind} before INIT", sid)
        if msg.get("session") != state.session_id:
            return state, _error("E_STATE", f"unknown session {msg.get('session')!r}", sid)
        if kind == "STEP":
            return self._step(state, payload)
        if kind == "SWITCH":
            return self._switch(state, payload)
        return self._end(state)

    def _init(self, state, payload) -> tuple[SessionState | None, dict]:
        if state is not None:
            return state, _error("E_STATE", "session already initialized", state.session_id)
        name = payload.get("checkpoint") or self.default
        policy = self.policies.get(name)
        if policy is None:
            return state, _error("E_CKPT", f"unknown checkpoint {name!r}")
        labels = payload.get("seed") or []
        try:
            seed = _resolve_seed(policy, labels)
        except ScoreError as e:
            return state, _error("E_TOKEN", str(e))
        # one session per connection: the id only disambiguates within it, and a
        # constant id keeps record/replay deterministic
        new = SessionState(session_id="s1", session=Session(policy, seed))
        reply = {"v": WIRE_VERSION, "kind": "INIT_ACK", "session": new.session_id,
                 "payload": {"checkpoint": name, "seed": list(labels),
                             "seed_steps": len(seed)}}
        return new, reply

    def _step(self, state: SessionState, payload) -> tuple[SessionState, dict]:
        step = payload.get("step")
        if step != state.session.t:
            return state, _error("E_ORDER",
                                 f"expected step {state.session.t}, got {step!r}",
                                 state.session_id)
        label = payload.get("token")
        try:
            token = state.session.resolve_input_label(label)
        except (ScoreError, TypeError):
            return state, _error("E_TOKEN", f"unknown token label {label!r}", state.session_id)
        try:
            machine = state.session.step(token)
        except SessionError as e:
            return state, _error("E_STATE", str(e), state.session_id)
        reply = {"v": WIRE_VERSION, "kind": "STEP_ACK", "session": state.session_id,
                 "payload": {"step": step, "token": state.session.vocab.label(machine)}}
        return state, reply

    def _switch(self, state: SessionState, payload) -> tuple[SessionState, dict]:
        try:
            state.session.switch_roles()
        except BoundaryError as e:
            return state, _error("E_BOUNDARY", str(e), state.session_id)
        except SessionError as e:
            return state, _error("E_STATE", str(e), state.session_id)
        reply = {"v": WIRE_VERSION, "kind": "SWITCH_ACK", "session": state.session_id,
                 "payload": {"step": state.session.t,
                             "policy_fills": state.session.policy_fills}}
        return state, reply

    def _end(self, state: SessionState) -> tuple[None, dict]:
        try:
            duet = state.session.end()
        except SessionError as e:
            return state, _error("E_STATE", str(e), state.session_id)
        payload = {"duet": duet_file_dict(duet)}
        if self.ensemble is not None and len(duet) > duet.seed_steps:
            try:
                breakdowns = score_episode(self.ensemble, duet, start=duet.seed_steps)
            except Exception:  # scoring is best-effort at session end
                breakdowns = []
            if breakdowns:
                payload["mean_reward"] = sum(b.total for b in breakdowns) / len(breakdowns)
        reply = {"v": WIRE_VERSION, "kind": "END", "session": state.session_id,
                 "payload": payload}
        return None, reply

    def replay(self, messages: list[dict]) -> tuple[Duet, list[dict]]:
        """Re-run a client message log against fresh state; returns (duet, replies).

        Deterministic: the same log and checkpoints reproduce the live
        session's machine tokens bitwise.
        """
        state: SessionState | None = None
        replies = []
        final: Duet | None = None
        for msg in messages:
            state, reply = self.handle(state, msg)
            replies.append(reply)
            if reply.get("kind") == "ERROR":
                raise ValueError(f"corrupt log: {reply['payload']}")
            if reply.get("kind") == "END":
                d = reply["payload"]["duet"]
                scheme = Scheme.parse(d["scheme"])
                final = Duet(human=TokenSeq(tuple(d["human"]), scheme),
                             machine=TokenSeq(tuple(d["machine"]), scheme),
                             beats=beat_subdivision(len(d["human"])), source="replay")
        if final is None:
            if state is None:  # empty log: nothing beyond an (absent) seed
                final = Duet(human=TokenSeq((), Scheme.MULTI_HOLD),
                             machine=TokenSeq((), Scheme.MULTI_HOLD),
                             beats=beat_subdivision(0), source="replay")
            else:
                final = state.session.end()
        return final, replies


# ---------------------------------------------------------------------------
# Network shell
# ---------------------------------------------------------------------------

def _static_response(connection, request, static_dir: Path):
    from websockets.http11 import Response
    from websockets.datastructures import Headers

    path = request.path.split("?")[0]
    if path in ("/", ""):
        path = "/index.html"
    target = (static_dir / path.lstrip("/")).resolve()
    if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
        return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")
    ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
    body = target.read_bytes()
    headers = Headers([("Content-Type", ctype), ("Content-Length", str(len(body)))])
    return Response(HTTPStatus.OK, "OK", headers, body)


async def serve(service: DuetService, host: str, port: int,
                static_dir: str | Path | None = None, ready: asyncio.Event | None = None):
    """Run the websocket endpoint (path /ws) plus static assets until cancelled.

    Generational GC is relaxed while serving: tensor graphs are cycle-free and
    die by refcount, and a full gen-2 scan of the loaded checkpoints costs tens
    of milliseconds, which would blow the per-step latency budget.
    """
    import gc

    from websockets.asyncio.server import serve as ws_serve

    static_path = Path(static_dir) if static_dir else None

    def process_request(connection, request):
        if request.path.startswith("/ws"):
            return None
        if static_path is not None:
            return _static_response(connection, request, static_path)
        return connection.respond(HTTPStatus.NOT_FOUND, "websocket endpoint is /ws\n")

    async def handler(connection):
        state: SessionState | None = None
        while True:
            try:
                raw = await asyncio.wait_for(connection.recv(), timeout=IDLE_TIMEOUT_SECONDS)
            except asyncio.TimeoutError:
                log.info("idle timeout; closing session")
                break
            except Exception:
                break
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError:
                await connection.send(json.dumps(_error("E_SCHEMA", "invalid JSON")))
                continue
            state, reply = service.handle(state, msg)
            await connection.send(json.dumps(reply))
            if reply.get("kind") == "END":
                state = None

    saved_threshold = gc.get_threshold()
    gc.collect()
    gc.freeze()
    gc.set_threshold(100_000, 50, 50)
    try:
        async with ws_serve(handler, host, port, ping_interval=HEARTBEAT_SECONDS,
                            process_request=process_request):
            if ready is not None:
                ready.set()
            await asyncio.Future()
    finally:
        gc.set_threshold(*saved_threshold)
        gc.unfreeze()
