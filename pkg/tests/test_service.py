import asyncio
import json
import socket
import time
import urllib.request

import numpy as np
import pytest

from duet.corpus import duet_from_parts
from duet.service import DuetService, SessionState, serve
from duet.models import DESK_CONFIG, DuetModel


@pytest.fixture(scope="module")
def service(tiny_policy):
    return DuetService({"tiny": tiny_policy})


def wire(kind, session=None, **payload):
    msg = {"v": 1, "kind": kind, "payload": payload}
    if session:
        msg["session"] = session
    return msg


def labels(policy, ids):
    return [policy.vocab.label(i) for i in ids]


def scripted_session(service, policy, duet, n_steps, switch_at=()):
    """Drive a session; returns (client log, reply log, final state)."""
    seed = labels(policy, duet.machine.ids[:32])
    sent, got = [], []
    state = None

    def send(msg):
        nonlocal state
        sent.append(msg)
        state, reply = service.handle(state, msg)
        got.append(reply)
        return reply

    ack = send(wire("INIT", checkpoint="tiny", seed=seed, tempo=60))
    sid = ack["session"]
    for t in range(n_steps):
        if t in switch_at:
            send(wire("SWITCH", session=sid, step=t))
        send(wire("STEP", session=sid, step=t, token=policy.vocab.label(duet.human.ids[t])))
    send(wire("END", session=sid))
    return sent, got, state


def test_init_ack_and_stepping(service, tiny_policy, chorales):
    duet = duet_from_parts(chorales[0], 0, 1)
    sent, got, state = scripted_session(service, tiny_policy, duet, 40)
    assert got[0]["kind"] == "INIT_ACK"
    assert got[0]["payload"]["seed_steps"] == 32
    assert got[0]["payload"]["seed"] == labels(tiny_policy, duet.machine.ids[:32])
    acks = [r for r in got if r["kind"] == "STEP_ACK"]
    assert len(acks) == 40
    # seed region acks echo the seed tokens
    for t in range(32):
        assert acks[t]["payload"]["token"] == tiny_policy.vocab.label(duet.machine.ids[t])
    assert got[-1]["kind"] == "END"
    assert state is None
    file_payload = got[-1]["payload"]["duet"]
    assert file_payload["human"][:40] == list(duet.human.ids[:40])


def test_out_of_order_step_rejected(service, tiny_policy, chorales):
    duet = duet_from_parts(chorales[0], 0, 1)
    seed = labels(tiny_policy, duet.machine.ids[:32])
    state, ack = service.handle(None, wire("INIT", seed=seed))
    sid = ack["session"]
    state2, r1 = service.handle(state, wire("STEP", session=sid, step=0, token="P60"))
    assert r1["kind"] == "STEP_ACK"
    state3, err = service.handle(state2, wire("STEP", session=sid, step=3, token="P60"))
    assert err["kind"] == "ERROR" and err["payload"]["code"] == "E_ORDER"
    assert state3 is state2  # unchanged
    _, r2 = service.handle(state3, wire("STEP", session=sid, step=1, token="P60"))
    assert r2["kind"] == "STEP_ACK"


def test_unknown_token_rejected(service, tiny_policy):
    state, ack = service.handle(None, wire("INIT", seed=[]))
    sid = ack["session"]
    before_t = state.session.t
    state2, err = service.handle(state, wire("STEP", session=sid, step=0, token="P999"))
    assert err["kind"] == "ERROR" and err["payload"]["code"] == "E_TOKEN"
    assert state2.session.t == before_t


def test_mid_measure_switch_rejected(service, tiny_policy, chorales):
    duet = duet_from_parts(chorales[0], 0, 1)
    seed = labels(tiny_policy, duet.machine.ids[:32])
    state, ack = service.handle(None, wire("INIT", seed=seed))
    sid = ack["session"]
    for t in range(35):
        state, r = service.handle(state, wire("STEP", session=sid, step=t,
                                              token=tiny_policy.vocab.label(duet.human.ids[t])))
    state2, err = service.handle(state, wire("SWITCH", session=sid))
    assert err["kind"] == "ERROR" and err["payload"]["code"] == "E_BOUNDARY"
    assert state2 is state


def test_step_before_init_and_unknown_session(service):
    _, err = service.handle(None, wire("STEP", session="sX", step=0, token="REST"))
    assert err["kind"] == "ERROR" and err["payload"]["code"] == "E_STATE"
    state, _ = service.handle(None, wire("INIT", seed=[]))
    _, err2 = service.handle(state, wire("STEP", session="nope", step=0, token="REST"))
    assert err2["payload"]["code"] == "E_STATE"


def test_bad_schema_rejected(service):
    _, err = service.handle(None, {"kind": "INIT"})
    assert err["payload"]["code"] == "E_SCHEMA"
    _, err2 = service.handle(None, wire("NOPE"))
    assert err2["payload"]["code"] == "E_SCHEMA"
    _, err3 = service.handle(None, "not a dict")
    assert err3["payload"]["code"] == "E_SCHEMA"


def test_unknown_checkpoint(service):
    _, err = service.handle(None, wire("INIT", checkpoint="missing", seed=[]))
    assert err["payload"]["code"] == "E_CKPT"


def test_sessions_are_isolated(service, tiny_policy, chorales):
    duet_a = duet_from_parts(chorales[0], 0, 1)
    duet_b = duet_from_parts(chorales[1], 2, 3)
    solo_a = scripted_session(service, tiny_policy, duet_a, 48)[1]
    solo_b = scripted_session(service, tiny_policy, duet_b, 48)[1]

    # interleave the two sessions through the same service
    seed_a = labels(tiny_policy, duet_a.machine.ids[:32])
    seed_b = labels(tiny_policy, duet_b.machine.ids[:32])
    st_a, ack_a = service.handle(None, wire("INIT", checkpoint="tiny", seed=seed_a, tempo=60))
    st_b, ack_b = service.handle(None, wire("INIT", checkpoint="tiny", seed=seed_b, tempo=60))
    inter_a, inter_b = [ack_a], [ack_b]
    for t in range(48):
        st_a, ra = service.handle(st_a, wire("STEP", session=ack_a["session"], step=t,
                                             token=tiny_policy.vocab.label(duet_a.human.ids[t])))
        st_b, rb = service.handle(st_b, wire("STEP", session=ack_b["session"], step=t,
                                             token=tiny_policy.vocab.label(duet_b.human.ids[t])))
        inter_a.append(ra)
        inter_b.append(rb)
    st_a, ra = service.handle(st_a, wire("END", session=ack_a["session"]))
    st_b, rb = service.handle(st_b, wire("END", session=ack_b["session"]))
    inter_a.append(ra)
    inter_b.append(rb)

    def tokens(replies):
        return [r["payload"]["token"] for r in replies if r["kind"] == "STEP_ACK"]

    assert tokens(inter_a) == tokens(solo_a)
    assert tokens(inter_b) == tokens(solo_b)


def test_replay_reproduces_transcript(service, tiny_policy, chorales):
    duet = duet_from_parts(chorales[2], 1, 0)
    sent, got, _ = scripted_session(service, tiny_policy, duet, 96, switch_at=(48, 80))
    replayed_duet, replies = service.replay(sent)
    assert replies == got  # bitwise transcript equality
    machine = [r["payload"]["token"] for r in got if r["kind"] == "STEP_ACK"]
    replay_machine = [r["payload"]["token"] for r in replies if r["kind"] == "STEP_ACK"]
    assert machine == replay_machine
    assert list(replayed_duet.machine.ids) == got[-1]["payload"]["duet"]["machine"]


def test_replay_empty_log(service):
    duet, replies = service.replay([])
    assert len(duet) == 0 and replies == []


def test_end_reports_mean_reward_with_ensemble(chorales, tiny_policy):
    from duet.rewards import RewardEnsemble

    ens = RewardEnsemble([DuetModel.init("RWD_C", tiny_policy.config, rng_seed=3)])
    svc = DuetService({"tiny": tiny_policy}, ensemble=ens)
    duet = duet_from_parts(chorales[0], 0, 1)
    _, got, _ = scripted_session(svc, tiny_policy, duet, 48)
    payload = got[-1]["payload"]
    assert got[-1]["kind"] == "END"
    assert -1.0 <= payload["mean_reward"] <= 1.0


def test_replay_corrupt_log(service):
    with pytest.raises(ValueError):
        service.replay([wire("STEP", session="sX", step=0, token="REST")])


def free_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


async def _run_latency_session(policy, duet, port, n_steps):
    from websockets.asyncio.client import connect

    times = []
    async with connect(f"ws://127.0.0.1:{port}/ws") as ws:
        seed = [policy.vocab.label(i) for i in duet.machine.ids[:32]]
        await ws.send(json.dumps(wire("INIT", checkpoint="desk", seed=seed, tempo=60)))
        ack = json.loads(await ws.recv())
        assert ack["kind"] == "INIT_ACK"
        sid = ack["session"]
        for t in range(n_steps):
            msg = wire("STEP", session=sid, step=t,
                       token=policy.vocab.label(duet.human.ids[t]))
            t0 = time.perf_counter()
            await ws.send(json.dumps(msg))
            reply = json.loads(await ws.recv())
            times.append(time.perf_counter() - t0)
            assert reply["kind"] == "STEP_ACK", reply
        await ws.send(json.dumps(wire("END", session=sid)))
        end = json.loads(await ws.recv())
        assert end["kind"] == "END"
    return times


def test_websocket_round_trip_latency(chorales, tmp_path):
    # desk-scale checkpoint over a real loopback websocket; p99 budget 50 ms
    policy = DuetModel.init("GEN", DESK_CONFIG, rng_seed=0)
    duet = duet_from_parts(chorales[0], 0, 1)
    port = free_port()
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html>duet</html>")

    async def scenario():
        service = DuetService({"desk": policy})
        ready = asyncio.Event()
        server = asyncio.create_task(serve(service, "127.0.0.1", port, static_dir=static, ready=ready))
        await asyncio.wait_for(ready.wait(), 10)
        try:
            times = await _run_latency_session(policy, duet, port, 120)
        finally:
            server.cancel()
        return times

    times = asyncio.run(scenario())
    p99 = float(np.quantile(np.array(times), 0.99))
    assert p99 <= 0.050, f"p99 step round trip {p99 * 1e3:.1f} ms"


def test_static_assets_served(chorales, tmp_path):
    policy = DuetModel.init("GEN", DESK_CONFIG, rng_seed=0)
    port = free_port()
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html>duet ui</html>")

    async def scenario():
        service = DuetService({"desk": policy})
        ready = asyncio.Event()
        server = asyncio.create_task(serve(service, "127.0.0.1", port, static_dir=static, ready=ready))
        await asyncio.wait_for(ready.wait(), 10)

        def fetch():
            with urllib.request.urlopen(f"http://127.0.0.1:{port}/", timeout=5) as r:
                return r.read().decode()

        try:
            body = await asyncio.get_event_loop().run_in_executor(None, fetch)
        finally:
            server.cancel()
        return body

    assert "duet ui" in asyncio.run(scenario())
