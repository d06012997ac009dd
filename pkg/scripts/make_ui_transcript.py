"""Regenerate frontend/tests/fixtures/session_transcript.json.

Scripts an 8-measure live session against the deterministic desk policy
(seed 0, untrained): human line = fixture chorale 1 soprano in single-hold
labels, machine seed = alto's first two measures, one role switch queued
mid-measure 4 and sent at the measure-5 boundary (step 64). The frontend
replay test must reproduce this transcript exactly, so regenerate only when
the protocol or the policy initialization changes.
"""
import json
from pathlib import Path

from duet.corpus import fixture_corpus
from duet.models import DESK_CONFIG, DuetModel
from duet.score import Scheme, encode_part
from duet.service import DuetService


def single_hold_labels(part, length):
    seq = encode_part(list(part), Scheme.SINGLE_HOLD, length)
    return [seq.vocab.label(i) for i in seq.ids]


def main():
    policy = DuetModel.init("GEN", DESK_CONFIG, rng_seed=0)
    service = DuetService({"desk": policy})
    chorale = fixture_corpus()[0]
    human_labels = single_hold_labels(chorale.parts[0], 128)
    seed_labels = single_hold_labels(chorale.parts[1], 128)[:32]

    client, server = [], []
    state = None

    def send(msg):
        nonlocal state
        client.append(msg)
        state, reply = service.handle(state, msg)
        assert reply["kind"] != "ERROR", reply
        server.append(reply)
        return reply

    ack = send({"v": 1, "kind": "INIT",
                "payload": {"checkpoint": "desk", "seed": seed_labels, "tempo": 60}})
    sid = ack["session"]
    for t in range(128):
        if t == 64:  # queued at step 60, emitted at the measure-5 boundary
            send({"v": 1, "kind": "SWITCH", "session": sid, "payload": {"step": t}})
        send({"v": 1, "kind": "STEP", "session": sid,
              "payload": {"step": t, "token": human_labels[t]}})
    send({"v": 1, "kind": "END", "session": sid})

    out = Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures" / "session_transcript.json"
    out.write_text(json.dumps({"client": client, "server": server}, indent=1) + "\n")
    print(f"wrote {out} ({len(client)} client frames)")


if __name__ == "__main__":
    main()
