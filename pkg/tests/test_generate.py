import numpy as np
import pytest

from duet.corpus import duet_from_parts, make_test_pairs
from duet.generate import (
    BoundaryError,
    Session,
    SessionError,
    find_motifs,
    generate_accompaniment,
    read_duet_file,
    write_duet_file,
)
from duet.score import Note, Scheme, TokenSeq, encode_part


def test_generate_deterministic(chorales, tiny_policy):
    duet = duet_from_parts(chorales[0], 0, 1)
    seed = tuple(duet.machine.ids[:32])
    a = generate_accompaniment(tiny_policy, duet.human, seed)
    b = generate_accompaniment(tiny_policy, duet.human, seed)
    assert a == b
    assert len(a) == len(duet.human)


def test_generate_copies_seed_verbatim(chorales, tiny_policy):
    duet = duet_from_parts(chorales[2], 1, 2)
    seed = tuple(duet.machine.ids[:32])
    out = generate_accompaniment(tiny_policy, duet.human, seed)
    assert out.ids[:32] == seed


def test_generate_rejects_short_human(tiny_policy):
    human = TokenSeq((1,) * 8, Scheme.MULTI_HOLD)
    with pytest.raises(ValueError):
        generate_accompaniment(tiny_policy, human, (1,) * 32)


def test_streaming_equals_batch_on_fixture_pairs(chorales, tiny_policy):
    pairs = make_test_pairs([chorales[0]], target=None)
    for duet in pairs[:4]:
        seed = tuple(duet.machine.ids[:duet.seed_steps])
        batch_out = generate_accompaniment(tiny_policy, duet.human, seed)
        sess = Session(tiny_policy, seed)
        streamed = [sess.step(h) for h in duet.human.ids]
        assert tuple(streamed) == batch_out.ids


def test_first_post_seed_step_context(chorales, tiny_policy):
    # at t=32 with a 64-step window the context is exactly 32 PADs followed by
    # the 32 seed steps (machine side) / 32 exchanged human tokens (human side)
    from duet.models import state_window

    duet = duet_from_parts(chorales[1], 0, 3)
    seed = tuple(duet.machine.ids[:32])
    sess = Session(tiny_policy, seed)
    for h in duet.human.ids[:32]:
        sess.step(h)
    m_hist = np.array(sess.machine_stream)
    h_hist = np.array(sess.human_stream)
    window = state_window(h_hist, m_hist, 32, 64)
    assert (window.machine_ids[:32] == 0).all() and (window.human_ids[:32] == 0).all()
    assert tuple(window.machine_ids[32:]) == seed
    assert tuple(window.human_ids[32:]) == duet.human.ids[:32]
    # and the session's own token depends on nothing else
    sess_b = Session(tiny_policy, seed)
    for h in duet.human.ids[:32]:
        sess_b.step(h)
    assert sess_b.machine_token() == sess.machine_token()


def test_causality_future_human_tokens_ignored(chorales, tiny_policy):
    duet = duet_from_parts(chorales[0], 0, 1)
    seed = tuple(duet.machine.ids[:32])
    mutated_ids = list(duet.human.ids)
    for t in range(64, len(mutated_ids)):
        mutated_ids[t] = 1  # REST from step 64 on
    mutated = TokenSeq(tuple(mutated_ids), Scheme.MULTI_HOLD)
    a = generate_accompaniment(tiny_policy, duet.human, seed)
    b = generate_accompaniment(tiny_policy, mutated, seed)
    assert a.ids[:64] == b.ids[:64]
    assert a.ids[64] == b.ids[64]  # m_64 depends on human tokens through 63 only


def test_session_step_after_end(tiny_policy):
    sess = Session(tiny_policy, (0,) * 32)
    sess.end()
    with pytest.raises(SessionError):
        sess.step(1)


def test_session_rejects_bad_token(tiny_policy):
    sess = Session(tiny_policy, ())
    with pytest.raises(ValueError):
        sess.step(94)


def test_switch_roles_measure_boundary_only(chorales, tiny_policy):
    duet = duet_from_parts(chorales[0], 0, 1)
    sess = Session(tiny_policy, tuple(duet.machine.ids[:32]))
    for h in duet.human.ids[:39]:
        sess.step(h)
    with pytest.raises(BoundaryError):
        sess.switch_roles()  # step 39, mid-measure
    for h in duet.human.ids[39:48]:
        sess.step(h)
    sess.switch_roles()  # step 48 = measure boundary
    assert sess.policy_fills == 1


def test_switch_rejected_inside_seed(tiny_policy):
    sess = Session(tiny_policy, (0,) * 32)
    with pytest.raises(BoundaryError):
        sess.switch_roles()  # t=0 is a boundary but inside the seed


def test_double_switch_is_identity(chorales, tiny_policy):
    duet = duet_from_parts(chorales[0], 0, 1)
    seed = tuple(duet.machine.ids[:32])

    def run(switches):
        sess = Session(tiny_policy, seed)
        out = []
        for t, h in enumerate(duet.human.ids):
            if t in switches:
                sess.switch_roles()
                if t in switches and switches.count(t) == 2:
                    sess.switch_roles()
            out.append(sess.step(h))
        return out, sess

    base, _ = run([])
    double, sess = run([48, 48])
    assert double == base
    assert sess.policy_fills == 2


def test_switch_scenario_measures_6_to_10(chorales, tiny_policy):
    # switch at measure 6 (step 80), back at measure 10 (step 144 > fixture length
    # so use 96): the policy fills stream 1 in between, history preserved
    duet = duet_from_parts(chorales[0], 0, 1)
    sess = Session(tiny_policy, tuple(duet.machine.ids[:32]))
    for t, h in enumerate(duet.human.ids):
        if t == 80 or t == 96:
            sess.switch_roles()
        sess.step(h)
    final = sess.end()
    assert len(final.human) == 128 and len(final.machine) == 128
    # during [80, 96) the human token went to stream 2 (the original machine part)
    assert final.machine.ids[80:96] == duet.human.ids[80:96]


def test_duet_file_round_trip(tmp_path, chorales):
    duet = duet_from_parts(chorales[3], 2, 0)
    p = tmp_path / "duet.json"
    write_duet_file(duet, p)
    back = read_duet_file(p)
    assert back.human == duet.human
    assert back.machine == duet.machine


def test_find_motifs_detects_repetition():
    # the same 4-note shape (intervals +2, +2, -4) three times, transposed
    notes = []
    t = 0
    for base in (60, 65, 60):
        for off in (0, 2, 4, 0):
            notes.append(Note(base + off, t, 2))
            t += 2
    motifs = find_motifs(notes, min_intervals=3)
    assert motifs
    assert motifs[0].intervals == (2, 2, -4)
    assert len(motifs[0].spans) >= 3


def test_find_motifs_empty_and_flat():
    assert find_motifs([]) == []
    flat = [Note(60, i * 2, 2) for i in range(10)]
    assert all(any(x != 0 for x in m.intervals) for m in find_motifs(flat))
