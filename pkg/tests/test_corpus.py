import json
from collections import Counter

import numpy as np
import pytest

from duet.corpus import (
    Chorale,
    CorpusError,
    SplitConfig,
    augment,
    duet_from_parts,
    fixture_corpus,
    load_corpus,
    make_chorale,
    make_test_pairs,
    make_training_duet,
    save_corpus,
    split_corpus,
)
from duet.score import Note, Scheme, decode_part


def test_fixture_corpus_shape():
    chorales = fixture_corpus()
    assert len(chorales) == 4
    for c in chorales:
        assert len(c.parts) == 4
        assert c.length == 128


def test_load_save_round_trip(tmp_path):
    chorales = fixture_corpus()
    path = tmp_path / "corpus.jsonl"
    save_corpus(chorales, path)
    loaded = load_corpus(path)
    assert loaded == chorales


def test_load_rejects_three_parts(tmp_path):
    bad = {"id": "x", "parts": [[{"pitch": 60, "onset": 0, "dur": 4}]] * 3}
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps(bad) + "\n")
    with pytest.raises(CorpusError) as e:
        load_corpus(p)
    assert "3 parts" in str(e.value)


def test_load_rejects_bad_pitch(tmp_path):
    bad = {"id": "x", "parts": [[{"pitch": 99, "onset": 0, "dur": 4}]] * 4}
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps(bad) + "\n")
    with pytest.raises(CorpusError):
        load_corpus(p)


def test_load_rejects_overlap(tmp_path):
    part = [{"pitch": 60, "onset": 0, "dur": 4}, {"pitch": 62, "onset": 2, "dur": 4}]
    bad = {"id": "x", "parts": [part, part, part, part]}
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps(bad) + "\n")
    with pytest.raises(CorpusError) as e:
        load_corpus(p)
    assert "overlap" in str(e.value)


def test_load_empty_dir(tmp_path):
    assert load_corpus(tmp_path) == []


def test_training_duet_deterministic_under_seed():
    c = fixture_corpus()[0]
    d1 = make_training_duet(c, np.random.default_rng(42))
    d2 = make_training_duet(c, np.random.default_rng(42))
    assert d1 == d2


def test_training_duet_pair_frequencies():
    c = fixture_corpus()[0]
    rng = np.random.default_rng(0)
    counts = Counter()
    n = 10_000
    for _ in range(n):
        d = make_training_duet(c, rng)
        pair = d.source.split("[")[1].rstrip("]")
        i, j = sorted(int(x) for x in pair.split(","))
        counts[(i, j)] += 1
    assert len(counts) == 6
    for pair, k in counts.items():
        assert abs(k / n - 1 / 6) < 0.02, (pair, k / n)


def test_training_duet_on_identical_parts():
    part = [Note(60, 0, 8), Note(62, 8, 8)]
    c = make_chorale("same", [list(part) for _ in range(4)])
    d = make_training_duet(c, np.random.default_rng(3))
    assert len(d) == 16
    assert d.human == d.machine


def test_augment_no_slack():
    c = make_chorale("tight", [[Note(36, 0, 4)], [Note(81, 0, 4)], [Note(60, 0, 4)], [Note(60, 0, 4)]])
    out = augment([c])
    assert len(out) == 1 and out[0] == c


def test_augment_spanning_48_69():
    c = make_chorale("mid", [[Note(48, 0, 4)], [Note(69, 0, 4)], [Note(60, 0, 4)], [Note(60, 0, 4)]])
    out = augment([c])
    assert len(out) == 25  # k in [-12, +12]


def test_augment_empty():
    assert augment([]) == []


def test_augment_closure():
    from duet.score import transpose

    chorales = fixture_corpus()
    for aug in augment(chorales[:2]):
        if "#t" not in aug.id:
            continue
        base_id, k = aug.id.split("#t")
        src = next(c for c in chorales if c.id == base_id)
        for pa, ps in zip(aug.parts, src.parts):
            assert transpose(list(pa), -int(k)) == list(ps)


def test_test_pairs_single_chorale():
    c = fixture_corpus()[0]
    pairs = make_test_pairs([c], target=None)
    assert len(pairs) == 12
    assert all(p.seed_steps == 32 for p in pairs)
    sources = [p.source for p in pairs]
    assert len(set(sources)) == 12


def test_test_pairs_reach_460_from_37():
    chorales = fixture_corpus() * 10  # 40, take 37 with distinct ids
    synth = []
    for i, c in enumerate(chorales[:37]):
        synth.append(make_chorale(f"syn-{i:02d}", [list(p) for p in c.parts]))
    pairs = make_test_pairs(synth)
    assert len(pairs) == 460
    # base enumeration plus 16 trailing-section duets
    assert sum(1 for p in pairs if "@" in p.source) == 460 - 37 * 12
    # deterministic: same call gives identical sources
    assert [p.source for p in make_test_pairs(synth)] == [p.source for p in pairs]


def test_test_pairs_seed_region_is_machine_prefix():
    c = fixture_corpus()[0]
    pairs = make_test_pairs([c], target=None)
    d = pairs[0]
    full = duet_from_parts(c, 0, 1)
    assert d.machine.ids[:32] == full.machine.ids[:32]


def test_test_pairs_rejects_single_part():
    c = Chorale(id="broken", parts=(tuple([Note(60, 0, 4)]),), length=4)
    with pytest.raises(CorpusError):
        make_test_pairs([c], target=None)


def test_split_reproducible_and_disjoint():
    chorales = [make_chorale(f"c{i}", [[Note(60, 0, 4)]] * 4) for i in range(10)]
    cfg = SplitConfig(train_count=6, valid_count=2, test_count=2, rng_seed=11)
    a1 = split_corpus(chorales, cfg)
    a2 = split_corpus(chorales, cfg)
    assert a1 == a2
    ids = [c.id for group in a1 for c in group]
    assert sorted(ids) == sorted(c.id for c in chorales)
    with pytest.raises(CorpusError):
        split_corpus(chorales, SplitConfig(9, 2, 2, 0))


def test_duet_tokens_decode_to_source_parts():
    c = fixture_corpus()[1]
    d = duet_from_parts(c, 2, 3)
    assert decode_part(d.human) == list(c.parts[2])
    assert decode_part(d.machine) == list(c.parts[3])
    assert d.human.scheme is Scheme.MULTI_HOLD
