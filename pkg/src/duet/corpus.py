"""Chorale corpus loading, duet formation, splits, augmentation, test pairs.

The on-disk format is line-delimited JSON, one chorale per line:

    {"id": "...", "parts": [[{"pitch": 60, "onset": 0, "dur": 4}, ...] x4]}

``pitch`` may be the string "REST" for an explicit rest event; onsets and
durations are sixteenth steps.  A tiny hand-written fixture corpus ships with
the package so the whole test suite runs without the externally licensed
chorale dataset.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .score import (
    Note,
    OverlapError,
    PitchRangeError,
    Scheme,
    ScoreError,
    BeatSeq,
    TokenSeq,
    beat_subdivision,
    encode_part,
    part_length,
    transpose,
)

N_PARTS = 4
PART_NAMES = ("soprano", "alto", "tenor", "bass")
SEED_STEPS = 32
TEST_PAIR_TARGET = 460


class CorpusError(ValueError):
    def __init__(self, source: str, reason: str):
        super().__init__(f"{source}: {reason}")
        self.source = source
        self.reason = reason


@dataclass(frozen=True)
class Chorale:
    """Four aligned monophonic voices on the sixteenth grid."""

    id: str
    parts: tuple[tuple[Note, ...], ...]
    length: int

    def pitch_span(self) -> tuple[int, int] | None:
        pitches = [n.pitch for part in self.parts for n in part if n.pitch is not None]
        if not pitches:
            return None
        return min(pitches), max(pitches)


@dataclass(frozen=True)
class Duet:
    """One human/machine token pairing plus the shared beat grid."""

    human: TokenSeq
    machine: TokenSeq
    beats: BeatSeq
    source: str
    seed_steps: int = 0

    def __post_init__(self):
        if not len(self.human) == len(self.machine) == len(self.beats):
            raise CorpusError(self.source, "human, machine, beats must share one length")

    def __len__(self) -> int:
        return len(self.human)


@dataclass(frozen=True)
class SplitConfig:
    train_count: int = 327
    valid_count: int = 37
    test_count: int = 37
    rng_seed: int = 0


def make_chorale(cid: str, parts: list[list[Note]], source: str = "<memory>") -> Chorale:
    """Validate raw parts and derive the chorale length (max part end)."""
    if len(parts) != N_PARTS:
        raise CorpusError(source, f"chorale {cid!r} has {len(parts)} parts, expected {N_PARTS}")
    norm = []
    for pi, part in enumerate(parts):
        part = sorted(part, key=lambda n: n.onset)
        prev_end = 0
        for n in part:
            if n.onset < prev_end:
                raise CorpusError(source, f"chorale {cid!r} part {PART_NAMES[pi]}: overlap at onset {n.onset}")
            prev_end = n.end
        norm.append(tuple(part))
    length = max((part_length(list(p)) for p in norm), default=0)
    return Chorale(id=cid, parts=tuple(norm), length=length)


def _note_from_json(obj, source: str) -> Note:
    try:
        pitch = obj["pitch"]
        if pitch == "REST":
            pitch = None
        return Note(pitch=pitch, onset=int(obj["onset"]), dur=int(obj["dur"]))
    except (KeyError, TypeError, ScoreError) as e:
        raise CorpusError(source, f"bad note {obj!r}: {e}") from e


def _chorale_from_json(line: str, source: str) -> Chorale:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusError(source, f"invalid JSON: {e}") from e
    if not isinstance(obj, dict) or "id" not in obj or "parts" not in obj:
        raise CorpusError(source, "chorale object needs 'id' and 'parts'")
    parts = [[_note_from_json(n, source) for n in part] for part in obj["parts"]]
    return make_chorale(str(obj["id"]), parts, source=source)


def load_corpus(path: str | Path) -> list[Chorale]:
    """Load every chorale under `path` (a .jsonl file or a directory of them)."""
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix in (".jsonl", ".json"))
    elif path.exists():
        files = [path]
    else:
        raise CorpusError(str(path), "no such file or directory")
    chorales: list[Chorale] = []
    for f in files:
        for ln, line in enumerate(f.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            chorales.append(_chorale_from_json(line, source=f"{f}:{ln}"))
    return chorales


def save_corpus(chorales: list[Chorale], path: str | Path) -> None:
    def note_json(n: Note):
        return {"pitch": "REST" if n.pitch is None else n.pitch, "onset": n.onset, "dur": n.dur}

    with open(path, "w") as fh:
        for c in chorales:
            obj = {"id": c.id, "parts": [[note_json(n) for n in part] for part in c.parts]}
            fh.write(json.dumps(obj) + "\n")


def fixture_corpus() -> list[Chorale]:
    """The bundled 4-chorale fixture corpus (8 measures each, SATB)."""
    ref = resources.files("duet.fixtures").joinpath("chorales.jsonl")
    chorales = []
    for ln, line in enumerate(ref.read_text().splitlines(), start=1):
        if line.strip():
            chorales.append(_chorale_from_json(line, source=f"fixtures/chorales.jsonl:{ln}"))
    return chorales


def split_corpus(chorales: list[Chorale], config: SplitConfig) -> tuple[list[Chorale], list[Chorale], list[Chorale]]:
    """Disjoint train/valid/test partition, reproducible from the seed."""
    total = config.train_count + config.valid_count + config.test_count
    if len(chorales) != total:
        raise CorpusError("<split>", f"corpus has {len(chorales)} chorales, split wants {total}")
    order = np.random.Generator(np.random.PCG64(config.rng_seed)).permutation(len(chorales))
    shuffled = [chorales[i] for i in order]
    a = config.train_count
    b = a + config.valid_count
    return shuffled[:a], shuffled[a:b], shuffled[b:]


def augment(chorales: list[Chorale]) -> list[Chorale]:
    """All in-range transpositions of every chorale, k=0 included.

    A chorale spanning pitches [lo, hi] yields one copy per k in
    [36-lo, 81-hi]; a chorale with no pitched notes yields itself only.
    """
    from .score import PITCH_MIN, PITCH_MAX

    out: list[Chorale] = []
    for c in chorales:
        span = c.pitch_span()
        if span is None:
            out.append(c)
            continue
        lo, hi = span
        for k in range(PITCH_MIN - lo, PITCH_MAX - hi + 1):
            if k == 0:
                out.append(c)
            else:
                parts = [list(transpose(list(p), k)) for p in c.parts]
                out.append(make_chorale(f"{c.id}#t{k:+d}", parts, source=c.id))
    return out


def duet_from_parts(chorale: Chorale, human_idx: int, machine_idx: int,
                    scheme: Scheme = Scheme.MULTI_HOLD, seed_steps: int = 0,
                    start: int = 0) -> Duet:
    """Encode two voices of a chorale as an aligned duet, optionally from a later section."""
    length = chorale.length - start
    human_notes = _shift_section(chorale.parts[human_idx], start, length)
    machine_notes = _shift_section(chorale.parts[machine_idx], start, length)
    return Duet(
        human=encode_part(human_notes, scheme, length),
        machine=encode_part(machine_notes, scheme, length),
        beats=beat_subdivision(length),
        source=f"{chorale.id}[{human_idx},{machine_idx}]" + (f"@{start}" if start else ""),
        seed_steps=seed_steps,
    )


def _shift_section(part: tuple[Note, ...], start: int, length: int) -> list[Note]:
    out = []
    for n in part:
        if n.end <= start or n.onset >= start + length:
            continue
        onset = max(n.onset, start)
        end = min(n.end, start + length)
        out.append(Note(n.pitch, onset - start, end - onset))
    return out


def make_training_duet(chorale: Chorale, rng: np.random.Generator,
                       scheme: Scheme = Scheme.MULTI_HOLD) -> Duet:
    """Draw two distinct voices uniformly without replacement; first drawn is human."""
    i, j = rng.choice(N_PARTS, size=2, replace=False)
    return duet_from_parts(chorale, int(i), int(j), scheme=scheme)


def make_test_pairs(test_chorales: list[Chorale], target: int | None = TEST_PAIR_TARGET,
                    scheme: Scheme = Scheme.MULTI_HOLD) -> list[Duet]:
    """Deterministic test duets with the first two measures of the machine part as seed.

    Rule (seed-independent): enumerate all 12 ordered (human, machine) voice
    pairs per chorale, chorales in id order, pairs lexicographic.  If `target`
    exceeds that, extra duets are cut from repeated trailing sections: walk
    chorales by (length desc, id asc) and take the same ordered pairs over the
    section starting at the piece midpoint rounded up to a measure boundary
    (sections shorter than 4 measures are ineligible).  If `target` is smaller,
    the base enumeration is truncated.  `target=None` disables the rule and
    returns the plain 12-per-chorale enumeration.
    """
    eligible = [c for c in test_chorales if c.length > SEED_STEPS]
    if any(len(c.parts) < 2 for c in test_chorales):
        raise CorpusError("<test-pairs>", "chorales need at least 2 parts")
    ordered_pairs = [(i, j) for i in range(N_PARTS) for j in range(N_PARTS) if i != j]

    base: list[Duet] = []
    for c in sorted(eligible, key=lambda c: c.id):
        for i, j in ordered_pairs:
            base.append(duet_from_parts(c, i, j, scheme=scheme, seed_steps=SEED_STEPS))
    if target is None:
        return base
    if len(base) >= target:
        return base[:target]

    extras: list[Duet] = []
    sections = []
    for c in sorted(eligible, key=lambda c: (-c.length, c.id)):
        start = -(-(c.length // 2) // 16) * 16  # midpoint, rounded up to a measure
        if c.length - start >= 64:
            sections.append((c, start))
    if not sections:
        raise CorpusError("<test-pairs>", f"cannot reach {target} pairs: no section-eligible chorales")
    k = 0
    while len(base) + len(extras) < target:
        c, start = sections[k % len(sections)]
        i, j = ordered_pairs[(k // len(sections)) % len(ordered_pairs)]
        extras.append(duet_from_parts(c, i, j, scheme=scheme, seed_steps=SEED_STEPS, start=start))
        k += 1
    return base + extras
