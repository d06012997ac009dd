"""Token vocabularies and note-level <-> per-step token conversion.

Everything downstream works on a sixteenth-note grid: a part is a list of
non-overlapping :class:`Note` objects, or equivalently a :class:`TokenSeq`
holding one vocabulary id per sixteenth step.  Two encodings exist for note
durations: ``MULTI_HOLD`` gives every pitch its own hold symbol, while
``SINGLE_HOLD`` shares one ``HOLD`` symbol across pitches.  A C4 quarter note
starting at step 0 becomes ``[P60, HOLD, HOLD, HOLD]`` in the single-hold
scheme and ``[P60, P60_H, P60_H, P60_H]`` in the multi-hold scheme.

Canonical token labels ("PAD", "REST", "P60", "P60_H", "HOLD") appear verbatim
in corpus files and wire messages, so they are part of the public contract.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

PITCH_MIN = 36
PITCH_MAX = 81
STEPS_PER_BEAT = 4
STEPS_PER_MEASURE = 16

PAD_LABEL = "PAD"
REST_LABEL = "REST"
HOLD_LABEL = "HOLD"
MASK_LABEL = "MASK"


class ScoreError(ValueError):
    """Base class for score/token validation failures."""


class PitchRangeError(ScoreError):
    def __init__(self, pitch: int):
        super().__init__(f"pitch {pitch} outside playable range [{PITCH_MIN}, {PITCH_MAX}]")
        self.pitch = pitch


class OverlapError(ScoreError):
    def __init__(self, onset: int):
        super().__init__(f"overlapping or unsorted note at onset step {onset}")
        self.onset = onset


class TokenStructureError(ScoreError):
    def __init__(self, step: int, reason: str):
        super().__init__(f"bad token at step {step}: {reason}")
        self.step = step


class Scheme(enum.Enum):
    """Duration encoding: per-pitch hold symbols vs one shared hold symbol."""

    MULTI_HOLD = "MULTI_HOLD"
    SINGLE_HOLD = "SINGLE_HOLD"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        key = text.strip().upper().replace("-", "_")
        if key in ("MULTI", "MULTI_HOLD", "A"):
            return cls.MULTI_HOLD
        if key in ("SINGLE", "SINGLE_HOLD"):
            return cls.SINGLE_HOLD
        raise ScoreError(f"unknown scheme {text!r}")


@dataclass(frozen=True)
class Note:
    """One sounding event: MIDI pitch (None = explicit rest), onset step, duration in steps."""

    pitch: int | None
    onset: int
    dur: int

    def __post_init__(self):
        if self.onset < 0:
            raise ScoreError(f"negative onset {self.onset}")
        if self.dur < 1:
            raise ScoreError(f"duration {self.dur} < 1 at onset {self.onset}")
        if self.pitch is not None and not PITCH_MIN <= self.pitch <= PITCH_MAX:
            raise PitchRangeError(self.pitch)

    @property
    def end(self) -> int:
        return self.onset + self.dur


@dataclass(frozen=True)
class Vocabulary:
    """Dense token id space for one scheme.

    Ordering is fixed: PAD, REST, then ascending pitches (pitch/pitch-hold
    interleaved for MULTI_HOLD), then the shared HOLD last for SINGLE_HOLD.
    ``mask_id`` is one past the dense range: it is a model-input symbol for
    Cloze-style target spans, never a distribution outcome, so it does not
    count toward ``size``.
    """

    scheme: Scheme
    labels: tuple[str, ...]
    _index: dict[str, int] = field(repr=False, hash=False, compare=False, default_factory=dict)

    def __post_init__(self):
        self._index.update({lab: i for i, lab in enumerate(self.labels)})

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def rest_id(self) -> int:
        return 1

    @property
    def mask_id(self) -> int:
        return len(self.labels)

    def id(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ScoreError(f"unknown token label {label!r} for {self.scheme.value}") from None

    def label(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.labels):
            raise ScoreError(f"token id {token_id} outside vocabulary of size {self.size}")
        return self.labels[token_id]

    def pitch_token(self, pitch: int) -> int:
        if not PITCH_MIN <= pitch <= PITCH_MAX:
            raise PitchRangeError(pitch)
        return self.id(f"P{pitch}")

    def hold_token(self, pitch: int | None = None) -> int:
        if self.scheme is Scheme.MULTI_HOLD:
            if pitch is None:
                raise ScoreError("multi-hold scheme needs the pitch of the hold")
            return self.id(f"P{pitch}_H")
        return self.id(HOLD_LABEL)

    def is_hold(self, token_id: int) -> bool:
        lab = self.label(token_id)
        return lab == HOLD_LABEL or lab.endswith("_H")

    def token_pitch(self, token_id: int) -> int | None:
        """MIDI pitch named by an onset or hold token; None for PAD/REST/HOLD."""
        lab = self.label(token_id)
        if lab in (PAD_LABEL, REST_LABEL, HOLD_LABEL):
            return None
        return int(lab[1:-2] if lab.endswith("_H") else lab[1:])


@lru_cache(maxsize=None)
def build_vocabulary(scheme: Scheme) -> Vocabulary:
    labels = [PAD_LABEL, REST_LABEL]
    if scheme is Scheme.MULTI_HOLD:
        for p in range(PITCH_MIN, PITCH_MAX + 1):
            labels.append(f"P{p}")
            labels.append(f"P{p}_H")
    else:
        labels.extend(f"P{p}" for p in range(PITCH_MIN, PITCH_MAX + 1))
        labels.append(HOLD_LABEL)
    return Vocabulary(scheme=scheme, labels=tuple(labels))


@dataclass(frozen=True)
class TokenSeq:
    """A part as per-step vocabulary ids."""

    ids: tuple[int, ...]
    scheme: Scheme

    def __post_init__(self):
        vocab = build_vocabulary(self.scheme)
        for t, i in enumerate(self.ids):
            if not 0 <= i < vocab.size:
                raise TokenStructureError(t, f"id {i} outside vocabulary of size {vocab.size}")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def vocab(self) -> Vocabulary:
        return build_vocabulary(self.scheme)


@dataclass(frozen=True)
class BeatSeq:
    """Per-step beat subdivision indices, the periodic pattern 1,2,3,4,1,2,3,4..."""

    values: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.values)


def beat_subdivision(length: int) -> BeatSeq:
    if length < 0:
        raise ScoreError(f"negative length {length}")
    return BeatSeq(values=tuple(beat_at(t) for t in range(length)))


def beat_at(t: int) -> int:
    """Subdivision index of step t; defined for any integer so windows may run off either end."""
    return (t % STEPS_PER_BEAT) + 1


def _check_part(notes: list[Note]) -> None:
    prev_end = 0
    for n in notes:
        if n.onset < prev_end:
            raise OverlapError(n.onset)
        prev_end = n.end


def encode_part(notes: list[Note], scheme: Scheme, length: int) -> TokenSeq:
    """Encode a sorted, non-overlapping part into per-step tokens.

    Each pitched note emits its pitch token at the onset and duration-1 hold
    tokens; gaps and explicit rest notes emit REST (rests are never held).
    """
    _check_part(notes)
    vocab = build_vocabulary(scheme)
    ids = [vocab.rest_id] * length
    for n in notes:
        if n.end > length:
            raise ScoreError(f"note at onset {n.onset} runs past length {length}")
        if n.pitch is None:
            continue
        ids[n.onset] = vocab.pitch_token(n.pitch)
        hold = vocab.hold_token(n.pitch)
        for t in range(n.onset + 1, n.end):
            ids[t] = hold
    return TokenSeq(ids=tuple(ids), scheme=scheme)


def decode_part(tokens: TokenSeq) -> list[Note]:
    """Strict inverse of :func:`encode_part`; canonical output has pitched notes only.

    Every non-hold pitch token begins a new note (so re-struck pitches decode
    to separate notes); a hold that does not continue a matching onset raises
    :class:`TokenStructureError` at the offending step.
    """
    vocab = tokens.vocab
    notes: list[Note] = []
    cur_pitch: int | None = None
    cur_onset = 0
    cur_dur = 0

    def flush():
        nonlocal cur_pitch
        if cur_pitch is not None:
            notes.append(Note(cur_pitch, cur_onset, cur_dur))
            cur_pitch = None

    for t, i in enumerate(tokens.ids):
        lab = vocab.label(i)
        if lab == HOLD_LABEL:
            if cur_pitch is None:
                raise TokenStructureError(t, "HOLD with no sounding pitch")
            cur_dur += 1
        elif lab.endswith("_H"):
            p = vocab.token_pitch(i)
            if cur_pitch != p:
                raise TokenStructureError(t, f"hold of P{p} does not continue its onset")
            cur_dur += 1
        elif lab in (PAD_LABEL, REST_LABEL):
            flush()
        else:
            flush()
            cur_pitch = vocab.token_pitch(i)
            cur_onset = t
            cur_dur = 1
    flush()
    return notes


def step_states(tokens: TokenSeq) -> list[tuple[int | None, bool]]:
    """Per-step (sounding pitch, is_onset) under a lenient reading.

    Generated token streams may violate hold grammar; here an orphan
    pitch-hold re-sounds its pitch as a fresh onset and an orphan shared HOLD
    is silence.  On grammar-valid sequences this agrees with
    :func:`decode_part` exactly.
    """
    vocab = tokens.vocab
    out: list[tuple[int | None, bool]] = []
    sounding: int | None = None
    for i in tokens.ids:
        lab = vocab.label(i)
        if lab in (PAD_LABEL, REST_LABEL):
            sounding = None
            out.append((None, False))
        elif lab == HOLD_LABEL:
            out.append((sounding, False))
        elif lab.endswith("_H"):
            p = vocab.token_pitch(i)
            out.append((p, p != sounding))
            sounding = p
        else:
            p = vocab.token_pitch(i)
            out.append((p, True))
            sounding = p
    return out


def decode_lenient(tokens: TokenSeq) -> list[Note]:
    """Decode under the lenient reading of :func:`step_states`; never raises."""
    notes: list[Note] = []
    cur: tuple[int, int, int] | None = None  # pitch, onset, dur
    for t, (pitch, is_onset) in enumerate(step_states(tokens)):
        if cur is not None and (pitch != cur[0] or is_onset):
            notes.append(Note(cur[0], cur[1], cur[2]))
            cur = None
        if pitch is not None:
            if is_onset or cur is None:
                cur = (pitch, t, 1)
            else:
                cur = (cur[0], cur[1], cur[2] + 1)
    if cur is not None:
        notes.append(Note(cur[0], cur[1], cur[2]))
    return notes


def convert(tokens: TokenSeq, scheme: Scheme) -> TokenSeq:
    """Re-express a token sequence in another scheme, preserving re-strikes.

    Lenient on input (see :func:`step_states`), so generated sequences always
    convert; on grammar-valid input the conversion is exact and decodes to
    the same note list.
    """
    if tokens.scheme is scheme:
        return tokens
    src_vocab = tokens.vocab
    vocab = build_vocabulary(scheme)
    ids: list[int] = []
    for i, (pitch, is_onset) in zip(tokens.ids, step_states(tokens)):
        if pitch is None:
            ids.append(vocab.pad_id if src_vocab.label(i) == PAD_LABEL else vocab.rest_id)
        elif is_onset:
            ids.append(vocab.pitch_token(pitch))
        else:
            ids.append(vocab.hold_token(pitch))
    return TokenSeq(ids=tuple(ids), scheme=scheme)


def transpose(notes: list[Note], semitones: int) -> list[Note]:
    """Shift every pitch by `semitones`; rests and rhythm are untouched."""
    out = []
    for n in notes:
        if n.pitch is None:
            out.append(n)
        else:
            out.append(Note(n.pitch + semitones, n.onset, n.dur))
    return out


def part_length(notes: list[Note]) -> int:
    """End of the last event, i.e. the natural sixteenth-step length of a part."""
    return max((n.end for n in notes), default=0)
