"""Online accompaniment generation and the live duet session state machine.

Decoding is greedy at inference (highest-probability token, ties to the lowest
vocabulary id); a temperature flag exists but defaults off.  A `Session` feeds
the same policy one step at a time and supports role switching at measure
boundaries: two fixed part streams exist for the whole session, and the role
decides which stream the policy fills and therefore which stream feeds the
machine branch of the state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Duet
from .models import DuetModel, WindowBatch, state_window
from .rl import rollout
from .tensor import no_grad
from .score import (
    HOLD_LABEL,
    STEPS_PER_MEASURE,
    Note,
    Scheme,
    ScoreError,
    TokenSeq,
    beat_subdivision,
    decode_lenient,
    step_states,
)

SEED_STEPS = 32


class SessionError(RuntimeError):
    pass


class BoundaryError(SessionError):
    """Role switches are only legal on measure boundaries, after the seed."""


def generate_accompaniment(policy: DuetModel, human: TokenSeq,
                           seed: list[int] | tuple[int, ...],
                           temperature: float = 0.0,
                           rng: np.random.Generator | None = None) -> TokenSeq:
    """Fill the machine part against a fixed human part; seed copied verbatim."""
    if len(human) < len(seed):
        raise ValueError(f"human part ({len(human)}) shorter than the seed ({len(seed)})")
    episode = rollout(policy, human, tuple(seed),
                      rng or np.random.default_rng(0), temperature=temperature)
    return episode.duet.machine


class Session:
    """Streamed duet against a loaded policy.

    Stream 1 starts as the human's part, stream 2 as the machine's (its first
    `len(seed)` steps preset).  `step(h)` returns the policy's token for the
    current step computed from both histories through t-1, then records the
    human token; the machine token therefore never depends on the incoming
    human token of the same step.
    """

    def __init__(self, policy: DuetModel, seed: list[int] | tuple[int, ...]):
        self.policy = policy
        self.vocab = policy.vocab
        for s in seed:
            self.vocab.label(int(s))  # validates range
        self.seed = tuple(int(s) for s in seed)
        self.stream1: list[int] = []
        self.stream2: list[int] = []
        self.policy_fills = 2
        self.t = 0
        self.ended = False

    @property
    def machine_stream(self) -> list[int]:
        return self.stream2 if self.policy_fills == 2 else self.stream1

    @property
    def human_stream(self) -> list[int]:
        return self.stream1 if self.policy_fills == 2 else self.stream2

    def machine_token(self) -> int:
        """The policy's token for the current step (pure; does not advance)."""
        if self.ended:
            raise SessionError("session has ended")
        t = self.t
        if self.policy_fills == 2 and t < len(self.seed):
            return self.seed[t]
        machine_hist = np.array(self.machine_stream, dtype=np.int64)
        human_hist = np.array(self.human_stream, dtype=np.int64)
        window = state_window(human_hist, machine_hist, t, self.policy.config.window)
        with no_grad():
            dist = self.policy.next_token_dist(WindowBatch.from_state_windows([window]))
        return int(np.argmax(dist.data[0]))

    def resolve_input_label(self, label: str) -> int:
        """Token id for an incoming label; a generic HOLD maps into the session scheme.

        Clients speak single-hold-style labels; under a multi-hold vocabulary
        HOLD resolves to the hold of whatever pitch the human stream currently
        sounds (REST if nothing does).
        """
        try:
            return self.vocab.id(label)
        except ScoreError:
            if label == HOLD_LABEL and self.vocab.scheme is Scheme.MULTI_HOLD:
                states = step_states(TokenSeq(tuple(self.human_stream), self.policy.scheme))
                pitch = states[-1][0] if states else None
                return self.vocab.rest_id if pitch is None else self.vocab.hold_token(pitch)
            raise

    def step(self, human_token: int) -> int:
        """Exchange one step: returns m_t, then records h_t and advances."""
        if self.ended:
            raise SessionError("session has ended")
        human_token = int(human_token)
        if not 0 <= human_token < self.vocab.size:
            raise ValueError(f"token id {human_token} outside vocabulary of size {self.vocab.size}")
        m = self.machine_token()
        if self.policy_fills == 2:
            self.stream2.append(m)
            self.stream1.append(human_token)
        else:
            self.stream1.append(m)
            self.stream2.append(human_token)
        self.t += 1
        return m

    def switch_roles(self) -> None:
        if self.ended:
            raise SessionError("session has ended")
        if self.t % STEPS_PER_MEASURE != 0:
            raise BoundaryError(f"switch at step {self.t} is mid-measure")
        if self.t < len(self.seed):
            raise BoundaryError("cannot switch inside the seed region")
        self.policy_fills = 1 if self.policy_fills == 2 else 2

    def end(self) -> Duet:
        """Finalize and return the duet (stream 1 = human part, 2 = machine part)."""
        self.ended = True
        return Duet(
            human=TokenSeq(tuple(self.stream1), self.policy.scheme),
            machine=TokenSeq(tuple(self.stream2), self.policy.scheme),
            beats=beat_subdivision(self.t),
            source="session",
            seed_steps=min(len(self.seed), self.t),
        )


@dataclass(frozen=True)
class Motif:
    """A repeated pitch-interval pattern: where it recurs and what it is."""

    intervals: tuple[int, ...]
    spans: tuple[tuple[int, int], ...]  # (onset step of first note, onset step of last)


def find_motifs(notes: list[Note], min_intervals: int = 3, min_occurrences: int = 2) -> list[Motif]:
    """Best-effort diagnostic: repeated interval n-grams among a part's onsets."""
    pitched = [n for n in notes if n.pitch is not None]
    if len(pitched) < min_intervals + 1:
        return []
    intervals = [b.pitch - a.pitch for a, b in zip(pitched, pitched[1:])]
    seen: dict[tuple[int, ...], list[tuple[int, int]]] = {}
    k = min_intervals
    for i in range(len(intervals) - k + 1):
        gram = tuple(intervals[i:i + k])
        span = (pitched[i].onset, pitched[i + k].onset)
        seen.setdefault(gram, []).append(span)
    motifs = [Motif(intervals=g, spans=tuple(spans))
              for g, spans in seen.items()
              if len(spans) >= min_occurrences and any(x != 0 for x in g)]
    motifs.sort(key=lambda m: (-len(m.spans), m.spans[0][0]))
    return motifs


def machine_part_notes(duet: Duet) -> list[Note]:
    return decode_lenient(duet.machine)


def duet_file_dict(duet: Duet) -> dict:
    """The duet token file payload: {"scheme", "human": [ids], "machine": [ids]}."""
    return {"scheme": duet.human.scheme.value,
            "human": list(duet.human.ids),
            "machine": list(duet.machine.ids)}


def write_duet_file(duet: Duet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(duet_file_dict(duet)) + "\n")


def read_duet_file(path: str | Path, source: str | None = None) -> Duet:
    obj = json.loads(Path(path).read_text())
    scheme = Scheme.parse(obj["scheme"])
    human = TokenSeq(tuple(int(i) for i in obj["human"]), scheme)
    machine = TokenSeq(tuple(int(i) for i in obj["machine"]), scheme)
    return Duet(human=human, machine=machine, beats=beat_subdivision(len(human)),
                source=source or str(path))
