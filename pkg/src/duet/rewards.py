"""Per-step scalar rewards from the model ensemble plus the repetition rule.

Each generated step gets: the probability every ensemble member assigns to the
token that was actually played (view (a) members score it as next-token
probability given the pre-context; span members score it at position 0 of a
window anchored at the step), their weighted mean, and a -1 penalty when the
same pitch has been sounding for more than 16 consecutive steps.  Rewards are
probabilities, not log-probabilities, so totals stay in [-1, 1].
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .corpus import Duet
from .models import ContextView, DuetModel, WindowBatch, span_context, state_window
from .score import Scheme, TokenSeq, convert, step_states
from .tensor import no_grad

REPETITION_RUN_LIMIT = 16  # steps; one full measure


@dataclass(frozen=True)
class RewardBreakdown:
    """Everything that went into one step's reward, dispersion inspectable."""

    step: int
    model_probs: tuple[float, ...]
    model_reward: float
    rule_penalty: int
    total: float


class EnsembleError(ValueError):
    pass


KIND_FOR_VIEW = {"RWD_A": ContextView.JOINT_PRE, "RWD_B": ContextView.JOINT_PREPOST,
                 "RWD_C": ContextView.HORIZONTAL, "RWD_D": ContextView.VERTICAL}


class RewardEnsemble:
    """Loaded reward models with their mixing weights (uniform by default)."""

    def __init__(self, models: list[DuetModel], weights: list[float] | None = None):
        if not models:
            raise EnsembleError("ensemble needs at least one model")
        for m in models:
            if m.kind not in KIND_FOR_VIEW:
                raise EnsembleError(f"model kind {m.kind} is not a reward model")
        if weights is None:
            weights = [1.0 / len(models)] * len(models)
        w = np.asarray(weights, dtype=np.float64)
        if len(w) != len(models) or (w < 0).any() or abs(w.sum() - 1.0) > 1e-6:
            raise EnsembleError("weights must be non-negative and sum to 1")
        self.models = models
        self.weights = w

    @classmethod
    def load(cls, directory: str | Path, weights: list[float] | None = None) -> "RewardEnsemble":
        paths = sorted(Path(directory).glob("*.ckpt"))
        if not paths:
            raise EnsembleError(f"no .ckpt files under {directory}")
        return cls([DuetModel.from_checkpoint(load_checkpoint(p)) for p in paths], weights)

    def __len__(self) -> int:
        return len(self.models)


def repetition_penalty(machine: TokenSeq, t: int, limit: int = REPETITION_RUN_LIMIT) -> int:
    """-1 once one pitch has sounded at every step of a run longer than `limit`."""
    if not 0 <= t < len(machine):
        raise IndexError(f"step {t} outside part of length {len(machine)}")
    return int(repetition_penalties(machine)[t])


def repetition_penalties(machine: TokenSeq, limit: int = REPETITION_RUN_LIMIT) -> np.ndarray:
    """Vector of 0/-1 penalties for every step; rest runs are exempt."""
    out = np.zeros(len(machine), dtype=np.int64)
    run_pitch, run_len = None, 0
    for t, (pitch, _) in enumerate(step_states(machine)):
        if pitch is not None and pitch == run_pitch:
            run_len += 1
        else:
            run_pitch, run_len = pitch, 1
        if pitch is not None and run_len > limit:
            out[t] = -1
    return out


def _prob_arrays(ensemble: RewardEnsemble, duet: Duet, ts: list[int]) -> np.ndarray:
    """(len(ts), n_models) probability each member assigns to the played tokens."""
    h_multi = np.asarray(duet.human.ids, dtype=np.int64)
    m_multi = np.asarray(duet.machine.ids, dtype=np.int64)
    h_single = np.asarray(convert(duet.human, Scheme.SINGLE_HOLD).ids, dtype=np.int64)
    m_single = np.asarray(convert(duet.machine, Scheme.SINGLE_HOLD).ids, dtype=np.int64)
    probs = np.zeros((len(ts), len(ensemble.models)), dtype=np.float64)
    rows = np.arange(len(ts))
    for k, model in enumerate(ensemble.models):
        view = KIND_FOR_VIEW[model.kind]
        if view is ContextView.JOINT_PRE:
            batch = WindowBatch.from_state_windows(
                [state_window(h_multi, m_multi, t, model.config.window) for t in ts])
            with no_grad():
                dist = model.next_token_dist(batch)
            probs[:, k] = dist.data[rows, m_multi[ts]]
        else:
            contexts = [span_context(h_single, m_single, len(duet), t, view, model.config)
                        for t in ts]
            with no_grad():
                dists = model.span_dists(WindowBatch.from_contexts(contexts))
            probs[:, k] = dists.data[rows, 0, m_single[ts]]
    return probs


def model_reward(ensemble: RewardEnsemble, duet: Duet, t: int) -> RewardBreakdown:
    """Weighted-mean model probability for step t; rule penalty not yet applied."""
    probs = _prob_arrays(ensemble, duet, [t])[0]
    mr = float(probs @ ensemble.weights)
    return RewardBreakdown(step=t, model_probs=tuple(float(p) for p in probs),
                           model_reward=mr, rule_penalty=0, total=mr)


def total_reward(ensemble: RewardEnsemble, duet: Duet, t: int) -> RewardBreakdown:
    partial = model_reward(ensemble, duet, t)
    penalty = repetition_penalty(duet.machine, t)
    return RewardBreakdown(step=t, model_probs=partial.model_probs,
                           model_reward=partial.model_reward,
                           rule_penalty=penalty, total=partial.model_reward + penalty)


def score_episode(ensemble: RewardEnsemble, duet: Duet,
                  start: int | None = None) -> list[RewardBreakdown]:
    """Breakdowns for every generated (non-seed) step, batched per model.

    Numerically identical to calling total_reward step by step.
    """
    start = duet.seed_steps if start is None else start
    ts = list(range(start, len(duet)))
    if not ts:
        return []
    probs = _prob_arrays(ensemble, duet, ts)
    penalties = repetition_penalties(duet.machine)
    out = []
    for i, t in enumerate(ts):
        mr = float(probs[i] @ ensemble.weights)
        pen = int(penalties[t])
        out.append(RewardBreakdown(step=t, model_probs=tuple(float(p) for p in probs[i]),
                                   model_reward=mr, rule_penalty=pen, total=mr + pen))
    return out
