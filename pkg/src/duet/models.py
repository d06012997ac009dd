"""Generation, reward-view, and value networks over token windows.

One trunk shape serves everything: two embedded note branches (human and
machine) each run through stacked bi-directional GRUs, a beat branch, a
projection into the summarizer width, then a temporal context summarizer
(max-pool + attention, the attention query derived from the beat feature of
the predicted step).  The generation model emits one next-token distribution;
span reward models emit one distribution per target position, every position
conditioned on the masked context only.

Context views:
  A  joint modeling with pre-context only (generation-shaped),
  B  joint modeling with pre- and post-context, target span masked,
  C  horizontal: machine part only, human side blanked to PAD,
  D  vertical: human part only, machine side PAD outside the masked span.

Views A pairs with the multi-hold scheme, B/C/D with single-hold.  MASK is a
model-input symbol (one extra embedding row past the vocabulary); output
distributions are always over the plain vocabulary.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .checkpoint import Checkpoint, save_checkpoint
from .corpus import Duet
from .score import Scheme, beat_at, build_vocabulary, convert
from .tensor import Tensor


class ContextView(enum.Enum):
    JOINT_PRE = "a"
    JOINT_PREPOST = "b"
    HORIZONTAL = "c"
    VERTICAL = "d"

    @property
    def scheme(self) -> Scheme:
        return Scheme.MULTI_HOLD if self is ContextView.JOINT_PRE else Scheme.SINGLE_HOLD

    @property
    def model_kind(self) -> str:
        return {"a": "RWD_A", "b": "RWD_B", "c": "RWD_C", "d": "RWD_D"}[self.value]


@dataclass(frozen=True)
class ModelConfig:
    """Network and window geometry; every free size choice lives here."""

    note_embed: int = 32
    beat_embed: int = 8
    hidden: int = 64
    layers: int = 2
    summary: int = 128
    window: int = 64  # generation pre-context length L
    pre: int = 32     # span-model pre-context
    delta: int = 16   # span length
    post: int = 32    # span-model post-context

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("note_embed", "beat_embed", "hidden", "layers", "summary",
                 "window", "pre", "delta", "post")}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


DEFAULT_CONFIG = ModelConfig()
# Sized for test suites and laptop-scale training runs.
DESK_CONFIG = ModelConfig(note_embed=16, beat_embed=4, hidden=32, layers=1,
                          summary=64, window=32, pre=32, delta=16, post=32)


@dataclass(frozen=True)
class StateWindow:
    """Pre-context state for one generation step: both parts over [t-L, t-1]."""

    human_ids: np.ndarray
    machine_ids: np.ndarray
    beats: np.ndarray
    beat_t: int


@dataclass(frozen=True)
class WindowedContext:
    """Masked fixed-geometry context for the span reward views."""

    view: ContextView
    human_ids: np.ndarray
    machine_ids: np.ndarray
    beats: np.ndarray
    target_start: int
    target_beats: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class ModelOutput:
    """Per-position distributions; invalid positions (past the piece end) are flagged."""

    probs: np.ndarray  # (positions, V)
    valid: np.ndarray  # (positions,) bool


@dataclass
class WindowBatch:
    human_ids: np.ndarray   # (B, W)
    machine_ids: np.ndarray  # (B, W)
    beats: np.ndarray        # (B, W) values 1..4
    query_beats: np.ndarray  # (B,) beat of the (first) predicted step
    target_beats: np.ndarray | None = None  # (B, delta) for span models
    valid: np.ndarray | None = None         # (B, delta) bool

    @classmethod
    def from_state_windows(cls, windows: list[StateWindow]) -> "WindowBatch":
        return cls(
            human_ids=np.stack([w.human_ids for w in windows]),
            machine_ids=np.stack([w.machine_ids for w in windows]),
            beats=np.stack([w.beats for w in windows]),
            query_beats=np.array([w.beat_t for w in windows], dtype=np.int64),
        )

    @classmethod
    def from_contexts(cls, contexts: list[WindowedContext]) -> "WindowBatch":
        return cls(
            human_ids=np.stack([c.human_ids for c in contexts]),
            machine_ids=np.stack([c.machine_ids for c in contexts]),
            beats=np.stack([c.beats for c in contexts]),
            query_beats=np.array([beat_at(c.target_start) for c in contexts], dtype=np.int64),
            target_beats=np.stack([c.target_beats for c in contexts]),
            valid=np.stack([c.valid for c in contexts]),
        )


def _window_ids(ids: np.ndarray, lo: int, hi: int, pad_id: int) -> np.ndarray:
    """ids[lo:hi] with PAD where the range runs off either end."""
    out = np.full(hi - lo, pad_id, dtype=np.int64)
    a, b = max(lo, 0), min(hi, len(ids))
    if a < b:
        out[a - lo:b - lo] = ids[a:b]
    return out


def state_window(human_ids: np.ndarray, machine_ids: np.ndarray, t: int, length: int) -> StateWindow:
    """The generation state at step t: both parts clipped to the last `length` steps."""
    pad = build_vocabulary(Scheme.MULTI_HOLD).pad_id  # PAD id is 0 in both schemes
    return StateWindow(
        human_ids=_window_ids(human_ids, t - length, t, pad),
        machine_ids=_window_ids(machine_ids, t - length, t, pad),
        beats=np.array([beat_at(s) for s in range(t - length, t)], dtype=np.int64),
        beat_t=beat_at(t),
    )


def mask_context(duet: Duet, t: int, view: ContextView,
                 config: ModelConfig = DEFAULT_CONFIG) -> StateWindow | WindowedContext:
    """Build the input context a given view sees for the step (or span) at t.

    View A gets the plain pre-context state window in the duet's own scheme;
    B/C/D get the 32/16/32 masked window geometry in the single-hold scheme,
    with PAD beyond the sequence ends.
    """
    if not 0 <= t < len(duet):
        raise IndexError(f"step {t} outside duet of length {len(duet)}")
    if view is ContextView.JOINT_PRE:
        h = np.asarray(duet.human.ids, dtype=np.int64)
        m = np.asarray(duet.machine.ids, dtype=np.int64)
        return state_window(h, m, t, config.window)

    h = np.asarray(convert(duet.human, Scheme.SINGLE_HOLD).ids, dtype=np.int64)
    m = np.asarray(convert(duet.machine, Scheme.SINGLE_HOLD).ids, dtype=np.int64)
    return span_context(h, m, len(duet), t, view, config)


def span_context(human_ids: np.ndarray, machine_ids: np.ndarray, length: int,
                 t: int, view: ContextView, config: ModelConfig = DEFAULT_CONFIG) -> WindowedContext:
    """Span-view context from pre-converted single-hold id arrays."""
    vocab = build_vocabulary(Scheme.SINGLE_HOLD)
    pad, mask = vocab.pad_id, vocab.mask_id
    lo, hi = t - config.pre, t + config.delta + config.post
    hw = _window_ids(human_ids, lo, hi, pad)
    mw = _window_ids(machine_ids, lo, hi, pad)
    if view is ContextView.HORIZONTAL:
        hw = np.full_like(hw, pad)
    if view is ContextView.VERTICAL:
        mw = np.full_like(mw, pad)
    mw[config.pre:config.pre + config.delta] = mask
    return WindowedContext(
        view=view,
        human_ids=hw,
        machine_ids=mw,
        beats=np.array([beat_at(s) for s in range(lo, hi)], dtype=np.int64),
        target_start=t,
        target_beats=np.array([beat_at(t + j) for j in range(config.delta)], dtype=np.int64),
        valid=np.array([t + j < length for j in range(config.delta)], dtype=bool),
    )


class DuetModel:
    """One network instance: parameters plus the forward passes it supports.

    kind GEN / RWD_A -> next-token distribution (GEN also carries the value
    head); RWD_B/C/D -> per-position span distributions.
    """

    def __init__(self, kind: str, config: ModelConfig, params: dict[str, Tensor], rng_seed: int = 0):
        self.kind = kind
        self.config = config
        self.params = params
        self.rng_seed = rng_seed
        self.scheme = Scheme.MULTI_HOLD if kind in ("GEN", "RWD_A") else Scheme.SINGLE_HOLD
        self.vocab = build_vocabulary(self.scheme)

    # -- construction -------------------------------------------------------

    @classmethod
    def init(cls, kind: str, config: ModelConfig, rng_seed: int) -> "DuetModel":
        rng = np.random.default_rng(rng_seed)
        scheme = Scheme.MULTI_HOLD if kind in ("GEN", "RWD_A") else Scheme.SINGLE_HOLD
        v_in = build_vocabulary(scheme).size + 1  # extra MASK row
        v_out = build_vocabulary(scheme).size
        c = config
        p: dict[str, Tensor] = {
            "emb_h": T.normal_init(rng, (v_in, c.note_embed)),
            "emb_m": T.normal_init(rng, (v_in, c.note_embed)),
            "emb_beat": T.normal_init(rng, (4, c.beat_embed)),
        }
        for br in ("h", "m"):
            d_in = c.note_embed
            for l in range(c.layers):
                for dr in ("f", "b"):
                    p[f"gru{l}_{br}_wx_{dr}"] = T.uniform_init(rng, (d_in, 3 * c.hidden), d_in)
                    p[f"gru{l}_{br}_wh_{dr}"] = T.uniform_init(rng, (c.hidden, 3 * c.hidden), c.hidden)
                    p[f"gru{l}_{br}_b_{dr}"] = T.zeros_init((3 * c.hidden,))
                d_in = 2 * c.hidden
        feat = 4 * c.hidden + c.beat_embed
        p["proj_w"] = T.uniform_init(rng, (feat, c.summary), feat)
        p["proj_b"] = T.zeros_init((c.summary,))
        p["query_w"] = T.uniform_init(rng, (c.beat_embed, c.summary), c.beat_embed)
        p["query_b"] = T.zeros_init((c.summary,))
        p["out_w"] = T.uniform_init(rng, (2 * c.summary + c.beat_embed, v_out), 2 * c.summary + c.beat_embed)
        p["out_b"] = T.zeros_init((v_out,))
        if kind == "GEN":
            p["val_w1"] = T.uniform_init(rng, (2 * c.summary, 64), 2 * c.summary)
            p["val_b1"] = T.zeros_init((64,))
            p["val_w2"] = T.uniform_init(rng, (64, 1), 64)
            p["val_b2"] = T.zeros_init((1,))
        return cls(kind, config, p, rng_seed)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "DuetModel":
        config = ModelConfig.from_dict(ckpt.config)
        model = cls(ckpt.kind, config, ckpt.tensors(), ckpt.rng_seed)
        if model.scheme.value != ckpt.scheme:
            raise ValueError(f"checkpoint scheme {ckpt.scheme} does not fit kind {ckpt.kind}")
        return model

    def save(self, path, metadata: dict | None = None) -> None:
        save_checkpoint(path, self.kind, self.scheme.value, self.config.to_dict(),
                        self.params, self.rng_seed, metadata)

    def clone_as(self, kind: str) -> "DuetModel":
        """Copy parameters into a new model of another generation-shaped kind."""
        rng = np.random.default_rng(self.rng_seed)
        fresh = DuetModel.init(kind, self.config, self.rng_seed)
        for name, p in self.params.items():
            if name in fresh.params:
                fresh.params[name] = Tensor(p.data.copy(), requires_grad=True)
        return fresh

    # -- forward passes ------------------------------------------------------

    def _summary(self, batch: WindowBatch) -> tuple[Tensor, Tensor]:
        """Trunk: (summary (B, 2S), beat feature of the predicted step (B, be))."""
        p, c = self.params, self.config
        he = T.embed(p["emb_h"], batch.human_ids)
        me = T.embed(p["emb_m"], batch.machine_ids)
        hf = T.bigru(he, self._gru_params("h"))
        mf = T.bigru(me, self._gru_params("m"))
        be = T.embed(p["emb_beat"], batch.beats - 1)
        x = T.tanh(T.affine(T.concat([hf, mf, be], axis=-1), p["proj_w"], p["proj_b"]))
        qb = T.embed(p["emb_beat"], batch.query_beats - 1)
        q = T.tanh(T.affine(qb, p["query_w"], p["query_b"]))
        return T.temporal_context_summarize(x, q), qb

    def _gru_params(self, branch: str) -> list[dict[str, Tensor]]:
        p = self.params
        return [{f"{k}_{dr}": p[f"gru{l}_{branch}_{k}_{dr}"] for k in ("wx", "wh", "b") for dr in ("f", "b")}
                for l in range(self.config.layers)]

    def next_token_dist(self, batch: WindowBatch) -> Tensor:
        """(B, V) next-token distributions for generation-shaped models."""
        if self.kind not in ("GEN", "RWD_A"):
            raise ValueError(f"{self.kind} is a span model; use span_dists")
        p = self.params
        s, qb = self._summary(batch)
        return T.affine_softmax(T.concat([s, qb], axis=-1), p["out_w"], p["out_b"])

    def policy_value(self, batch: WindowBatch) -> tuple[Tensor, Tensor]:
        """Next-token distribution plus state value; the value branch sees a
        detached summary so value regression never shapes the shared trunk."""
        p = self.params
        s, qb = self._summary(batch)
        dist = T.affine_softmax(T.concat([s, qb], axis=-1), p["out_w"], p["out_b"])
        hid = T.tanh(T.affine(s.detach(), p["val_w1"], p["val_b1"]))
        value = T.reshape(T.affine(hid, p["val_w2"], p["val_b2"]), (s.shape[0],))
        return dist, value

    def span_dists(self, batch: WindowBatch) -> Tensor:
        """(B, delta, V) per-position distributions for span reward models."""
        if self.kind not in ("RWD_B", "RWD_C", "RWD_D"):
            raise ValueError(f"{self.kind} is generation-shaped; use next_token_dist")
        p, c = self.params, self.config
        s, _ = self._summary(batch)
        bsz = s.shape[0]
        tiled = T.mul(T.reshape(s, (bsz, 1, 2 * c.summary)),
                      Tensor(np.ones((1, c.delta, 1), dtype=s.data.dtype)))
        tb = T.embed(p["emb_beat"], batch.target_beats - 1)
        return T.affine_softmax(T.concat([tiled, tb], axis=-1), p["out_w"], p["out_b"])


# -- spec-shaped single-window entry points ----------------------------------

def generation_forward(model: DuetModel, window: StateWindow) -> ModelOutput:
    dist = model.next_token_dist(WindowBatch.from_state_windows([window]))
    return ModelOutput(probs=dist.data.copy(), valid=np.array([True]))


def value_forward(model: DuetModel, window: StateWindow) -> float:
    _, value = model.policy_value(WindowBatch.from_state_windows([window]))
    return float(value.data[0])


def reward_forward(model: DuetModel, ctx: WindowedContext) -> ModelOutput:
    if ctx.view is ContextView.JOINT_PRE:
        raise ValueError("view (a) contexts use generation_forward")
    dists = model.span_dists(WindowBatch.from_contexts([ctx]))
    return ModelOutput(probs=dists.data[0].copy(), valid=ctx.valid.copy())
