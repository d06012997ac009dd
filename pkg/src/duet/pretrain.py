"""Maximum-likelihood pretraining of the reward / generation networks.

An epoch walks the training chorales in shuffled order, draws a fresh random
voice pairing per chorale, samples about one context per four steps, and takes
one optimizer step per 32 sampled windows.  Validation duets are a fixed
deterministic pairing so the best-validation checkpoint is meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .corpus import Chorale, Duet, duet_from_parts, make_training_duet
from .models import (
    DEFAULT_CONFIG,
    ContextView,
    DuetModel,
    ModelConfig,
    WindowBatch,
    span_context,
    state_window,
)
from .score import Scheme, convert

SHIPPED_LEARNING_RATES = (0.005, 0.01, 0.05)


class DivergenceError(RuntimeError):
    """Training loss went non-finite; carries the failing epoch/batch."""


@dataclass(frozen=True)
class PretrainConfig:
    view: ContextView
    lr: float
    epochs: int = 20
    batch_size: int = 32
    rng_seed: int = 0
    model: ModelConfig = DEFAULT_CONFIG
    # one sampled window per this many steps of each chorale, per epoch
    steps_per_sample: int = 4
    # per-epoch multiplicative lr decay; 1.0 = a fixed rate
    lr_decay: float = 1.0
    # epochs of linear lr ramp-in
    lr_warmup_epochs: int = 0
    # fixed factor between the recipe's nominal rate and the Adam step size;
    # the shipped recipes use 0.1 because Adam's normalized steps at the
    # nominal rates overshoot at this model scale
    lr_scale: float = 1.0
    optimizer: str = "adam"  # "adam" or "sgd" (momentum 0.9)
    # also record loss on a fixed deterministic duet set after each epoch
    track_fixed_loss: bool = False


def shipped_recipes(model: ModelConfig = DEFAULT_CONFIG, epochs: int = 20,
                    rng_seed: int = 0) -> list[PretrainConfig]:
    """The six-recipe suite: view (a) at each shipped learning rate, then (b)(c)(d).

    The Adam step applies a fixed 0.1 scale to each recipe's nominal rate plus
    a gentle decay, which keeps every recipe's loss curve stable at this model
    scale.
    """
    common = dict(epochs=epochs, model=model, lr_scale=0.1, lr_decay=0.95)
    recipes = [PretrainConfig(view=ContextView.JOINT_PRE, lr=lr, rng_seed=rng_seed + i, **common)
               for i, lr in enumerate(SHIPPED_LEARNING_RATES)]
    for j, view in enumerate((ContextView.JOINT_PREPOST, ContextView.HORIZONTAL, ContextView.VERTICAL)):
        recipes.append(PretrainConfig(view=view, lr=0.05, rng_seed=rng_seed + 3 + j, **common))
    return recipes


def _duet_arrays(duet: Duet, scheme: Scheme) -> tuple[np.ndarray, np.ndarray]:
    human = duet.human if duet.human.scheme is scheme else convert(duet.human, scheme)
    machine = duet.machine if duet.machine.scheme is scheme else convert(duet.machine, scheme)
    return np.asarray(human.ids, dtype=np.int64), np.asarray(machine.ids, dtype=np.int64)


def _batch_for(view: ContextView, samples: list[tuple[np.ndarray, np.ndarray, int]],
               cfg: ModelConfig) -> tuple[WindowBatch, np.ndarray, np.ndarray | None]:
    """(WindowBatch, targets, valid) for a list of (human_ids, machine_ids, t) samples."""
    if view is ContextView.JOINT_PRE:
        windows = [state_window(h, m, t, cfg.window) for h, m, t in samples]
        targets = np.array([m[t] for _, m, t in samples], dtype=np.int64)
        return WindowBatch.from_state_windows(windows), targets, None
    contexts = [span_context(h, m, len(m), t, view, cfg) for h, m, t in samples]
    targets = np.zeros((len(samples), cfg.delta), dtype=np.int64)
    for i, (_, m, t) in enumerate(samples):
        hi = min(t + cfg.delta, len(m))
        targets[i, :hi - t] = m[t:hi]
    batch = WindowBatch.from_contexts(contexts)
    return batch, targets, batch.valid


def _validation_duets(chorales: list[Chorale]) -> list[Duet]:
    # fixed rotation of voice pairings; deterministic across epochs
    pairs = [(0, 1), (1, 2), (2, 3), (3, 0)]
    duets = []
    for i, c in enumerate(sorted(chorales, key=lambda c: c.id)):
        h, m = pairs[i % len(pairs)]
        duets.append(duet_from_parts(c, h, m))
    return duets


def _epoch_samples(duets: list[Duet], view: ContextView, cfg: ModelConfig,
                   steps_per_sample: int, rng: np.random.Generator):
    scheme = view.scheme
    samples = []
    for duet in duets:
        h, m = _duet_arrays(duet, scheme)
        n = max(1, len(duet) // steps_per_sample)
        for t in rng.integers(0, len(duet), size=n):
            samples.append((h, m, int(t)))
    order = rng.permutation(len(samples))
    return [samples[i] for i in order]


def pretrain(train: list[Chorale], config: PretrainConfig,
             valid: list[Chorale] | None = None, log=None) -> tuple[DuetModel, list[dict]]:
    """Train one reward/generation network; returns the best-validation model.

    With no validation chorales the final-epoch parameters are returned.
    `log` (if given) receives one dict per epoch.
    """
    if not train:
        raise ValueError("training corpus is empty")
    model = DuetModel.init(config.view.model_kind, config.model, config.rng_seed)
    if config.optimizer == "adam":
        opt = T.Adam(model.params, lr=config.lr)
    elif config.optimizer == "sgd":
        opt = T.SGD(model.params, lr=config.lr)
    else:
        raise ValueError(f"unknown optimizer {config.optimizer!r}")
    rng = np.random.default_rng(config.rng_seed)
    valid_duets = _validation_duets(valid) if valid else []
    fixed_duets = _validation_duets(train) if config.track_fixed_loss else []
    history: list[dict] = []
    best = {k: p.data.copy() for k, p in model.params.items()}
    best_loss = float("inf")

    for epoch in range(config.epochs):
        warm = min(1.0, (epoch + 1) / config.lr_warmup_epochs) if config.lr_warmup_epochs else 1.0
        opt.lr = config.lr * config.lr_scale * warm * (config.lr_decay ** epoch)
        samples = _epoch_samples(
            [make_training_duet(c, rng) for c in train], config.view,
            config.model, config.steps_per_sample, rng)
        total, batches = 0.0, 0
        for lo in range(0, len(samples), config.batch_size):
            chunk = samples[lo:lo + config.batch_size]
            batch, targets, valid_mask = _batch_for(config.view, chunk, config.model)
            T.zero_grads(model.params)
            if config.view is ContextView.JOINT_PRE:
                dist = model.next_token_dist(batch)
            else:
                dist = model.span_dists(batch)
            loss = T.nll_mean(dist, targets, valid_mask)
            val = loss.item()
            if not np.isfinite(val):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch} batch {batches} (lr={config.lr})")
            loss.backward()
            opt.step()
            total += val
            batches += 1
        entry = {"epoch": epoch, "train_loss": total / max(batches, 1)}
        if fixed_duets:
            entry["fixed_train_loss"] = validation_loss(model, config, fixed_duets)
        if valid_duets:
            entry["valid_loss"] = validation_loss(model, config, valid_duets)
            if entry["valid_loss"] < best_loss:
                best_loss = entry["valid_loss"]
                best = {k: p.data.copy() for k, p in model.params.items()}
        history.append(entry)
        if log:
            log(entry)

    if valid_duets and config.epochs > 0:
        model.params = {k: T.Tensor(v, requires_grad=True) for k, v in best.items()}
    return model, history


def validation_loss(model: DuetModel, config: PretrainConfig, duets: list[Duet]) -> float:
    rng = np.random.default_rng(0)  # fixed draw: comparable across epochs
    samples = _epoch_samples(duets, config.view, config.model, config.steps_per_sample, rng)
    total, count = 0.0, 0
    for lo in range(0, len(samples), 128):
        chunk = samples[lo:lo + 128]
        batch, targets, valid_mask = _batch_for(config.view, chunk, config.model)
        with T.no_grad():
            if config.view is ContextView.JOINT_PRE:
                dist = model.next_token_dist(batch)
            else:
                dist = model.span_dists(batch)
            total += T.nll_mean(dist, targets, valid_mask).item() * len(chunk)
        count += len(chunk)
    return total / max(count, 1)


def token_accuracy(model: DuetModel, duets: list[Duet], chunk: int = 128) -> float:
    """Teacher-forced next-token accuracy of a generation-shaped model."""
    if model.kind not in ("GEN", "RWD_A"):
        raise ValueError("token accuracy applies to generation-shaped models")
    hits, total = 0, 0
    for duet in duets:
        h, m = _duet_arrays(duet, Scheme.MULTI_HOLD)
        for lo in range(0, len(duet), chunk):
            ts = range(lo, min(lo + chunk, len(duet)))
            batch = WindowBatch.from_state_windows(
                [state_window(h, m, t, model.config.window) for t in ts])
            with T.no_grad():
                dist = model.next_token_dist(batch)
            picks = np.argmax(dist.data, axis=-1)
            hits += int((picks == m[list(ts)]).sum())
            total += len(ts)
    return hits / max(total, 1)
