"""Actor-critic training with generalized advantage estimation.

A training iteration rolls out a batch of episodes (the policy samples one
machine token per step against a fixed human part, after the two-measure
seed), scores every generated step with the reward ensemble, computes GAE
advantages and discounted returns in one backward pass, and takes a single
gradient step: policy loss -mean(log pi(a|s) * advantage) with batch-normalized
advantages, value loss mean((V - R)^2), global gradient-norm clip.

Reward models are inference-only; their parameters are never touched.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .corpus import Chorale, Duet, duet_from_parts
from .models import DuetModel, WindowBatch, state_window
from .rewards import RewardEnsemble, score_episode
from .score import TokenSeq, beat_subdivision


class RLDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RLConfig:
    gamma: float = 0.5
    lam: float = 1.0
    duet_budget: int = 100_000
    policy_lr: float = 1e-4
    value_lr: float = 1e-3
    batch_episodes: int = 8
    grad_clip: float = 5.0
    # weight of the policy-entropy bonus; without it desk-scale training
    # collapses onto repeated holds (observed), with rewards falling
    entropy_coef: float = 0.01
    rng_seed: int = 0
    eval_every: int = 0  # episodes between greedy eval snapshots; 0 = none

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.lam <= 1.0):
            raise ValueError("gamma and lam must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "lam": self.lam, "duet_budget": self.duet_budget,
                "policy_lr": self.policy_lr, "value_lr": self.value_lr,
                "batch_episodes": self.batch_episodes, "grad_clip": self.grad_clip,
                "rng_seed": self.rng_seed}


@dataclass
class Episode:
    """One rollout: the finished duet plus everything the update step needs."""

    duet: Duet
    start: int
    actions: np.ndarray            # (n,) sampled machine token ids
    log_probs: np.ndarray          # (n,) log pi(a_t | s_t) at rollout time
    values: np.ndarray             # (n,) V(s_t) at rollout time
    rewards: np.ndarray | None = None
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    breakdowns: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)


def compute_gae(rewards, values, terminal_value: float = 0.0,
                gamma: float = 0.5, lam: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and discounted returns in one backward pass (float64).

    delta_t = r_t + gamma * V(s_{t+1}) - V(s_t) with V after the last step =
    terminal_value; A_t = sum_l (gamma*lam)^l delta_{t+l}; R_t = sum_i gamma^i
    r_{t+i} with R past the end = 0.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if r.shape != v.shape:
        raise ValueError(f"rewards {r.shape} and values {v.shape} must match")
    n = len(r)
    adv = np.zeros(n, dtype=np.float64)
    ret = np.zeros(n, dtype=np.float64)
    next_adv, next_ret, next_v = 0.0, 0.0, terminal_value
    for t in range(n - 1, -1, -1):
        delta = r[t] + gamma * next_v - v[t]
        adv[t] = delta + gamma * lam * next_adv
        ret[t] = r[t] + gamma * next_ret
        next_adv, next_ret, next_v = adv[t], ret[t], v[t]
    return adv, ret


def sample_action(probs: np.ndarray, rng: np.random.Generator, temperature: float = 1.0) -> int:
    """Draw a token id; temperature 0 means greedy with lowest-id tie break."""
    if temperature <= 0.0:
        return int(np.argmax(probs))
    p = probs.astype(np.float64)
    if temperature != 1.0:
        p = p ** (1.0 / temperature)
    p = p / p.sum()
    return int(rng.choice(len(p), p=p))


def rollout(policy: DuetModel, human: TokenSeq, seed: list[int] | tuple[int, ...],
            rng: np.random.Generator, temperature: float = 1.0,
            source: str = "rollout") -> Episode:
    """Sample one machine part against a fixed human part; rewards unfilled."""
    episodes = rollout_batch(policy, [(human, tuple(seed), source)], rng, temperature)
    return episodes[0]


def rollout_batch(policy: DuetModel, specs: list[tuple[TokenSeq, tuple[int, ...], str]],
                  rng: np.random.Generator, temperature: float = 1.0) -> list[Episode]:
    """Roll several episodes in lockstep so each step is one batched forward."""
    n_env = len(specs)
    seed_lens = [len(seed) for _, seed, _ in specs]
    humans = [np.asarray(h.ids, dtype=np.int64) for h, _, _ in specs]
    lengths = [len(h) for h in humans]
    machines = [np.zeros(T_i, dtype=np.int64) for T_i in lengths]
    for m, (_, seed, _) in zip(machines, specs):
        if len(seed) > len(m):
            raise ValueError("seed longer than the human part")
        m[:len(seed)] = seed
    acc: list[dict] = [{"actions": [], "log_probs": [], "values": []} for _ in range(n_env)]
    L = policy.config.window
    for t in range(min(seed_lens, default=0), max(lengths, default=0)):
        active = [i for i in range(n_env) if seed_lens[i] <= t < lengths[i]]
        if not active:
            break
        batch = WindowBatch.from_state_windows(
            [state_window(humans[i], machines[i], t, L) for i in active])
        with T.no_grad():
            dist, value = policy.policy_value(batch)
        for row, i in enumerate(active):
            probs = dist.data[row]
            a = sample_action(probs, rng, temperature)
            machines[i][t] = a
            acc[i]["actions"].append(a)
            acc[i]["log_probs"].append(float(np.log(max(float(probs[a]), 1e-30))))
            acc[i]["values"].append(float(value.data[row]))
    episodes = []
    for i, (human, seed, source) in enumerate(specs):
        duet = Duet(human=human,
                    machine=TokenSeq(tuple(int(x) for x in machines[i]), policy.scheme),
                    beats=beat_subdivision(lengths[i]), source=source, seed_steps=len(seed))
        episodes.append(Episode(
            duet=duet, start=len(seed),
            actions=np.array(acc[i]["actions"], dtype=np.int64),
            log_probs=np.array(acc[i]["log_probs"], dtype=np.float64),
            values=np.array(acc[i]["values"], dtype=np.float64)))
    return episodes


def score_and_estimate(episodes: list[Episode], ensemble: RewardEnsemble,
                       config: RLConfig) -> None:
    """Fill rewards, advantages and returns in place."""
    for ep in episodes:
        breakdowns = score_episode(ensemble, ep.duet, start=ep.start)
        ep.breakdowns = breakdowns
        ep.rewards = np.array([b.total for b in breakdowns], dtype=np.float64)
        ep.advantages, ep.returns = compute_gae(
            ep.rewards, ep.values, terminal_value=0.0, gamma=config.gamma, lam=config.lam)


def update(policy: DuetModel, optimizer: T.Adam, episodes: list[Episode],
           config: RLConfig) -> dict:
    """One gradient step over a batch of scored episodes; returns stats."""
    for ep in episodes:
        if ep.advantages is None or ep.returns is None or ep.rewards is None:
            raise ValueError("episodes must be scored before update")
    windows, actions, advs, rets = [], [], [], []
    L = policy.config.window
    for ep in episodes:
        h = np.asarray(ep.duet.human.ids, dtype=np.int64)
        m = np.asarray(ep.duet.machine.ids, dtype=np.int64)
        for j, t in enumerate(range(ep.start, len(ep.duet))):
            windows.append(state_window(h, m, t, L))
            actions.append(ep.actions[j])
        advs.append(ep.advantages)
        rets.append(ep.returns)
    if not windows:
        return {"steps": 0, "mean_reward": 0.0, "mean_model_reward": 0.0,
                "penalty_rate": 0.0, "mean_advantage": 0.0, "policy_loss": 0.0,
                "value_loss": 0.0, "grad_norm": 0.0}
    adv = np.concatenate(advs)
    ret = np.concatenate(rets)
    if len(adv) > 1:  # mean-centering a single advantage would zero it
        adv_norm = (adv - adv.mean()) / (adv.std() + 1e-8)
    else:
        adv_norm = adv

    batch = WindowBatch.from_state_windows(windows)
    dist, value = policy.policy_value(batch)
    flat = T.reshape(dist, (-1, dist.shape[-1]))
    picked = T.take(flat, (np.arange(len(windows)), np.array(actions, dtype=np.int64)))
    log_probs = T.log(picked)
    policy_loss = T.mul(T.tsum(T.mul(log_probs, T.Tensor(adv_norm.astype(np.float32)))),
                        -1.0 / len(windows))
    entropy = T.tmean(T.mul(T.tsum(T.mul(flat, T.log(flat)), axis=-1), -1.0))
    err = value - T.Tensor(ret.astype(np.float32))
    value_loss = T.tmean(T.mul(err, err))
    total = T.add(T.add(policy_loss, T.mul(entropy, -config.entropy_coef)), value_loss)
    if not np.isfinite(total.data):
        raise RLDivergenceError("non-finite loss in update step")
    T.zero_grads(policy.params)
    total.backward()
    grad_norm = T.clip_grad_norm(policy.params, config.grad_clip)
    if not np.isfinite(grad_norm):
        raise RLDivergenceError("non-finite gradients in update step")
    optimizer.step()
    rewards = np.concatenate([ep.rewards for ep in episodes])
    bds = [b for ep in episodes for b in ep.breakdowns]
    return {
        "steps": len(windows),
        "mean_reward": float(rewards.mean()),
        "mean_model_reward": float(np.mean([b.model_reward for b in bds])) if bds else 0.0,
        "penalty_rate": float(np.mean([b.rule_penalty < 0 for b in bds])) if bds else 0.0,
        "mean_advantage": float(adv.mean()),
        "policy_loss": float(policy_loss.data),
        "value_loss": float(value_loss.data),
        "entropy": float(entropy.data),
        "grad_norm": float(grad_norm),
    }


def make_optimizer(policy: DuetModel, config: RLConfig) -> T.Adam:
    return T.Adam(policy.params, lr=config.policy_lr,
                  lr_for=lambda name: config.value_lr if name.startswith("val_") else config.policy_lr)


def draw_training_duet(chorales: list[Chorale], rng: np.random.Generator,
                       seed_steps: int = 32) -> tuple[TokenSeq, tuple[int, ...], str]:
    """Random chorale, random ordered voice pair; machine voice contributes the seed."""
    c = chorales[int(rng.integers(0, len(chorales)))]
    i, j = rng.choice(4, size=2, replace=False)
    duet = duet_from_parts(c, int(i), int(j))
    return duet.human, tuple(duet.machine.ids[:seed_steps]), f"{c.id}[{i},{j}]"


def evaluate_policy(policy: DuetModel, ensemble: RewardEnsemble,
                    eval_specs: list[tuple[TokenSeq, tuple[int, ...], str]],
                    temperature: float = 0.0, rng_seed: int = 0) -> float:
    """Mean per-step total reward on held-out human parts.

    Temperature 0 scores the greedy generations; temperature 1 with a fixed
    seed estimates the policy's own expected reward, the quantity training
    maximizes.
    """
    rng = np.random.default_rng(rng_seed)
    totals = []
    for spec in eval_specs:
        ep = rollout_batch(policy, [spec], rng, temperature=temperature)[0]
        breakdowns = score_episode(ensemble, ep.duet, start=ep.start)
        totals.extend(b.total for b in breakdowns)
    return float(np.mean(totals)) if totals else 0.0


def train(chorales: list[Chorale], ensemble: RewardEnsemble, config: RLConfig,
          init: DuetModel, eval_specs: list | None = None, log=None,
          episode_filter=None) -> tuple[DuetModel, list[dict]]:
    """Run the full rollout -> score -> GAE -> update loop for the duet budget.

    `init` is the warm-start model (view (a) weights); `episode_filter` may
    veto drawn duets (used to hold out specific transpositions).
    """
    policy = init if init.kind == "GEN" else init.clone_as("GEN")
    optimizer = make_optimizer(policy, config)
    rng = np.random.default_rng(config.rng_seed)
    stats_history: list[dict] = []
    done = 0
    while done < config.duet_budget:
        n = min(config.batch_episodes, config.duet_budget - done)
        specs = []
        while len(specs) < n:
            spec = draw_training_duet(chorales, rng)
            if episode_filter is None or episode_filter(spec[2]):
                specs.append(spec)
        episodes = rollout_batch(policy, specs, rng, temperature=1.0)
        score_and_estimate(episodes, ensemble, config)
        stats = update(policy, optimizer, episodes, config)
        done += n
        stats["episodes_done"] = done
        stats["time"] = time.time()
        if config.eval_every and eval_specs and (done % config.eval_every < n):
            stats["eval_reward"] = evaluate_policy(policy, ensemble, eval_specs)
        stats_history.append(stats)
        if log:
            log(stats)
    return policy, stats_history
