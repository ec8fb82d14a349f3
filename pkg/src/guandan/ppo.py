"""PPO over value-filtered candidates.

A frozen Q-net shortlists the top-k legal actions per decision; a
policy/value net with k logits + 1 value head picks among them.  Training
uses the clipped surrogate, an entropy bonus, value regression and GAE.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from . import features
from .dmc import q_values, SeatTrajectory, EpisodeStats  # noqa: F401 (shared types)
from .engine import NUM_SEATS, Episode
from .net import Adam, Mlp, ppo_spec


@dataclass
class PpoConfig:
    clip: float = 0.2
    c_entropy: float = 0.05
    c_value: float = 0.5
    gamma: float = 0.99
    lam: float = 0.95
    k: int = 2
    lr: float = 1e-4
    buffer_capacity: int = 2048
    batch_size: int = 2048
    train_freq: int = 13
    hidden: tuple = (512, 512, 512, 256)
    normalize_advantages: bool = True
    seed: int = 0
    max_rounds: int = 50

    def make_net(self, seed=None) -> Mlp:
        return Mlp(
            ppo_spec(features.ppo_input_dim(self.k), self.k, hidden=self.hidden),
            seed=self.seed if seed is None else seed,
        )


def top_k_candidates(q: np.ndarray, k: int) -> np.ndarray:
    """Indices of the top-k values, descending; ties keep the lower index."""
    if len(q) == 0:
        raise ValueError("empty legal action set")
    order = np.argsort(-q, kind="stable")
    return order[:k]


def masked_softmax(logits: np.ndarray, legal: np.ndarray):
    """Probabilities over legal slots; illegal slots are exactly zero."""
    z = np.where(legal > 0, logits, -np.inf)
    m = np.max(z, axis=-1, keepdims=True)
    e = np.exp(z - m)
    p = e / e.sum(axis=-1, keepdims=True)
    return p


def policy_forward(net: Mlp, X: np.ndarray, legal: np.ndarray):
    """(probs over k slots, V(s)); no cache. X may be a single vector."""
    outs, _ = net.forward(X)
    logits, v = outs
    single = np.asarray(X).ndim == 1
    legal2 = legal[None, :] if legal.ndim == 1 else legal
    p = masked_softmax(logits, legal2)
    if single:
        return p[0], float(v[0, 0])
    return p, v[:, 0]


def entropy(p: np.ndarray) -> np.ndarray:
    """Shannon entropy per row; 0 * log 0 taken as 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log(p), 0.0)
    return -t.sum(axis=-1)


def gae(rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float):
    """Standard recursion with terminal bootstrap 0; returns (adv, ret)."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.shape != values.shape:
        raise ValueError("rewards and values must align")
    T = len(rewards)
    adv = np.zeros(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        v_next = values[t + 1] if t + 1 < T else 0.0
        delta = rewards[t] + gamma * v_next - values[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
    return adv, adv + values


@dataclass
class PpoBatch:
    inputs: np.ndarray      # (N, 513 + 54k + k)
    legal: np.ndarray       # (N, k)
    slot: np.ndarray        # (N,) chosen candidate slot
    old_logp: np.ndarray    # (N,)
    advantages: np.ndarray  # (N,)
    returns: np.ndarray     # (N,)


def ppo_losses_and_grads(net: Mlp, batch: PpoBatch, cfg: PpoConfig):
    """Returns (metrics dict, grads). Loss = L_p + c_v L_v with
    L_p = -mean(clipped surrogate) - c_e mean(entropy)."""
    outs, acts = net.forward(batch.inputs)
    logits, v_out = outs
    v = v_out[:, 0]
    N = len(batch.slot)
    rows = np.arange(N)

    p = masked_softmax(logits, batch.legal)
    p_chosen = p[rows, batch.slot]
    logp = np.log(p_chosen)
    ratio = np.exp(logp - batch.old_logp.astype(logp.dtype))
    adv = batch.advantages.astype(logp.dtype)

    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv
    surr = np.minimum(surr1, surr2)
    H = entropy(p)
    ret = batch.returns.astype(v.dtype)
    verr = v - ret

    l_clip = float(np.mean(surr))
    l_entropy = float(np.mean(H))
    l_policy = -l_clip - cfg.c_entropy * l_entropy
    l_value = float(np.mean(verr * verr))
    total = l_policy + cfg.c_value * l_value

    # d total / d logits.  Chosen-slot surrogate path: dsurr/dlogp = adv *
    # ratio where the unclipped branch is active; softmax Jacobian turns
    # dlogp_c into (delta_cj - p_j).  Entropy path: dH/dl_j = -p_j(ln p_j + H).
    active = (surr1 <= surr2).astype(logp.dtype)
    g_chosen = adv * ratio * active / N                      # (N,)
    dlogits = g_chosen[:, None] * p
    dlogits[rows, batch.slot] -= g_chosen
    # entropy gradient, zero on illegal slots (p=0 there)
    with np.errstate(divide="ignore", invalid="ignore"):
        lnp = np.where(p > 0, np.log(p), 0.0)
    dlogits += (cfg.c_entropy / N) * p * (lnp + H[:, None])
    dlogits = np.where(batch.legal > 0, dlogits, 0.0)

    dv = (cfg.c_value * 2.0 / N) * verr
    grads = net.backward(acts, [dlogits, dv[:, None]])

    clip_fraction = float(np.mean((np.abs(ratio - 1.0) > cfg.clip).astype(np.float64)))
    approx_kl = float(np.mean(batch.old_logp - logp))
    metrics = {
        "loss": total,
        "policy_loss": l_policy,
        "value_loss": l_value,
        "entropy": l_entropy,
        "clip_fraction": clip_fraction,
        "approx_kl": approx_kl,
    }
    return metrics, grads


@dataclass
class PpoSeatTrajectory:
    inputs: np.ndarray
    legal: np.ndarray
    slot: np.ndarray
    old_logp: np.ndarray
    value_est: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self):
        return len(self.slot)


def ppo_actor_episode(dmc_net: Mlp, ppo_net: Mlp, cfg: PpoConfig, rng: random.Random):
    """One self-play episode with DMC-filtered candidates and PPO sampling.

    The chosen action always comes from the DMC top-k; with a single
    candidate no randomness is consumed, so k=1 reproduces the greedy
    DMC trace exactly.
    """
    ep = Episode(rng=rng, max_rounds=cfg.max_rounds)
    per_seat = [[] for _ in range(NUM_SEATS)]  # (x, legal, slot, logp, V, round)
    while not ep.over:
        seat = ep.seat_to_act
        legal_combos = ep.legal_actions()
        view = features.view_for(seat, ep.round, ep.episode)
        svec = features.encode_state(view)
        q = q_values(dmc_net, svec, legal_combos)
        top = top_k_candidates(q, cfg.k)
        candidates = [legal_combos[i] for i in top]
        x, mask = features.ppo_input(svec, candidates, cfg.k)
        probs, v = policy_forward(ppo_net, x, mask)
        if len(candidates) == 1:
            slot = 0
        else:
            slot = _sample_slot(probs, rng)
        per_seat[seat].append(
            (x, mask, slot, float(np.log(probs[slot])), v, len(ep.round_records))
        )
        ep.play(candidates[slot])

    trajs = []
    decisions = 0
    for seat in range(NUM_SEATS):
        rows = per_seat[seat]
        decisions += len(rows)
        X = np.asarray([r[0] for r in rows], dtype=np.float32)
        legal = np.asarray([r[1] for r in rows], dtype=np.float32)
        slot = np.array([r[2] for r in rows], dtype=np.int64)
        logp = np.array([r[3] for r in rows], dtype=np.float32)
        vals = np.array([r[4] for r in rows], dtype=np.float32)
        marks = [r[5] for r in rows]
        adv = np.zeros(len(rows))
        ret = np.zeros(len(rows))
        for rnd in sorted(set(marks)):
            seg = [i for i, m in enumerate(marks) if m == rnd]
            rewards = np.zeros(len(seg))
            rewards[-1] = ep.round_records[rnd].values[seat]
            a, rt = gae(rewards, vals[seg], cfg.gamma, cfg.lam)
            adv[seg] = a
            ret[seg] = rt
        trajs.append(
            PpoSeatTrajectory(X, legal, slot, logp, vals,
                              adv.astype(np.float32), ret.astype(np.float32))
        )
    stats = EpisodeStats(
        winner_team=ep.episode_winner,
        rounds=len(ep.round_records),
        decisions=decisions,
    )
    return trajs, stats


def _sample_slot(probs: np.ndarray, rng: random.Random) -> int:
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += float(p)
        if u < acc:
            return i
    return int(np.argmax(probs))


class PpoReplay:
    """Same FIFO ring as the DMC buffer, with the PPO sample fields."""

    def __init__(self, capacity: int, input_dim: int, k: int):
        self.capacity = capacity
        self.inputs = np.zeros((capacity, input_dim), dtype=np.float32)
        self.legal = np.zeros((capacity, k), dtype=np.float32)
        self.slot = np.zeros(capacity, dtype=np.int64)
        self.old_logp = np.zeros(capacity, dtype=np.float32)
        self.advantages = np.zeros(capacity, dtype=np.float32)
        self.returns = np.zeros(capacity, dtype=np.float32)
        self.head = 0
        self.fill = 0

    def push(self, t: PpoSeatTrajectory):
        for i in range(len(t)):
            j = self.head
            self.inputs[j] = t.inputs[i]
            self.legal[j] = t.legal[i]
            self.slot[j] = t.slot[i]
            self.old_logp[j] = t.old_logp[i]
            self.advantages[j] = t.advantages[i]
            self.returns[j] = t.returns[i]
            self.head = (j + 1) % self.capacity
            self.fill = min(self.capacity, self.fill + 1)

    def sample(self, batch_size: int, rng: np.random.Generator) -> PpoBatch:
        take = min(batch_size, self.fill)
        idx = rng.choice(self.fill, size=take, replace=False)
        return PpoBatch(
            inputs=self.inputs[idx],
            legal=self.legal[idx],
            slot=self.slot[idx],
            old_logp=self.old_logp[idx],
            advantages=self.advantages[idx],
            returns=self.returns[idx],
        )


class PpoLearner:
    """Reception counting and updates, mirroring the DMC learner contract."""

    def __init__(self, cfg: PpoConfig, net: Mlp | None = None, optimizer=None):
        self.cfg = cfg
        self.net = net if net is not None else cfg.make_net()
        self.optimizer = optimizer if optimizer is not None else Adam(
            self.net.params, lr=cfg.lr
        )
        self.buffer = PpoReplay(
            cfg.buffer_capacity, features.ppo_input_dim(cfg.k), cfg.k
        )
        self.receptions = 0
        self.updates = 0
        self.samples_in = 0
        self.version = 0
        self.np_rng = np.random.default_rng(cfg.seed + 1)
        self.last_metrics = None

    def receive(self, trajectories) -> bool:
        for t in trajectories:
            self.buffer.push(t)
            self.samples_in += len(t)
        self.receptions += 1
        if self.receptions % self.cfg.train_freq == 0:
            self._update()
            return True
        return False

    def _update(self):
        assert self.buffer.fill > 0, "update before any sample arrived"
        batch = self.buffer.sample(self.cfg.batch_size, self.np_rng)
        if self.cfg.normalize_advantages and len(batch.advantages) > 1:
            a = batch.advantages
            batch.advantages = (a - a.mean()) / (a.std() + 1e-8)
        metrics, grads = ppo_losses_and_grads(self.net, batch, self.cfg)
        self.optimizer.step(self.net.params, grads)
        self.updates += 1
        self.version += 1
        self.last_metrics = metrics
