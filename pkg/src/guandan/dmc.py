"""Deep Monte Carlo: epsilon-greedy self-play over Q(s,a), a FIFO replay
buffer, and mean-squared regression of Q toward the terminal round value.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from . import features
from .engine import NUM_SEATS, Episode
from .net import Mlp, RmsProp, q_spec


@dataclass
class DmcConfig:
    epsilon: float = 0.01
    buffer_capacity: int = 65536
    batch_size: int = 32768
    train_freq: int = 250          # learner updates once per this many receptions
    lr: float = 1e-3
    hidden: tuple = (512, 512, 512, 512)
    q_clip_lambda: float | None = None  # optional clamp of target around behavior_q
    seed: int = 0
    max_rounds: int = 50

    def make_net(self, seed=None) -> Mlp:
        return Mlp(q_spec(hidden=self.hidden), seed=self.seed if seed is None else seed)


def select_action(q_values: np.ndarray, epsilon: float, rng: random.Random) -> int:
    """Epsilon-greedy index; greedy ties go to the lowest index."""
    n = len(q_values)
    if n == 0:
        raise ValueError("empty legal action set")
    if epsilon > 0 and rng.random() < epsilon:
        return rng.randrange(n)
    return int(np.argmax(q_values))


def q_values(net: Mlp, state_vec: np.ndarray, combos) -> np.ndarray:
    """Q(s,a) for every candidate, reusing the state's first-layer product.

    Equivalent to running the net on the concatenated (state, action)
    rows; the state part of the first layer is computed once.
    """
    W1, b1 = net.params[0], net.params[1]
    sd = features.STATE_DIM
    z_state = state_vec.astype(net.dtype) @ W1[:sd] + b1
    actions = np.zeros((len(combos), features.ACTION_DIM), dtype=net.dtype)
    for i, c in enumerate(combos):
        if not c.is_pass():
            actions[i] = np.frombuffer(c.cards.counts, dtype=np.uint8)
    h = np.tanh(actions @ W1[sd:] + z_state)
    for i in range(1, net.n_trunk):
        W, b = net.params[2 * i], net.params[2 * i + 1]
        h = np.tanh(h @ W + b)
    W, b = net.params[2 * net.n_trunk], net.params[2 * net.n_trunk + 1]
    return (h @ W + b)[:, 0]


@dataclass
class SeatTrajectory:
    """One seat's samples from one episode."""

    inputs: np.ndarray       # (n, 567) float32
    behavior_q: np.ndarray   # (n,)
    values: np.ndarray       # (n,) terminal round value per sample

    def __len__(self):
        return len(self.values)


@dataclass
class EpisodeStats:
    winner_team: int
    rounds: int
    decisions: int


def actor_episode(net: Mlp, cfg: DmcConfig, rng: random.Random):
    """One self-play episode, all four seats on the same parameters.

    Returns ([SeatTrajectory x4], EpisodeStats).  Tribute-phase choices
    come from the engine heuristic and produce no samples.
    """
    ep = Episode(rng=rng, max_rounds=cfg.max_rounds)
    inputs = [[] for _ in range(NUM_SEATS)]
    qs = [[] for _ in range(NUM_SEATS)]
    marks = [[] for _ in range(NUM_SEATS)]  # round index per sample
    while not ep.over:
        seat = ep.seat_to_act
        legal = ep.legal_actions()
        view = features.view_for(seat, ep.round, ep.episode)
        svec = features.encode_state(view)
        q = q_values(net, svec, legal)
        idx = select_action(q, cfg.epsilon, rng)
        combo = legal[idx]
        inputs[seat].append(features.q_input(svec, features.encode_action(combo)))
        qs[seat].append(float(q[idx]))
        marks[seat].append(len(ep.round_records))
        ep.play(combo)

    trajs = []
    for seat in range(NUM_SEATS):
        vals = np.array(
            [ep.round_records[m].values[seat] for m in marks[seat]], dtype=np.float32
        )
        trajs.append(
            SeatTrajectory(
                inputs=np.asarray(inputs[seat], dtype=np.float32),
                behavior_q=np.array(qs[seat], dtype=np.float32),
                values=vals,
            )
        )
    stats = EpisodeStats(
        winner_team=ep.episode_winner,
        rounds=len(ep.round_records),
        decisions=sum(len(t) for t in trajs),
    )
    return trajs, stats


class ReplayBuffer:
    """FIFO ring over flat samples; uniform sampling without replacement."""

    def __init__(self, capacity: int, input_dim: int):
        self.capacity = capacity
        self.inputs = np.zeros((capacity, input_dim), dtype=np.float32)
        self.values = np.zeros(capacity, dtype=np.float32)
        self.behavior_q = np.zeros(capacity, dtype=np.float32)
        self.head = 0
        self.fill = 0

    def push(self, traj: SeatTrajectory):
        n = len(traj)
        for start in range(0, n, self.capacity):
            chunk = slice(start, min(start + self.capacity, n))
            self._push_arrays(
                traj.inputs[chunk], traj.values[chunk], traj.behavior_q[chunk]
            )

    def _push_arrays(self, inputs, values, behavior_q):
        n = len(values)
        end = self.head + n
        if end <= self.capacity:
            sl = slice(self.head, end)
            self.inputs[sl] = inputs
            self.values[sl] = values
            self.behavior_q[sl] = behavior_q
        else:
            first = self.capacity - self.head
            self._push_arrays(inputs[:first], values[:first], behavior_q[:first])
            self.head = 0
            return self._push_arrays(inputs[first:], values[first:], behavior_q[first:])
        self.head = end % self.capacity
        self.fill = min(self.capacity, self.fill + n)

    def sample(self, batch_size: int, rng: np.random.Generator):
        take = min(batch_size, self.fill)
        idx = rng.choice(self.fill, size=take, replace=False)
        return self.inputs[idx], self.values[idx], self.behavior_q[idx]


def dmc_loss_and_grads(net: Mlp, inputs: np.ndarray, targets: np.ndarray):
    """Mean squared error of Q(s,a) against the stored terminal value."""
    outs, acts = net.forward(inputs)
    q = outs[0][:, 0]
    err = q - targets.astype(net.dtype)
    loss = float(np.mean(err * err))
    dout = (2.0 / len(err)) * err
    grads = net.backward(acts, [dout[:, None]])
    return loss, grads


class DmcLearner:
    """Owns the Q-net, optimizer, buffer and the reception/update counters."""

    def __init__(self, cfg: DmcConfig, net: Mlp | None = None, optimizer=None):
        self.cfg = cfg
        self.net = net if net is not None else cfg.make_net()
        self.optimizer = optimizer if optimizer is not None else RmsProp(
            self.net.params, lr=cfg.lr
        )
        self.buffer = ReplayBuffer(cfg.buffer_capacity, features.Q_INPUT_DIM)
        self.receptions = 0
        self.updates = 0
        self.samples_in = 0
        self.version = 0
        self.np_rng = np.random.default_rng(cfg.seed + 1)
        self.last_loss = None

    def receive(self, trajectories) -> bool:
        """Ingest one episode's trajectories; True if an update was run."""
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
        inputs, values, behavior_q = self.buffer.sample(
            self.cfg.batch_size, self.np_rng
        )
        targets = values
        lam = self.cfg.q_clip_lambda
        if lam is not None:
            targets = np.clip(values, behavior_q - lam, behavior_q + lam)
        loss, grads = dmc_loss_and_grads(self.net, inputs, targets)
        self.optimizer.step(self.net.params, grads)
        self.updates += 1
        self.version += 1
        self.last_loss = loss

    @property
    def last_metrics(self):
        return None if self.last_loss is None else {"loss": self.last_loss}
