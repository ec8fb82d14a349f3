"""Deep Monte Carlo: action selection, Q evaluation, buffer, learner."""

import random

import numpy as np
import pytest

from guandan import features
from guandan.cards import PASS, parse_combo
from guandan.dmc import (
    DmcConfig, DmcLearner, ReplayBuffer, SeatTrajectory, actor_episode,
    dmc_loss_and_grads, q_values, select_action,
)
from guandan.net import Mlp, MlpSpec, RmsProp, q_spec


def small_cfg(**kw):
    kw.setdefault("hidden", (32, 32))
    kw.setdefault("seed", 0)
    return DmcConfig(**kw)


def make_traj(values, input_val=0.0, behavior=None, dim=features.Q_INPUT_DIM):
    n = len(values)
    inputs = np.full((n, dim), input_val, dtype=np.float32)
    behavior = np.zeros(n) if behavior is None else np.asarray(behavior)
    return SeatTrajectory(
        inputs=inputs,
        behavior_q=behavior.astype(np.float32),
        values=np.asarray(values, dtype=np.float32),
    )


# ---------------------------------------------------------------------------
# action selection
# ---------------------------------------------------------------------------

def test_greedy_takes_argmax_lowest_tie():
    rng = random.Random(0)
    assert select_action(np.array([0.1, 3.0, -1.0]), 0.0, rng) == 1
    assert select_action(np.array([1.0, 3.0, 3.0]), 0.0, rng) == 1


def test_greedy_consumes_no_randomness():
    rng = random.Random(7)
    before = rng.getstate()
    select_action(np.array([0.5, 0.2]), 0.0, rng)
    assert rng.getstate() == before


def test_empty_action_set_raises():
    with pytest.raises(ValueError):
        select_action(np.array([]), 0.1, random.Random(0))


def test_full_exploration_is_uniform():
    rng = random.Random(123)
    counts = [0] * 4
    n = 100_000
    q = np.array([9.0, 0.0, -5.0, 2.0])
    for _ in range(n):
        counts[select_action(q, 1.0, rng)] += 1
    for c in counts:
        assert abs(c / n - 0.25) < 0.02


def test_low_epsilon_prefers_argmax():
    rng = random.Random(5)
    q = np.array([0.0, 1.0, 0.5, -2.0])
    n = 1_000_000
    hits = sum(select_action(q, 0.01, rng) == 1 for _ in range(n))
    # P(argmax) = 0.99 + 0.01/4
    assert abs(hits / n - 0.9925) < 0.001


def test_epsilon_mixture_chi_square():
    rng = random.Random(42)
    q = np.array([0.5, 2.0, 1.0])
    eps = 0.2
    n = 60_000
    counts = [0, 0, 0]
    for _ in range(n):
        counts[select_action(q, eps, rng)] += 1
    expected = [n * eps / 3, n * (eps / 3 + 1 - eps), n * eps / 3]
    chi2 = sum((o - e) ** 2 / e for o, e in zip(counts, expected))
    # 1% critical value of chi-square with 2 degrees of freedom
    assert chi2 < 9.21034


# ---------------------------------------------------------------------------
# q evaluation
# ---------------------------------------------------------------------------

def test_split_first_layer_matches_full_forward():
    net = Mlp(q_spec(hidden=(16, 12)), seed=3)
    rng = np.random.default_rng(0)
    state_vec = rng.normal(size=features.STATE_DIM).astype(np.float32)
    combos = [PASS, parse_combo("Single:9", 0), parse_combo("Pair:KK", 0),
              parse_combo("Bomb:7777", 0)]
    fast = q_values(net, state_vec, combos)
    full = net.value(features.q_inputs(state_vec, combos))
    assert fast.shape == (4,)
    assert np.allclose(fast, full, atol=1e-5)


def test_pass_action_is_all_zero_input():
    net = Mlp(q_spec(hidden=(8,)), seed=1)
    state_vec = np.zeros(features.STATE_DIM, dtype=np.float32)
    got = q_values(net, state_vec, [PASS])
    want = net.value(np.zeros((1, features.Q_INPUT_DIM), dtype=np.float32))
    assert np.allclose(got, want, atol=1e-6)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def identity_net():
    """Q([x]) = x: no hidden layer, head weight 1, bias 0."""
    net = Mlp(MlpSpec(1, (), (1,), "q"), seed=0, dtype=np.float64)
    net.params[0][...] = 1.0
    net.params[1][...] = 0.0
    return net


def test_mse_loss_worked_example():
    # Q=1 vs return 3 and Q=0 vs return -1: ((1-3)^2 + (0+1)^2)/2 = 2.5
    net = identity_net()
    inputs = np.array([[1.0], [0.0]])
    targets = np.array([3.0, -1.0])
    loss, grads = dmc_loss_and_grads(net, inputs, targets)
    assert loss == pytest.approx(2.5, abs=1e-12)
    # dL/dq = [-2, 1]; dW = x . dL/dq = -2; db = -1
    assert grads[0][0, 0] == pytest.approx(-2.0)
    assert grads[1][0] == pytest.approx(-1.0)


def test_perfect_prediction_has_zero_loss():
    net = identity_net()
    inputs = np.array([[2.0], [-3.0]])
    loss, grads = dmc_loss_and_grads(net, inputs, np.array([2.0, -3.0]))
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads)


def test_frozen_batch_regression_converges():
    rng = np.random.default_rng(8)
    net = Mlp(MlpSpec(5, (16,), (1,), "q"), seed=2)
    X = rng.normal(size=(32, 5)).astype(np.float32)
    targets = np.tanh(rng.normal(size=32)).astype(np.float32)
    opt = RmsProp(net.params, lr=1e-3)
    loss = None
    for step in range(5000):
        loss, grads = dmc_loss_and_grads(net, X, targets)
        if loss < 1e-3:
            break
        opt.step(net.params, grads)
    assert loss < 1e-3


# ---------------------------------------------------------------------------
# replay buffer
# ---------------------------------------------------------------------------

def test_buffer_evicts_oldest_first():
    buf = ReplayBuffer(capacity=8, input_dim=4)
    buf.push(make_traj([0, 1, 2], dim=4))
    buf.push(make_traj([3, 4, 5], dim=4))
    assert buf.fill == 6
    buf.push(make_traj([6, 7, 8, 9], dim=4))
    assert buf.fill == 8
    assert sorted(buf.values.tolist()) == [2, 3, 4, 5, 6, 7, 8, 9]


def test_buffer_accepts_oversized_trajectory():
    buf = ReplayBuffer(capacity=8, input_dim=4)
    buf.push(make_traj(list(range(20)), dim=4))
    assert buf.fill == 8
    assert set(buf.values.tolist()) == set(range(12, 20))


def test_buffer_sample_unique_and_bounded():
    buf = ReplayBuffer(capacity=16, input_dim=4)
    buf.push(make_traj(list(range(10)), dim=4))
    rng = np.random.default_rng(0)
    inputs, values, behavior = buf.sample(32, rng)
    assert len(values) == 10  # capped at fill
    inputs, values, behavior = buf.sample(4, rng)
    assert len(values) == 4
    assert len(set(values.tolist())) == 4


def test_buffer_keeps_rows_aligned():
    buf = ReplayBuffer(capacity=8, input_dim=4)
    buf.push(make_traj([5.0], input_val=5.0, behavior=[50.0], dim=4))
    buf.push(make_traj([6.0], input_val=6.0, behavior=[60.0], dim=4))
    rng = np.random.default_rng(1)
    inputs, values, behavior = buf.sample(2, rng)
    for row, v, b in zip(inputs, values, behavior):
        assert row[0] == v and b == 10 * v


# ---------------------------------------------------------------------------
# learner
# ---------------------------------------------------------------------------

def test_learner_updates_on_reception_cadence():
    cfg = small_cfg(train_freq=3, batch_size=8, buffer_capacity=64)
    learner = DmcLearner(cfg)
    assert learner.last_metrics is None
    updated = []
    for ep in range(7):
        trajs = [make_traj([1.0, -1.0]) for _ in range(4)]
        updated.append(learner.receive(trajs))
    assert updated == [False, False, True, False, False, True, False]
    assert learner.receptions == 7
    assert learner.updates == 2 == learner.version
    assert learner.samples_in == 7 * 4 * 2
    assert set(learner.last_metrics) == {"loss"}


def test_learner_clips_targets_around_behavior_q():
    cfg = small_cfg(train_freq=1, batch_size=2, buffer_capacity=8,
                    q_clip_lambda=0.65, hidden=(4,))
    learner = DmcLearner(cfg)
    frozen = learner.net.copy_params()
    traj = make_traj([3.0, -1.0], behavior=[0.5, 0.2])
    learner.receive([traj])

    # recompute the expected loss on the pre-step parameters
    ref = cfg.make_net()
    ref.load_params(frozen)
    clipped = np.clip([3.0, -1.0], [0.5 - 0.65, 0.2 - 0.65],
                      [0.5 + 0.65, 0.2 + 0.65])
    want, _ = dmc_loss_and_grads(ref, traj.inputs, clipped.astype(np.float32))
    assert learner.last_loss == pytest.approx(want, rel=1e-6)


def test_learner_without_clip_uses_raw_values():
    cfg = small_cfg(train_freq=1, batch_size=2, buffer_capacity=8, hidden=(4,))
    learner = DmcLearner(cfg)
    frozen = learner.net.copy_params()
    traj = make_traj([3.0, -1.0], behavior=[0.5, 0.2])
    learner.receive([traj])
    ref = cfg.make_net()
    ref.load_params(frozen)
    want, _ = dmc_loss_and_grads(
        ref, traj.inputs, np.array([3.0, -1.0], dtype=np.float32))
    assert learner.last_loss == pytest.approx(want, rel=1e-6)


# ---------------------------------------------------------------------------
# actor
# ---------------------------------------------------------------------------

def test_actor_episode_contracts():
    cfg = small_cfg(max_rounds=3)
    net = cfg.make_net()
    trajs, stats = actor_episode(net, cfg, random.Random(1))
    assert len(trajs) == 4
    assert stats.winner_team in (0, 1)
    assert 1 <= stats.rounds <= 3
    assert stats.decisions == sum(len(t) for t in trajs)
    allowed = {1.0, 2.0, 3.0, 4.0}
    for t in trajs:
        assert t.inputs.shape == (len(t), features.Q_INPUT_DIM)
        assert t.inputs.dtype == np.float32
        assert {abs(v) for v in t.values.tolist()} <= allowed
    # the four seats' values describe the same team outcome per round
    seat_sign = [set(np.sign(t.values).tolist()) for t in trajs]
    assert seat_sign[0] == seat_sign[2]
    assert seat_sign[1] == seat_sign[3]


def test_actor_episode_is_deterministic():
    cfg = small_cfg(max_rounds=2)
    net = cfg.make_net()
    a, stats_a = actor_episode(net, cfg, random.Random(9))
    b, stats_b = actor_episode(net, cfg, random.Random(9))
    assert stats_a == stats_b
    for ta, tb in zip(a, b):
        assert ta.inputs.tobytes() == tb.inputs.tobytes()
        assert np.array_equal(ta.values, tb.values)
        assert np.array_equal(ta.behavior_q, tb.behavior_q)
