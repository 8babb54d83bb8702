import math

import numpy as np
import pytest
from sklearn.base import clone

from histavg.adversaries import stoc_het, stoc_id
from histavg.algorithms import (FTARL, FTPL, LSA, FreshFTPL, default_block_length, delta_schedule,
                                epsilon_schedule, epsilon_schedule_theta, fast_episode, make_learner,
                                run_episode)
from histavg.core import ConfigError, reference_states


def started_ftarl(z, horizon=1):
    learner = FTARL(horizon=horizon, epsilon=1.0, random_state=0).start(len(z), 10)
    learner.z_ = np.asarray(z, dtype=float)
    return learner


@pytest.mark.parametrize("G,z,expected", [
    ([0.0, 0.0], [0.5, 0.2], 0),
    ([-3.0, -1.0], [0.5, 0.2], 0),
    ([-1.0, -1.0], [0.3, 0.3], 0),  # tie goes to the lowest index
    ([-1.0, -2.0], [0.3, 0.3], 1),
])
def test_ftarl_decide(G, z, expected):
    learner = started_ftarl(z)
    learner.cumulative_ = np.array(G)
    np.testing.assert_array_equal(learner.decide(), np.eye(2)[expected])


# Frozen from a 40-digit mpmath evaluation of the closed forms.
@pytest.mark.parametrize("args,expected", [
    ((10000, 100, 2, 1.0), 0.0025897608923872384),
    ((2, 1, 2, 1.0), 1.5025077617369992),
    ((500, 400, 2, 1.0), None),
])
def test_epsilon_schedule(args, expected):
    value = epsilon_schedule(*args)
    if expected is None:
        T, H, n, M = args
        assert value == pytest.approx(math.sqrt(4 * (math.log(n) + 1) / (M * M * (T - H) * (H + 2))))
    else:
        assert value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("T,H", [(100, 100), (5, 10)])
def test_epsilon_schedule_needs_t_above_h(T, H):
    with pytest.raises(ConfigError):
        epsilon_schedule(T, H, 2, 1.0)


def test_epsilon_schedule_theta():
    assert epsilon_schedule_theta(10000, 200, 2, 1.0) == pytest.approx(0.0018401886754134454, rel=1e-12)
    # same order as the H-aware rate, but not equal: (T - H)(2 + H) differs from T theta
    assert epsilon_schedule_theta(10000, 100, 2, 1.0) == pytest.approx(0.0026024197820950757, rel=1e-12)
    assert epsilon_schedule_theta(10000, 100, 2, 1.0) != epsilon_schedule(10000, 100, 2, 1.0)
    with pytest.raises(ConfigError):
        epsilon_schedule_theta(10000, 0, 2, 1.0)


def test_delta_schedule():
    assert delta_schedule(10000, 100, 1.0) == pytest.approx(0.01)
    assert delta_schedule(100, 100, 1.0) == 1.0
    assert delta_schedule(100, 7, 0.0) == 0.0


def test_ftarl_auto_parameters():
    learner = FTARL(horizon=100, random_state=1).start(2, 10000)
    assert learner.epsilon_ == epsilon_schedule(10000, 100, 2, 1.0)
    assert learner.delta_ == pytest.approx(0.01)
    theta = FTARL(horizon=100, theta=200, random_state=1).start(2, 10000)
    assert theta.epsilon_ == epsilon_schedule_theta(10000, 200, 2, 1.0)
    with pytest.raises(ConfigError):
        FTARL(horizon=100, theta=50).start(2, 10000)


def test_estimator_params_roundtrip():
    learner = FTARL(horizon=7, epsilon=0.1, random_state=3)
    assert learner.get_params()["horizon"] == 7
    copy = clone(learner).set_params(horizon=9)
    assert copy.horizon == 9 and learner.horizon == 7
    assert set(LSA().get_params()) == {"horizon", "block", "epsilon", "bound", "n_rounds", "random_state"}


def test_decide_before_start_raises():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        FTARL().decide()


def test_run_episode_dominant_action():
    costs = np.tile([-1.0, 0.0], (3, 1))
    learner = started_ftarl([0.5, 0.2])
    learner.start = lambda n, T: learner  # keep the hand-set perturbation
    traj = run_episode(learner, costs, 2)
    np.testing.assert_array_equal(traj.decisions, np.tile([1.0, 0.0], (3, 1)))
    np.testing.assert_array_equal(traj.losses, -traj.states[:, 0])


def test_run_episode_empty():
    traj = run_episode(FTARL(), np.zeros((0, 3)), 4)
    assert traj.T == 0 and traj.decisions.shape == (0, 3)


def brute_force_ftarl(costs, z, H):
    """Re-solve argmin_v <G^{t-1} - z, v> over the vertices from scratch each round."""
    T, n = costs.shape
    V = np.zeros((T, n))
    for t in range(T):
        G = np.zeros(n)
        for tau in range(t):
            G = G + costs[tau]
        values = [float(np.dot(G - z, np.eye(n)[i])) for i in range(n)]
        V[t, values.index(min(values))] = 1.0
    return V, reference_states(V, H)


@pytest.mark.parametrize("seed,n,H", [(1, 2, 1), (2, 3, 4), (3, 5, 10), (4, 2, 25)])
def test_ftarl_matches_brute_force(seed, n, H):
    costs = stoc_het(n, 150, seed)
    learner = FTARL(horizon=H, random_state=seed)
    traj = run_episode(learner, costs, H)
    V, X = brute_force_ftarl(costs, learner.z_, H)
    np.testing.assert_array_equal(traj.decisions, V)
    np.testing.assert_allclose(traj.states, X, atol=1e-12)


def test_ftarl_states_follow_update_rule():
    costs = stoc_id(3, 200, 9)
    traj = FTARL(horizon=6, random_state=2).fit(costs).trajectory_
    from histavg.core import HistoryState
    s = HistoryState(6, 3)
    for t in range(traj.T):
        y, beta = s.y_current.copy(), s.beta_next
        s.advance(traj.decisions[t])
        np.testing.assert_array_equal(traj.states[t], y + beta * traj.decisions[t])


class GuardedCosts:
    """Cost sequence that fails if row t is read before decision t is made."""

    def __init__(self, costs, learner):
        self.costs = costs
        self.shape = costs.shape
        self.learner = learner
        self.decided = 0
        original = learner.decide

        def decide():
            self.decided += 1
            return original()

        learner.decide = decide

    def __len__(self):
        return len(self.costs)

    def __getitem__(self, t):
        assert t < self.decided, f"cost of round {t + 1} read before its decision"
        return self.costs[t]


@pytest.mark.parametrize("cls", [FTARL, FTPL, LSA])
def test_run_episode_is_causal(cls):
    learner = cls(horizon=5, random_state=4)
    guarded = GuardedCosts(stoc_het(3, 120, 4), learner)
    run_episode(learner, guarded, 5)
    assert guarded.decided == 120


def test_guard_detects_peeking():
    learner = FTARL(horizon=2, random_state=0)
    guarded = GuardedCosts(stoc_id(2, 10, 0), learner)
    with pytest.raises(AssertionError, match="before its decision"):
        guarded[0]


def test_dimension_mismatch():
    class Rows:
        shape = (3, 2)

        def __len__(self):
            return 3

        def __getitem__(self, t):
            return np.zeros(3)

    with pytest.raises(ValueError):
        run_episode(FTARL(horizon=1, random_state=0), Rows(), 1)


@pytest.mark.parametrize("cls,kw", [(FTARL, {}), (FTPL, {}), (LSA, {}), (LSA, {"block": 7}), (LSA, {"block": 1})])
@pytest.mark.parametrize("H", [1, 3, 20])
def test_fast_path_matches_stepwise(cls, kw, H):
    costs = stoc_het(3, 300, 11)
    a = run_episode(cls(horizon=H, random_state=5, **kw), costs, H)
    b = fast_episode(cls(horizon=H, random_state=5, **kw), costs, H)
    np.testing.assert_array_equal(a.decisions, b.decisions)
    np.testing.assert_allclose(a.states, b.states, atol=1e-12)
    np.testing.assert_allclose(a.losses, b.losses, atol=1e-12)


def test_h1_ftarl_is_memoryless_ftpl():
    costs = stoc_het(4, 500, 21)
    a = FTARL(horizon=1, random_state=8).fit(costs)
    b = FTPL(horizon=1, random_state=8).fit(costs)
    assert a.epsilon_ == b.epsilon_
    np.testing.assert_array_equal(a.trajectory_.decisions, b.trajectory_.decisions)
    np.testing.assert_array_equal(a.trajectory_.states, a.trajectory_.decisions)


def test_ftpl_ignores_horizon_in_rate():
    learner = FTPL(horizon=50, random_state=0).start(2, 1000)
    assert learner.epsilon_ == epsilon_schedule(1000, 1, 2, 1.0)


def test_lsa_holds_decisions_within_blocks():
    costs = stoc_het(3, 103, 2)
    traj = LSA(horizon=4, block=5, random_state=3).fit(costs).trajectory_
    for start in range(0, 103, 5):
        block = traj.decisions[start:start + 5]
        assert (block == block[0]).all()


def test_lsa_switches_only_at_block_starts():
    costs = stoc_id(2, 400, 6)
    traj = LSA(horizon=2, block=9, epsilon=5.0, random_state=1).fit(costs).trajectory_
    changed = np.flatnonzero((traj.decisions[1:] != traj.decisions[:-1]).any(axis=1)) + 2
    assert changed.size > 0
    assert np.all((changed - 1) % 9 == 0)


def test_lsa_block_one_is_inner_learner():
    costs = stoc_het(3, 200, 8)
    lsa = LSA(horizon=3, block=1, random_state=4).fit(costs)
    inner = FreshFTPL(horizon=3, epsilon=lsa.epsilon_, bound=1.0, random_state=lsa.seed_).fit(costs)
    np.testing.assert_array_equal(lsa.trajectory_.decisions, inner.trajectory_.decisions)


def test_lsa_default_block():
    learner = LSA(horizon=100, random_state=0).start(2, 10000)
    assert learner.block_ == default_block_length(10000, 100) == 1000


def test_partial_fit_streaming_matches_fit():
    costs = stoc_id(3, 60, 5)
    batch = FTARL(horizon=4, random_state=9).fit(costs).trajectory_
    online = FTARL(horizon=4, n_rounds=60, random_state=9).start(3, 60)
    decisions = []
    for g in costs:
        decisions.append(online.decide())
        online.partial_fit(g)
    np.testing.assert_array_equal(np.array(decisions), batch.decisions)


def test_make_learner():
    assert isinstance(make_learner("lsa", horizon=3, block=None, theta=4), LSA)
    with pytest.raises(ConfigError):
        make_learner("hedge")
