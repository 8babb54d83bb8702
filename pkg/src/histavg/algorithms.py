"""Online learners for history-averaged linear costs on the simplex.

All learners are scikit-learn estimators. ``fit(costs)`` plays a whole episode
against a fixed (oblivious) cost matrix and stores ``trajectory_``; the online
surface is ``start(n, T)``, then ``decide()`` / ``partial_fit(g)`` per round.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .core import ConfigError, HistoryState, Trajectory, derive_seed, exp_draw, vertex, window_states
from .validation import check_cost_vector, check_costs, check_positive, check_seed


def epsilon_schedule(T: int, H: int, n: int, M: float) -> float:
    """Perturbation rate sqrt(4 (ln n + 1) / (M^2 (T - H) (2 + H)))."""
    if T <= H:
        raise ConfigError(f"the epsilon schedule needs T > H (got T={T}, H={H})")
    if H < 1 or n < 2:
        raise ConfigError(f"need H >= 1 and n >= 2 (got H={H}, n={n})")
    check_positive("M", M)
    return math.sqrt(4.0 * (math.log(n) + 1.0) / (M * M * (T - H) * (2.0 + H)))


def epsilon_schedule_theta(T: int, theta: int, n: int, M: float) -> float:
    """H-agnostic rate sqrt(4 (ln n + 1) / (T M^2 theta)) for a horizon bound theta."""
    if T < 1 or theta < 1:
        raise ConfigError(f"need T >= 1 and theta >= 1 (got T={T}, theta={theta})")
    if n < 2:
        raise ConfigError(f"need n >= 2, got {n}")
    check_positive("M", M)
    return math.sqrt(4.0 * (math.log(n) + 1.0) / (T * M * M * theta))


def delta_schedule(T: int, H: int, M: float) -> float:
    if T < 1:
        raise ConfigError(f"need T >= 1, got {T}")
    return M * H / T


def default_block_length(T: int, H: int) -> int:
    return max(1, math.ceil(math.sqrt(T * H)))


class OnlineLearner(BaseEstimator):
    """Shared plumbing: episode bookkeeping and the fit/partial_fit surface."""

    def start(self, n: int, n_rounds: int):
        """Reset for a fresh episode over ``n`` actions and ``n_rounds`` rounds."""
        if n < 2:
            raise ConfigError(f"need at least two actions, got {n}")
        self.n_features_in_ = int(n)
        self.n_rounds_ = int(n_rounds)
        self.seed_ = check_seed(self.random_state)
        self.round_ = 0
        self.cumulative_ = np.zeros(self.n_features_in_)
        self._setup()
        return self

    def _setup(self):
        raise NotImplementedError

    def _check_started(self):
        if not hasattr(self, "cumulative_"):
            raise NotFittedError(f"call start(n, T) or fit(costs) on this {type(self).__name__} first")

    def decide(self) -> np.ndarray:
        """Decision v for the next round, using only costs observed so far."""
        self._check_started()
        return vertex(self._leader(), self.n_features_in_)

    def partial_fit(self, g):
        """Observe the cost vector of the round just played."""
        if not hasattr(self, "cumulative_"):
            g = np.asarray(g, dtype=float)
            if self.n_rounds is None:
                raise ConfigError("set n_rounds (or call start) before streaming costs")
            self.start(g.shape[0], self.n_rounds)
        g = check_cost_vector(g, self.n_features_in_, allow_positive=True)
        self.cumulative_ = self.cumulative_ + g
        self.round_ += 1
        return self

    def fit(self, costs, y=None):
        costs = check_costs(costs, allow_positive=True)
        self.trajectory_ = run_episode(self, costs, self.horizon)
        return self

    def decide_all(self, costs) -> np.ndarray:
        """All T decisions at once for a known oblivious cost matrix.

        Round t only reads the prefix sum of costs 1..t-1, so this agrees with
        the round-by-round loop; call ``start`` first.
        """
        self._check_started()
        costs = np.asarray(costs, dtype=float)
        leaders = self._leaders_all(costs)
        return np.eye(self.n_features_in_)[leaders]

    def _leader(self) -> int:
        raise NotImplementedError

    def _leaders_all(self, costs) -> np.ndarray:
        raise NotImplementedError


def _prefix_sums(costs: np.ndarray) -> np.ndarray:
    """Rows G^0 .. G^T (T + 1 rows)."""
    return np.concatenate([np.zeros((1, costs.shape[1])), np.cumsum(costs, axis=0)])


class FTARL(OnlineLearner):
    """Follow-the-adaptively-regularized-leader for history-averaged costs.

    A single exponential perturbation ``z_`` is drawn at the start of the
    episode; each round plays the vertex minimizing ``G - z`` over the costs
    seen so far. The regularized argmin reduces to this closed form, so no
    optimization runs here (``histavg.analysis.argmin_oracle`` checks it).

    Parameters
    ----------
    horizon : int
        History length H of the averaging dynamics.
    epsilon : float or "auto"
        Exponential rate. "auto" uses ``epsilon_schedule(T, H, n, bound)``,
        or ``epsilon_schedule_theta`` when ``theta`` is given.
    delta : float or "auto"
        Regularizer weight, only used by the analysis tools; "auto" is M H / T.
    theta : int, optional
        Known upper bound on H.
    bound : float
        M, a bound on the sup-norm of every cost vector.
    n_rounds : int, optional
        Episode length when streaming with ``partial_fit``.
    random_state : int, optional
        64-bit seed for the perturbation.
    """

    def __init__(self, horizon=1, epsilon="auto", delta="auto", theta=None, bound=1.0,
                 n_rounds=None, random_state=None):
        self.horizon = horizon
        self.epsilon = epsilon
        self.delta = delta
        self.theta = theta
        self.bound = bound
        self.n_rounds = n_rounds
        self.random_state = random_state

    def _resolve_epsilon(self, n: int, T: int) -> float:
        if self.epsilon != "auto":
            return check_positive("epsilon", self.epsilon)
        if self.theta is not None:
            if self.theta < self.horizon:
                raise ConfigError(f"theta={self.theta} must be >= horizon={self.horizon}")
            return epsilon_schedule_theta(T, self.theta, n, self.bound)
        return epsilon_schedule(T, self.horizon, n, self.bound)

    def _setup(self):
        n, T = self.n_features_in_, self.n_rounds_
        self.epsilon_ = self._resolve_epsilon(n, T)
        if self.delta == "auto":
            self.delta_ = delta_schedule(max(T, 1), self.horizon, self.bound)
        else:
            self.delta_ = check_positive("delta", self.delta, allow_zero=True)
        self.z_ = exp_draw(n, self.epsilon_, self.seed_)

    def _leader(self) -> int:
        return int(np.argmin(self.cumulative_ - self.z_))

    def _leaders_all(self, costs) -> np.ndarray:
        G = _prefix_sums(costs)[:-1]
        return np.argmin(G - self.z_, axis=1)

    def leaders(self, costs) -> np.ndarray:
        """Leader indices i_0 .. i_T, where i_t = argmin(G^t - z)."""
        self._check_started()
        return np.argmin(_prefix_sums(np.asarray(costs, dtype=float)) - self.z_, axis=1)


class FTPL(FTARL):
    """Memoryless follow-the-perturbed-leader.

    Same decision rule as FTARL, with the experts rate (H = 1 schedule) that
    ignores the history horizon of the environment.
    """

    def __init__(self, horizon=1, epsilon="auto", bound=1.0, n_rounds=None, random_state=None):
        self.horizon = horizon
        self.epsilon = epsilon
        self.bound = bound
        self.n_rounds = n_rounds
        self.random_state = random_state

    delta = "auto"
    theta = None

    def _resolve_epsilon(self, n: int, T: int) -> float:
        if self.epsilon != "auto":
            return check_positive("epsilon", self.epsilon)
        return epsilon_schedule(T, 1, n, self.bound)


class FreshFTPL(OnlineLearner):
    """FTPL that redraws its exponential perturbation every round.

    This is the inner learner of ``LSA``; draw ``k`` uses seed
    ``derive_seed(seed, k)``.
    """

    def __init__(self, horizon=1, epsilon=1.0, bound=1.0, n_rounds=None, random_state=None):
        self.horizon = horizon
        self.epsilon = epsilon
        self.bound = bound
        self.n_rounds = n_rounds
        self.random_state = random_state

    def _setup(self):
        self.epsilon_ = check_positive("epsilon", self.epsilon)

    def _draw(self, k: int) -> np.ndarray:
        return exp_draw(self.n_features_in_, self.epsilon_, derive_seed(self.seed_, k))

    def _leader(self) -> int:
        return int(np.argmin(self.cumulative_ - self._draw(self.round_)))

    def _leaders_all(self, costs) -> np.ndarray:
        G = _prefix_sums(costs)[:-1]
        Z = np.stack([self._draw(k) for k in range(len(costs))]) if len(costs) else np.zeros((0, G.shape[1]))
        return np.argmin(G - Z, axis=1)


class LSA(OnlineLearner):
    """Low-switch blocking baseline.

    Time is cut into blocks of ``block`` rounds. At each block start the inner
    ``FreshFTPL`` receives the summed costs of the block just completed and its
    decision is held for the whole block. ``block=None`` uses ceil(sqrt(T H)).
    The inner rate defaults to the H = 1 schedule over ceil(T / B) rounds with
    per-round bound M B.
    """

    def __init__(self, horizon=1, block=None, epsilon="auto", bound=1.0, n_rounds=None,
                 random_state=None):
        self.horizon = horizon
        self.block = block
        self.epsilon = epsilon
        self.bound = bound
        self.n_rounds = n_rounds
        self.random_state = random_state

    def _setup(self):
        n, T = self.n_features_in_, self.n_rounds_
        B = default_block_length(T, self.horizon) if self.block is None else int(self.block)
        if B < 1:
            raise ConfigError(f"block length must be >= 1, got {self.block}")
        self.block_ = B
        n_blocks = max(1, math.ceil(T / B))
        if self.epsilon == "auto":
            eps = epsilon_schedule(n_blocks + 1, 1, n, self.bound * B)
        else:
            eps = check_positive("epsilon", self.epsilon)
        self.inner_ = FreshFTPL(epsilon=eps, bound=self.bound * B, random_state=self.seed_)
        self.inner_.start(n, n_blocks)
        self.epsilon_ = eps
        self._block_sum = np.zeros(n)
        self._held = None

    def decide(self) -> np.ndarray:
        self._check_started()
        if self.round_ % self.block_ == 0:
            if self.round_ > 0:
                self.inner_.partial_fit(self._block_sum)
                self._block_sum = np.zeros(self.n_features_in_)
            self._held = self.inner_.decide()
        return self._held.copy()

    def partial_fit(self, g):
        super().partial_fit(g)
        self._block_sum = self._block_sum + np.asarray(g, dtype=float)
        return self

    def _leaders_all(self, costs) -> np.ndarray:
        T, n = costs.shape
        B = self.block_
        starts = np.arange(0, T, B)
        block_sums = np.add.reduceat(costs, starts, axis=0) if T else np.zeros((0, n))
        inner = FreshFTPL(epsilon=self.epsilon_, bound=self.bound * B, random_state=self.seed_)
        inner.start(n, len(starts))
        per_block = inner._leaders_all(block_sums)
        return np.repeat(per_block, B)[:T]


def run_episode(learner: OnlineLearner, costs, horizon: int, n: int = None,
                allow_positive: bool = True) -> Trajectory:
    """Play ``learner`` against a fixed cost sequence through the averaging dynamics.

    ``costs`` is any sequence of cost vectors with ``len``; row t is read only
    after the round-t decision has been made. ``n`` defaults to
    ``costs.shape[1]``.
    """
    T = len(costs)
    if n is None:
        shape = getattr(costs, "shape", None)
        if shape is None:
            raise ValueError("pass n when costs has no shape attribute")
        n = shape[1] if len(shape) == 2 else 0
    if T == 0:
        empty = np.zeros((0, n))
        return Trajectory(empty, empty, empty, horizon)
    learner.start(n, T)
    state = HistoryState(horizon, n)
    V = np.empty((T, n))
    X = np.empty((T, n))
    G = np.empty((T, n))
    for t in range(T):
        v = learner.decide()
        V[t] = v
        X[t] = state.advance(v)
        g = check_cost_vector(costs[t], n, allow_positive=allow_positive)
        if g.shape[0] != n:
            raise ValueError(f"round {t + 1}: cost vector has {g.shape[0]} entries, learner has {n}")
        G[t] = g
        learner.partial_fit(g)
    return Trajectory(V, X, G, horizon)


def fast_episode(learner: OnlineLearner, costs, horizon: int) -> Trajectory:
    """Vectorized ``run_episode`` for vertex-playing learners and a known cost matrix."""
    costs = np.asarray(costs, dtype=float)
    T, n = costs.shape
    if T == 0:
        return Trajectory(costs, costs, costs, horizon)
    learner.start(n, T)
    V = learner.decide_all(costs)
    return Trajectory(V, window_states(V, horizon), costs, horizon)


def make_learner(algo: str, **params) -> OnlineLearner:
    table = {"ftarl": FTARL, "ftpl": FTPL, "lsa": LSA}
    try:
        cls = table[algo]
    except KeyError:
        raise ConfigError(f"unknown algorithm {algo!r}; choose from {sorted(table)}") from None
    names = cls._get_param_names()
    return cls(**{k: v for k, v in params.items() if k in names and v is not None})
