"""Simplex arithmetic, the history-averaging state machine and seeded randomness."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

SIMPLEX_ATOL = 1e-9
NONNEG_ATOL = 1e-12

_MASK64 = (1 << 64) - 1

# Runtime invariant checks inside HistoryState.advance; the test suite switches
# them on (see tests/conftest.py), HISTAVG_CHECK=1 does the same elsewhere.
_checks = {"enabled": os.environ.get("HISTAVG_CHECK", "") not in ("", "0")}


class ConfigError(ValueError):
    """Invalid configuration (bad horizon, dimension, rate, ...)."""


class InvariantError(AssertionError):
    """A state-machine or domain invariant was violated at runtime."""


def set_invariant_checks(enabled: bool) -> bool:
    """Toggle runtime invariant checks, returning the previous setting."""
    previous = _checks["enabled"]
    _checks["enabled"] = bool(enabled)
    return previous


def invariant_checks_enabled() -> bool:
    return _checks["enabled"]


def is_simplex(v, atol: float = SIMPLEX_ATOL) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(v.ndim == 1 and np.all(v >= -NONNEG_ATOL) and abs(v.sum() - 1.0) <= atol)


def _is_simplex_small(entries: list) -> bool:
    # plain-float version of is_simplex for the per-round checks
    return min(entries) >= -NONNEG_ATOL and abs(sum(entries) - 1.0) <= SIMPLEX_ATOL


def vertex(i: int, n: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(root: int, index: int) -> int:
    """Child seed for stream ``index`` of ``root``: splitmix64(root xor index)."""
    return splitmix64((int(root) ^ int(index)) & _MASK64)


def exp_draw(n: int, epsilon: float, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. Exponential(rate=epsilon) variates by inverse CDF.

    The generator is Philox (counter based) keyed by ``seed``, so the same
    ``(n, epsilon, seed)`` always returns the same vector bit for bit.
    """
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = np.random.Generator(np.random.Philox(int(seed) & _MASK64))
    u = rng.random(n)
    zero = u == 0.0
    while zero.any():
        u[zero] = rng.random(int(zero.sum()))
        zero = u == 0.0
    return -np.log(u) / epsilon


class HistoryState:
    """Incremental state of the averaging dynamics.

    ``advance(v)`` plays input ``v`` at the next round ``t`` and returns
    ``x_t = y_{t-1} + beta_t v``. The last ``H`` inputs live in a ring buffer;
    ``y_current`` is the part of the next state already fixed by the past and
    ``beta_next`` the weight the next input will receive.
    """

    def __init__(self, H: int, n: int):
        if int(H) != H or H < 1:
            raise ConfigError(f"history horizon H must be an integer >= 1, got {H}")
        if int(n) != n or n < 2:
            raise ConfigError(f"dimension n must be an integer >= 2, got {n}")
        self.horizon = int(H)
        self.n = int(n)
        self.window = np.zeros((self.horizon, self.n))
        self.window_sum = np.zeros(self.n)
        self.round = 0
        self.y_current = np.zeros(self.n)
        self.beta_next = 1.0
        self.x_current: Optional[np.ndarray] = None
        self._head = 0  # slot holding the oldest input once the buffer is full
        self._recompute_every = min(self.horizon, 1024)

    @property
    def size(self) -> int:
        """Number of inputs currently held (min{round, H})."""
        return min(self.round, self.horizon)

    def inputs(self) -> np.ndarray:
        """Held inputs, oldest first."""
        k = self.size
        if k < self.horizon:
            return self.window[:k].copy()
        return np.roll(self.window, -self._head, axis=0)

    def advance(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"input has shape {v.shape}, expected ({self.n},)")
        checking = _checks["enabled"]
        if checking and not _is_simplex_small(v.tolist()):
            raise InvariantError(f"round {self.round + 1}: input {v} is not in the simplex")

        t = self.round + 1
        x = self.y_current + self.beta_next * v

        H = self.horizon
        if t <= H:
            self.window[t - 1] = v
            self.window_sum += v
        else:
            self.window_sum -= self.window[self._head]
            self.window[self._head] = v
            self.window_sum += v
            self._head = (self._head + 1) % H
        if t % self._recompute_every == 0:
            self.window_sum = self.window.sum(axis=0) if t >= H else self.window[:t].sum(axis=0)

        if t < H:
            self.y_current = self.window_sum / (t + 1)
        elif H == 1:
            self.y_current = np.zeros(self.n)
        else:
            self.y_current = (self.window_sum - self.window[self._head]) / H
        self.beta_next = 1.0 / min(t + 1, H)

        if checking:
            self._check(t, x)
        self.x_current = x
        self.round = t
        return x

    def _check(self, t: int, x: np.ndarray) -> None:
        xs = x.tolist()
        if not _is_simplex_small(xs):
            raise InvariantError(f"round {t}: state {x} is not in the simplex")
        if self.x_current is not None:
            step = sum(abs(a - b) for a, b in zip(xs, self.x_current.tolist()))
            limit = 2.0 / min(t - 1, self.horizon)
            if step > limit + 1e-12:
                raise InvariantError(
                    f"round {t}: |x_t - x_(t-1)|_1 = {step:.3e} exceeds 2/min(t-1,H) = {limit:.3e}"
                )


def state_init(H: int, n: int) -> HistoryState:
    return HistoryState(H, n)


def state_advance(state: HistoryState, v) -> np.ndarray:
    return state.advance(v)


def reference_states(inputs, H: int) -> np.ndarray:
    """Brute-force time-averaged states: mean of the last min(t, H) inputs.

    ``inputs`` has rounds on axis 0; any trailing shape is carried along, so a
    stack of candidate sequences can be averaged in one pass.
    """
    inputs = np.asarray(inputs, dtype=float)
    out = np.empty_like(inputs)
    for t in range(1, inputs.shape[0] + 1):
        out[t - 1] = inputs[max(0, t - H):t].mean(axis=0)
    return out


@dataclass
class Trajectory:
    """Record of one episode: inputs v, states x, costs g and losses <g, x>."""

    decisions: np.ndarray
    states: np.ndarray
    costs: np.ndarray
    horizon: int
    losses: np.ndarray = field(default=None)

    def __post_init__(self):
        self.decisions = np.asarray(self.decisions, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.costs = np.asarray(self.costs, dtype=float)
        if self.losses is None:
            self.losses = np.einsum("ti,ti->t", self.costs, self.states) if len(self.costs) else np.zeros(0)
        if not (len(self.decisions) == len(self.states) == len(self.costs) == len(self.losses)):
            raise ValueError("trajectory fields must all have length T")

    @property
    def T(self) -> int:
        return len(self.costs)

    @property
    def n(self) -> int:
        return self.costs.shape[1]

    @property
    def cumulative(self) -> np.ndarray:
        """G^T, the summed cost vector."""
        return self.costs.sum(axis=0)


@dataclass
class EpisodeConfig:
    n: int
    T: int
    H: int
    M: float = 1.0
    epsilon: Union[float, str] = "auto"
    delta: Union[float, str] = "auto"
    theta: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if self.H < 1:
            raise ConfigError(f"H must be >= 1, got {self.H}")
        if not self.M > 0:
            raise ConfigError(f"M must be > 0, got {self.M}")
        if self.epsilon != "auto" and not float(self.epsilon) > 0:
            raise ConfigError(f"epsilon must be > 0 or 'auto', got {self.epsilon}")
        if self.delta != "auto" and not float(self.delta) >= 0:
            raise ConfigError(f"delta must be >= 0 or 'auto', got {self.delta}")
        if self.theta is not None and self.theta < self.H:
            raise ConfigError(f"theta must be >= H={self.H}, got {self.theta}")
        self.seed = int(self.seed) & _MASK64


def window_states(inputs, H: int) -> np.ndarray:
    """Vectorized time-averaged states via prefix sums.

    Exact for vertex inputs (the prefix sums are integers); ``run_episode``
    remains the reference path for arbitrary simplex inputs.
    """
    inputs = np.asarray(inputs, dtype=float)
    T = inputs.shape[0]
    prefix = np.concatenate([np.zeros((1,) + inputs.shape[1:]), np.cumsum(inputs, axis=0)])
    t = np.arange(1, T + 1)
    lo = np.maximum(t - H, 0)
    sums = prefix[t] - prefix[lo]
    denom = np.minimum(t, H).reshape((T,) + (1,) * (inputs.ndim - 1))
    states = sums / denom
    if _checks["enabled"] and T > 1:
        steps = np.abs(np.diff(states, axis=0)).sum(axis=-1).reshape(T - 1, -1).max(axis=1)
        limit = 2.0 / np.minimum(t[:-1], H)
        bad = np.flatnonzero(steps > limit + 1e-12)
        if bad.size:
            raise InvariantError(f"round {bad[0] + 2}: state step {steps[bad[0]]:.3e} exceeds {limit[bad[0]]:.3e}")
    return states
