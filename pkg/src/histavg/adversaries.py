"""Oblivious cost-sequence generators.

Every generator is a pure function of its parameters and seed and returns the
whole (T, n) cost matrix up front. Built-in generators emit non-positive costs
with sup-norm at most 1 (M = 1); ``raw_sign=True`` flips the stochastic ones to
their [0, 1] form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import ConfigError
from .validation import check_costs


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & ((1 << 64) - 1)))


def stoc_id(n: int, T: int, seed: int, raw_sign: bool = False) -> np.ndarray:
    """i.i.d. uniform costs on [-1, 0] for every action and round."""
    u = _rng(seed).random((T, n))
    return u if raw_sign else -u


def stoc_het_intervals(n: int, seed: int) -> np.ndarray:
    """Per-action intervals [a_i, b_i] in [0, 1] as an (n, 2) array."""
    return np.sort(_rng(seed).random((n, 2)), axis=1)


def stoc_het(n: int, T: int, seed: int, raw_sign: bool = False) -> np.ndarray:
    """Action i draws i.i.d. costs uniform on [-b_i, -a_i] (intervals fixed per seed)."""
    rng = _rng(seed)
    ab = np.sort(rng.random((n, 2)), axis=1)
    u = rng.random((T, n))
    costs = ab[:, 0] + (ab[:, 1] - ab[:, 0]) * u
    return costs if raw_sign else -costs


def cyc(n: int, T: int, L: int) -> np.ndarray:
    """-e_1 for L rounds, then -e_2 for L rounds, ..., cycling through the n actions."""
    if L < 1:
        raise ConfigError(f"cycle period L must be >= 1, got {L}")
    active = (np.arange(T) // L) % n
    costs = np.zeros((T, n))
    costs[np.arange(T), active] = -1.0
    return costs


def lower_bound_coin(coin_seed: int) -> int:
    """Fair coin deciding which action carries the late cost (0 or 1)."""
    return int(_rng(coin_seed).integers(0, 2))


def lower_bound_adversary(T: int, H: int, coin_seed: int) -> np.ndarray:
    """Two-action sequence: zero costs up to T - H/4, then -e_coin until T."""
    if H % 4 != 0 or H <= 0:
        raise ConfigError(f"H must be a positive multiple of 4, got {H}")
    if H > 0.8 * T:
        raise ConfigError(f"need H <= 0.8 T, got H={H}, T={T}")
    switch = T - H // 4
    costs = np.zeros((T, 2))
    costs[switch:, lower_bound_coin(coin_seed)] = -1.0
    return costs


def read_cost_csv(path, raw_sign: bool = False) -> np.ndarray:
    """Load ``t,g_1,...,g_n`` rows (header required, t = 1..T in order)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "t" or len(header) < 3:
            raise ValueError(f"{path}: expected header t,g_1,...,g_n")
        rows = [r for r in reader if r]
    n = len(header) - 1
    costs = np.empty((len(rows), n))
    for k, row in enumerate(rows):
        if len(row) != n + 1:
            raise ValueError(f"{path}: row {k + 2} has {len(row)} fields, expected {n + 1}")
        if int(row[0]) != k + 1:
            raise ValueError(f"{path}: row {k + 2} has t={row[0]}, expected {k + 1}")
        costs[k] = [float(x) for x in row[1:]]
    return check_costs(costs, allow_positive=raw_sign)


@dataclass(frozen=True)
class StocId:
    n: int
    raw_sign: bool = False
    bound: float = 1.0

    def generate(self, T: int, seed: int) -> np.ndarray:
        return stoc_id(self.n, T, seed, self.raw_sign)


@dataclass(frozen=True)
class StocHet:
    n: int
    raw_sign: bool = False
    bound: float = 1.0

    def generate(self, T: int, seed: int) -> np.ndarray:
        return stoc_het(self.n, T, seed, self.raw_sign)


@dataclass(frozen=True)
class Cyc:
    n: int
    L: int = 50
    bound: float = 1.0

    def generate(self, T: int, seed: int = 0) -> np.ndarray:
        return cyc(self.n, T, self.L)


@dataclass(frozen=True)
class LowerBound:
    H: int
    n: int = 2
    bound: float = 1.0

    def generate(self, T: int, seed: int) -> np.ndarray:
        return lower_bound_adversary(T, self.H, seed)


@dataclass(frozen=True)
class CsvCosts:
    path: str
    raw_sign: bool = False
    bound: float = 1.0

    def generate(self, T: int, seed: int = 0) -> np.ndarray:
        costs = read_cost_csv(self.path, self.raw_sign)
        if len(costs) < T:
            raise ValueError(f"{self.path} holds {len(costs)} rounds, {T} requested")
        return costs[:T]


def make_adversary(name: str, n: int, H: int = 1, L: int = 50, raw_sign: bool = False, path=None):
    if name == "stoc-id":
        return StocId(n, raw_sign)
    if name == "stoc-het":
        return StocHet(n, raw_sign)
    if name == "cyc":
        return Cyc(n, L)
    if name == "lower-bound":
        if n != 2:
            raise ConfigError("the lower-bound adversary is two-dimensional (n = 2)")
        return LowerBound(H)
    if name == "csv":
        if path is None:
            raise ConfigError("--adversary csv needs a cost file (--costs PATH)")
        return CsvCosts(str(path), raw_sign)
    raise ConfigError(f"unknown adversary {name!r}")
