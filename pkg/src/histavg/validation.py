"""Input validation helpers shared by learners, adversaries and the harness."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .core import ConfigError, NONNEG_ATOL, SIMPLEX_ATOL


def check_costs(costs, bound=None, allow_positive=False, n_features=None) -> np.ndarray:
    """Validate a (T, n) cost matrix and return it as a float array.

    Entries must be non-positive unless ``allow_positive``; with ``bound`` set,
    every row must satisfy ``|g|_inf <= bound``.
    """
    costs = check_array(costs, dtype=float, ensure_2d=True, ensure_min_samples=0,
                        ensure_all_finite=True, input_name="costs")
    if n_features is not None and costs.shape[1] != n_features:
        raise ValueError(f"costs have {costs.shape[1]} columns, expected {n_features}")
    if costs.shape[1] < 2:
        raise ValueError("costs need at least two actions (columns)")
    if not allow_positive and costs.size and costs.max() > 0:
        t = int(np.argmax(costs.max(axis=1) > 0)) + 1
        raise ValueError(f"cost vector at round {t} has a positive entry")
    if bound is not None and costs.size:
        worst = np.abs(costs).max()
        if worst > bound + 1e-12:
            raise ValueError(f"cost entry {worst} exceeds the bound M={bound}")
    return costs


def check_cost_vector(g, n=None, allow_positive=False) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 1:
        raise ValueError(f"cost vector must be 1-d, got shape {g.shape}")
    if n is not None and g.shape[0] != n:
        raise ValueError(f"cost vector has {g.shape[0]} entries, expected {n}")
    if not np.all(np.isfinite(g)):
        raise ValueError("cost vector has non-finite entries")
    if not allow_positive and g.max() > 0:
        raise ValueError("cost vector has a positive entry")
    return g


def check_simplex(v, n=None, atol=SIMPLEX_ATOL) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or (n is not None and v.shape[0] != n):
        raise ValueError(f"expected a simplex vector of length {n}, got shape {v.shape}")
    if np.any(v < -NONNEG_ATOL) or abs(v.sum() - 1.0) > atol:
        raise ValueError(f"{v} is not in the probability simplex")
    return v


def check_positive(name, value, allow_zero=False) -> float:
    value = float(value)
    if not (value >= 0 if allow_zero else value > 0) or not np.isfinite(value):
        bound = ">= 0" if allow_zero else "> 0"
        raise ConfigError(f"{name} must be {bound}, got {value}")
    return value


def check_seed(seed) -> int:
    """Coerce ``seed`` to an unsigned 64-bit integer; None draws fresh entropy."""
    if seed is None:
        return int(np.random.SeedSequence().entropy) & ((1 << 64) - 1)
    if isinstance(seed, (bool, np.bool_)) or int(seed) != seed:
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    return int(seed) & ((1 << 64) - 1)
