"""Regret accounting and executable checks of the FTARL guarantees."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np

from .core import ConfigError, HistoryState, Trajectory, reference_states, vertex

IDENTITY_ATOL = 1e-9
ORACLE_ATOL = 1e-6


class TrajectoryError(ValueError):
    """A trajectory does not satisfy the preconditions of a check."""


class OracleError(RuntimeError):
    """The numeric argmin did not converge within its iteration budget."""


class OutsideScopeWarning(UserWarning):
    pass


@dataclass
class RegretReport:
    total_loss: float
    best_in_hindsight: float
    regret: float
    policy_regret: Optional[float] = None
    bound_value: Optional[float] = None
    bound_satisfied: Optional[bool] = None


def best_in_hindsight(costs) -> float:
    """min over the simplex of <G^T, x>, attained at the smallest coordinate."""
    return float(np.asarray(costs, dtype=float).sum(axis=0).min())


def regret_path(traj: Trajectory) -> np.ndarray:
    """Regret of every round prefix: cumulative loss minus min_i G^t_i."""
    return np.cumsum(traj.losses) - np.cumsum(traj.costs, axis=0).min(axis=1)


def regret(traj: Trajectory, policy: bool = False, bound: Optional[float] = None) -> RegretReport:
    if traj.T == 0:
        raise TrajectoryError("regret of an empty trajectory is undefined")
    total = float(traj.losses.sum())
    bih = best_in_hindsight(traj.costs)
    report = RegretReport(total, bih, total - bih)
    if policy:
        report.policy_regret = policy_regret(traj)
    if bound is not None:
        report.bound_value = float(bound)
        report.bound_satisfied = report.regret <= bound
    return report


def check_states(traj: Trajectory, atol: float = IDENTITY_ATOL) -> None:
    """Raise TrajectoryError unless the states are the windowed means of the inputs."""
    expected = reference_states(traj.decisions, traj.horizon)
    err = np.abs(expected - traj.states).max(axis=1) if traj.T else np.zeros(0)
    bad = np.flatnonzero(err > atol)
    if bad.size:
        t = int(bad[0])
        raise TrajectoryError(
            f"round {t + 1}: state {traj.states[t]} differs from the windowed mean "
            f"{expected[t]} by {err[t]:.3e}"
        )


def policy_regret(traj: Trajectory) -> float:
    """Regret against the best constant input replayed through the averaging map.

    Each vertex input is run through the windowed-mean dynamics as its own
    sequence; linearity puts the minimum over the simplex at a vertex.
    """
    check_states(traj)
    T, n = traj.costs.shape
    constant = np.broadcast_to(np.eye(n), (T, n, n))  # [t, candidate, action]
    replayed = reference_states(constant, traj.horizon)
    candidate_loss = np.einsum("ti,tki->k", traj.costs, replayed)
    return float(traj.losses.sum() - candidate_loss.min())


# --- follow-the-leader inequality -------------------------------------------

def ftl_decisions(costs) -> np.ndarray:
    """FTL over the simplex for linear costs: x^1 = e_1, then the vertex minimizing G^{t-1}.

    Returns T + 1 rows; the last is the post-hoc leader x^{T+1}.
    """
    costs = np.asarray(costs, dtype=float)
    T, n = costs.shape
    G = np.concatenate([np.zeros((1, n)), np.cumsum(costs, axis=0)])
    return np.eye(n)[np.argmin(G, axis=1)]


def ftl_inequality_sides(costs, decisions):
    costs = np.asarray(costs, dtype=float)
    decisions = np.asarray(decisions, dtype=float)
    T = len(costs)
    if len(decisions) != T + 1:
        raise TrajectoryError(f"need T + 1 = {T + 1} decisions, got {len(decisions)}")
    played = np.einsum("ti,ti->t", costs, decisions[:T])
    lhs = played.sum() - best_in_hindsight(costs)
    rhs = (played - np.einsum("ti,ti->t", costs, decisions[1:])).sum()
    return float(lhs), float(rhs)


def verify_ftl_inequality(costs, decisions, tol: float = IDENTITY_ATOL) -> bool:
    lhs, rhs = ftl_inequality_sides(costs, decisions)
    return lhs <= rhs + tol


# --- adaptive regularizers ---------------------------------------------------

@dataclass
class RegularizerSpec:
    """Regularizer of round t.

    R^0(x) = -<z, x>; for t >= 1,
    R^t(x) = delta (|x - y^t|^2 / 2 - beta^{t+1} <v*^{t+1}, x>) - <G^t, x>.
    """

    t: int
    delta: float
    y: np.ndarray
    beta_next: float
    v_star_next: np.ndarray
    G: np.ndarray
    z: np.ndarray

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.t == 0:
            return float(-self.z @ x)
        d = x - self.y
        return float(self.delta * (0.5 * d @ d - self.beta_next * self.v_star_next @ x) - self.G @ x)

    def gradient(self, x) -> np.ndarray:
        if self.t == 0:
            return -self.z
        return self.delta * (np.asarray(x, dtype=float) - self.y) - self.delta * self.beta_next * self.v_star_next - self.G

    def closed_form(self) -> np.ndarray:
        """y^t + beta^{t+1} v*^{t+1}, the FTARL state of round t + 1."""
        if self.t == 0:
            return vertex(int(np.argmin(-self.z)), len(self.z))
        return self.y + self.beta_next * self.v_star_next


@dataclass
class FtarlCertificate:
    """Regularizers R^0..R^T of an FTARL run plus the virtual states x^{T+1}, x^{T+2}."""

    regularizers: List[RegularizerSpec]
    virtual_states: np.ndarray


def ftarl_regularizers(traj: Trajectory, z, delta: float, atol: float = IDENTITY_ATOL) -> FtarlCertificate:
    """Rebuild the regularizer sequence of an FTARL trajectory.

    The inputs are replayed through a fresh state machine; two extra rounds
    with no further cost extend the run to x^{T+1} and x^{T+2}. Raises
    TrajectoryError if the trajectory is not the FTARL run for ``z``.
    """
    z = np.asarray(z, dtype=float)
    T, n = traj.costs.shape
    G = np.concatenate([np.zeros((1, n)), np.cumsum(traj.costs, axis=0)])
    leaders = np.argmin(G - z, axis=1)
    state = HistoryState(traj.horizon, n)
    specs = [RegularizerSpec(0, delta, np.zeros(n), 1.0, vertex(leaders[0], n), G[0], z)]
    for t in range(1, T + 1):
        v = traj.decisions[t - 1]
        if not np.array_equal(v, vertex(leaders[t - 1], n)):
            raise TrajectoryError(f"round {t}: decision {v} is not the perturbed leader e_{leaders[t - 1]}")
        x = state.advance(v)
        if np.abs(x - traj.states[t - 1]).max() > atol:
            raise TrajectoryError(f"round {t}: state {traj.states[t - 1]} does not follow the averaging update")
        specs.append(RegularizerSpec(t, delta, state.y_current.copy(), state.beta_next,
                                     vertex(leaders[t], n), G[t], z))
    virtual = np.stack([state.advance(vertex(leaders[T], n)) for _ in range(2)])
    return FtarlCertificate(specs, virtual)


def ftarl_inequality_sides(traj: Trajectory, certificate: FtarlCertificate, comparator):
    T = traj.T
    R = certificate.regularizers
    if certificate.virtual_states is None or len(certificate.virtual_states) < 1:
        raise TrajectoryError("missing the virtual state x^{T+1}")
    if len(R) != T + 1:
        raise TrajectoryError(f"need T + 1 = {T + 1} regularizers, got {len(R)}")
    comparator = np.asarray(comparator, dtype=float)
    X = np.concatenate([traj.states, certificate.virtual_states])  # rows x^1 .. x^{T+2}
    g = traj.costs
    lhs = float(traj.losses.sum() - (g @ comparator).sum())
    stability = float((traj.losses - np.einsum("ti,ti->t", g, X[1:T + 1])).sum())
    drift = sum(R[t](X[t + 1]) - R[t](X[t]) for t in range(T))
    tail = R[T](comparator) - R[T](X[T])
    return lhs, stability + drift + tail


def verify_ftarl_inequality(traj: Trajectory, certificate: FtarlCertificate, comparator,
                            tol: float = IDENTITY_ATOL) -> bool:
    lhs, rhs = ftarl_inequality_sides(traj, certificate, comparator)
    return lhs <= rhs + tol


# --- numeric argmin ------------------------------------------------------------

def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def argmin_oracle(spec: RegularizerSpec, G=None, step: Optional[float] = None,
                  max_iter: int = 100_000, tol: float = 1e-14) -> np.ndarray:
    """Minimize R^t(x) + <G, x> over the simplex by projected gradient descent.

    ``G`` defaults to the spec's own cumulative cost. The default step is half
    the inverse curvature 1/delta, so the iteration contracts by 1/2 per step.
    Degenerate (linear) objectives return a minimizing vertex with a warning.
    """
    n = len(spec.z)
    G = spec.G if G is None else np.asarray(G, dtype=float)
    if spec.t == 0 or spec.delta == 0:
        if spec.t != 0:
            warnings.warn("delta = 0 makes the objective linear; returning a vertex", OutsideScopeWarning)
        coeff = spec.gradient(np.zeros(n)) + G
        return vertex(int(np.argmin(coeff)), n)
    if spec.delta < 0:
        raise ConfigError(f"delta must be >= 0, got {spec.delta}")
    step = 0.5 / spec.delta if step is None else step
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = project_simplex(x - step * (spec.gradient(x) + G))
        if np.abs(nxt - x).max() <= tol:
            return nxt
        x = nxt
    raise OracleError(f"projected gradient did not converge in {max_iter} iterations (t={spec.t})")


# --- closed-form bounds --------------------------------------------------------

def theorem42_bound(T: int, H: int, n: int, M: float) -> float:
    """5 M H + 4 M sqrt((T - H)(H + 2)(ln n + 1))."""
    if T <= H:
        raise ConfigError(f"bound needs T > H (got T={T}, H={H})")
    return 5 * M * H + 4 * M * math.sqrt((T - H) * (H + 2) * (math.log(n) + 1))


def corollary43_bound(T: int, theta: int, n: int, M: float) -> float:
    """5 M theta + 4 M sqrt(T theta (ln n + 1))."""
    if T < 1 or theta < 1 or n < 1 or M < 0:
        raise ConfigError(f"need T, theta, n >= 1 and M >= 0 (got {T}, {theta}, {n}, {M})")
    return 5 * M * theta + 4 * M * math.sqrt(T * theta * (math.log(n) + 1))


# --- state increments and leader structure -------------------------------------

class Violation(NamedTuple):
    check: str
    round: int
    detail: str


def check_increments(traj: Trajectory, atol: float = IDENTITY_ATOL) -> List[Violation]:
    """Check the one-step state increments of a trajectory.

    For t >= H, x^{t+1} - x^t = (v^{t+1} - v^{t+1-H}) / H; for t < H it is
    (v^{t+1} - x^t) / (t + 1); either way |x^{t+1} - x^t|_1 <= 2 / min(t, H).
    With vertex inputs the first two are the leader-swap identities.
    """
    H, X, V = traj.horizon, traj.states, traj.decisions
    out: List[Violation] = []
    for t in range(1, traj.T):
        step = X[t] - X[t - 1]
        if t >= H:
            name, expected = "window-step", (V[t] - V[t - H]) / H
        else:
            name, expected = "warmup-step", (V[t] - X[t - 1]) / (t + 1)
        err = np.abs(step - expected).max()
        if err > atol:
            out.append(Violation(name, t, f"increment off by {err:.3e}"))
        l1 = np.abs(step).sum()
        if l1 > 2.0 / min(t, H) + atol:
            out.append(Violation("step-bound", t, f"|x^(t+1) - x^t|_1 = {l1:.6g} > {2.0 / min(t, H):.6g}"))
    return out


def state_changes(states, H: int) -> np.ndarray:
    """Indicator of x^t != x^{t+1} for t = H .. T-1; states has rounds on axis -2."""
    states = np.asarray(states, dtype=float)
    diff = np.abs(states[..., H:, :] - states[..., H - 1:-1, :]).max(axis=-1)
    return diff > 1e-12


def leader_gap_violations(costs, z, theta: int, M: float, atol: float = IDENTITY_ATOL) -> List[Violation]:
    """Check that any two leaders of a window [t - theta, t] stay within M theta.

    Leaders are i_tau = argmin(G^tau - z) for tau = 0..T; every window of
    length theta is scanned and the perturbed cumulative costs of its leader
    set compared at every round of the window.
    """
    costs = np.asarray(costs, dtype=float)
    T, n = costs.shape
    V = np.concatenate([np.zeros((1, n)), np.cumsum(costs, axis=0)]) - np.asarray(z, dtype=float)
    leaders = np.argmin(V, axis=1)
    out: List[Violation] = []
    for t in range(theta, T + 1):
        members = np.unique(leaders[t - theta:t + 1])
        if members.size < 2:
            continue
        block = V[t - theta:t + 1][:, members]
        gap = (block.max(axis=1) - block.min(axis=1)).max()
        if gap > M * theta + atol:
            out.append(Violation("leader-gap", t, f"leader gap {gap:.6g} > M theta = {M * theta:.6g}"))
    return out
