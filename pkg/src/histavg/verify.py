"""Batch checks of every identity and bound, each a seeded randomized suite.

Suite functions return a ``CheckResult``; failures carry the seed and round of
the first counterexample. Default sizes are the acceptance sizes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional

import numpy as np

from .adversaries import cyc, lower_bound_adversary, stoc_het, stoc_id
from .algorithms import FTARL, LSA, epsilon_schedule, fast_episode, run_episode
from .analysis import (argmin_oracle, check_increments, ftarl_regularizers, ftarl_inequality_sides,
                       ftl_decisions, ftl_inequality_sides, leader_gap_violations, policy_regret,
                       regret, state_changes)
from .core import HistoryState, Trajectory, derive_seed, exp_draw, reference_states, vertex, window_states


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    stats: Dict[str, float] = field(default_factory=dict)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _random_costs(rng, T, n):
    kind = rng.integers(3)
    s = int(rng.integers(2**63))
    if kind == 0:
        return stoc_id(n, T, s)
    if kind == 1:
        return stoc_het(n, T, s)
    return cyc(n, T, int(rng.integers(1, 20)))


def state_corpus(seed: int, count: int = 500) -> Iterator[tuple]:
    """Yield (case_seed, Trajectory) with random simplex inputs and uniform [-1, 0] costs."""
    for k in range(count):
        case = derive_seed(seed, k)
        rng = _rng(case)
        n = int(rng.choice([2, 3, 5]))
        H = int(rng.choice([1, 3, 10, 100]))
        T = int(rng.integers(1, 2001))
        if rng.random() < 0.5:
            V = rng.dirichlet(np.ones(n), size=T)
        else:
            V = np.eye(n)[rng.integers(n, size=T)]
        state = HistoryState(H, n)
        X = np.array([state.advance(v) for v in V])
        yield case, Trajectory(V, X, -rng.random((T, n)), H)


def suite_states(seed: int, count: int = 500) -> CheckResult:
    worst = 0.0
    for case, traj in state_corpus(seed, count):
        err = np.abs(reference_states(traj.decisions, traj.horizon) - traj.states).max(axis=1)
        if err.max() > 1e-9:
            t = int(np.argmax(err > 1e-9)) + 1
            return CheckResult("state-oracle", False, f"seed {case}: round {t} off by {err.max():.3e}")
        worst = max(worst, float(err.max()))
    return CheckResult("state-oracle", True, f"{count} trajectories, max error {worst:.2e}", stats={"max_error": worst})


def suite_policy_regret(seed: int, count: int = 500) -> CheckResult:
    worst = 0.0
    for case, traj in state_corpus(seed, count):
        gap = abs(policy_regret(traj) - regret(traj).regret)
        if gap > 1e-9:
            return CheckResult("policy-regret", False, f"seed {case}: policy regret differs by {gap:.3e}")
        worst = max(worst, gap)
    return CheckResult("policy-regret", True, f"{count} trajectories, max gap {worst:.2e}", stats={"max_gap": worst})


def suite_ftl(seed: int, count: int = 200) -> CheckResult:
    slack = np.inf
    for k in range(count):
        case = derive_seed(seed, k)
        rng = _rng(case)
        n = int(rng.choice([2, 3, 5]))
        T = int(rng.integers(1, 51))
        costs = rng.normal(size=(T, n))
        lhs, rhs = ftl_inequality_sides(costs, ftl_decisions(costs))
        if lhs > rhs + 1e-9:
            return CheckResult("ftl-inequality", False, f"seed {case}: lhs {lhs:.6g} > rhs {rhs:.6g}")
        slack = min(slack, rhs - lhs)
    return CheckResult("ftl-inequality", True, f"{count} instances, min slack {slack:.2e}", stats={"min_slack": slack})


def ftarl_run(case: int, n: int, T: int, H: int, costs=None) -> tuple:
    rng = _rng(case)
    if costs is None:
        costs = _random_costs(rng, T, n)
    learner = FTARL(horizon=H, random_state=derive_seed(case, 7))
    traj = run_episode(learner, costs, H)
    return learner, traj


def suite_ftarl_inequality(seed: int, count: int = 100) -> CheckResult:
    slack = np.inf
    for k in range(count):
        case = derive_seed(seed, k)
        rng = _rng(case)
        n = int(rng.choice([2, 5]))
        T = int(rng.integers(20, 201))
        H = int(rng.choice([1, 4, 10]))
        learner, traj = ftarl_run(case, n, T, H)
        cert = ftarl_regularizers(traj, learner.z_, learner.delta_)
        comparators = {
            "best": vertex(int(np.argmin(traj.cumulative)), n),
            "random": rng.dirichlet(np.ones(n)),
            "x^(T+1)": cert.virtual_states[0],
        }
        for label, xc in comparators.items():
            lhs, rhs = ftarl_inequality_sides(traj, cert, xc)
            if lhs > rhs + 1e-9:
                return CheckResult("ftarl-inequality", False,
                                   f"seed {case}, comparator {label}: lhs {lhs:.6g} > rhs {rhs:.6g}")
            slack = min(slack, rhs - lhs)
    return CheckResult("ftarl-inequality", True, f"{count} runs x 3 comparators, min slack {slack:.2e}",
                       stats={"min_slack": slack})


def harvest_regularizers(seed: int, count: int = 100) -> Iterator[tuple]:
    """Yield (case_seed, RegularizerSpec) sampled from live FTARL runs."""
    for k in range(count):
        case = derive_seed(seed, k)
        rng = _rng(case)
        n = int(rng.choice([2, 3, 5]))
        H = int(rng.choice([1, 3, 10]))
        T = int(rng.integers(H + 20, 301))
        learner, traj = ftarl_run(case, n, T, H)
        cert = ftarl_regularizers(traj, learner.z_, learner.delta_)
        yield case, cert.regularizers[int(rng.integers(1, T + 1))]


def suite_argmin(seed: int, count: int = 100) -> CheckResult:
    worst = 0.0
    for case, spec in harvest_regularizers(seed, count):
        err = float(np.abs(argmin_oracle(spec) - spec.closed_form()).max())
        if err > 1e-6:
            return CheckResult("argmin", False, f"seed {case}: round {spec.t} minimizer off by {err:.3e}")
        worst = max(worst, err)
    return CheckResult("argmin", True, f"{count} regularizers, max deviation {worst:.2e}",
                       stats={"max_error": worst})


def suite_identities(seed: int, count: int = 100) -> CheckResult:
    for k in range(count):
        case = derive_seed(seed, k)
        rng = _rng(case)
        n = int(rng.choice([2, 3, 5]))
        H = int(rng.choice([1, 3, 10, 50]))
        T = int(rng.integers(H + 2, 400))
        _, traj = ftarl_run(case, n, T, H)
        bad = check_increments(traj)
        if bad:
            t = bad[0].round
            at = [v for v in bad if v.round == t]
            names = ", ".join(v.check for v in at)
            return CheckResult("identities", False,
                               f"seed {case}: {names} fail at round {t} ({'; '.join(v.detail for v in at)})")
    return CheckResult("identities", True, f"{count} FTARL runs, increment identities hold at every round")


def leader_change_rates(costs, H: int, epsilon: float, seed: int, episodes: int) -> np.ndarray:
    """Per-round frequency of x^t != x^{t+1} (t = H..T-1) over fresh perturbations."""
    costs = np.asarray(costs, dtype=float)
    T, n = costs.shape
    Z = np.stack([exp_draw(n, epsilon, derive_seed(seed, e)) for e in range(episodes)])
    G = np.concatenate([np.zeros((1, n)), np.cumsum(costs, axis=0)])[:-1]
    leaders = np.argmin(G[:, None, :] - Z[None, :, :], axis=2)  # [t, episode]
    states = window_states(np.eye(n)[leaders], H)  # [t, episode, action]
    return state_changes(np.moveaxis(states, 1, 0), H).mean(axis=0)


def suite_change_rate(seed: int, episodes: int = 5000) -> CheckResult:
    """Leader-change rate against a cycle of period H with the scheduled epsilon."""
    n, T, H, M = 2, 400, 10, 1.0
    eps = epsilon_schedule(T, H, n, M)
    p = min(eps * M * H, 1.0)
    limit = p + 3.0 * np.sqrt(p * (1.0 - p) / episodes)
    worst = 0.0
    cases = (("cyc", cyc(n, T, H)), ("stoc-het", stoc_het(n, T, derive_seed(seed, 99))))
    for k, (label, costs) in enumerate(cases):
        rates = leader_change_rates(costs, H, eps, derive_seed(seed, k), episodes)
        if rates.max() > limit:
            t = int(np.argmax(rates)) + H
            return CheckResult("change-rate", False, f"{label}, seed {seed}: round {t} change rate {rates.max():.4f} > {limit:.4f}")
        worst = max(worst, float(rates.max()))
    return CheckResult("change-rate", True, f"max change rate {worst:.4f} <= eps M H + 3 se = {limit:.4f}",
                       stats={"max_rate": worst, "limit": limit})


def suite_leader_gap(seed: int, count: int = 50) -> CheckResult:
    windows = 0
    for k in range(count):
        case = derive_seed(seed, k)
        rng = _rng(case)
        n = int(rng.choice([2, 3, 5]))
        H = int(rng.choice([1, 3, 10]))
        T = int(rng.integers(50, 500))
        learner, traj = ftarl_run(case, n, T, H)
        for theta in sorted({H, 2 * H, int(rng.integers(1, 60))}):
            bad = leader_gap_violations(traj.costs, learner.z_, theta, 1.0)
            if bad:
                return CheckResult("leader-gap", False, f"seed {case}, theta {theta}: round {bad[0].round} ({bad[0].detail})")
            windows += T - theta + 1
    return CheckResult("leader-gap", True, f"{count} runs, {windows} windows scanned")


def lower_bound_regrets(algo: str, seed: int, draws: int = 2000, T: int = 500, H: int = 400) -> np.ndarray:
    out = np.empty(draws)
    for d in range(draws):
        case = derive_seed(seed, d)
        costs = lower_bound_adversary(T, H, derive_seed(case, 1))
        cls = FTARL if algo == "ftarl" else LSA
        out[d] = regret(fast_episode(cls(horizon=H, random_state=derive_seed(case, 2)), costs, H)).regret
    return out


def suite_lower_bound(seed: int, draws: int = 2000) -> CheckResult:
    T, H = 500, 400
    floor = H / 32
    means = {}
    for algo in ("ftarl", "lsa"):
        means[algo] = float(lower_bound_regrets(algo, seed, draws, T, H).mean())
    ok = all(m >= floor for m in means.values())
    detail = ", ".join(f"{a} mean regret {m:.2f}" for a, m in means.items()) + f" (floor H/32 = {floor})"
    return CheckResult("lower-bound", ok, detail, stats=means)


SUITES: Dict[str, Callable[[int], CheckResult]] = {
    "state-oracle": suite_states,
    "policy-regret": suite_policy_regret,
    "ftl-inequality": suite_ftl,
    "ftarl-inequality": suite_ftarl_inequality,
    "argmin": suite_argmin,
    "identities": suite_identities,
    "change-rate": suite_change_rate,
    "leader-gap": suite_leader_gap,
    "lower-bound": suite_lower_bound,
}


def verify_all(seed: int = 0, suites: Optional[List[str]] = None) -> List[CheckResult]:
    names = list(SUITES) if not suites else suites
    results = []
    for name in names:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
        start = time.perf_counter()
        try:
            res = SUITES[name](seed)
        except AssertionError as exc:  # runtime invariant tripped inside a run
            res = CheckResult(name, False, f"seed {seed}: {exc}")
        res.seconds = time.perf_counter() - start
        results.append(res)
    return results


def format_table(results: List[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status  seconds  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:7.2f}  {r.detail}")
    return "\n".join(lines)
