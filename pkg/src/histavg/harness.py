"""Monte Carlo experiment runner: seeded episodes, ordered reduction, CSV and SVG output."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .adversaries import make_adversary
from .algorithms import fast_episode, make_learner
from .analysis import corollary43_bound, regret_path, theorem42_bound
from .core import ConfigError, derive_seed
from .validation import check_costs

ALGOS = ("ftarl", "ftpl", "lsa")
ADVERSARIES = ("stoc-id", "stoc-het", "cyc", "lower-bound", "csv")

RUNS_HEADER = "run,t,loss,cum_loss,regret\n"
AGGREGATE_HEADER = "t,mean_regret,stderr_regret\n"


@dataclass
class ExperimentConfig:
    algo: str = "ftarl"
    adversary: str = "stoc-het"
    n: int = 2
    T: int = 10000
    H: int = 100
    L: int = 50
    runs: int = 100
    block: Optional[int] = None
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    theta: Optional[int] = None
    M: float = 1.0
    seed: int = 0
    raw_sign: bool = False
    costs: Optional[str] = None
    out: Optional[str] = None
    workers: Optional[int] = None
    svg: bool = False

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algorithm {self.algo!r}; choose from {ALGOS}")
        if self.adversary not in ADVERSARIES:
            raise ConfigError(f"unknown adversary {self.adversary!r}; choose from {ADVERSARIES}")
        for name in ("n", "T", "H", "L", "runs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.adversary == "lower-bound":
            if self.n != 2:
                raise ConfigError("the lower-bound adversary needs n = 2")
            if self.H % 4 != 0 or self.H > 0.8 * self.T:
                raise ConfigError(f"lower-bound adversary needs H a multiple of 4 and H <= 0.8 T (H={self.H}, T={self.T})")
        if self.adversary == "csv" and not self.costs:
            raise ConfigError("--adversary csv needs --costs PATH")
        if self.theta is not None and self.theta < self.H:
            raise ConfigError(f"theta must be >= H (theta={self.theta}, H={self.H})")
        self.seed = int(self.seed) & ((1 << 64) - 1)


@dataclass
class AggregateReport:
    mean_regret: np.ndarray
    stderr_regret: np.ndarray
    final_regrets: np.ndarray
    final_mean: float
    final_stderr: float
    bound: Optional[float]
    bound_satisfied: Optional[bool]
    wall_time: float

    def summary(self, config: ExperimentConfig) -> str:
        lines = [
            f"algo={config.algo} adversary={config.adversary} n={config.n} T={config.T} H={config.H} "
            f"runs={config.runs} seed={config.seed}",
            f"final mean regret {self.final_mean:.4f} +/- {self.final_stderr:.4f} (stderr)",
        ]
        if self.bound is not None:
            verdict = "below" if self.bound_satisfied else "NOT below"
            lines.append(f"regret bound {self.bound:.4f}: mean is {verdict} the bound")
        lines.append(f"wall time {self.wall_time:.2f} s")
        return "\n".join(lines)


def load_config_file(path) -> dict:
    """Parse flat ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _coerce(key: str, value: str):
    if key in ("algo", "adversary", "costs", "out"):
        return value
    if key in ("raw_sign", "svg"):
        return value.lower() in ("1", "true", "yes", "on")
    if value.lower() in ("none", "auto", ""):
        return None
    if key in ("epsilon", "delta", "M"):
        return float(value)
    return int(value)


def worker_count(requested: Optional[int] = None) -> int:
    count = requested if requested else (os.cpu_count() or 1)
    cap = os.environ.get("HISTAVG_THREADS")
    if cap:
        count = min(count, max(1, int(cap)))
    return max(1, count)


def run_seeds(root: int, run: int) -> tuple:
    """(adversary seed, learner seed) of run ``run``; the adversary stream ignores the algorithm."""
    run_seed = derive_seed(root, run)
    return derive_seed(run_seed, 1), derive_seed(run_seed, 2)


def _costs_for(config: ExperimentConfig, adversary_seed: int) -> np.ndarray:
    adversary = make_adversary(config.adversary, config.n, config.H, config.L, config.raw_sign, config.costs)
    costs = adversary.generate(config.T, adversary_seed)
    return check_costs(costs, bound=config.M, allow_positive=config.raw_sign, n_features=config.n)


def run_single(config: ExperimentConfig, run: int) -> np.ndarray:
    """Per-round losses of run ``run`` as a (T, 2) array of (loss, prefix regret)."""
    adv_seed, learner_seed = run_seeds(config.seed, run)
    costs = _costs_for(config, adv_seed)
    learner = make_learner(config.algo, horizon=config.H, epsilon=config.epsilon, delta=config.delta,
                           theta=config.theta, bound=config.M, block=config.block,
                           random_state=learner_seed)
    traj = fast_episode(learner, costs, config.H)
    return np.column_stack([traj.losses, regret_path(traj)])


def _run_many(config: ExperimentConfig, workers: int) -> list:
    runs = range(config.runs)
    if workers == 1 or config.runs == 1:
        return [run_single(config, r) for r in runs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves run order, so the reduction below is worker-count independent
        return list(pool.map(run_single, [config] * config.runs, runs, chunksize=max(1, config.runs // (4 * workers))))


def theory_bound(config: ExperimentConfig, T: Optional[int] = None) -> Optional[float]:
    T = config.T if T is None else T
    if config.theta is not None:
        return corollary43_bound(T, config.theta, config.n, config.M)
    if T <= config.H:
        return None
    return theorem42_bound(T, config.H, config.n, config.M)


def aggregate(per_run: np.ndarray) -> tuple:
    """Mean and standard error over axis 0, accumulated in run order."""
    S = per_run.shape[0]
    mean = np.zeros(per_run.shape[1:])
    for row in per_run:
        mean += row
    mean /= S
    if S > 1:
        sq = np.zeros_like(mean)
        for row in per_run:
            sq += (row - mean) ** 2
        stderr = np.sqrt(sq / (S - 1)) / math.sqrt(S)
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr


def fmt(x: float) -> str:
    return f"{x:.12g}"


def write_runs_csv(path, results: list) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(RUNS_HEADER)
        for run, res in enumerate(results):
            cum = np.cumsum(res[:, 0])
            fh.writelines(f"{run},{t},{fmt(l)},{fmt(c)},{fmt(r)}\n"
                          for t, (l, c, r) in enumerate(zip(res[:, 0], cum, res[:, 1]), 1))


def write_aggregate_csv(path, mean, stderr) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(AGGREGATE_HEADER)
        fh.writelines(f"{t},{fmt(m)},{fmt(s)}\n" for t, (m, s) in enumerate(zip(mean, stderr), 1))


def write_svg(path, mean, stderr, bound_curve=None, title="") -> None:
    """Mean regret curve with a +/- one standard error band."""
    W, Hpx, pad = 640, 400, 50
    stride = max(1, len(mean) // 1000)
    mean, stderr = mean[::stride], stderr[::stride]
    if bound_curve is not None:
        bound_curve = bound_curve[::stride]
    T = len(mean)
    lo, hi = mean - stderr, mean + stderr
    ymax = float(max(hi.max(), 0.0, np.nanmax(bound_curve) if bound_curve is not None else 0.0))
    ymin = float(min(lo.min(), 0.0))
    span = (ymax - ymin) or 1.0

    def pts(ys):
        return " ".join(f"{pad + (W - 2 * pad) * i / max(T - 1, 1):.2f},"
                        f"{Hpx - pad - (Hpx - 2 * pad) * (y - ymin) / span:.2f}"
                        for i, y in enumerate(ys) if np.isfinite(y))

    band = pts(hi) + " " + " ".join(reversed(pts(lo).split()))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{Hpx}">',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<polygon points="{band}" fill="steelblue" fill-opacity="0.25" stroke="none"/>',
        f'<polyline points="{pts(mean)}" fill="none" stroke="steelblue" stroke-width="1.5"/>',
    ]
    if bound_curve is not None:
        parts.append(f'<polyline points="{pts(bound_curve)}" fill="none" stroke="firebrick" '
                     f'stroke-dasharray="4 3"/>')
        parts.append(f'<text x="{W - pad}" y="{pad - 8}" text-anchor="end" font-size="11" fill="firebrick">'
                     f'bound at round t (reconstructed)</text>')
    parts.append(f'<text x="{pad}" y="{Hpx - 15}" font-size="11">rounds 1 .. {T * stride} (every {stride}); '
                 f'y in [{ymin:.1f}, {ymax:.1f}]</text>')
    parts.append("</svg>\n")
    Path(path).write_text("\n".join(parts))


def run_experiment(config: ExperimentConfig) -> AggregateReport:
    """Run ``config.runs`` independent episodes and write CSVs when ``config.out`` is set.

    Files: ``runs.csv`` (run,t,loss,cum_loss,regret) and ``aggregate.csv``
    (t,mean_regret,stderr_regret), plus ``regret.svg`` with ``svg=True``.
    """
    start = time.perf_counter()
    results = _run_many(config, worker_count(config.workers))
    regrets = np.stack([r[:, 1] for r in results])
    mean, stderr = aggregate(regrets)
    bound = theory_bound(config)
    report = AggregateReport(
        mean_regret=mean,
        stderr_regret=stderr,
        final_regrets=regrets[:, -1].copy(),
        final_mean=float(mean[-1]),
        final_stderr=float(stderr[-1]),
        bound=bound,
        bound_satisfied=None if bound is None else bool(mean[-1] < bound),
        wall_time=0.0,
    )
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        write_runs_csv(out / "runs.csv", results)
        write_aggregate_csv(out / "aggregate.csv", mean, stderr)
        if config.svg:
            curve = np.array([theory_bound(config, t) or np.nan for t in range(1, config.T + 1)], dtype=float)
            write_svg(out / "regret.svg", mean, stderr, curve,
                      title=f"{config.algo} on {config.adversary} (T={config.T}, H={config.H}, S={config.runs})")
    report.wall_time = time.perf_counter() - start
    return report


def config_dict(config: ExperimentConfig) -> dict:
    return asdict(config)
