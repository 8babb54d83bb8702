import csv
import io
from contextlib import redirect_stdout

import numpy as np
import pytest

from histavg import cli
from histavg.adversaries import stoc_het
from histavg.core import ConfigError, HistoryState
from histavg.harness import (AGGREGATE_HEADER, RUNS_HEADER, ExperimentConfig, aggregate, load_config_file,
                             run_experiment, run_seeds, run_single, worker_count)
from histavg.verify import SUITES, suite_identities, verify_all


def small(**kw):
    base = dict(n=2, T=200, H=10, runs=5, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def read_runs(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return rows


def test_csv_schema(tmp_path):
    report = run_experiment(small(out=str(tmp_path), svg=True))
    assert (tmp_path / "runs.csv").read_text().startswith(RUNS_HEADER)
    assert (tmp_path / "aggregate.csv").read_text().startswith(AGGREGATE_HEADER)
    assert (tmp_path / "regret.svg").read_text().startswith("<svg")
    rows = read_runs(tmp_path / "runs.csv")
    assert len(rows) == 5 * 200
    assert [int(r["t"]) for r in rows[:3]] == [1, 2, 3]
    assert {int(r["run"]) for r in rows} == set(range(5))
    assert report.bound is not None and report.bound_satisfied


def test_aggregate_matches_runs_csv(tmp_path):
    run_experiment(small(out=str(tmp_path)))
    rows = read_runs(tmp_path / "runs.csv")
    regrets = np.array([float(r["regret"]) for r in rows]).reshape(5, 200)
    losses = np.array([float(r["loss"]) for r in rows]).reshape(5, 200)
    cum = np.array([float(r["cum_loss"]) for r in rows]).reshape(5, 200)
    np.testing.assert_allclose(np.cumsum(losses, axis=1), cum, atol=1e-9)
    with open(tmp_path / "aggregate.csv") as fh:
        agg = np.array([[float(r["mean_regret"]), float(r["stderr_regret"])] for r in csv.DictReader(fh)])
    np.testing.assert_allclose(agg[:, 0], regrets.mean(axis=0), atol=1e-9)
    np.testing.assert_allclose(agg[:, 1], regrets.std(axis=0, ddof=1) / np.sqrt(5), atol=1e-9)


def test_aggregate_single_run():
    mean, se = aggregate(np.array([[1.0, 2.0]]))
    np.testing.assert_array_equal(mean, [1.0, 2.0])
    np.testing.assert_array_equal(se, [0.0, 0.0])


def test_adversary_stream_shared_across_algorithms():
    a = run_single(small(algo="ftarl"), 2)
    b = run_single(small(algo="lsa"), 2)
    # regret - cumulative loss is -min_i G^t_i, which depends on the costs only
    np.testing.assert_allclose(a[:, 1] - np.cumsum(a[:, 0]), b[:, 1] - np.cumsum(b[:, 0]), atol=1e-12)
    assert run_seeds(3, 2) != run_seeds(3, 1)


@pytest.mark.parametrize("workers", [1, 3])
def test_workers_do_not_change_output(tmp_path, workers):
    run_experiment(small(out=str(tmp_path / "ref"), workers=1))
    run_experiment(small(out=str(tmp_path / "w"), workers=workers))
    for name in ("runs.csv", "aggregate.csv"):
        assert (tmp_path / "ref" / name).read_bytes() == (tmp_path / "w" / name).read_bytes()


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("HISTAVG_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.delenv("HISTAVG_THREADS")
    assert worker_count(3) == 3


@pytest.mark.parametrize("kw", [
    dict(algo="hedge"), dict(adversary="adaptive"), dict(n=1), dict(T=0), dict(adversary="csv"),
    dict(adversary="lower-bound", H=6), dict(adversary="lower-bound", n=3, H=8), dict(theta=5),
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        small(**kw)


def test_config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("# experiment\nalgo = lsa\nT=300\nepsilon=auto\nraw-sign = yes\n\n")
    assert load_config_file(path) == {"algo": "lsa", "T": 300, "epsilon": None, "raw_sign": True}
    path.write_text("bogus=1\n")
    with pytest.raises(ConfigError, match="bogus"):
        load_config_file(path)


def run_cli(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli.main(argv)
    return code, buf.getvalue()


def test_cli_precedence(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("algo=lsa\nT=150\nH=5\nruns=3\nseed=9\n")
    code, out = run_cli(["run", "--config", str(cfg), "--T", "120", "--out", str(tmp_path / "o")])
    assert code == 0
    assert "algo=lsa" in out and "T=120" in out and "runs=3" in out
    assert len(read_runs(tmp_path / "o" / "runs.csv")) == 3 * 120


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["run", "--T", "100"]) == 2
    assert "--out" in capsys.readouterr().err
    assert cli.main(["run", "--adversary", "lower-bound", "--H", "6", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        cli.main(["run", "--seed", "-1", "--out", str(tmp_path)])


def test_cli_csv_adversary(tmp_path):
    costs = stoc_het(3, 60, 1)
    path = tmp_path / "costs.csv"
    path.write_text("t,g_1,g_2,g_3\n" + "".join(f"{t},{','.join(repr(float(x)) for x in row)}\n"
                                                 for t, row in enumerate(costs, 1)))
    code, _ = run_cli(["run", "--adversary", "csv", "--costs", str(path), "--n", "3", "--T", "60", "--H", "4",
                       "--runs", "2", "--out", str(tmp_path / "o")])
    assert code == 0
    rows = read_runs(tmp_path / "o" / "runs.csv")
    # both runs face the same file, so the best-in-hindsight term agrees
    a = [float(r["regret"]) - float(r["cum_loss"]) for r in rows if r["run"] == "0"]
    b = [float(r["regret"]) - float(r["cum_loss"]) for r in rows if r["run"] == "1"]
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_cli_raw_sign(tmp_path):
    code, _ = run_cli(["run", "--adversary", "stoc-id", "--raw-sign", "--T", "50", "--H", "3", "--runs", "2",
                       "--out", str(tmp_path)])
    assert code == 0
    assert all(float(r["loss"]) >= 0 for r in read_runs(tmp_path / "runs.csv"))


def test_cli_verify_single_suite():
    code, out = run_cli(["verify", "--suite", "identities", "--suite", "leader-gap"])
    assert code == 0
    assert out.splitlines()[0].startswith("check")
    assert "identities" in out and "leader-gap" in out and "PASS" in out


def test_verify_unknown_suite():
    with pytest.raises(KeyError):
        verify_all(0, ["nope"])
    assert set(SUITES) >= {"state-oracle", "policy-regret", "change-rate", "lower-bound"}


@pytest.fixture
def corrupted_state(monkeypatch):
    """Scale the state returned at round 15 so it leaves the simplex after the internal check."""
    original = HistoryState.advance

    def advance(self, v):
        x = original(self, v)
        return x * 5.0 if self.round == 15 else x

    monkeypatch.setattr(HistoryState, "advance", advance)


def test_identities_suite_catches_corruption(corrupted_state):
    res = suite_identities(0, 3)
    assert not res.passed
    assert "step-bound" in res.detail and "round 14" in res.detail


def test_cli_verify_fails_on_corruption(corrupted_state):
    code, out = run_cli(["verify", "--suite", "identities"])
    assert code == 1
    assert "FAIL" in out and "step-bound" in out
