# tests/test_runner.py

import csv
import json

import numpy as np
import pytest

from exciton_pimc import runner
from exciton_pimc.config import parse_config
from exciton_pimc.errors import ConfigError
from exciton_pimc.runner import run_experiment, run_oracle, run_sweep, verify, worker_count

LIGHT_DIMER = """\
[model]
name = "dimer"

[model.parameters]
m1 = 1000.0
m2 = 1000.0

[run]
temperature_K = 300.0
n_beads = 4
n_steps = {n_steps}
n_warmup = {n_warmup}
n_chains = {n_chains}
seed = 7

[stats]
batch_size = 25
"""

SYMMETRIC_ORACLE = """\
[model]
name = "dimer"

[model.parameters]
d1 = 2.0
d2 = 2.0
eps1 = 0.08
eps2 = 0.08
m1 = 1000.0
m2 = 1000.0

[run]
temperature_K = 300.0
n_beads = 4
n_steps = 200
n_warmup = 100

[stats]
batch_size = 10

[oracle]
lo = [-4.0, -4.0]
hi = [6.0, 6.0]
n_points = [24, 24]
"""


def _config(n_steps=300, n_warmup=100, n_chains=1):
    return parse_config(LIGHT_DIMER.format(n_steps=n_steps, n_warmup=n_warmup, n_chains=n_chains))


def _without_wall_time(summary_json):
    data = json.loads(summary_json)
    data.pop("wall_time_s")
    for chain in data["chains"]:
        chain.pop("wall_time_s")
    return data


def test_worker_count_reads_the_environment(monkeypatch):
    monkeypatch.setenv("PIMC_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("PIMC_WORKERS", "many")
    assert worker_count() == 1


def test_single_chain_run_writes_a_consistent_summary(tmp_path, monkeypatch):
    monkeypatch.setenv("PIMC_WORKERS", "1")
    summary = run_experiment(_config(), tmp_path)
    assert summary.status == "COMPLETED"
    assert summary.n_samples == 300 and summary.n_batches == 12
    rho = np.array(summary.rho)
    assert np.trace(rho) == pytest.approx(1.0, abs=1e-12)
    assert len(summary.elements) == 4
    for element in summary.elements:
        assert element.ci_low == pytest.approx(element.mean - 1.96 * element.stderr, abs=1e-15)
        assert element.ci_high == pytest.approx(element.mean + 1.96 * element.stderr, abs=1e-15)
    assert summary.ljung_box_max_q is None
    assert any("Ljung-Box" in w for w in summary.warnings)
    assert summary.config["model"]["parameters"] == {"m1": 1000.0, "m2": 1000.0}
    for name in ("summary.json", "batches.csv", "density.csv", "density.gp"):
        assert (tmp_path / name).exists()


def test_identical_seeds_give_identical_summaries(tmp_path, monkeypatch):
    monkeypatch.setenv("PIMC_WORKERS", "1")
    run_experiment(_config(), tmp_path / "a")
    run_experiment(_config(), tmp_path / "b")
    first = _without_wall_time((tmp_path / "a" / "summary.json").read_text())
    second = _without_wall_time((tmp_path / "b" / "summary.json").read_text())
    assert first == second
    assert (tmp_path / "a" / "batches.csv").read_text() == (tmp_path / "b" / "batches.csv").read_text()


def test_results_do_not_depend_on_pool_size(tmp_path, monkeypatch):
    config = _config(n_steps=200, n_chains=3)
    monkeypatch.setenv("PIMC_WORKERS", "1")
    sequential = run_experiment(config, tmp_path / "seq")
    monkeypatch.setenv("PIMC_WORKERS", "2")
    pooled = run_experiment(config, tmp_path / "pool")
    assert sequential.rho == pooled.rho
    assert [c.dt for c in sequential.chains] == [c.dt for c in pooled.chains]
    assert (tmp_path / "seq" / "density.csv").read_text() == (tmp_path / "pool" / "density.csv").read_text()


def test_ljung_box_runs_with_enough_batches(tmp_path, monkeypatch):
    monkeypatch.setenv("PIMC_WORKERS", "1")
    summary = run_experiment(_config(n_steps=500), tmp_path)
    assert summary.n_batches == 20
    assert summary.ljung_box_max_q is not None
    assert summary.ljung_box_threshold == pytest.approx(22.362, abs=0.01)


def test_zero_step_run_is_valid(tmp_path):
    summary = run_experiment(_config(n_steps=0, n_warmup=0), tmp_path)
    assert summary.status == "COMPLETED"
    assert summary.rho is None and summary.elements == [] and summary.n_samples == 0
    assert summary.acceptance_rate is None
    with (tmp_path / "batches.csv").open() as handle:
        assert list(csv.reader(handle)) == [["batch", "row", "col", "value"]]


def test_failed_chain_leaves_partial_outputs(tmp_path, monkeypatch):
    monkeypatch.setenv("PIMC_WORKERS", "1")

    def broken(*args, **kwargs):
        raise RuntimeError("worker lost")

    monkeypatch.setattr(runner, "_chain_job", broken)
    with pytest.raises(RuntimeError):
        run_experiment(_config(n_chains=2), tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "PARTIAL"
    assert summary["n_chains"] == 1


def test_sweep_writes_one_directory_per_point(tmp_path, monkeypatch):
    monkeypatch.setenv("PIMC_WORKERS", "1")
    config = parse_config(
        LIGHT_DIMER.format(n_steps=100, n_warmup=50, n_chains=1)
        + "\n[sweep]\ntemperatures_K = [200.0, 300.0]\nbead_counts = [2]\n"
    )
    assert config.is_sweep
    summaries = run_sweep(config, tmp_path)
    assert [s.temperature_K for s in summaries] == [200.0, 300.0]
    assert (tmp_path / "T200K_M2" / "summary.json").exists()
    assert (tmp_path / "T300K_M2" / "summary.json").exists()
    with (tmp_path / "sweep.csv").open() as handle:
        rows = list(csv.reader(handle))
    assert len(rows) == 1 + 2 * 4


def test_oracle_for_a_symmetric_dimer(tmp_path):
    config = parse_config(SYMMETRIC_ORACLE)
    summary = run_oracle(config, tmp_path)
    assert summary.method == "dvr"
    np.testing.assert_allclose(np.diag(summary.rho), [0.5, 0.5], atol=1e-10)
    assert (tmp_path / "oracle.json").exists()
    assert (tmp_path / "oracle_density.csv").exists()
    finite = run_oracle(config, tmp_path / "fm", n_beads=2)
    assert finite.method == "finite-m" and finite.n_beads == 2
    np.testing.assert_allclose(np.diag(finite.rho), [0.5, 0.5], atol=1e-10)


def test_dimer_oracle_needs_a_grid():
    with pytest.raises(ConfigError):
        run_oracle(_config())


def test_verify_reports_z_scores(tmp_path, monkeypatch):
    monkeypatch.setenv("PIMC_WORKERS", "1")
    report = verify(parse_config(SYMMETRIC_ORACLE), tmp_path)
    assert len(report.comparisons) == 4
    for c in report.comparisons:
        assert c.z == pytest.approx((c.sampled - c.oracle) / c.stderr)
    saved = json.loads((tmp_path / "verify.json").read_text())
    assert saved["all_within_ci"] == report.all_within_ci


def test_correlated_samples_are_rebatched(tmp_path, monkeypatch):
    monkeypatch.setenv("PIMC_WORKERS", "1")
    text = LIGHT_DIMER.format(n_steps=600, n_warmup=100, n_chains=1).replace("batch_size = 25", "batch_size = 1")
    summary = run_experiment(parse_config(text), tmp_path)
    assert summary.initial_batch_size == 1
    assert summary.rebatch_doublings >= 1
    assert summary.batch_size == 2**summary.rebatch_doublings
    assert summary.n_batches == 600 // summary.batch_size
    with (tmp_path / "batches.csv").open() as handle:
        assert len(list(csv.reader(handle))) == 1 + 4 * summary.n_batches

    fixed = parse_config(text + "rebatch = false\n")
    unchanged = run_experiment(fixed, tmp_path / "fixed")
    assert unchanged.batch_size == 1 and unchanged.rebatch_doublings == 0
    assert any("Ljung-Box rejects" in w for w in unchanged.warnings)
