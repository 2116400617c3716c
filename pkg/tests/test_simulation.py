import configparser
import math

import numpy as np
import pytest
from rich.table import Table

from psmatch.errors import DomainError
from psmatch.estimator import ate_matching
from psmatch.models import TuningRule
from psmatch.oracle import brute_force_components
from psmatch.propensity import fit_mle, propensity_scores
from psmatch.simulation import (CSV_HEADER, DESIGNS, TABLE_COLUMNS, MonteCarloConfig, generate_design, get_design,
                                make_rng, metrics, parse_design_sections, run_monte_carlo, run_replication,
                                simulation_grid)
from psmatch.variance import adjusted_variance, confidence_interval


def config(design="1", n_list=(64,), reps=6, **kwargs):
    return MonteCarloConfig(design=DESIGNS[design], n_list=tuple(n_list), reps=reps, **kwargs)


def test_true_tau():
    assert DESIGNS["1"].true_tau == 5.0
    assert DESIGNS["2"].true_tau == 5.0


def test_generation_is_deterministic():
    a = generate_design(DESIGNS["1"], 200, make_rng(3))
    b = generate_design(DESIGNS["1"], 200, make_rng(3))
    assert a == b
    assert a != generate_design(DESIGNS["1"], 200, make_rng(4))


def test_generation_moments():
    ds = generate_design(DESIGNS["1"], 1_000_000, make_rng(1))
    assert abs(ds.w.mean() - 0.5) < 0.002
    assert np.all(np.abs(ds.x) <= 0.5)


def test_generation_effect():
    spec = DESIGNS["2"]
    rng = make_rng(5)
    x = rng.random((1_000_000, 2)) - 0.5
    assert abs(np.mean(spec.mean(1, x) - spec.mean(0, x)) - 5.0) < 0.01


def test_grid():
    assert simulation_grid(512) == [1, 2, 4, 8, 16]
    assert simulation_grid(1024) == [1, 2, 4, 8, 16, 32]
    assert simulation_grid(8192) == [1, 2, 4, 8, 16, 32, 64]


def test_metrics_examples():
    result = metrics([4.9, 5.1], [(4, 6), (4, 6)], [(4, 6), (5.2, 6)], 5.0, 100)
    assert result.rmse == pytest.approx(0.1)
    assert result.mae == pytest.approx(0.1)
    assert result.cover95 == 1.0
    assert result.cover90 == 0.5
    assert result.nsd == pytest.approx(1.41421, abs=1e-5)


def test_metrics_single_estimate():
    result = metrics([5.3], [(4, 6)], [(4, 6)], 5.0, 100)
    assert result.rmse == pytest.approx(0.3)
    assert result.mae == pytest.approx(0.3)
    assert math.isnan(result.nsd)


def test_replication_matches_direct_definitions():
    spec = DESIGNS["1"]
    tuning = TuningRule(q=3, l=3)
    record = run_replication(spec, 24, [1, 2], tuning, seed=17)
    assert not record.failed

    ds = generate_design(spec, 24, make_rng(17))
    fit = fit_mle(ds)
    for estimate in record.estimates:
        expected = brute_force_components(ds, fit.theta_hat, estimate.m, 3, 3)
        assert estimate.tau_hat == pytest.approx(expected["tau_hat"], abs=1e-10)
        components = adjusted_variance(expected["sigma2_hat"], expected["c_hat"], expected["info_hat"])
        assert estimate.variance == pytest.approx(components.adjusted, rel=1e-8)
        assert estimate.ci95 == pytest.approx(confidence_interval(estimate.tau_hat, estimate.variance, 24, 0.05))


def test_replication_purity():
    tuning = TuningRule()
    record = run_replication(DESIGNS["2"], 128, [4, 4], tuning, seed=3)
    assert record.estimates[0] == record.estimates[1]
    assert run_replication(DESIGNS["2"], 128, [4], tuning, seed=3).estimates[0] == record.estimates[0]
    assert run_replication(DESIGNS["2"], 128, [4], tuning, seed=4).estimates[0] != record.estimates[0]


def test_replication_skips_oversized_m():
    record = run_replication(DESIGNS["1"], 16, [1, 64], TuningRule(), seed=0)
    assert record.for_m(64).skipped
    assert not record.for_m(1).skipped


def test_true_theta_source_uses_true_scores():
    record = run_replication(DESIGNS["1"], 64, [2], TuningRule(), seed=8, theta_source="true")
    ds = generate_design(DESIGNS["1"], 64, make_rng(8))
    expected = ate_matching(ds, propensity_scores(ds, DESIGNS["1"].theta_star), 2)
    assert record.for_m(2).tau_hat == pytest.approx(expected, abs=1e-12)


def test_single_rep_table():
    table = run_monte_carlo(config(reps=1, base_seed=21))
    record = run_replication(DESIGNS["1"], 64, simulation_grid(64), TuningRule(), seed=21)
    for row in table.rows:
        error = abs(record.for_m(row.m).tau_hat - 5.0)
        assert row.rmse == pytest.approx(error)
        assert row.mae == pytest.approx(error)
        assert math.isnan(row.nsd)


def test_table_grid_and_csv():
    table = run_monte_carlo(config(n_list=(64, 128), reps=3))
    assert [(row.n, row.m) for row in table.rows] == [(64, 1), (64, 2), (64, 4), (64, 8),
                                                      (128, 1), (128, 2), (128, 4), (128, 8)]
    lines = table.to_csv().splitlines()
    assert lines[0].startswith("# psmatch")
    assert lines[1] == CSV_HEADER
    assert len(lines) == 2 + len(table.rows)
    assert all(len(line.split(",")) == 9 for line in lines[1:])


def test_rmse_at_least_mae():
    table = run_monte_carlo(config(n_list=(64, 128), reps=12, base_seed=4))
    for row in table.rows:
        assert row.rmse >= row.mae - 1e-12


def test_fixed_m():
    table = run_monte_carlo(config(reps=3, tuning=TuningRule(m=4)))
    assert [row.m for row in table.rows] == [4]


def test_identical_across_worker_counts():
    cfg = config(n_list=(64, 96), reps=8, base_seed=9)
    assert run_monte_carlo(cfg, threads=1).to_csv() == run_monte_carlo(cfg, threads=3).to_csv()


def test_progress_callback():
    seen = list()
    run_monte_carlo(config(reps=4), progress=seen.append)
    assert len(seen) == 4
    assert [record.seed for record in seen] == [0, 1, 2, 3]


def test_render_table():
    table = run_monte_carlo(config(reps=2))
    rendered = table.render_table(Table(*TABLE_COLUMNS, title=table.title()), 2.4731)
    assert rendered.columns[0].header == "N"
    assert "Design 1" in rendered.title
    assert rendered.row_count == len(table.rows)
    assert "2.4731" in rendered.caption


def test_custom_design_sections():
    parser = configparser.ConfigParser()
    parser.read_string("[design:flat]\nmu0 = 0, 1, 1\nmu1 = 2, 1, 1\ntheta = 0.5, 0.5\n")
    designs = parse_design_sections(parser)
    spec = get_design("FLAT", designs)
    assert spec.true_tau == 2.0
    assert spec.theta_star == (0.5, 0.5)


@pytest.mark.parametrize("text", [
    "[design:bad]\nmu0 = 0, 1\nmu1 = 2, 1, 1\n",
    "[design:bad]\nmu0 = 0, 1, x\nmu1 = 2, 1, 1\n",
    "[design:bad]\nmu1 = 2, 1, 1\n",
    "[design:1]\nmu0 = 0, 1, 1\nmu1 = 2, 1, 1\n",
])
def test_bad_design_sections(text):
    parser = configparser.ConfigParser()
    parser.read_string(text)
    with pytest.raises(DomainError):
        parse_design_sections(parser)


def test_unknown_design():
    with pytest.raises(DomainError):
        get_design("3")


def _row(table, n, m):
    return next(row for row in table.rows if row.n == n and row.m == m)


@pytest.mark.slow
def test_design1_small_sample_table():
    table = run_monte_carlo(config("1", n_list=(512,), reps=2000, base_seed=0), threads=None)
    assert [row.m for row in table.rows] == [1, 2, 4, 8, 16]
    first, last = _row(table, 512, 1), _row(table, 512, 16)
    assert first.rmse == pytest.approx(0.141, abs=0.010)
    assert first.cover95 == pytest.approx(0.950, abs=0.015)
    assert first.nsd == pytest.approx(3.189, abs=0.12)
    assert last.rmse == pytest.approx(0.118, abs=0.010)
    assert last.nsd == pytest.approx(2.591, abs=0.12)


@pytest.mark.slow
def test_design2_coverage():
    table = run_monte_carlo(config("2", n_list=(1024,), reps=2000, base_seed=100000,
                                   tuning=TuningRule(m=8)), threads=None)
    row = _row(table, 1024, 8)
    assert row.cover95 == pytest.approx(0.956, abs=0.015)
    assert row.nsd == pytest.approx(2.896, abs=0.12)


@pytest.mark.slow
def test_design2_attains_bound():
    table = run_monte_carlo(config("2", n_list=(8192,), reps=500, base_seed=0, tuning=TuningRule(m=16)),
                            threads=None)
    assert _row(table, 8192, 16).nsd == pytest.approx(2.863, abs=0.10)


@pytest.mark.slow
def test_more_matches_lower_nsd():
    table = run_monte_carlo(config("1", n_list=(2048,), reps=2000, base_seed=0), threads=None)
    assert _row(table, 2048, 1).nsd - _row(table, 2048, 32).nsd >= 0.5
