import copy
import math

import numpy as np
import pytest

from jumphedge.config import parse_config
from jumphedge.errors import FitDegeneracyError
from jumphedge.studies import (
    fit_loglog,
    run_convergence_study,
    run_frontier,
    run_rate_comparison,
    run_rescaling_validation,
    write_outputs,
)

RAW_BASE = {
    "kind": "convergence",
    "model": {"type": "raw_stable", "alpha": 1.5, "sigma": 1.0},
    "integrand": {"type": "raw_stable"},
    "rule": {"type": "constant", "lower": 1.0, "upper": 1.0},
    "epsilons": [0.4, 0.2],
    "betas": [0.0, 1.0],
    "horizon": 1.0,
    "n_paths": 80,
    "master_seed": 21,
    "grid": {"h": 0.002},
}


def config(**overrides):
    data = copy.deepcopy(RAW_BASE)
    data.update(overrides)
    return parse_config(data)


class TestFitting:
    def test_recovers_synthetic_slope(self):
        x = np.geomspace(1.0, 0.01, 10)
        y = 3.0 * x**-1.7
        fit = fit_loglog(x, y, 0.01 * y, "synthetic")
        assert abs(fit.slope - (-1.7)) < 1e-6
        assert fit.n_points == 10
        lo, hi = fit.slope_ci95
        assert lo < -1.7 < hi

    def test_drop_largest_excludes_points(self):
        x = np.array([1.0, 0.5, 0.25, 0.125, 0.0625])
        y = x**2.0
        y[0] = 10.0  # corrupt the largest-x point
        fit = fit_loglog(x, y, 0.01 * np.abs(y), "drop", drop_largest_x=1)
        assert abs(fit.slope - 2.0) < 1e-9
        assert fit.n_points == 4

    def test_degenerate_fit_rejected(self):
        with pytest.raises(FitDegeneracyError):
            fit_loglog([1.0, 0.5], [1.0, 0.5], [0.01, 0.01], "tiny", drop_largest_x=1)


class TestConvergence:
    def test_row_grid_and_theory_columns(self):
        result = run_convergence_study(config(), threads=1)
        assert len(result.rows) == 2 * 2  # epsilons x betas
        assert [r["epsilon"] for r in result.rows] == [0.4, 0.4, 0.2, 0.2]
        assert [r["beta"] for r in result.rows] == [0.0, 1.0, 0.0, 1.0]
        for row in result.rows:
            assert row["limit_scaled_error"] == pytest.approx(0.171429, abs=1e-6)
            if row["beta"] == 0.0:
                assert row["limit_scaled_cost"] == pytest.approx(1.329340, abs=1e-6)

    def test_no_theory_columns_for_power_rules(self):
        cfg = config(rule={"type": "symmetric_power", "c": 1.0, "beta": 0.0})
        result = run_convergence_study(cfg, threads=1)
        assert result.rows[0]["limit_scaled_error"] == ""

    def test_se_shrinks_like_sqrt_paths(self):
        small = run_convergence_study(config(epsilons=[0.3], n_paths=400), threads=2)
        big = run_convergence_study(config(epsilons=[0.3], n_paths=1600), threads=2)
        ratio = small.rows[0]["error_se"] / big.rows[0]["error_se"]
        assert abs(ratio - 2.0) < 0.4  # n quadrupled: SE halves within 20%


class TestRateComparison:
    def make_config(self):
        return config(
            kind="rate_comparison",
            epsilons=[0.6, 0.45, 0.3, 0.2],
            betas=[0.0],
            n_paths=150,
            rate={"n_dates": [4, 8, 16], "equidistant_steps": 4096, "fit_drop": 1},
        )

    def test_structure_and_fit_labels(self):
        result = run_rate_comparison(self.make_config(), threads=2)
        schemes = {r["scheme"] for r in result.rows}
        assert schemes == {"hitting", "equidistant"}
        labels = [f.label for f in result.fits]
        assert labels == ["hitting_error_vs_cost", "equidistant_error_vs_cost"]
        assert "matched_budgets" in result.extra_tables

    def test_too_few_epsilons_rejected(self):
        cfg = config(
            kind="rate_comparison", epsilons=[0.4, 0.2, 0.1], betas=[0.0],
            rate={"n_dates": [4, 8]},
        )
        with pytest.raises(FitDegeneracyError):
            run_rate_comparison(cfg, threads=1)


class TestRescaling:
    def make_config(self):
        return parse_config(
            {
                "kind": "rescaling",
                "model": {
                    "type": "truncated_stable", "alpha": 1.5, "c_plus": 1.0,
                    "c_minus": 1.0, "cutoff": 0.5, "y0": 100.0,
                },
                "integrand": {"type": "merton", "pi": 0.5, "v0": 1000.0},
                "rule": {"type": "constant", "lower": 1.0, "upper": 1.0},
                "epsilons": [0.4, 0.1],
                "betas": [0.5],
                "horizon": 1.0,
                "n_paths": 1500,
                "master_seed": 5,
                "grid": {"h": 0.001},
                "rescaling": {"overshoot_beta": 0.5, "dt_fraction": 0.002},
            }
        )

    def test_deviations_shrink_with_epsilon(self):
        result = run_rescaling_validation(self.make_config(), threads=2)
        assert len(result.rows) == 2
        devs = [r["exit_time_rel_dev"] for r in result.rows]
        assert devs[1] < devs[0]  # truncation effect fades as epsilon drops
        assert result.rows[0]["exit_time_limit"] == pytest.approx(
            1.0 / (1.5 * 3.3421710328413337 * math.gamma(2.5)), rel=1e-12
        )


class TestOutputs:
    def test_frontier_csv_header_and_order(self, tmp_path):
        result = run_frontier(config(), threads=1)
        paths = write_outputs(result, config(), str(tmp_path))
        front = [p for p in paths if p.endswith("frontier.csv")][0]
        lines = open(front).read().splitlines()
        assert lines[0] == "epsilon,error,error_se,cost,cost_se,beta,n_paths,rule,seed"
        assert len(lines) == 1 + 4
        eps_col = [float(line.split(",")[0]) for line in lines[1:]]
        assert eps_col == [0.4, 0.4, 0.2, 0.2]

    def test_manifest_contents(self, tmp_path):
        cfg = config()
        result = run_frontier(cfg, threads=1)
        paths = write_outputs(result, cfg, str(tmp_path))
        manifest = open([p for p in paths if p.endswith("manifest.txt")][0]).read()
        assert "config_sha256:" in manifest
        assert "master_seed: 21" in manifest
        assert "runtime" not in manifest  # nothing non-reproducible in files
