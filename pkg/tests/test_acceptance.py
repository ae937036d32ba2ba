"""End-to-end acceptance suite.

Runs every acceptance check at its stated tolerance and prints one
PASS line per criterion (use ``pytest tests/test_acceptance.py -s`` to see
them stream). The Monte Carlo criteria share module-scoped fixtures; with the
pinned seeds every run is deterministic. Total runtime is dominated by the
oracle-equivalence and rate-comparison runs (tens of minutes on two cores).
"""

import filecmp
import math
import os

import numpy as np
import pytest
from scipy.special import beta as beta_fn

from jumphedge.config import parse_config
from jumphedge.markets import MertonIntegrand
from jumphedge.optimize import (
    LagrangianProblem,
    budget_rescale,
    lagrangian_objective,
    minimize_lagrangian,
    strategy_barrier,
    symmetric_power_barrier,
)
from jumphedge.stable import (
    Barriers,
    StableLaw,
    mc_exit_functionals,
    mean_exit_time,
    mean_squared_integral,
    overshoot_moment,
)
from jumphedge.studies import run_convergence_study, run_rate_comparison, \
    run_rescaling_validation, write_outputs

LAW15 = StableLaw.symmetric(1.5, 1.0)
THREADS = 2


def report(criterion, text):
    print(f"\ncriterion {criterion}: PASS - {text}")


# -- criterion 1: closed-form suite -----------------------------------------

def test_criterion_1_closed_forms():
    g11 = mean_exit_time(LAW15, Barriers(1, 1))
    f11 = mean_squared_integral(LAW15, Barriers(1, 1))
    f21 = mean_squared_integral(LAW15, Barriers(2, 1))
    assert abs(g11 - 0.752253) < 1e-6
    assert abs(f11 - 0.128958) < 1e-6
    assert abs(f21 - 0.623527) < 1e-5
    worst = 0.0
    for alpha in (1.1, 1.5, 1.9):
        law = StableLaw.symmetric(alpha, 1.0)
        for a in (0.5, 1.0, 3.0):
            b = Barriers(a, a)
            ratio = mean_squared_integral(law, b) / mean_exit_time(law, b)
            target = a * a * alpha / ((alpha + 2.0) * (alpha + 1.0))
            worst = max(worst, abs(ratio / target - 1.0))
    assert worst < 1e-12
    report(1, f"g={g11:.6f} f={f11:.6f} f(2,1)={f21:.6f} ratio-identity dev {worst:.2e}")


# -- criterion 2: overshoot suite --------------------------------------------

def test_criterion_2_overshoot_suite():
    from test_overshoot import density_weighted_integral

    total = density_weighted_integral(LAW15, Barriers(1, 1), 0.0)
    assert abs(total - 1.0) < 1e-6
    u1 = overshoot_moment(LAW15, Barriers(1, 1), 1.0)
    oracle = beta_fn(0.25, 0.5) / math.pi
    assert abs(u1 - oracle) < 1e-8
    assert abs(u1 - 1.66928) < 1e-4
    assert overshoot_moment(LAW15, Barriers(1, 1), 0.0) == 1.0
    assert overshoot_moment(LAW15, Barriers(2, 1), 0.0) == 1.0
    report(2, f"density mass={total:.8f} u1={u1:.6f} (beta-reduction {oracle:.6f}) u0=1")


# -- criterion 3: MC-oracle equivalence --------------------------------------

@pytest.fixture(scope="module")
def oracle_runs():
    runs = {}
    for barriers in ((1.0, 1.0), (2.0, 1.0)):
        b = Barriers(*barriers)
        g_cf = mean_exit_time(LAW15, b)
        runs[barriers] = mc_exit_functionals(
            LAW15, b, 0.5, 100_000, 4e-5 * g_cf, master_seed=2024, threads=THREADS
        )
    return runs


def test_criterion_3_mc_oracle_equivalence(oracle_runs):
    lines = []
    for barriers, est in oracle_runs.items():
        b = Barriers(*barriers)
        targets = (
            ("g", est.g, est.g_se, mean_exit_time(LAW15, b)),
            ("f", est.f, est.f_se, mean_squared_integral(LAW15, b)),
            ("u", est.u_beta, est.u_se, overshoot_moment(LAW15, b, 0.5)),
        )
        for name, val, se, closed in targets:
            assert abs(val - closed) < 3 * se, (barriers, name, val, closed, se)
            assert abs(val - closed) < 0.02 * closed, (barriers, name)
            lines.append(f"{barriers}{name}:{(val - closed) / closed * 100:+.2f}%")
    report(3, " ".join(lines) + " (each within 3 SE and 2%)")


# -- criteria 4, 5, 9: limit run and reproducibility --------------------------

LIMIT_CONFIG = {
    "kind": "convergence",
    "model": {"type": "raw_stable", "alpha": 1.5, "sigma": 1.0},
    "integrand": {"type": "raw_stable"},
    "rule": {"type": "constant", "lower": 1.0, "upper": 1.0},
    "epsilons": [0.05],
    "betas": [0.0],
    "horizon": 1.0,
    "n_paths": 10_000,
    "master_seed": 7071,
    "grid": {"h": 1e-5},
}


@pytest.fixture(scope="module")
def limit_runs(tmp_path_factory):
    cfg = parse_config(LIMIT_CONFIG)
    out = {}
    for threads in (1, 8):
        result = run_convergence_study(cfg, threads=threads)
        out_dir = str(tmp_path_factory.mktemp(f"limit_t{threads}"))
        write_outputs(result, cfg, out_dir)
        out[threads] = (result, out_dir)
    return out


def test_criterion_4_error_limit(limit_runs):
    row = limit_runs[8][0].rows[0]
    target = 0.1714285714285714
    assert abs(row["scaled_error"] - target) < 0.05 * target
    report(4, f"eps^-2 E = {row['scaled_error']:.6f} vs {target:.6f} "
              f"({(row['scaled_error'] / target - 1) * 100:+.2f}%)")


def test_criterion_5_cost_limit(limit_runs):
    row = limit_runs[8][0].rows[0]
    target = 1.3293403881791372
    assert abs(row["scaled_cost"] - target) < 0.05 * target
    report(5, f"eps^1.5 C0 = {row['scaled_cost']:.6f} vs {target:.6f} "
              f"({(row['scaled_cost'] / target - 1) * 100:+.2f}%)")


def test_criterion_9_reproducibility_across_threads(limit_runs):
    (_, dir1), (_, dir8) = limit_runs[1], limit_runs[8]
    names = sorted(os.listdir(dir1))
    assert names == sorted(os.listdir(dir8))
    match, mismatch, errors = filecmp.cmpfiles(dir1, dir8, names, shallow=False)
    assert not mismatch and not errors
    report(9, f"threads 1 vs 8: {len(match)} output files byte-identical")


# -- criterion 6: rate comparison ---------------------------------------------

RATE_CONFIG = {
    "kind": "rate_comparison",
    "model": {"type": "raw_stable", "alpha": 1.5, "sigma": 1.0},
    "integrand": {"type": "raw_stable"},
    "rule": {"type": "constant", "lower": 1.0, "upper": 1.0},
    "epsilons": [0.4, 0.2, 0.1, 0.05, 0.025, 0.0125],
    "betas": [0.0],
    "horizon": 1.0,
    "n_paths": 2000,
    "master_seed": 606,
    "grid": {"h": 1e-4},
    "rate": {
        "n_dates": [16, 32, 64, 128, 256],
        "increment_fraction": 0.01,
        "equidistant_steps": 131072,
        "fit_drop": 2,
    },
}


def test_criterion_6_rate_comparison():
    result = run_rate_comparison(parse_config(RATE_CONFIG), threads=THREADS)
    fits = {f.label: f for f in result.fits}
    hit = fits["hitting_error_vs_cost"]
    eq = fits["equidistant_error_vs_cost"]
    assert abs(hit.slope - (-4.0 / 3.0)) < 0.15, hit
    assert abs(eq.slope - (-1.0)) < 0.10, eq
    matched = result.extra_tables["matched_budgets"]
    assert len(matched) >= 3
    for row in matched:
        assert row["hitting_error"] < row["equidistant_error"], row
    report(6, f"hitting slope {hit.slope:.4f} (target -1.3333+-0.15), "
              f"equidistant slope {eq.slope:.4f} (target -1.00+-0.10), "
              f"hitting beats equidistant at all {len(matched)} matched budgets "
              f"(best ratio {min(r['error_ratio'] for r in matched):.3f})")


# -- criterion 7: optimizer correctness ---------------------------------------

def test_criterion_7_optimizer():
    p = LagrangianProblem(1.0, 1.0, 1.0, 0.0, LAW15)
    found = minimize_lagrangian(p)
    a_star = found.half_width
    grid = np.arange(1.0, 2.5, 1e-4)
    vals = [lagrangian_objective(p, Barriers(a, a)) for a in grid]
    a_brute = float(grid[int(np.argmin(vals))])
    assert abs(a_star - a_brute) < 1e-3
    assert abs(a_star - 1.653757) < 1e-3
    thetas = []
    for beta in (0.0, 0.5, 1.0):
        b = minimize_lagrangian(LagrangianProblem(1.3, 0.7, 1.1, beta, LAW15))
        thetas.append(b.asymmetry)
        assert abs(b.asymmetry) < 1e-3
    b1 = minimize_lagrangian(LagrangianProblem(1.0, 1.0, 1.0, 0.0, LAW15))
    kappa = 3.0 ** (1.0 / 3.5)
    b2 = minimize_lagrangian(LagrangianProblem(1.0, 1.0, 3.0, 0.0, LAW15))
    assert abs(b2.lower / b1.lower - kappa) < 1e-6 * kappa
    assert abs(b2.upper / b1.upper - kappa) < 1e-6 * kappa
    report(7, f"a*={a_star:.6f} (grid oracle {a_brute:.4f}), "
              f"|theta*|max={max(abs(t) for t in thetas):.1e}, "
              f"multiplier covariance dev {abs(b2.lower / b1.lower / kappa - 1):.2e}")


# -- criterion 8: published-formula spot checks -------------------------------

def test_criterion_8_formula_spot_checks():
    merton = strategy_barrier(
        MertonIntegrand(0.5, 1000.0), (0.0, 100.0, 1000.0), 1.5, 1.0, 1.0
    )
    assert math.isclose(merton, 0.1, rel_tol=1e-12)

    # delta-hedge barrier c * phi_y^(alpha/(2+alpha-beta)) * Y^((alpha-2)/(2+alpha-beta))
    # at phi_y=0.5, Y=100, alpha=1.5, beta=0: 0.5^(3/7) * 100^(-1/7) = 0.3848335
    class FlatHedge:
        def phi(self, t, y):
            return 0.5 * y

        def phi_y(self, t, y):
            return 0.5

        def phi_t(self, t, y):
            return 0.0

    from jumphedge.markets import DeltaHedgeIntegrand

    spec = DeltaHedgeIntegrand.__new__(DeltaHedgeIntegrand)
    object.__setattr__(spec, "hedge", FlatHedge())
    dh = strategy_barrier(spec, (0.0, 100.0, None), 1.5, 0.0, 1.0)
    assert abs(dh - 0.3848334897033504) < 1e-5

    kappa = budget_rescale(Barriers(1.0, 1.0), 1.0, 8.0, 1.5, 0.5).lower
    assert math.isclose(kappa, 2.0, rel_tol=1e-12)
    report(8, f"merton={merton:.12f} delta-hedge={dh:.7f} rescale kappa={kappa:.12f}")


# -- criterion 10: rescaling validation ---------------------------------------

RESCALING_CONFIG = {
    "kind": "rescaling",
    "model": {
        "type": "truncated_stable", "alpha": 1.5, "c_plus": 1.0,
        "c_minus": 1.0, "cutoff": 0.5, "y0": 100.0,
    },
    "integrand": {"type": "merton", "pi": 0.5, "v0": 1000.0},
    "rule": {"type": "constant", "lower": 1.0, "upper": 1.0},
    "epsilons": [0.4, 0.2, 0.1, 0.05, 0.025],
    "betas": [0.5],
    "horizon": 1.0,
    "n_paths": 20_000,
    "master_seed": 1898,
    "grid": {"h": 1e-4},
    "rescaling": {"overshoot_beta": 0.5, "dt_fraction": 2e-4},
}


def test_criterion_10_rescaling_validation():
    result = run_rescaling_validation(parse_config(RESCALING_CONFIG), threads=THREADS)
    rows = result.rows
    g_lim = rows[0]["exit_time_limit"]
    for prev, cur in zip(rows, rows[1:]):
        slack = 2.0 * math.hypot(prev["exit_time_se"], cur["exit_time_se"]) / g_lim
        assert cur["exit_time_rel_dev"] < prev["exit_time_rel_dev"] + slack, (prev, cur)
    assert rows[-1]["exit_time_rel_dev"] <= 0.05
    devs = " -> ".join(f"{r['exit_time_rel_dev'] * 100:.2f}%" for r in rows)
    report(10, f"exit-time deviations {devs} (monotone within 2 SE, final <= 5%)")
