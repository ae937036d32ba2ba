import math

import numpy as np
import pytest
from scipy.special import gamma

from jumphedge.errors import BracketError
from jumphedge.markets import BlackScholesDelta, DeltaHedgeIntegrand, MertonIntegrand
from jumphedge.optimize import (
    LagrangianProblem,
    McOptions,
    _check_bracket,
    budget_rescale,
    lagrangian_objective,
    minimize_lagrangian,
    strategy_barrier,
    symmetric_power_barrier,
)
from jumphedge.stable import Barriers, StableLaw, mean_exit_time, overshoot_moment

LAW15 = StableLaw.symmetric(1.5, 1.0)
K1 = 1.5 / (3.5 * 2.5)


class TestObjective:
    def test_symmetric_structure_beta_zero(self):
        # objective at (a, a) with beta = 0: K1 A a^2 + c lam sigma Gamma(1+alpha) a^-alpha
        p = LagrangianProblem(2.0, 3.0, 1.5, 0.0, LAW15)
        for a in (0.7, 1.0, 2.2):
            val = lagrangian_objective(p, Barriers(a, a))
            expect = 2.0 * K1 * a**2 + 1.5 * 3.0 * gamma(2.5) * a**-1.5
            assert val == pytest.approx(expect, rel=1e-12)

    def test_general_symmetric_identity(self):
        p = LagrangianProblem(1.3, 0.8, 2.0, 0.5, LAW15)
        a = 1.4
        b = Barriers(a, a)
        expect = 1.3 * K1 * a**2 + 2.0 * 0.8 * overshoot_moment(
            LAW15, b, 0.5
        ) / mean_exit_time(LAW15, b)
        assert lagrangian_objective(p, b) == pytest.approx(expect, rel=1e-12)

    def test_doubling_scales_terms_separately(self):
        p = LagrangianProblem(1.0, 1.0, 1.0, 0.0, LAW15)
        first = lambda a: K1 * a**2  # noqa: E731
        second = lambda a: gamma(2.5) * a**-1.5  # noqa: E731
        v1 = lagrangian_objective(p, Barriers(1, 1))
        v2 = lagrangian_objective(p, Barriers(2, 2))
        assert v2 == pytest.approx(4 * first(1.0) + 2**-1.5 * second(1.0), rel=1e-12)
        assert v1 == pytest.approx(first(1.0) + second(1.0), rel=1e-12)

    def test_problem_validation(self):
        with pytest.raises(ValueError):
            LagrangianProblem(0.0, 1.0, 1.0, 0.0, LAW15)
        with pytest.raises(ValueError):
            LagrangianProblem(1.0, 1.0, 1.0, 1.6, LAW15)


class TestMinimizer:
    def test_unit_problem_against_brute_force(self):
        p = LagrangianProblem(1.0, 1.0, 1.0, 0.0, LAW15)
        b = minimize_lagrangian(p)
        grid = np.arange(1.0, 2.5, 1e-4)
        vals = 1.0 * K1 * grid**2 + gamma(2.5) * grid**-1.5
        a_bf = grid[int(np.argmin(vals))]
        a_opt = b.half_width
        assert abs(a_opt - a_bf) < 2e-4
        assert abs(a_opt - 1.653757) < 1e-3
        assert abs(b.asymmetry) < 1e-3

    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
    def test_symmetric_law_returns_symmetric_pair(self, beta):
        p = LagrangianProblem(1.7, 0.6, 1.2, beta, LAW15)
        b = minimize_lagrangian(p)
        assert abs(b.asymmetry) < 1e-3

    def test_multiplier_scaling_covariance(self):
        p1 = LagrangianProblem(1.0, 1.0, 1.0, 0.0, LAW15)
        p2 = LagrangianProblem(1.0, 1.0, 2.0**3.5, 0.0, LAW15)
        b1 = minimize_lagrangian(p1)
        b2 = minimize_lagrangian(p2)
        assert abs(b2.lower / b1.lower - 2.0) < 1e-6
        assert abs(b2.upper / b1.upper - 2.0) < 1e-6

    def test_first_order_condition_residual(self):
        p = LagrangianProblem(1.0, 1.0, 1.0, 0.5, LAW15)
        b = minimize_lagrangian(p)
        a = b.half_width
        step = 1e-4 * a
        up = lagrangian_objective(p, Barriers(a + step, a + step))
        dn = lagrangian_objective(p, Barriers(a - step, a - step))
        deriv = (up - dn) / (2 * step)
        obj = lagrangian_objective(p, b)
        assert abs(deriv) < 1e-5 * obj / a

    def test_optimum_tracks_intensity_ratio(self):
        # a* strictly increasing in lam/A
        widths = []
        for lam in (0.5, 1.0, 2.0, 4.0):
            p = LagrangianProblem(1.0, lam, 1.0, 0.0, LAW15)
            widths.append(minimize_lagrangian(p).half_width)
        assert all(b > a for a, b in zip(widths, widths[1:]))

    def test_bracket_error_on_monotone_objective(self):
        with pytest.raises(BracketError, match="monotone"):
            _check_bracket(lambda x: x, 0.0, 1.0)

    def test_mc_mode_runs_for_asymmetric_laws(self):
        law = StableLaw(1.5, 0.45, 0.15)
        p = LagrangianProblem(1.0, 1.0, 1.0, 0.0, law)
        mc = McOptions(n_paths=800, master_seed=31, dt=2e-3)
        b1 = minimize_lagrangian(p, mc=mc)
        b2 = minimize_lagrangian(p, mc=mc)
        assert b1 == b2  # common random numbers make the search deterministic
        assert b1.lower > 0 and b1.upper > 0

    def test_mc_mode_scaling_covariance(self):
        law = StableLaw(1.5, 0.45, 0.15)
        mc = McOptions(n_paths=600, master_seed=31, dt=2e-3)
        b1 = minimize_lagrangian(LagrangianProblem(1.0, 1.0, 1.0, 0.0, law), mc=mc)
        b2 = minimize_lagrangian(
            LagrangianProblem(1.0, 1.0, 2.0**3.5, 0.0, law), mc=mc
        )
        assert b2.lower / b1.lower == pytest.approx(2.0, rel=1e-6)


class TestFormulas:
    def test_symmetric_power_barrier_values(self):
        assert symmetric_power_barrier(1.0, 1.0, 1.5, 0.0, 2.5) == 2.5
        assert symmetric_power_barrier(1.0, 2.0, 1.5, 0.0, 1.0) == pytest.approx(
            1.219014, abs=1e-6
        )
        assert symmetric_power_barrier(1.0, 32.0, 1.5, 1.0, 1.0) == pytest.approx(4.0)

    def test_symmetric_power_barrier_range_checks(self):
        with pytest.raises(ValueError):
            symmetric_power_barrier(1.0, 1.0, 1.5, 1.2, 1.0)  # beta beyond [0, 1]
        with pytest.raises(ValueError):
            symmetric_power_barrier(-1.0, 1.0, 1.5, 0.0, 1.0)

    def test_delta_hedge_barrier_value(self):
        class FlatHedge:
            def phi(self, t, y):
                return 0.5 * y

            def phi_y(self, t, y):
                return 0.5

            def phi_t(self, t, y):
                return 0.0

        spec = DeltaHedgeIntegrand.__new__(DeltaHedgeIntegrand)
        object.__setattr__(spec, "hedge", FlatHedge())
        val = strategy_barrier(spec, (0.0, 100.0, None), 1.5, 0.0, 1.0)
        # c * phi_y^(alpha/(2+alpha-beta)) * Y^((alpha-2)/(alpha-beta+2))
        assert val == pytest.approx(0.5 ** (3 / 7) * 100 ** (-1 / 7), rel=1e-12)

    def test_merton_barrier_value_exact(self):
        spec = MertonIntegrand(0.5, 1000.0)
        val = strategy_barrier(spec, (0.0, 100.0, 1000.0), 1.5, 1.0, 1.0)
        assert val == pytest.approx(0.1, rel=1e-12)

    def test_delta_hedge_consistent_with_symmetric_power(self):
        # the published formula equals the generic power rule with
        # lam = (Y phi_y)^alpha and A = Y^2 q, up to q^(1/(2+alpha-beta))
        hedge = BlackScholesDelta(strike=100.0, vol=0.2, expiry=2.0)
        spec = DeltaHedgeIntegrand(hedge)
        alpha, beta, q = 1.5, 0.5, 3.7
        s = 2.0 + alpha - beta
        rng = np.random.default_rng(8)
        for _ in range(3):
            t = rng.uniform(0.0, 1.0)
            y = rng.uniform(60.0, 160.0)
            lam = (y * hedge.phi_y(t, y)) ** alpha
            a_coef = y * y * q
            generic = symmetric_power_barrier(a_coef, lam, alpha, beta, 1.0)
            published = strategy_barrier(spec, (t, y, None), alpha, beta, 1.0)
            assert published == pytest.approx(generic * q ** (1.0 / s), rel=1e-10)

    def test_budget_rescale(self):
        b = Barriers(0.4, 0.6)
        same = budget_rescale(b, 2.0, 2.0, 1.5, 0.5)
        assert same == b
        doubled = budget_rescale(b, 1.0, 8.0, 1.5, 0.5)
        assert doubled.lower == pytest.approx(0.8) and doubled.upper == pytest.approx(1.2)
        scaled = budget_rescale(b, 1.0, 8.0, 1.5, 0.0)
        assert scaled.lower / b.lower == pytest.approx(8 ** (1 / 3.5))
