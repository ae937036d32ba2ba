"""Asymptotically optimal rebalancing barriers.

The pointwise problem is to minimize, over barrier pairs (lower, upper),

    A * f(lower, upper) / g(lower, upper)
        + c * lambda * u_beta(lower, upper) / g(lower, upper),

whose solution scales like (c'/c)^(1/(alpha-beta+2)) in the multiplier. The
minimizer is found by a nested golden-section search in the half-width
a = (lower+upper)/2 (log-parameterized) and the asymmetry
theta = (upper-lower)/(upper+lower); closed forms drive the symmetric case,
a common-random-number Monte Carlo objective drives the asymmetric one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy.special import gamma as _gamma

from .errors import BracketError, HypothesisViolationError
from .markets import DeltaHedgeIntegrand, MertonIntegrand
from .stable import (
    Barriers,
    StableLaw,
    mc_exit_functionals,
    mean_exit_time,
    mean_squared_integral,
    overshoot_moment,
)

__all__ = [
    "LagrangianProblem",
    "McOptions",
    "lagrangian_objective",
    "lagrangian_objective_mc",
    "minimize_lagrangian",
    "symmetric_power_barrier",
    "strategy_barrier",
    "budget_rescale",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LagrangianProblem:
    """One pointwise barrier problem: local coefficients, multiplier, law."""

    a_coef: float
    lam: float
    multiplier: float
    beta: float
    law: StableLaw

    def __post_init__(self):
        if self.a_coef <= 0 or self.lam <= 0 or self.multiplier <= 0:
            raise ValueError("A, lambda and the multiplier must all be positive")
        if not (0.0 <= self.beta < self.law.alpha):
            raise ValueError(
                f"beta must lie in [0, alpha={self.law.alpha}), got {self.beta}"
            )


@dataclass(frozen=True)
class McOptions:
    """Monte Carlo objective settings for asymmetric laws.

    The same master seed drives every candidate barrier pair (common random
    numbers), and the half-width dependence is applied through the exact
    scaling laws, so only the asymmetry requires re-simulation.
    """

    n_paths: int = 4000
    master_seed: int = 20_240_101
    dt: float = 1e-3
    threads: int = 1
    theta_quantum: float = 1e-3


def lagrangian_objective(p: LagrangianProblem, b: Barriers):
    """Closed-form objective value (symmetric laws)."""
    f = mean_squared_integral(p.law, b)
    g = mean_exit_time(p.law, b)
    u = overshoot_moment(p.law, b, p.beta)
    return p.a_coef * f / g + p.multiplier * p.lam * u / g


def lagrangian_objective_mc(p: LagrangianProblem, b: Barriers, mc: McOptions):
    """Monte Carlo objective with standard error; works for asymmetric laws."""
    est = mc_exit_functionals(
        p.law, b, p.beta, mc.n_paths, mc.dt, mc.master_seed, threads=mc.threads
    )
    value = p.a_coef * est.f / est.g + p.multiplier * p.lam * est.u_beta / est.g
    # first-order error propagation through the two ratios
    rel = math.sqrt(
        (est.f_se / est.f) ** 2 + (est.u_se / max(est.u_beta, 1e-300)) ** 2
    ) + est.g_se / est.g
    return value, abs(value) * rel


def _golden(fn, lo, hi, tol):
    """Golden-section minimum of fn on [lo, hi] to absolute tolerance tol."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = fn(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = fn(x2)
    return 0.5 * (lo + hi)


def _check_bracket(fn, lo, hi, n=7):
    """Require an interior minimum on a coarse geometric grid of the box."""
    import numpy as np

    xs = np.linspace(lo, hi, n)
    vals = [fn(x) for x in xs]
    k = int(np.argmin(vals))
    if k in (0, n - 1):
        raise BracketError(
            "objective appears monotone on the search box; "
            f"endpoint values {vals[0]:.6g} .. {vals[-1]:.6g}, "
            f"minimum sampled at grid point {k}"
        )


def _symmetric_scale_guess(p: LagrangianProblem):
    """Stationary half-width of the theta = 0 closed-form objective."""
    law = p.law
    alpha, beta = law.alpha, p.beta
    sym = law if law.is_symmetric else StableLaw.symmetric(alpha, law.sigma)
    k1 = alpha / ((alpha + 2.0) * (alpha + 1.0))
    unit = Barriers(1.0, 1.0)
    m = overshoot_moment(sym, unit, beta) / mean_exit_time(sym, unit)
    rhs = (alpha - beta) * p.multiplier * p.lam * m / (2.0 * k1 * p.a_coef)
    return rhs ** (1.0 / (2.0 + alpha - beta))


def minimize_lagrangian(
    p: LagrangianProblem,
    rel_tol=1e-7,
    theta_bound=0.999,
    mc: Optional[McOptions] = None,
) -> Barriers:
    """Nested search: outer golden section over the half-width (log scale),
    inner golden section over the asymmetry theta in (-1, 1).

    Symmetric laws use closed forms (tolerance rel_tol); asymmetric laws use
    the common-random-number Monte Carlo objective at a 1e-2 tolerance.
    """
    use_mc = not p.law.is_symmetric
    if use_mc and mc is None:
        mc = McOptions()

    if use_mc:
        cache = {}

        def ratios(theta):
            key = round(theta / mc.theta_quantum)
            if key not in cache:
                shape = Barriers(1.0 - key * mc.theta_quantum, 1.0 + key * mc.theta_quantum)
                est = mc_exit_functionals(
                    p.law,
                    shape,
                    p.beta,
                    mc.n_paths,
                    mc.dt,
                    mc.master_seed,
                    threads=mc.threads,
                )
                cache[key] = (est.f / est.g, est.u_beta / est.g)
            return cache[key]

    else:

        def ratios(theta):
            shape = Barriers(1.0 - theta, 1.0 + theta)
            f_over_g = mean_squared_integral(p.law, shape) / mean_exit_time(
                p.law, shape
            )
            u_over_g = overshoot_moment(p.law, shape, p.beta) / mean_exit_time(
                p.law, shape
            )
            return f_over_g, u_over_g

    alpha, beta = p.law.alpha, p.beta

    def objective(a, theta):
        # exact scaling in the half-width: f/g ~ a^2, u/g ~ a^(beta-alpha)
        r_f, r_u = ratios(theta)
        return (
            p.a_coef * a * a * r_f
            + p.multiplier * p.lam * a ** (beta - alpha) * r_u
        )

    theta_tol = 1e-2 if use_mc else 1e-7

    def best_over_theta(a):
        theta = _golden(lambda t: objective(a, t), -theta_bound, theta_bound, theta_tol)
        return objective(a, theta), theta

    a0 = _symmetric_scale_guess(p)
    log_lo, log_hi = math.log(a0 / 1e3), math.log(a0 * 1e3)
    _check_bracket(lambda la: best_over_theta(math.exp(la))[0], log_lo, log_hi)
    a_tol = max(rel_tol, 1e-2 if use_mc else rel_tol)
    log_a = _golden(
        lambda la: best_over_theta(math.exp(la))[0], log_lo, log_hi, a_tol
    )
    a_star = math.exp(log_a)
    _, theta_star = best_over_theta(a_star)
    return Barriers(a_star * (1.0 - theta_star), a_star * (1.0 + theta_star))


def symmetric_power_barrier(a_coef, lam, alpha, beta, c):
    """a = c * (lambda/A)^(1/(2+alpha-beta)); established for beta in [0, 1]."""
    if a_coef <= 0 or lam <= 0 or c <= 0:
        raise ValueError("A, lambda and c must be positive")
    if not (0.0 <= beta <= 1.0):
        raise ValueError(
            f"the symmetric power barrier is established for beta in [0, 1], got {beta}"
        )
    return c * (lam / a_coef) ** (1.0 / (2.0 + alpha - beta))


def strategy_barrier(spec, state, alpha, beta, c):
    """Published barrier formula for a given integrand kind at a path state.

    DeltaHedge: c * phi_y^(alpha/(2+alpha-beta)) * Y^((alpha-2)/(alpha-beta+2)).
    Merton:     c * V^(alpha/(2+alpha-beta))    * Y^(-(2+alpha)/(2+alpha-beta)).
    """
    if c <= 0:
        raise ValueError("c must be positive")
    t, y, v = state
    s = 2.0 + alpha - beta
    if isinstance(spec, DeltaHedgeIntegrand):
        phi_y = spec.phi_y(t, y)
        if phi_y <= 0:
            raise HypothesisViolationError("phi_y must be positive")
        return c * phi_y ** (alpha / s) * y ** ((alpha - 2.0) / s)
    if isinstance(spec, MertonIntegrand):
        if v is None or v <= 0:
            raise ValueError("Merton barrier needs positive wealth V")
        return c * v ** (alpha / s) * y ** (-(2.0 + alpha) / s)
    raise TypeError(f"no published barrier formula for {type(spec).__name__}")


def budget_rescale(barriers: Barriers, c_old, c_new, alpha, beta) -> Barriers:
    """Rescale an optimal pair to a new multiplier: kappa = (c'/c)^(1/(alpha-beta+2))."""
    if c_old <= 0 or c_new <= 0:
        raise ValueError("multipliers must be positive")
    kappa = (c_new / c_old) ** (1.0 / (alpha - beta + 2.0))
    return Barriers(kappa * barriers.lower, kappa * barriers.upper)
