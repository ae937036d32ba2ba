"""Hitting-time discretization of a path bundle and the error/cost estimators.

A rule maps each grid point to a positive barrier pair (lower_t, upper_t).
Rebalancing happens at the first grid time where the integrand leaves the
open interval (X_{T_i} - eps*lower_{T_i}, X_{T_i} + eps*upper_{T_i}); barrier
values are frozen at the last rebalance, and landing exactly on a barrier
counts as an exit. Exits are only detected at grid points; refine the grid
until the reported tolerance is acceptable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _parallel
from .errors import BudgetRangeError, RuleViolationError
from .markets import LevyMarketModel  # noqa: F401  (type reference)
from .paths import GridSpec, PathBundle, simulate_path
from .streams import derive_stream

__all__ = [
    "ConstantPair",
    "SymmetricPower",
    "DeltaHedgePower",
    "MertonPower",
    "BarrierRule",
    "DiscretizationTrace",
    "FunctionalEstimate",
    "EngineConfig",
    "hitting_times",
    "estimate_functionals",
    "estimate_error_functional",
    "estimate_cost_functional",
    "equidistant_baseline",
    "invert_cost_for_budget",
]


@dataclass(frozen=True)
class ConstantPair:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower <= 0 or self.upper <= 0:
            raise RuleViolationError("constant barriers must be positive")

    def label(self):
        return f"constant({self.lower:g},{self.upper:g})"


@dataclass(frozen=True)
class SymmetricPower:
    """a_t = c * (lambda_t / A_t)^(1/(2+alpha-beta)), same on both sides."""

    c: float
    beta: float
    alpha: float

    def __post_init__(self):
        if self.c <= 0:
            raise RuleViolationError("barrier constant c must be positive")

    def label(self):
        return f"symmetric_power(c={self.c:g},beta={self.beta:g})"


@dataclass(frozen=True)
class DeltaHedgePower:
    """a_t = c * phi_y^(alpha/(2+alpha-beta)) * Y^((alpha-2)/(2+alpha-beta))."""

    c: float
    beta: float
    alpha: float

    def __post_init__(self):
        if self.c <= 0:
            raise RuleViolationError("barrier constant c must be positive")

    def label(self):
        return f"delta_hedge_power(c={self.c:g},beta={self.beta:g})"


@dataclass(frozen=True)
class MertonPower:
    """a_t = c * V^(alpha/(2+alpha-beta)) * Y^(-(2+alpha)/(2+alpha-beta))."""

    c: float
    beta: float
    alpha: float
    pi: float

    def __post_init__(self):
        if self.c <= 0:
            raise RuleViolationError("barrier constant c must be positive")
        if self.pi == 0:
            raise RuleViolationError("Merton rule requires nonzero pi")

    def label(self):
        return f"merton_power(c={self.c:g},beta={self.beta:g})"


BarrierRule = Union[ConstantPair, SymmetricPower, DeltaHedgePower, MertonPower]


def barrier_values(rule: BarrierRule, bundle: PathBundle):
    """Per-grid-point (lower, upper) barrier arrays for the rule on this path."""
    if isinstance(rule, ConstantPair):
        n = len(bundle.times)
        lo = np.full(n, float(rule.lower))
        hi = np.full(n, float(rule.upper))
        return lo, hi
    if isinstance(rule, SymmetricPower):
        s = 2.0 + rule.alpha - rule.beta
        a = rule.c * (bundle.lam / bundle.a_coef) ** (1.0 / s)
    elif isinstance(rule, DeltaHedgePower):
        s = 2.0 + rule.alpha - rule.beta
        phi_y = bundle.lam ** (1.0 / rule.alpha) / bundle.y
        a = rule.c * phi_y ** (rule.alpha / s) * bundle.y ** ((rule.alpha - 2.0) / s)
    elif isinstance(rule, MertonPower):
        s = 2.0 + rule.alpha - rule.beta
        wealth = bundle.x * bundle.y / rule.pi
        a = rule.c * wealth ** (rule.alpha / s) * bundle.y ** (-(2.0 + rule.alpha) / s)
    else:
        raise TypeError(f"unknown rule kind: {type(rule).__name__}")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise RuleViolationError(
            f"rule {rule.label()} evaluated to a non-positive barrier on the path"
        )
    return a, a


@dataclass
class DiscretizationTrace:
    """Rebalance times of one path at scale epsilon.

    ``indices`` locates the rebalances on the bundle grid (implementation
    detail used by the estimators); increments are |X_{T_i} - X_{T_{i-1}}|.
    """

    epsilon: float
    rebalance_times: np.ndarray
    n_rebalances: int
    increments: np.ndarray
    indices: np.ndarray


@dataclass(frozen=True)
class FunctionalEstimate:
    """Monte Carlo estimate of an error or cost functional at one epsilon."""

    value: float
    std_error: float
    n_paths: int
    epsilon: Optional[float]
    beta: Optional[float] = None  # None marks an error-functional estimate
    grid_tol_rel: Optional[float] = None


def hitting_times(bundle: PathBundle, rule: BarrierRule, epsilon) -> DiscretizationTrace:
    """Grid-detected exit times of X from the moving barrier interval."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    lo, hi = barrier_values(rule, bundle)
    x = bundle.x
    n = len(x)
    idx = 0
    indices = []
    anchor = x[0]
    while True:
        up = anchor + epsilon * hi[idx]
        dn = anchor - epsilon * lo[idx]
        seg = x[idx + 1 :]
        out = np.flatnonzero((seg >= up) | (seg <= dn))
        if out.size == 0:
            break
        idx = idx + 1 + int(out[0])
        indices.append(idx)
        anchor = x[idx]
        if idx >= n - 1:
            break
    indices = np.asarray(indices, dtype=np.int64)
    anchors = np.concatenate(([0], indices[:-1])) if indices.size else indices
    increments = np.abs(x[indices] - x[anchors]) if indices.size else np.empty(0)
    return DiscretizationTrace(
        epsilon=float(epsilon),
        rebalance_times=bundle.times[indices],
        n_rebalances=int(indices.size),
        increments=increments,
        indices=indices,
    )


def _anchor_values(x, anchor_indices, n):
    """Right-continuous anchor value at every grid point."""
    bounds = np.concatenate((anchor_indices, [n]))
    lengths = np.diff(bounds)
    return np.repeat(x[anchor_indices], lengths)


def path_error_integral(bundle: PathBundle, trace: DiscretizationTrace):
    """Left-rectangle integral of (X_t - X_{eta(t)})^2 A_t over the grid."""
    n = len(bundle.x)
    anchor_idx = np.concatenate(([0], trace.indices))
    anchors = _anchor_values(bundle.x, anchor_idx, n)
    dts = np.diff(bundle.times)
    dev = bundle.x[:-1] - anchors[:-1]
    return float(np.sum(dev * dev * bundle.a_coef[:-1] * dts))


def path_costs(trace: DiscretizationTrace, betas):
    """Sum of |X_{T_i} - X_{T_{i-1}}|^beta over rebalances, per beta."""
    out = np.empty(len(betas))
    for j, beta in enumerate(betas):
        if beta == 0.0:
            out[j] = trace.n_rebalances
        else:
            out[j] = float(np.sum(trace.increments**beta))
    return out


# ---------------------------------------------------------------------------
# Estimator layer (path-parallel, deterministic combination order)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EngineConfig:
    """Everything needed to simulate one path bundle reproducibly."""

    model: Optional[LevyMarketModel]
    integrand: object
    horizon: float
    grid: GridSpec
    master_seed: int
    max_grid_points: int = 10**8

    def simulate(self, path_index) -> PathBundle:
        stream = derive_stream(self.master_seed, path_index)
        return simulate_path(
            self.model,
            self.integrand,
            self.horizon,
            self.grid,
            stream,
            self.max_grid_points,
        )


def _functional_chunk(args, start, stop):
    cfg, rule, epsilon, betas = args
    out = np.empty((stop - start, 1 + len(betas)))
    for i in range(start, stop):
        bundle = cfg.simulate(i)
        trace = hitting_times(bundle, rule, epsilon)
        out[i - start, 0] = path_error_integral(bundle, trace)
        out[i - start, 1:] = path_costs(trace, betas)
    return out


def _grid_tol_rel(cfg: EngineConfig, rule, epsilon):
    """Crude relative bound on grid-detection bias for constant-barrier runs."""
    from .markets import RawStableIntegrand

    if not isinstance(rule, ConstantPair) or not isinstance(
        cfg.integrand, RawStableIntegrand
    ):
        return None
    law = cfg.integrand.law
    inc = law.unit_scale(cfg.grid.h)
    r = inc / (epsilon * min(rule.lower, rule.upper))
    return float(min(1.0, 4.0 * r))


def estimate_functionals(cfg: EngineConfig, rule, epsilon, betas, n_paths, threads=1):
    """Joint MC estimate of the error functional and cost functionals.

    Returns (error_estimate, [cost_estimate per beta]); one simulation pass
    feeds all functionals. Deterministic for any thread count.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2 for standard errors")
    betas = tuple(float(b) for b in betas)
    args = (cfg, rule, float(epsilon), betas)
    chunks = _parallel.map_chunks(_functional_chunk, args, int(n_paths), threads)
    samples = np.concatenate(chunks, axis=0)
    means = samples.mean(axis=0)
    ses = samples.std(axis=0, ddof=1) / math.sqrt(n_paths)
    tol = _grid_tol_rel(cfg, rule, epsilon)
    err = FunctionalEstimate(
        value=float(means[0]),
        std_error=float(ses[0]),
        n_paths=int(n_paths),
        epsilon=float(epsilon),
        beta=None,
        grid_tol_rel=tol,
    )
    costs = [
        FunctionalEstimate(
            value=float(means[1 + j]),
            std_error=float(ses[1 + j]),
            n_paths=int(n_paths),
            epsilon=float(epsilon),
            beta=betas[j],
            grid_tol_rel=tol,
        )
        for j in range(len(betas))
    ]
    return err, costs


def estimate_error_functional(cfg, rule, epsilon, n_paths, threads=1):
    err, _ = estimate_functionals(cfg, rule, epsilon, (), n_paths, threads)
    return err


def estimate_cost_functional(cfg, rule, epsilon, beta, n_paths, threads=1):
    alpha = cfg.model.alpha if cfg.model is not None else cfg.integrand.law.alpha
    if not (0.0 <= beta < alpha):
        raise ValueError(f"beta must lie in [0, alpha={alpha}), got {beta}")
    _, costs = estimate_functionals(cfg, rule, epsilon, (beta,), n_paths, threads)
    return costs[0]


# ---------------------------------------------------------------------------
# Equidistant baseline
# ---------------------------------------------------------------------------

def _equidistant_chunk(args, start, stop):
    cfg, n_dates_list, betas = args
    width = len(n_dates_list) * (1 + len(betas))
    out = np.empty((stop - start, width))
    for i in range(start, stop):
        bundle = cfg.simulate(i)
        times, x = bundle.times, bundle.x
        n = len(times)
        dts = np.diff(times)
        col = 0
        for n_dates in n_dates_list:
            dates = np.arange(0, n_dates + 1) * (cfg.horizon / n_dates)
            # grid index of the last point at or before each date
            date_idx = np.searchsorted(times, dates, side="right") - 1
            anchors = _anchor_values(x, date_idx[:-1], n)
            dev = x[:-1] - anchors[:-1]
            out[i - start, col] = float(np.sum(dev * dev * bundle.a_coef[:-1] * dts))
            col += 1
            incs = np.abs(np.diff(x[date_idx]))
            for beta in betas:
                out[i - start, col] = n_dates if beta == 0.0 else float(
                    np.sum(incs**beta)
                )
                col += 1
    return out


def equidistant_baseline_multi(cfg: EngineConfig, n_dates_list, betas, n_paths, threads=1):
    """Equidistant-date estimates for several date counts from one path set.

    Reusing the same paths across date counts (common random numbers) keeps
    the ratios between the estimates stable. Returns a list of
    (error_estimate, [cost_estimates]) aligned with n_dates_list.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2 for standard errors")
    n_dates_list = [int(n) for n in n_dates_list]
    if any(n < 1 for n in n_dates_list):
        raise ValueError("n_dates must be at least 1")
    betas = tuple(float(b) for b in betas)
    args = (cfg, tuple(n_dates_list), betas)
    chunks = _parallel.map_chunks(_equidistant_chunk, args, int(n_paths), threads)
    samples = np.concatenate(chunks, axis=0)
    means = samples.mean(axis=0)
    ses = samples.std(axis=0, ddof=1) / math.sqrt(n_paths)
    results = []
    col = 0
    for _n in n_dates_list:
        err = FunctionalEstimate(
            value=float(means[col]),
            std_error=float(ses[col]),
            n_paths=int(n_paths),
            epsilon=None,
            beta=None,
        )
        col += 1
        costs = []
        for beta in betas:
            costs.append(
                FunctionalEstimate(
                    value=float(means[col]),
                    std_error=float(ses[col]),
                    n_paths=int(n_paths),
                    epsilon=None,
                    beta=beta,
                )
            )
            col += 1
        results.append((err, costs))
    return results


def equidistant_baseline(cfg: EngineConfig, n_dates, betas, n_paths, threads=1):
    """Error and cost estimates for deterministic dates eta(t) = h*floor(t/h).

    The beta = 0 cost equals n_dates exactly on every path.
    """
    return equidistant_baseline_multi(cfg, [n_dates], betas, n_paths, threads)[0]


# ---------------------------------------------------------------------------
# Budget inversion
# ---------------------------------------------------------------------------

def invert_cost_for_budget(epsilons, costs, errors, budget):
    """Smallest sampled epsilon whose cost stays under the budget, and the
    log-log interpolated error at that budget.

    The table must be sorted by epsilon descending with cost increasing.
    Budgets outside the sampled cost range are rejected (no extrapolation).
    """
    eps = np.asarray(epsilons, dtype=float)
    cost = np.asarray(costs, dtype=float)
    err = np.asarray(errors, dtype=float)
    if eps.size < 2:
        raise ValueError("need at least two frontier samples")
    if np.any(np.diff(eps) >= 0):
        raise ValueError("epsilons must be strictly decreasing")
    if np.any(np.diff(cost) <= 0):
        raise ValueError("costs must be strictly increasing as epsilon decreases")
    below = np.flatnonzero(cost < budget)
    if below.size == 0:
        raise BudgetRangeError(
            f"budget {budget} is below the cheapest sampled cost {cost[0]}"
        )
    k = int(below[-1])
    if k == eps.size - 1:
        raise BudgetRangeError(
            f"budget {budget} exceeds the costliest sampled cost {cost[-1]}; "
            "refusing to extrapolate"
        )
    # interpolate log(error) linearly in log(cost) between brackets k, k+1
    t = (math.log(budget) - math.log(cost[k])) / (
        math.log(cost[k + 1]) - math.log(cost[k])
    )
    log_err = (1.0 - t) * math.log(err[k]) + t * math.log(err[k + 1])
    return float(eps[k]), float(math.exp(log_err))
