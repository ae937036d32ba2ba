"""Convergence, rate-comparison, rescaling and frontier studies.

Every study returns a StudyResult (rows + fit diagnostics) and can be
persisted as CSV plus a plain-text manifest. Output bytes depend only on the
configuration and master seed: floats are written with repr (shortest
round-trip), rows are emitted in a fixed order, and no timestamps or worker
counts enter any file.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import _parallel
from .config import ExperimentConfig
from .discretize import (
    ConstantPair,
    equidistant_baseline_multi,
    estimate_functionals,
    invert_cost_for_budget,
)
from .errors import FitDegeneracyError
from .markets import RawStableIntegrand
from .paths import GridSpec
from .stable import (
    Barriers,
    _simulate_exit,
    mean_exit_time,
    mean_squared_integral,
    overshoot_moment,
)
from .streams import derive_stream

__all__ = [
    "FitDiagnostics",
    "StudyResult",
    "fit_loglog",
    "run_convergence_study",
    "run_rate_comparison",
    "run_rescaling_validation",
    "run_frontier",
    "run_study",
    "write_outputs",
]


@dataclass(frozen=True)
class FitDiagnostics:
    label: str
    slope: float
    slope_se: float
    intercept: float
    r2: float
    n_points: int

    @property
    def slope_ci95(self):
        return (self.slope - 1.96 * self.slope_se, self.slope + 1.96 * self.slope_se)


@dataclass
class StudyResult:
    kind: str
    rows: list
    fits: list
    meta: dict
    extra_tables: dict = field(default_factory=dict)
    runtime_s: float = 0.0


def fit_loglog(x, y, y_se, label, drop_largest_x=0):
    """Weighted least squares of log y on log x.

    Weights come from the delta-method standard errors of log y; the
    ``drop_largest_x`` largest x points are excluded as pre-asymptotic.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    y_se = np.asarray(y_se, dtype=float)
    order = np.argsort(x)
    keep = order[: len(x) - drop_largest_x] if drop_largest_x else order
    if keep.size < 2:
        raise FitDegeneracyError(
            f"{label}: {keep.size} points left after exclusions; need at least 2"
        )
    lx = np.log(x[keep])
    ly = np.log(y[keep])
    se_log = np.clip(y_se[keep] / y[keep], 1e-12, None)
    w = 1.0 / se_log**2
    sw = w.sum()
    mx = (w * lx).sum() / sw
    my = (w * ly).sum() / sw
    sxx = (w * (lx - mx) ** 2).sum()
    slope = (w * (lx - mx) * (ly - my)).sum() / sxx
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    dof = max(keep.size - 2, 1)
    scale = (w * resid**2).sum() / dof
    slope_se = math.sqrt(max(scale, 1.0) / sxx)  # never report below-noise precision
    ss_tot = (w * (ly - my) ** 2).sum()
    r2 = 1.0 - (w * resid**2).sum() / ss_tot if ss_tot > 0 else 1.0
    return FitDiagnostics(label, float(slope), float(slope_se), float(intercept),
                          float(r2), int(keep.size))


def _rule_label(rule):
    return rule.label()


def _theory_limits(config: ExperimentConfig):
    """Exact limit constants for raw-stable runs with constant barriers."""
    if not isinstance(config.integrand, RawStableIntegrand):
        return None
    if not isinstance(config.rule, ConstantPair):
        return None
    law = config.integrand.law
    if not law.is_symmetric:
        return None
    bar = Barriers(config.rule.lower, config.rule.upper)
    g = mean_exit_time(law, bar)
    f = mean_squared_integral(law, bar)
    limit_err = config.horizon * f / g
    limit_costs = {
        beta: config.horizon * overshoot_moment(law, bar, beta) / g
        for beta in config.betas
    }
    return limit_err, limit_costs


# ---------------------------------------------------------------------------
# Convergence / frontier
# ---------------------------------------------------------------------------

def _frontier_rows(config: ExperimentConfig, threads, with_theory):
    alpha = config.alpha
    limits = _theory_limits(config) if with_theory else None
    engine = config.engine()
    rows = []
    for eps in config.epsilons:  # descending order fixed by config validation
        err, costs = estimate_functionals(
            engine, config.rule, eps, config.betas, config.n_paths, threads
        )
        for est in costs:
            row = {
                "epsilon": eps,
                "error": err.value,
                "error_se": err.std_error,
                "cost": est.value,
                "cost_se": est.std_error,
                "beta": est.beta,
                "n_paths": config.n_paths,
                "rule": _rule_label(config.rule),
                "seed": config.master_seed,
            }
            if with_theory:
                row["scaled_error"] = err.value / eps**2
                row["scaled_cost"] = est.value * eps ** (alpha - est.beta)
                if limits is not None:
                    row["limit_scaled_error"] = limits[0]
                    row["limit_scaled_cost"] = limits[1][est.beta]
                else:
                    row["limit_scaled_error"] = ""
                    row["limit_scaled_cost"] = ""
            rows.append(row)
    return rows


def run_convergence_study(config: ExperimentConfig, threads=1) -> StudyResult:
    """Error and cost estimates across the epsilon grid, with scaled columns
    and, for raw-stable constant-barrier runs, the exact limit constants."""
    t0 = time.monotonic()
    rows = _frontier_rows(config, threads, with_theory=True)
    fits = []
    eps = np.array([r["epsilon"] for r in rows if r["beta"] == config.betas[0]])
    if eps.size >= 3:
        drop = min(2, eps.size - 3)
        errs = np.array([r["error"] for r in rows if r["beta"] == config.betas[0]])
        ses = np.array([r["error_se"] for r in rows if r["beta"] == config.betas[0]])
        fits.append(fit_loglog(eps, errs, ses, "error_vs_epsilon", drop))
        for beta in config.betas:
            sub = [r for r in rows if r["beta"] == beta]
            fits.append(
                fit_loglog(
                    [r["epsilon"] for r in sub],
                    [r["cost"] for r in sub],
                    [max(r["cost_se"], 1e-300) for r in sub],
                    f"cost_vs_epsilon_beta={beta:g}",
                    drop,
                )
            )
    meta = {
        "expected_error_slope": 2.0,
        "expected_cost_slopes": {f"{b:g}": -(config.alpha - b) for b in config.betas},
    }
    return StudyResult("convergence", rows, fits, meta, runtime_s=time.monotonic() - t0)


def run_frontier(config: ExperimentConfig, threads=1) -> StudyResult:
    """Plain (epsilon, error, cost) frontier table in the standard format."""
    t0 = time.monotonic()
    rows = _frontier_rows(config, threads, with_theory=False)
    return StudyResult("frontier", rows, [], {}, runtime_s=time.monotonic() - t0)


# ---------------------------------------------------------------------------
# Rate comparison
# ---------------------------------------------------------------------------

def _hitting_grid(config: ExperimentConfig, eps):
    """Per-epsilon base step keeping the increment-to-barrier ratio fixed."""
    if not isinstance(config.integrand, RawStableIntegrand) or not isinstance(
        config.rule, ConstantPair
    ):
        return config.grid
    law = config.integrand.law
    target = config.rate.increment_fraction * eps * min(
        config.rule.lower, config.rule.upper
    )
    h = min(config.grid.h, target**law.alpha / law.sigma)
    return GridSpec(h=h, delta=config.grid.delta,
                    include_small_jumps=config.grid.include_small_jumps)


def run_rate_comparison(config: ExperimentConfig, threads=1) -> StudyResult:
    """Hitting-rule frontier vs equidistant dates at beta = 0.

    Fits the log-log error-versus-cost slopes (dropping the pre-asymptotic
    largest epsilons from the hitting fit) and compares errors at the matched
    budgets given by the equidistant date counts.
    """
    t0 = time.monotonic()
    if config.betas != (0.0,):
        raise ValueError("rate comparison runs with betas == [0]")
    if len(config.epsilons) < 4:
        raise FitDegeneracyError(
            f"rate comparison needs at least 4 epsilons, got {len(config.epsilons)}"
        )
    rows = []
    for eps in config.epsilons:
        engine = config.engine()
        engine = type(engine)(
            model=engine.model,
            integrand=engine.integrand,
            horizon=engine.horizon,
            grid=_hitting_grid(config, eps),
            master_seed=engine.master_seed,
        )
        err, costs = estimate_functionals(
            engine, config.rule, eps, (0.0,), config.n_paths, threads
        )
        rows.append(
            {
                "epsilon": eps,
                "error": err.value,
                "error_se": err.std_error,
                "cost": costs[0].value,
                "cost_se": costs[0].std_error,
                "beta": 0.0,
                "n_paths": config.n_paths,
                "rule": _rule_label(config.rule),
                "seed": config.master_seed,
                "scheme": "hitting",
            }
        )

    # equidistant frontier from one fine-grid path set (common random numbers)
    eq_h = config.horizon / config.rate.equidistant_steps
    eq_engine = config.engine()
    eq_engine = type(eq_engine)(
        model=eq_engine.model,
        integrand=eq_engine.integrand,
        horizon=eq_engine.horizon,
        grid=GridSpec(h=eq_h, delta=config.grid.delta,
                      include_small_jumps=config.grid.include_small_jumps),
        master_seed=eq_engine.master_seed,
    )
    eq = equidistant_baseline_multi(
        eq_engine, config.rate.n_dates, (0.0,), config.n_paths, threads
    )
    for n_dates, (err, costs) in zip(config.rate.n_dates, eq):
        rows.append(
            {
                "epsilon": config.horizon / n_dates,
                "error": err.value,
                "error_se": err.std_error,
                "cost": float(costs[0].value),
                "cost_se": costs[0].std_error,
                "beta": 0.0,
                "n_paths": config.n_paths,
                "rule": f"equidistant({n_dates})",
                "seed": config.master_seed,
                "scheme": "equidistant",
            }
        )

    hit = [r for r in rows if r["scheme"] == "hitting"]
    if len(hit) < 4:
        raise FitDegeneracyError(f"only {len(hit)} hitting frontier points; need >= 4")
    fits = [
        fit_loglog(
            [r["cost"] for r in hit],
            [r["error"] for r in hit],
            [r["error_se"] for r in hit],
            "hitting_error_vs_cost",
            drop_largest_x=0,
        )
    ]
    # the largest epsilons are the *smallest* costs; refit dropping them
    hit_sorted = sorted(hit, key=lambda r: r["epsilon"], reverse=True)
    kept = hit_sorted[config.rate.fit_drop :]
    if len(kept) < 2:
        raise FitDegeneracyError("fit_drop leaves fewer than 2 hitting points")
    fits[0] = fit_loglog(
        [r["cost"] for r in kept],
        [r["error"] for r in kept],
        [r["error_se"] for r in kept],
        "hitting_error_vs_cost",
    )
    eqr = [r for r in rows if r["scheme"] == "equidistant"]
    fits.append(
        fit_loglog(
            [r["cost"] for r in eqr],
            [r["error"] for r in eqr],
            [r["error_se"] for r in eqr],
            "equidistant_error_vs_cost",
        )
    )

    # matched-budget comparison over the overlapping cost range
    hit_eps = np.array([r["epsilon"] for r in kept])
    hit_cost = np.array([r["cost"] for r in kept])
    hit_err = np.array([r["error"] for r in kept])
    matched = []
    for r in eqr:
        budget = r["cost"]
        if not (hit_cost.min() < budget <= hit_cost.max()):
            continue
        eps_at, err_at = invert_cost_for_budget(hit_eps, hit_cost, hit_err, budget)
        matched.append(
            {
                "budget": budget,
                "epsilon_at_budget": eps_at,
                "hitting_error": err_at,
                "equidistant_error": r["error"],
                "error_ratio": err_at / r["error"],
            }
        )
    meta = {
        "expected_hitting_slope": -2.0 / config.alpha,
        "expected_equidistant_slope": -1.0,
        "fit_drop": config.rate.fit_drop,
    }
    return StudyResult(
        "rate_comparison",
        rows,
        fits,
        meta,
        extra_tables={"matched_budgets": matched},
        runtime_s=time.monotonic() - t0,
    )


# ---------------------------------------------------------------------------
# Rescaling validation
# ---------------------------------------------------------------------------

def _rescaled_exit_chunk(args, start, stop):
    law, beta, dt, radius, master_seed, max_steps = args
    out = np.empty((stop - start, 3))
    for i in range(start, stop):
        stream = derive_stream(master_seed, i)
        out[i - start] = _simulate_exit(
            law, 1.0, 1.0, beta, dt, stream, max_steps, i, condition_radius=radius
        )
    return out


def run_rescaling_validation(config: ExperimentConfig, threads=1) -> StudyResult:
    """Exit statistics of the rescaled driver against the stable limit.

    At scale eps, the rescaled driver of the truncated-power model is exactly
    the limit stable process with jumps truncated at cutoff/eps; exit time and
    overshoot moments from (-1, 1) are simulated at each eps and compared with
    the closed forms of the untruncated limit, so the reported deviations
    measure distance to the limit (plus a fixed small grid-detection floor).
    """
    t0 = time.monotonic()
    model = config.model
    law = model.limit_stable_law()
    beta = config.rescaling.overshoot_beta
    unit = Barriers(1.0, 1.0)
    g_lim = mean_exit_time(law, unit)
    u_lim = overshoot_moment(law, unit, beta)
    dt = config.rescaling.dt_fraction * g_lim
    rows = []
    for eps in config.epsilons:
        radius = model.cutoff / eps
        args = (law, beta, dt, radius, config.master_seed, 10**8)
        chunks = _parallel.map_chunks(
            _rescaled_exit_chunk, args, config.n_paths, threads
        )
        samples = np.concatenate(chunks, axis=0)
        means = samples.mean(axis=0)
        ses = samples.std(axis=0, ddof=1) / math.sqrt(config.n_paths)
        rows.append(
            {
                "epsilon": eps,
                "exit_time": float(means[0]),
                "exit_time_se": float(ses[0]),
                "exit_time_limit": g_lim,
                "exit_time_rel_dev": float(abs(means[0] - g_lim) / g_lim),
                "overshoot_beta": beta,
                "overshoot_moment": float(means[2]),
                "overshoot_moment_se": float(ses[2]),
                "overshoot_moment_limit": u_lim,
                "overshoot_moment_rel_dev": float(abs(means[2] - u_lim) / u_lim),
                "n_paths": config.n_paths,
                "seed": config.master_seed,
            }
        )
    meta = {"dt": dt, "law_sigma": law.sigma}
    return StudyResult("rescaling", rows, [], meta, runtime_s=time.monotonic() - t0)


# ---------------------------------------------------------------------------
# Dispatch and persistence
# ---------------------------------------------------------------------------

_RUNNERS = {
    "convergence": run_convergence_study,
    "rate_comparison": run_rate_comparison,
    "rescaling": run_rescaling_validation,
    "frontier": run_frontier,
}


def run_study(config: ExperimentConfig, threads=1) -> StudyResult:
    return _RUNNERS[config.kind](config, threads)


def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_csv(path, rows, columns):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c, "")) for c in columns) + "\n")


_BASE_COLUMNS = [
    "epsilon", "error", "error_se", "cost", "cost_se", "beta",
    "n_paths", "rule", "seed",
]

_COLUMNS = {
    "frontier": _BASE_COLUMNS,
    "convergence": _BASE_COLUMNS
    + ["scaled_error", "scaled_cost", "limit_scaled_error", "limit_scaled_cost"],
    "rate_comparison": _BASE_COLUMNS + ["scheme"],
    "rescaling": [
        "epsilon", "exit_time", "exit_time_se", "exit_time_limit",
        "exit_time_rel_dev", "overshoot_beta", "overshoot_moment",
        "overshoot_moment_se", "overshoot_moment_limit",
        "overshoot_moment_rel_dev", "n_paths", "seed",
    ],
}


def write_outputs(result: StudyResult, config: ExperimentConfig, out_dir):
    """Persist the study as CSV files plus a manifest; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    main = os.path.join(out_dir, f"{result.kind}.csv")
    _write_csv(main, result.rows, _COLUMNS[result.kind])
    written.append(main)
    if result.fits:
        fit_path = os.path.join(out_dir, f"{result.kind}_fits.csv")
        _write_csv(
            fit_path,
            [
                {
                    "label": f.label,
                    "slope": f.slope,
                    "slope_se": f.slope_se,
                    "ci95_lo": f.slope_ci95[0],
                    "ci95_hi": f.slope_ci95[1],
                    "intercept": f.intercept,
                    "r2": f.r2,
                    "n_points": f.n_points,
                }
                for f in result.fits
            ],
            ["label", "slope", "slope_se", "ci95_lo", "ci95_hi", "intercept", "r2", "n_points"],
        )
        written.append(fit_path)
    for name, table in sorted(result.extra_tables.items()):
        if not table:
            continue
        path = os.path.join(out_dir, f"{result.kind}_{name}.csv")
        _write_csv(path, table, list(table[0].keys()))
        written.append(path)

    config_echo = json.dumps(config.raw, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(config_echo.encode()).hexdigest()
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"study: {result.kind}\n")
        fh.write(f"master_seed: {config.master_seed}\n")
        fh.write(f"config_sha256: {digest}\n")
        fh.write(f"rows: {len(result.rows)}\n")
        fh.write(f"config: {config_echo}\n")
    written.append(manifest)
    return written
