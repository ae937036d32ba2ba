"""Path simulation on jump-adapted grids with reproducible per-path streams.

Large jumps (above a threshold delta) are drawn exactly as a compound Poisson
process and their times are inserted into a uniform base grid; the remaining
small-jump motion is aggregated per step as a strictly-stable increment
matched to the small-jump tail, conditioned to stay within [-delta, delta]
(rejection), recentered to mean zero. The integrator Y advances
multiplicatively: exp(-drift * dt) between grid points (compensating the
large jumps exactly, so Y is a martingale), times (1 + dZ) at each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InternalConsistencyError, StepBudgetError
from .markets import (
    DeltaHedgeIntegrand,
    LevyMarketModel,
    MertonIntegrand,
    RawStableIntegrand,
    coefficient_processes,
)
from .stable import _standard_stable_draws
from .streams import RngStream, derive_stream  # noqa: F401  (re-exported)

__all__ = ["GridSpec", "PathBundle", "derive_stream", "simulate_path"]

_GAP_BLOCK = 64


@dataclass(frozen=True)
class GridSpec:
    """Resolution of the simulation grid.

    h: uniform base step. delta: threshold above which jumps are simulated
    exactly (None picks delta so the above-threshold rate is ~1000/T).
    include_small_jumps=False drops the sub-delta motion entirely
    (truncation-only diagnostic mode).
    """

    h: float
    delta: Optional[float] = None
    include_small_jumps: bool = True

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("base step h must be positive")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("jump threshold delta must be positive")

    def resolve_delta(self, model: LevyMarketModel, horizon):
        if self.delta is not None:
            return min(self.delta, model.cutoff)
        a = model.alpha
        target_rate = 1000.0 / horizon
        d = (target_rate / (model.c_plus + model.c_minus) + model.cutoff ** (-a)) ** (
            -1.0 / a
        )
        return min(d, model.cutoff)


@dataclass
class PathBundle:
    """One trajectory: aligned right-continuous step values on [0, T]."""

    times: np.ndarray
    y: np.ndarray
    x: np.ndarray
    a_coef: np.ndarray
    lam: np.ndarray
    jump_flags: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        for name in ("y", "x", "a_coef", "lam", "jump_flags"):
            if len(getattr(self, name)) != n:
                raise InternalConsistencyError(f"array {name} misaligned with times")

    def write_csv(self, fh):
        fh.write("t,y,x,a_coef,lambda,jump\n")
        for k in range(len(self.times)):
            fh.write(
                f"{self.times[k]!r},{self.y[k]!r},{self.x[k]!r},"
                f"{self.a_coef[k]!r},{self.lam[k]!r},{int(self.jump_flags[k])}\n"
            )


def _draw_jump_times(stream: RngStream, rate, horizon):
    """Arrival times in (0, horizon) of a Poisson process, via exponential gaps."""
    if rate <= 0:
        return np.empty(0)
    times = []
    t = 0.0
    while True:
        gaps = stream.exponentials(_GAP_BLOCK) / rate
        for gap in gaps:
            t += gap
            if t >= horizon:
                return np.asarray(times)
            times.append(t)


def _conditioned_small_increments(law, dts, delta, stream: RngStream):
    """Stable increments over the steps dts, conditioned on |inc| <= delta.

    Rejected entries are redrawn until none remain; the conditional mean is
    recentred analytically (first order in dt) for asymmetric laws.
    """
    alpha = law.alpha
    scales = (law.sigma * dts) ** (1.0 / alpha)
    incs = scales * _standard_stable_draws(alpha, law.skew, stream, len(dts))
    bad = np.abs(incs) > delta
    while bad.any():
        idx = np.flatnonzero(bad)
        incs[idx] = scales[idx] * _standard_stable_draws(
            alpha, law.skew, stream, len(idx)
        )
        bad = np.abs(incs) > delta
    if law.c_plus != law.c_minus:
        # mean removed by the conditioning: E[inc; |inc|>delta] ~ dt * tail flow
        incs = incs + dts * (law.c_plus - law.c_minus) * delta ** (1.0 - alpha) / (
            alpha - 1.0
        )
    return incs


def _raw_stable_bundle(spec: RawStableIntegrand, horizon, grid, stream, max_grid_points):
    n_steps = max(1, int(round(horizon / grid.h)))
    if n_steps + 1 > max_grid_points:
        raise StepBudgetError(stream.path_index, max_grid_points)
    times = np.linspace(0.0, horizon, n_steps + 1)
    law = spec.law
    scale = law.unit_scale(horizon / n_steps)
    incs = scale * _standard_stable_draws(law.alpha, law.skew, stream, n_steps)
    x = np.empty(n_steps + 1)
    x[0] = 0.0
    np.cumsum(incs, out=x[1:])
    ones = np.ones(n_steps + 1)
    return PathBundle(
        times=times,
        y=ones,
        x=x,
        a_coef=ones,
        lam=ones,
        jump_flags=np.zeros(n_steps + 1, dtype=bool),
    )


def simulate_path(
    model: Optional[LevyMarketModel],
    spec,
    horizon,
    grid: GridSpec,
    stream: RngStream,
    max_grid_points=10**8,
) -> PathBundle:
    """Simulate one trajectory of (Y, X, A, lambda) on [0, horizon].

    Pure given the stream; identical inputs reproduce identical bundles.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if isinstance(spec, RawStableIntegrand):
        return _raw_stable_bundle(spec, horizon, grid, stream, max_grid_points)
    if model is None:
        raise ValueError("market integrands require a model")
    if isinstance(spec, MertonIntegrand):
        spec.check_support(model)

    delta = grid.resolve_delta(model, horizon)
    rate = model.jump_rate(delta)
    drift = model.drift(delta)

    jump_times = _draw_jump_times(stream, rate, horizon)
    n_jumps = len(jump_times)
    if n_jumps:
        u_sign = stream.uniforms(n_jumps)
        u_size = stream.uniforms(n_jumps)
        jump_sizes = model.sample_jumps(delta, u_sign, u_size)

    n_base = max(1, int(round(horizon / grid.h)))
    base = np.linspace(0.0, horizon, n_base + 1)
    if n_jumps:
        times = np.union1d(base, jump_times)
    else:
        times = base
    if len(times) > max_grid_points:
        raise StepBudgetError(stream.path_index, max_grid_points)

    jump_flags = np.zeros(len(times), dtype=bool)
    dz_jump = np.zeros(len(times))
    if n_jumps:
        pos = np.searchsorted(times, jump_times)
        jump_flags[pos] = True
        dz_jump[pos] = jump_sizes

    dts = np.diff(times)
    if grid.include_small_jumps:
        small = _conditioned_small_increments(
            model.limit_stable_law(), dts, delta, stream
        )
    else:
        small = np.zeros(len(dts))

    step_factor = np.exp(-drift * dts) * (1.0 + small) * (1.0 + dz_jump[1:])
    y = np.empty(len(times))
    y[0] = model.y0
    np.cumprod(step_factor, out=y[1:])
    y[1:] *= model.y0
    if np.any(y <= 0):
        raise InternalConsistencyError(
            "Y became non-positive; jump support invariants violated"
        )

    if isinstance(spec, MertonIntegrand):
        pi = spec.pi
        v_factor = np.exp(-pi * drift * dts) * (1.0 + pi * small) * (
            1.0 + pi * dz_jump[1:]
        )
        v = np.empty(len(times))
        v[0] = spec.v0
        np.cumprod(v_factor, out=v[1:])
        v[1:] *= spec.v0
        if np.any(v <= 0):
            raise InternalConsistencyError("wealth became non-positive")
    else:
        v = None

    x, a_coef, lam = coefficient_processes(model, spec, (times, y, v))
    return PathBundle(
        times=times,
        y=y,
        x=np.asarray(x, dtype=float),
        a_coef=np.asarray(a_coef, dtype=float),
        lam=np.asarray(lam, dtype=float),
        jump_flags=jump_flags,
    )
