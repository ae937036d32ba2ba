"""Strictly alpha-stable limit process: sampling, exit functionals, overshoot law.

Conventions
-----------
A law is parameterized by its jump (Levy) density

    nu(x) = (c_plus * 1{x>0} + c_minus * 1{x<0}) / |x|^(1+alpha),   1 < alpha < 2.

``c_plus`` and ``c_minus`` are *density* coefficients: the tail of the jump
measure is nu((x, inf)) = c_plus * x^(-alpha) / alpha. In the symmetric case
c_plus = c_minus = c the characteristic function is E[exp(iuX_t)] =
exp(-t * sigma * |u|^alpha) with

    sigma = -2 * c * Gamma(-alpha) * cos(pi*alpha/2)  > 0,

and sigma is defined by the same linear formula (c_plus + c_minus in place of
2c) in the asymmetric case, where it equals gamma^alpha for the scale gamma of
the standard "1" parameterization used by the Chambers-Mallows-Stuck sampler.

Exit functionals for the two-sided barrier (-lower, upper), started at 0:

    g = E[tau]                 mean exit time
    f = E[int_0^tau X_t^2 dt]  mean squared-path integral
    u_beta = E[|X_tau|^beta]   overshoot moment, 0 <= beta < alpha

f and g have closed forms for symmetric laws; u_beta reduces to a
one-dimensional integral handled by singularity-weighted adaptive quadrature.
A Monte Carlo oracle covers the asymmetric case and cross-checks everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gamma as _gamma

from .errors import SingularPointError, StepBudgetError
from .streams import RngStream, derive_stream
from . import _parallel

__all__ = [
    "StableLaw",
    "Barriers",
    "ExitFunctionals",
    "sigma_from_density_coeffs",
    "sample_stable_increments",
    "mean_exit_time",
    "mean_squared_integral",
    "overshoot_density",
    "overshoot_moment",
    "mc_exit_functionals",
]


def sigma_from_density_coeffs(alpha, c_plus, c_minus):
    """Characteristic scale implied by the jump-density coefficients."""
    return -(c_plus + c_minus) * _gamma(-alpha) * math.cos(math.pi * alpha / 2.0)


@dataclass(frozen=True)
class StableLaw:
    """Strictly alpha-stable law with one-sided jump-density coefficients.

    ``sigma`` is derived from (alpha, c_plus, c_minus); passing it explicitly
    is allowed only as a consistency assertion.
    """

    alpha: float
    c_plus: float
    c_minus: float
    sigma: Optional[float] = None

    def __post_init__(self):
        a = self.alpha
        if not (math.isfinite(a) and 1.0 < a < 2.0):
            raise ValueError(f"alpha must lie strictly in (1, 2), got {a}")
        if self.c_plus < 0 or self.c_minus < 0:
            raise ValueError("tail coefficients must be nonnegative")
        if self.c_plus + self.c_minus <= 0:
            raise ValueError("c_plus + c_minus must be positive")
        implied = sigma_from_density_coeffs(a, self.c_plus, self.c_minus)
        if self.sigma is None:
            object.__setattr__(self, "sigma", implied)
        elif not math.isclose(self.sigma, implied, rel_tol=1e-9):
            raise ValueError(
                f"sigma={self.sigma} inconsistent with the jump density "
                f"(implied {implied})"
            )

    @classmethod
    def symmetric(cls, alpha, sigma=1.0):
        """Symmetric law with characteristic function exp(-t*sigma*|u|^alpha)."""
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        unit = sigma_from_density_coeffs(alpha, 1.0, 1.0)
        c = sigma / unit
        return cls(alpha, c, c)

    @property
    def is_symmetric(self):
        return self.c_plus == self.c_minus

    @property
    def skew(self):
        """Skewness parameter of the standard "1" parameterization, in [-1, 1]."""
        return (self.c_plus - self.c_minus) / (self.c_plus + self.c_minus)

    def unit_scale(self, dt):
        """Scale of an increment over dt in the "1" parameterization: (sigma*dt)^(1/alpha)."""
        if not (math.isfinite(dt) and dt > 0):
            raise ValueError(f"dt must be positive and finite, got {dt}")
        return (self.sigma * dt) ** (1.0 / self.alpha)


@dataclass(frozen=True)
class Barriers:
    """Two-sided exit barriers (-lower, upper), both strictly positive."""

    lower: float
    upper: float

    def __post_init__(self):
        for name, v in (("lower", self.lower), ("upper", self.upper)):
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} barrier must be positive and finite, got {v}")

    @property
    def half_width(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def asymmetry(self):
        """(upper - lower) / (upper + lower), in (-1, 1)."""
        return (self.upper - self.lower) / (self.upper + self.lower)


@dataclass(frozen=True)
class ExitFunctionals:
    """Exit functionals of a barrier pair; standard errors present in MC mode."""

    f: float
    g: float
    u_beta: float
    beta: float
    f_se: Optional[float] = None
    g_se: Optional[float] = None
    u_se: Optional[float] = None
    n_paths: Optional[int] = None
    dt: Optional[float] = None
    bias_bound_rel: Optional[float] = None


# ---------------------------------------------------------------------------
# Sampling (Chambers-Mallows-Stuck transform)
# ---------------------------------------------------------------------------

def _standard_stable_draws(alpha, skew, stream: RngStream, n):
    """n draws from the standard stable law S(alpha, skew; 1, 0), alpha != 1.

    Chambers-Mallows-Stuck transform of a uniform angle and an exponential,
    in the parameterization whose characteristic function is
    exp(-|u|^alpha * (1 - i*skew*sign(u)*tan(pi*alpha/2))).
    """
    u = stream.uniforms(n)
    w = np.maximum(stream.exponentials(n), 1e-300)
    v = np.pi * (u - 0.5)
    if skew == 0.0:
        # symmetric special case of the same transform
        av = alpha * v
        return (
            np.sin(av)
            / np.cos(v) ** (1.0 / alpha)
            * (np.cos(v - av) / w) ** ((1.0 - alpha) / alpha)
        )
    tan_half = math.tan(math.pi * alpha / 2.0)
    b = math.atan(skew * tan_half) / alpha
    s = (1.0 + (skew * tan_half) ** 2) ** (1.0 / (2.0 * alpha))
    avb = alpha * (v + b)
    return (
        s
        * np.sin(avb)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - avb) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_stable_increments(law: StableLaw, dt, n, stream: RngStream):
    """n i.i.d. increments of the law's process over a time step dt.

    Deterministic given (law, dt, n, stream state).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    scale = law.unit_scale(dt)
    return scale * _standard_stable_draws(law.alpha, law.skew, stream, int(n))


# ---------------------------------------------------------------------------
# Closed forms (symmetric laws)
# ---------------------------------------------------------------------------

def _require_symmetric(law, what):
    if not law.is_symmetric:
        raise ValueError(
            f"{what} has a closed form only for symmetric laws "
            "(c_plus == c_minus); use mc_exit_functionals instead"
        )


def mean_exit_time(law: StableLaw, b: Barriers):
    """E[tau] for exit from (-lower, upper): (lower*upper)^(alpha/2) / (sigma*Gamma(1+alpha))."""
    _require_symmetric(law, "mean_exit_time")
    a = law.alpha
    return (b.lower * b.upper) ** (a / 2.0) / (law.sigma * _gamma(1.0 + a))


def mean_squared_integral(law: StableLaw, b: Barriers):
    """E[int_0^tau X_t^2 dt] for exit from (-lower, upper), symmetric law."""
    _require_symmetric(law, "mean_squared_integral")
    a = law.alpha
    lo, hi = b.lower, b.upper
    ratio = lo / hi + hi / lo
    return (
        a
        * (lo * hi) ** (1.0 + a / 2.0)
        / (2.0 * law.sigma * _gamma(3.0 + a))
        * (ratio * (1.0 + a / 2.0) - a)
    )


def overshoot_density(law: StableLaw, b: Barriers, z):
    """Density of the exit position X_tau at z; zero inside (-lower, upper).

    Singular exactly at the barrier endpoints, where evaluation is rejected.
    """
    _require_symmetric(law, "overshoot_density")
    a = law.alpha
    lo, hi = b.lower, b.upper
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr == hi) or np.any(z_arr == -lo):
        raise SingularPointError(
            f"density is singular at the barrier endpoints -{lo} and {hi}"
        )
    coeff = math.sin(math.pi * a / 2.0) / math.pi * (lo * hi) ** (a / 2.0)
    outside = (z_arr >= hi) | (z_arr <= -lo)
    prod = np.where(outside, (z_arr - hi) * (z_arr + lo), 1.0)
    absz = np.where(outside, np.abs(z_arr), 1.0)
    dens = np.where(outside, coeff * prod ** (-a / 2.0) / absz, 0.0)
    if np.isscalar(z) or z_arr.ndim == 0:
        return float(dens)
    return dens


def overshoot_moment(law: StableLaw, b: Barriers, beta):
    """E[|X_tau|^beta] for 0 <= beta < alpha, symmetric law.

    beta = 0 returns exactly 1. Otherwise the one-dimensional integral over
    the overshoot density is rescaled to [0, 1] twice (direct and reciprocal
    halves) so that each endpoint singularity is an exact algebraic weight,
    and integrated by adaptive weighted quadrature. Absolute accuracy is
    better than 1e-8 for barrier pairs of moderate size (the quadrature is
    run at 1e-11 relative tolerance).
    """
    _require_symmetric(law, "overshoot_moment")
    a = law.alpha
    if not (0.0 <= beta):
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if beta >= a:
        raise ValueError(
            f"overshoot moment is infinite for beta={beta} >= alpha={a}"
        )
    if beta == 0.0:
        return 1.0
    lo, hi = b.lower, b.upper
    s = lo + hi
    half_a = a / 2.0

    def near(w):
        # remaining factor on [0,1] after extracting the w^(-alpha/2) weight
        return (1.0 + w) ** (-half_a) * (
            (s * w + lo) ** (beta - 1.0) + (s * w + hi) ** (beta - 1.0)
        )

    def far(v):
        # reciprocal half, weight v^(alpha-beta-1) extracted
        return (1.0 + v) ** (-half_a) * (
            (s + lo * v) ** (beta - 1.0) + (s + hi * v) ** (beta - 1.0)
        )

    p1, _ = integrate.quad(
        near, 0.0, 1.0, weight="alg", wvar=(-half_a, 0.0), epsabs=0.0, epsrel=1e-11,
        limit=200,
    )
    p2, _ = integrate.quad(
        far, 0.0, 1.0, weight="alg", wvar=(a - beta - 1.0, 0.0), epsabs=0.0,
        epsrel=1e-11, limit=200,
    )
    coeff = math.sin(math.pi * half_a) / math.pi * (lo * hi) ** half_a
    return coeff * s ** (1.0 - a) * (p1 + p2)


# ---------------------------------------------------------------------------
# Monte Carlo oracle
# ---------------------------------------------------------------------------

_MC_BLOCK = 2048


def _simulate_exit(
    law, lower, upper, beta, dt, stream, max_steps, path_index, condition_radius=None
):
    """One grid-detected exit: (tau_hat, squared integral, |overshoot|^beta).

    Left-rectangle rule for the integral; exit declared at the first grid
    point outside the open interval (boundary landing counts as exit).
    ``condition_radius`` conditions each increment on |inc| <= radius by
    rejection, which simulates the law with jumps truncated at the radius.
    """
    scale = law.unit_scale(dt)
    alpha, skew = law.alpha, law.skew
    x = 0.0
    steps = 0
    sq_sum = 0.0  # sum of X^2 at grid points strictly before the current one
    while steps < max_steps:
        block = min(_MC_BLOCK, max_steps - steps)
        incs = scale * _standard_stable_draws(alpha, skew, stream, block)
        if condition_radius is not None:
            bad = np.abs(incs) > condition_radius
            while bad.any():
                idx = np.flatnonzero(bad)
                incs[idx] = scale * _standard_stable_draws(
                    alpha, skew, stream, len(idx)
                )
                bad = np.abs(incs) > condition_radius
        path = x + np.cumsum(incs)
        hit = np.flatnonzero((path >= upper) | (path <= -lower))
        if hit.size:
            k = int(hit[0])
            sq_sum += x * x + float(np.sum(path[:k] ** 2))
            tau = (steps + k + 1) * dt
            over = abs(float(path[k]))
            return tau, sq_sum * dt, over**beta if beta > 0.0 else 1.0
        sq_sum += x * x + float(np.sum(path[:-1] ** 2))
        x = float(path[-1])
        steps += block
    raise StepBudgetError(path_index, max_steps)


def _mc_exit_chunk(args, start, stop):
    law, barriers, beta, dt, master_seed, max_steps = args
    out = np.empty((stop - start, 3))
    for i in range(start, stop):
        stream = derive_stream(master_seed, i)
        out[i - start] = _simulate_exit(
            law, barriers.lower, barriers.upper, beta, dt, stream, max_steps, i
        )
    return out


def mc_exit_functionals(
    law: StableLaw,
    b: Barriers,
    beta,
    n_paths,
    dt,
    master_seed,
    max_steps=10**8,
    threads=1,
) -> ExitFunctionals:
    """Monte Carlo estimates of (f, g, u_beta) with standard errors.

    Works for asymmetric laws. Exit is detected on the simulation grid, which
    overestimates the exit time; use dt well below the expected exit time
    (1e-3 of the closed-form mean when available). ``bias_bound_rel`` records
    a crude relative bound on this grid bias, proportional to the probability
    that an overshoot lands within one typical dt-increment of the barrier.

    Paths consume independent substreams derived from (master_seed, path
    index) and are combined in index order, so the result is identical for
    any thread count.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if not (0.0 <= beta < law.alpha):
        raise ValueError(f"beta must lie in [0, alpha), got {beta}")
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    args = (law, b, beta, float(dt), int(master_seed), int(max_steps))
    chunks = _parallel.map_chunks(_mc_exit_chunk, args, int(n_paths), threads)
    samples = np.concatenate(chunks, axis=0)
    means = samples.mean(axis=0)
    if n_paths >= 2:
        ses = samples.std(axis=0, ddof=1) / math.sqrt(n_paths)
    else:
        ses = np.full(3, np.nan)
    # grid-detection bias heuristic: overshoots within one increment-scale of
    # the barrier may be missed; their mass scales like (eps/barrier)^(1-a/2)
    eps_inc = law.unit_scale(dt)
    rel = 2.0 * (eps_inc / min(b.lower, b.upper)) ** (1.0 - law.alpha / 2.0)
    return ExitFunctionals(
        f=float(means[1]),
        g=float(means[0]),
        u_beta=float(means[2]),
        beta=float(beta),
        f_se=float(ses[1]),
        g_se=float(ses[0]),
        u_se=float(ses[2]),
        n_paths=int(n_paths),
        dt=float(dt),
        bias_bound_rel=float(rel),
    )
