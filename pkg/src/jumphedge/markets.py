"""Asset model (stochastic exponential of a truncated-stable-like Levy process)
and integrand kinds, with the coefficient processes the limit results need.

Coefficient conventions
-----------------------
The market jump density uses the *tail* normalization

    nubar(x) = alpha * c_plus * x^(-1-alpha)   on (0, cutoff],
    nubar(x) = alpha * c_minus * |x|^(-1-alpha) on [-cutoff, 0),

so that x^alpha * nubar((x, inf)) -> c_plus as x -> 0. The small jumps of the
driving process then rescale to a strictly stable process whose jump *density*
coefficients are (alpha*c_plus, alpha*c_minus); ``limit_stable_law`` applies
that conversion (see stable.StableLaw for the density convention).

For an integrand X with local jump intensity lambda_t, the quadratic variation
density of the integrator Y is A_t = Y_t^2 * q with q = int z^2 nubar(z) dz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .errors import HypothesisViolationError, InternalConsistencyError
from .stable import StableLaw

__all__ = [
    "LevyMarketModel",
    "RawStableIntegrand",
    "DeltaHedgeIntegrand",
    "MertonIntegrand",
    "BlackScholesDelta",
    "IntegrandSpec",
    "build_truncated_stable_density",
    "coefficient_processes",
]


@dataclass(frozen=True)
class LevyMarketModel:
    """Martingale Levy driver Z with truncated power-law jump density.

    Jumps live on [-cutoff, cutoff] with cutoff < 1, so the stochastic
    exponential Y stays positive. ``q`` is the quadratic coefficient
    int z^2 nubar(z) dz; ``drift(delta)`` returns the compensator rate of the
    jumps above a threshold delta (the between-jump drift of Z is minus that
    rate, making Z a martingale once small jumps are simulated mean-zero).
    """

    alpha: float
    c_plus: float
    c_minus: float
    cutoff: float
    y0: float

    def __post_init__(self):
        a = self.alpha
        if not (1.0 < a < 2.0):
            raise ValueError(f"alpha must lie strictly in (1, 2), got {a}")
        if self.c_plus < 0 or self.c_minus < 0 or self.c_plus + self.c_minus <= 0:
            raise ValueError("tail coefficients must be nonnegative with positive sum")
        if not (0.0 < self.cutoff < 1.0):
            raise ValueError(
                f"cutoff must lie in (0, 1) so that jumps of Z stay above -1, "
                f"got {self.cutoff}"
            )
        if self.y0 <= 0:
            raise ValueError("y0 must be positive")
        self._self_check()

    # -- density and closed-form integrals ---------------------------------

    def density(self, x):
        """Jump density nubar(x); zero outside [-cutoff, cutoff] and at 0."""
        a = self.alpha
        x = np.asarray(x, dtype=float)
        coeff = np.where(x > 0, a * self.c_plus, a * self.c_minus)
        inside = (np.abs(x) <= self.cutoff) & (x != 0.0)
        with np.errstate(divide="ignore"):
            vals = np.where(inside, coeff * np.abs(x) ** (-1.0 - a), 0.0)
        return vals if vals.ndim else float(vals)

    def tail_mass(self, x):
        """nubar((x, cutoff]) for x in (0, cutoff]: c_plus*(x^-alpha - cutoff^-alpha)."""
        a = self.alpha
        return self.c_plus * (x ** (-a) - self.cutoff ** (-a))

    @property
    def q(self):
        """int z^2 nubar(z) dz = alpha*(c_plus+c_minus)*cutoff^(2-alpha)/(2-alpha)."""
        a = self.alpha
        return (
            a * (self.c_plus + self.c_minus) * self.cutoff ** (2.0 - a) / (2.0 - a)
        )

    def jump_rate(self, delta):
        """Total rate of jumps with |z| > delta."""
        self._check_delta(delta)
        a = self.alpha
        return (self.c_plus + self.c_minus) * (delta ** (-a) - self.cutoff ** (-a))

    def drift(self, delta):
        """Mean jump flow above delta: int_{|z|>delta} z nubar(z) dz (closed form)."""
        self._check_delta(delta)
        a = self.alpha
        piece = a * (delta ** (1.0 - a) - self.cutoff ** (1.0 - a)) / (a - 1.0)
        return (self.c_plus - self.c_minus) * piece

    def small_jump_variance(self, delta):
        """int_{|z|<=delta} z^2 nubar(z) dz."""
        self._check_delta(delta)
        a = self.alpha
        return a * (self.c_plus + self.c_minus) * delta ** (2.0 - a) / (2.0 - a)

    def sample_jumps(self, delta, uniforms_sign, uniforms_size):
        """Inverse-transform jump sizes conditioned on |z| > delta.

        Positive side with probability c_plus/(c_plus+c_minus); magnitude CDF
        inverted in closed form on (delta, cutoff].
        """
        self._check_delta(delta)
        a = self.alpha
        lo = self.cutoff ** (-a)
        hi = delta ** (-a)
        mags = (lo + uniforms_size * (hi - lo)) ** (-1.0 / a)
        p_plus = self.c_plus / (self.c_plus + self.c_minus)
        signs = np.where(uniforms_sign < p_plus, 1.0, -1.0)
        return signs * mags

    def limit_stable_law(self):
        """Stable law of the rescaled small jumps (density coefficients alpha*c)."""
        return StableLaw(self.alpha, self.alpha * self.c_plus, self.alpha * self.c_minus)

    def _check_delta(self, delta):
        if not (0.0 < delta <= self.cutoff):
            raise ValueError(
                f"jump threshold must lie in (0, cutoff={self.cutoff}], got {delta}"
            )

    def _self_check(self):
        """Cross-check closed-form q and drift against quadrature at build time."""
        a, cut = self.alpha, self.cutoff
        q_quad = (
            a
            * (self.c_plus + self.c_minus)
            * integrate.quad(lambda z: z ** (1.0 - a), 0.0, cut, epsabs=1e-14)[0]
        )
        if abs(q_quad - self.q) > 1e-10 * max(1.0, self.q):
            raise InternalConsistencyError(
                f"quadratic coefficient mismatch: closed form {self.q}, quadrature {q_quad}"
            )
        delta = cut / 2.0
        m_quad = a * (self.c_plus - self.c_minus) * integrate.quad(
            lambda z: z ** (-a), delta, cut, epsabs=1e-14
        )[0]
        if abs(m_quad - self.drift(delta)) > 1e-10 * max(1.0, abs(m_quad)):
            raise InternalConsistencyError(
                f"martingale drift mismatch: closed form {self.drift(delta)}, "
                f"quadrature {m_quad}"
            )


def build_truncated_stable_density(alpha, c_plus, c_minus, cutoff, y0=1.0):
    """Canonical market model: pure power density truncated at ``cutoff``."""
    return LevyMarketModel(alpha, c_plus, c_minus, cutoff, y0)


# ---------------------------------------------------------------------------
# Integrand kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawStableIntegrand:
    """X is a strictly stable path itself; A and lambda are 1 by convention.

    Used for limit-theorem verification runs with known constant coefficients.
    """

    law: StableLaw


@dataclass(frozen=True)
class BlackScholesDelta:
    """Built-in smooth hedge ratio phi(t, y) = N(d(t, y)) with d as in a
    lognormal delta: d = ln(y/K)/(v*sqrt(T-t)) + v*sqrt(T-t)/2.

    C^{1,2} with phi_y > 0 on t < expiry, which is all the structural
    hypotheses the barrier formulas need.
    """

    strike: float
    vol: float
    expiry: float

    def __post_init__(self):
        if self.strike <= 0 or self.vol <= 0 or self.expiry <= 0:
            raise ValueError("strike, vol, expiry must all be positive")

    def _d(self, t, y):
        rem = self.expiry - np.asarray(t, dtype=float)
        if np.any(rem <= 0):
            raise ValueError("hedge function evaluated at or beyond expiry")
        sq = self.vol * np.sqrt(rem)
        return np.log(np.asarray(y, dtype=float) / self.strike) / sq + sq / 2.0

    def phi(self, t, y):
        return ndtr(self._d(t, y))

    def phi_y(self, t, y):
        rem = self.expiry - np.asarray(t, dtype=float)
        d = self._d(t, y)
        pdf = np.exp(-0.5 * d * d) / math.sqrt(2.0 * math.pi)
        return pdf / (np.asarray(y, dtype=float) * self.vol * np.sqrt(rem))

    def phi_t(self, t, y):
        rem = self.expiry - np.asarray(t, dtype=float)
        d = self._d(t, y)
        pdf = np.exp(-0.5 * d * d) / math.sqrt(2.0 * math.pi)
        dd_dt = np.log(np.asarray(y, dtype=float) / self.strike) / (
            2.0 * self.vol * rem**1.5
        ) - self.vol / (4.0 * np.sqrt(rem))
        return pdf * dd_dt


@dataclass(frozen=True)
class DeltaHedgeIntegrand:
    """X_t = phi(t, Y_t) for a hedge function with positive y-derivative."""

    hedge: BlackScholesDelta

    @property
    def phi(self):
        return self.hedge.phi

    @property
    def phi_y(self):
        return self.hedge.phi_y

    @property
    def phi_t(self):
        return self.hedge.phi_t


@dataclass(frozen=True)
class MertonIntegrand:
    """Constant-proportion portfolio: X_t = pi * V_t / Y_t.

    For pi outside [0, 1] the jump support must be restricted so the wealth
    stays positive; the cutoff check below enforces it for pi > 1 and
    rejects pi < 0 (whose support restriction excludes the canonical
    symmetric truncated density altogether).
    """

    pi: float
    v0: float

    def __post_init__(self):
        if self.v0 <= 0:
            raise ValueError("initial wealth must be positive")
        if self.pi < 0:
            raise ValueError(
                "pi < 0 requires jump support inside (-1, -1/pi), which the "
                "truncated symmetric density cannot satisfy"
            )

    def check_support(self, model: LevyMarketModel):
        if self.pi > 1 and model.cutoff >= 1.0 / self.pi:
            raise ValueError(
                f"pi={self.pi} requires jump support inside (-1/pi, inf): "
                f"cutoff must be < {1.0 / self.pi}"
            )


IntegrandSpec = Union[RawStableIntegrand, DeltaHedgeIntegrand, MertonIntegrand]


def coefficient_processes(model, spec, state):
    """(X_t, A_t, lambda_t) at state = (t, Y_t, V_t); V only used for Merton.

    DeltaHedge: X = phi(t, Y),     lambda = (Y * phi_y)^alpha,  A = Y^2 q.
    Merton:     X = pi V / Y,      lambda = |(pi-1) X|^alpha,   A = Y^2 q.
    RawStable:  X is external; A and lambda are 1 by convention.
    """
    t, y, v = state
    if isinstance(spec, RawStableIntegrand):
        ones = np.ones_like(np.asarray(y, dtype=float))
        return None, ones if ones.ndim else 1.0, ones if ones.ndim else 1.0
    if model is None:
        raise ValueError("a market model is required for this integrand kind")
    alpha = model.alpha
    a_coef = np.asarray(y, dtype=float) ** 2 * model.q
    if isinstance(spec, DeltaHedgeIntegrand):
        if np.any(np.asarray(y) <= 0):
            raise ValueError("Y must be positive")
        phi_y = spec.phi_y(t, y)
        if np.any(phi_y <= 0):
            raise HypothesisViolationError(
                "hedge derivative phi_y must be positive along the path"
            )
        x = spec.phi(t, y)
        lam = (np.asarray(y, dtype=float) * phi_y) ** alpha
        return x, a_coef, lam
    if isinstance(spec, MertonIntegrand):
        x = spec.pi * np.asarray(v, dtype=float) / np.asarray(y, dtype=float)
        lam = np.abs((spec.pi - 1.0) * x) ** alpha
        return x, a_coef, lam
    raise TypeError(f"unknown integrand kind: {type(spec).__name__}")
