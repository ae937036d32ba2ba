"""Strict JSON experiment configuration.

Unknown fields are rejected with the offending field path; every validation
error names the path of the bad value (e.g. "model.alpha").
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .discretize import (
    ConstantPair,
    DeltaHedgePower,
    EngineConfig,
    MertonPower,
    SymmetricPower,
)
from .errors import ConfigError
from .markets import (
    BlackScholesDelta,
    DeltaHedgeIntegrand,
    LevyMarketModel,
    MertonIntegrand,
    RawStableIntegrand,
    build_truncated_stable_density,
)
from .paths import GridSpec
from .stable import StableLaw

__all__ = ["ExperimentConfig", "parse_config", "load_config"]

_KINDS = ("convergence", "rate_comparison", "rescaling", "frontier")


@dataclass
class RateOptions:
    n_dates: tuple = (16, 32, 64, 128, 256)
    increment_fraction: float = 8e-3
    equidistant_steps: int = 1 << 17
    fit_drop: int = 2


@dataclass
class RescalingOptions:
    overshoot_beta: float = 0.5
    dt_fraction: float = 2e-4
    barrier_fraction: float = 0.2  # delta of the exit simulator, unused hook


@dataclass
class ExperimentConfig:
    kind: str
    model: Optional[LevyMarketModel]
    integrand: object
    rule: object
    epsilons: tuple
    betas: tuple
    horizon: float
    n_paths: int
    master_seed: int
    grid: GridSpec
    out_dir: str = "results"
    rate: RateOptions = field(default_factory=RateOptions)
    rescaling: RescalingOptions = field(default_factory=RescalingOptions)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def alpha(self):
        if self.model is not None:
            return self.model.alpha
        return self.integrand.law.alpha

    def engine(self, master_seed=None) -> EngineConfig:
        return EngineConfig(
            model=self.model,
            integrand=self.integrand,
            horizon=self.horizon,
            grid=self.grid,
            master_seed=self.master_seed if master_seed is None else master_seed,
        )


def _require(obj, path, keys, optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - set(keys) - set(optional)
    if unknown:
        raise ConfigError(
            f"{path}.{sorted(unknown)[0]}", "unknown field (strict mode)"
        )
    missing = [k for k in keys if k not in obj]
    if missing:
        raise ConfigError(f"{path}.{missing[0]}", "required field missing")


def _number(obj, path, key, lo=None, hi=None, lo_open=False, hi_open=False):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    v = float(v)
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(f"{path}.{key}", f"must be {'>' if lo_open else '>='} {lo}")
    if hi is not None and (v >= hi if hi_open else v > hi):
        raise ConfigError(f"{path}.{key}", f"must be {'<' if hi_open else '<='} {hi}")
    return v


def _integer(obj, path, key, lo=None):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}.{key}", f"must be >= {lo}")
    return int(v)


def _parse_model(block):
    _require(block, "model", ("type",), optional=(
        "alpha", "sigma", "c_plus", "c_minus", "cutoff", "y0",
    ))
    kind = block["type"]
    if kind == "raw_stable":
        allowed = {"type", "alpha", "sigma", "c_plus", "c_minus"}
        _require(block, "model", ("type", "alpha"), optional=allowed)
        alpha = _number(block, "model", "alpha", lo=1.0, hi=2.0, lo_open=True, hi_open=True)
        if "sigma" in block:
            if "c_plus" in block or "c_minus" in block:
                raise ConfigError("model.sigma", "give either sigma or c_plus/c_minus, not both")
            law = StableLaw.symmetric(alpha, _number(block, "model", "sigma", lo=0.0, lo_open=True))
        elif "c_plus" in block and "c_minus" in block:
            law = StableLaw(
                alpha,
                _number(block, "model", "c_plus", lo=0.0),
                _number(block, "model", "c_minus", lo=0.0),
            )
        else:
            raise ConfigError("model.sigma", "raw_stable needs sigma or both c_plus and c_minus")
        return None, law
    if kind == "truncated_stable":
        _require(block, "model", ("type", "alpha", "c_plus", "c_minus", "cutoff", "y0"))
        try:
            model = build_truncated_stable_density(
                _number(block, "model", "alpha", lo=1.0, hi=2.0, lo_open=True, hi_open=True),
                _number(block, "model", "c_plus", lo=0.0),
                _number(block, "model", "c_minus", lo=0.0),
                _number(block, "model", "cutoff", lo=0.0, hi=1.0, lo_open=True, hi_open=True),
                _number(block, "model", "y0", lo=0.0, lo_open=True),
            )
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from exc
        return model, None
    raise ConfigError("model.type", f"unknown model type {kind!r}")


def _parse_integrand(block, model, law):
    _require(block, "integrand", ("type",), optional=(
        "strike", "vol", "expiry", "pi", "v0",
    ))
    kind = block["type"]
    if kind == "raw_stable":
        _require(block, "integrand", ("type",))
        if law is None:
            raise ConfigError("integrand.type", "raw_stable integrand requires a raw_stable model")
        return RawStableIntegrand(law)
    if law is not None:
        raise ConfigError("integrand.type", "a raw_stable model only supports the raw_stable integrand")
    if kind == "delta_hedge":
        _require(block, "integrand", ("type", "strike", "vol", "expiry"))
        hedge = BlackScholesDelta(
            _number(block, "integrand", "strike", lo=0.0, lo_open=True),
            _number(block, "integrand", "vol", lo=0.0, lo_open=True),
            _number(block, "integrand", "expiry", lo=0.0, lo_open=True),
        )
        return DeltaHedgeIntegrand(hedge)
    if kind == "merton":
        _require(block, "integrand", ("type", "pi", "v0"))
        try:
            spec = MertonIntegrand(
                _number(block, "integrand", "pi"),
                _number(block, "integrand", "v0", lo=0.0, lo_open=True),
            )
            spec.check_support(model)
        except ValueError as exc:
            raise ConfigError("integrand", str(exc)) from exc
        return spec
    raise ConfigError("integrand.type", f"unknown integrand type {kind!r}")


def _parse_rule(block, alpha, integrand):
    _require(block, "rule", ("type",), optional=("lower", "upper", "c", "beta"))
    kind = block["type"]
    if kind == "constant":
        _require(block, "rule", ("type", "lower", "upper"))
        return ConstantPair(
            _number(block, "rule", "lower", lo=0.0, lo_open=True),
            _number(block, "rule", "upper", lo=0.0, lo_open=True),
        )
    _require(block, "rule", ("type", "c", "beta"))
    c = _number(block, "rule", "c", lo=0.0, lo_open=True)
    beta = _number(block, "rule", "beta", lo=0.0, hi=alpha, hi_open=True)
    if kind == "symmetric_power":
        return SymmetricPower(c, beta, alpha)
    if kind == "delta_hedge_power":
        if not isinstance(integrand, DeltaHedgeIntegrand):
            raise ConfigError("rule.type", "delta_hedge_power requires the delta_hedge integrand")
        return DeltaHedgePower(c, beta, alpha)
    if kind == "merton_power":
        if not isinstance(integrand, MertonIntegrand):
            raise ConfigError("rule.type", "merton_power requires the merton integrand")
        return MertonPower(c, beta, alpha, integrand.pi)
    raise ConfigError("rule.type", f"unknown rule type {kind!r}")


def parse_config(data: dict) -> ExperimentConfig:
    top_required = (
        "kind", "model", "integrand", "rule", "epsilons", "betas",
        "horizon", "n_paths", "master_seed", "grid",
    )
    top_optional = ("out_dir", "rate", "rescaling")
    _require(data, "config", top_required, optional=top_optional)

    kind = data["kind"]
    if kind not in _KINDS:
        raise ConfigError("kind", f"must be one of {_KINDS}, got {kind!r}")

    model, law = _parse_model(data["model"])
    integrand = _parse_integrand(data["integrand"], model, law)
    alpha = model.alpha if model is not None else law.alpha
    rule = _parse_rule(data["rule"], alpha, integrand)

    eps = data["epsilons"]
    if not isinstance(eps, list) or len(eps) < 1:
        raise ConfigError("epsilons", "expected a non-empty list")
    eps_vals = []
    for i, e in enumerate(eps):
        if isinstance(e, bool) or not isinstance(e, (int, float)) or e <= 0:
            raise ConfigError(f"epsilons[{i}]", f"must be a positive number, got {e!r}")
        if eps_vals and e >= eps_vals[-1]:
            raise ConfigError(f"epsilons[{i}]", "epsilons must be strictly decreasing")
        eps_vals.append(float(e))

    betas = data["betas"]
    if not isinstance(betas, list):
        raise ConfigError("betas", "expected a list")
    beta_vals = []
    for i, b in enumerate(betas):
        if isinstance(b, bool) or not isinstance(b, (int, float)) or b < 0 or b >= alpha:
            raise ConfigError(f"betas[{i}]", f"must lie in [0, alpha={alpha}), got {b!r}")
        beta_vals.append(float(b))
    beta_vals = sorted(beta_vals)

    horizon = _number(data, "config", "horizon", lo=0.0, lo_open=True)
    n_paths = _integer(data, "config", "n_paths", lo=2)
    master_seed = _integer(data, "config", "master_seed", lo=0)

    gblock = data["grid"]
    _require(gblock, "grid", ("h",), optional=("delta", "include_small_jumps"))
    h = _number(gblock, "grid", "h", lo=0.0, lo_open=True)
    delta = None
    if "delta" in gblock:
        delta = _number(gblock, "grid", "delta", lo=0.0, lo_open=True)
    inc_small = gblock.get("include_small_jumps", True)
    if not isinstance(inc_small, bool):
        raise ConfigError("grid.include_small_jumps", "expected a boolean")
    grid = GridSpec(h=h, delta=delta, include_small_jumps=inc_small)

    out_dir = data.get("out_dir", "results")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir", "expected a non-empty string")

    rate = RateOptions()
    if "rate" in data:
        rblock = data["rate"]
        _require(rblock, "rate", (), optional=(
            "n_dates", "increment_fraction", "equidistant_steps", "fit_drop",
        ))
        if "n_dates" in rblock:
            nd = rblock["n_dates"]
            if (
                not isinstance(nd, list)
                or len(nd) < 2
                or any(isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in nd)
                or any(b <= a for a, b in zip(nd, nd[1:]))
            ):
                raise ConfigError("rate.n_dates", "expected a strictly increasing list of positive integers")
            rate.n_dates = tuple(nd)
        if "increment_fraction" in rblock:
            rate.increment_fraction = _number(rblock, "rate", "increment_fraction", lo=0.0, lo_open=True)
        if "equidistant_steps" in rblock:
            rate.equidistant_steps = _integer(rblock, "rate", "equidistant_steps", lo=max(rate.n_dates))
        if "fit_drop" in rblock:
            rate.fit_drop = _integer(rblock, "rate", "fit_drop", lo=0)

    resc = RescalingOptions()
    if "rescaling" in data:
        sblock = data["rescaling"]
        _require(sblock, "rescaling", (), optional=("overshoot_beta", "dt_fraction"))
        if "overshoot_beta" in sblock:
            resc.overshoot_beta = _number(
                sblock, "rescaling", "overshoot_beta", lo=0.0, hi=alpha, hi_open=True
            )
        if "dt_fraction" in sblock:
            resc.dt_fraction = _number(sblock, "rescaling", "dt_fraction", lo=0.0, lo_open=True)

    if kind == "rate_comparison" and beta_vals != [0.0]:
        raise ConfigError("betas", "rate_comparison requires betas == [0]")
    if kind == "rescaling":
        if model is None:
            raise ConfigError("model.type", "rescaling requires the truncated_stable model")
        if model.c_plus != model.c_minus:
            raise ConfigError(
                "model.c_minus",
                "rescaling validation compares against symmetric closed forms; "
                "c_plus must equal c_minus",
            )

    return ExperimentConfig(
        kind=kind,
        model=model,
        integrand=integrand,
        rule=rule,
        epsilons=tuple(eps_vals),
        betas=tuple(beta_vals),
        horizon=horizon,
        n_paths=n_paths,
        master_seed=master_seed,
        grid=grid,
        out_dir=out_dir,
        rate=rate,
        rescaling=resc,
        raw=data,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
    return parse_config(data)
