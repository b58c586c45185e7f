"""Laws of the cascade weight W (nonnegative, mean one).

Four kinds are supported: ``degenerate`` (W = 1), ``exp`` (standard
exponential), ``gamma`` (shape k, rate k) and ``twopoint`` (W = 0 with
probability p, W = 1/(1-p) otherwise). Each has closed-form cumulant and
moment data, so every downstream oracle is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError

KINDS = ("degenerate", "exp", "gamma", "twopoint")
_ALIASES = {
    "degenerate": "degenerate",
    "dirac": "degenerate",
    "exp": "exp",
    "exponential": "exp",
    "gamma": "gamma",
    "twopoint": "twopoint",
    "two-point": "twopoint",
    "two_point": "twopoint",
}


@dataclass(frozen=True)
class WeightModel:
    """Immutable description of the law of W.

    Use the ``degenerate``, ``exponential``, ``gamma`` and ``two_point``
    constructors rather than the raw initialiser.
    """

    kind: str
    shape: float = 1.0
    p_zero: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown weight kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "gamma" and not (self.shape > 0 and math.isfinite(self.shape)):
            raise ConfigError(f"gamma shape must be a positive finite number, got {self.shape}")
        if self.kind == "twopoint" and not (0.0 <= self.p_zero < 1.0):
            raise ConfigError(f"two-point p_zero must lie in [0, 1), got {self.p_zero}")
        if self.kind != "twopoint" and self.p_zero != 0.0:
            raise ConfigError("p_zero only applies to the two-point law")

    @classmethod
    def degenerate(cls) -> WeightModel:
        return cls("degenerate")

    @classmethod
    def exponential(cls) -> WeightModel:
        return cls("exp")

    @classmethod
    def gamma(cls, shape: float) -> WeightModel:
        return cls("gamma", shape=float(shape))

    @classmethod
    def two_point(cls, p_zero: float) -> WeightModel:
        return cls("twopoint", p_zero=float(p_zero))

    @property
    def gamma_shape(self) -> float | None:
        """Shape k when W ~ Gamma(k, rate k); exponential is k = 1."""
        if self.kind == "exp":
            return 1.0
        if self.kind == "gamma":
            return self.shape
        return None

    @property
    def atom(self) -> float:
        """Nonzero support value of the two-point law, v = 1/(1-p)."""
        return 1.0 / (1.0 - self.p_zero)

    @property
    def c(self) -> float:
        """Exponential tail rate: sup of the domain of the cgf."""
        k = self.gamma_shape
        return k if k is not None else math.inf

    @property
    def ess_sup(self) -> float:
        if self.kind == "degenerate":
            return 1.0
        if self.kind == "twopoint":
            return self.atom
        return math.inf

    @property
    def variance(self) -> float:
        k = self.gamma_shape
        if k is not None:
            return 1.0 / k
        if self.kind == "twopoint":
            return self.p_zero / (1.0 - self.p_zero)
        return 0.0

    @property
    def is_point_mass(self) -> bool:
        return self.variance == 0.0

    @property
    def max_slope(self) -> float:
        """Left limit of the cgf derivative at c."""
        if self.gamma_shape is not None:
            return math.inf
        return self.ess_sup

    @property
    def model_id(self) -> str:
        if self.kind == "gamma":
            return f"gamma(shape={self.shape!r})"
        if self.kind == "twopoint":
            return f"twopoint(p_zero={self.p_zero!r})"
        return self.kind

    def to_config(self) -> dict:
        cfg = {"w.kind": self.kind}
        if self.kind == "gamma":
            cfg["w.shape"] = repr(self.shape)
        if self.kind == "twopoint":
            cfg["w.p_zero"] = repr(self.p_zero)
        return cfg


def model_from_config(cfg: Mapping[str, object]) -> WeightModel:
    """Build a model from ``w.kind`` / ``w.shape`` / ``w.p_zero`` keys."""
    raw = cfg.get("w.kind")
    if raw is None:
        raise ConfigError("missing w.kind")
    kind = _ALIASES.get(str(raw).strip().lower())
    if kind is None:
        raise ConfigError(f"unknown weight kind {raw!r}; expected one of {KINDS}")
    try:
        if kind == "gamma":
            if cfg.get("w.shape") is None:
                raise ConfigError("gamma law needs w.shape")
            return WeightModel.gamma(float(cfg["w.shape"]))
        if kind == "twopoint":
            if cfg.get("w.p_zero") is None:
                raise ConfigError("two-point law needs w.p_zero")
            return WeightModel.two_point(float(cfg["w.p_zero"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad weight parameter: {exc}") from None
    return WeightModel(kind)


# --------------------------------------------------------------------------
# random streams

def rng_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for stream ``index`` of master ``seed``.

    Philox keyed through ``SeedSequence(seed, spawn_key=(index,))``: the same
    pair always reproduces the same draws, and distinct indices give
    independent streams.
    """
    seed = int(seed)
    index = int(index)
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if index < 0:
        raise ConfigError(f"stream index must be nonnegative, got {index}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def draw_weights(model: WeightModel, rng: np.random.Generator, size) -> np.ndarray:
    """Vector of i.i.d. draws of W.

    The draw order (one generator call per variate) is the contract the
    compiled sampler reproduces.
    """
    if model.kind == "degenerate":
        return np.ones(size)
    if model.kind == "exp":
        return rng.standard_exponential(size)
    if model.kind == "gamma":
        return rng.standard_gamma(model.shape, size) / model.shape
    u = rng.random(size)
    return np.where(u >= model.p_zero, model.atom, 0.0)


def sample(model: WeightModel, rng: np.random.Generator) -> float:
    """A single draw of W."""
    return float(draw_weights(model, rng, 1)[0])


def cdf(model: WeightModel, w):
    """P(W <= w), vectorised."""
    w = np.asarray(w, dtype=float)
    k = model.gamma_shape
    if k is not None:
        return special.gammainc(k, np.maximum(w, 0.0) * k)
    if model.kind == "degenerate":
        return (w >= 1.0).astype(float)
    return np.where(w < 0, 0.0, np.where(w < model.atom, model.p_zero, 1.0))


# --------------------------------------------------------------------------
# cumulant generating function

def cgf(model: WeightModel, t: float) -> float:
    """log E[exp(tW)], +inf outside the domain."""
    t = float(t)
    if t == 0.0:
        return 0.0
    k = model.gamma_shape
    if k is not None:
        if t >= k:
            return math.inf
        return -k * math.log1p(-t / k)
    if model.kind == "degenerate":
        return t
    p, v = model.p_zero, model.atom
    if p == 0.0:
        return v * t
    return float(np.logaddexp(math.log(p), math.log1p(-p) + v * t))


def cgf_derivative(model: WeightModel, t: float) -> float:
    """Derivative of the cgf; strictly increasing unless W is a point mass."""
    t = float(t)
    k = model.gamma_shape
    if k is not None:
        if t >= k:
            raise DomainError(f"cgf derivative undefined at t={t} >= c={k}")
        return 1.0 / (1.0 - t / k)
    if model.kind == "degenerate":
        return 1.0
    p, v = model.p_zero, model.atom
    if p == 0.0:
        return v
    return v * float(special.expit(v * t + math.log1p(-p) - math.log(p)))


# --------------------------------------------------------------------------
# moments

def log_raw_moment(model: WeightModel, h: float) -> float:
    """log E[W^h] for real h >= 0 (overflow-free)."""
    h = float(h)
    if h < 0:
        raise DomainError(f"moment order must be nonnegative, got {h}")
    if h == 0.0 or model.kind == "degenerate":
        return 0.0
    k = model.gamma_shape
    if k is not None:
        return math.lgamma(k + h) - math.lgamma(k) - h * math.log(k)
    return math.log1p(-model.p_zero) + h * math.log(model.atom)


def raw_moment(model: WeightModel, h: float) -> float:
    """E[W^h] for real h >= 0; +inf on overflow."""
    h = float(h)
    if h < 0:
        raise DomainError(f"moment order must be nonnegative, got {h}")
    if h == 0.0 or model.kind == "degenerate":
        return 1.0
    k = model.gamma_shape
    if k is not None:
        if k + h < 170.0:
            # direct gamma ratio keeps small integer moments exact (E[W^2] = 2.0)
            return math.gamma(k + h) / (math.gamma(k) * k**h)
        lm = log_raw_moment(model, h)
        return math.exp(lm) if lm < 709.0 else math.inf
    try:
        return (1.0 - model.p_zero) * model.atom**h
    except OverflowError:
        return math.inf


def exact_raw_moment(model: WeightModel, h: int) -> Fraction:
    """E[W^h] as an exact rational, for integer h (float parameters are
    taken at their exact binary value)."""
    h = int(h)
    if h < 0:
        raise DomainError(f"moment order must be nonnegative, got {h}")
    if h == 0 or model.kind == "degenerate":
        return Fraction(1)
    if model.kind == "exp":
        return Fraction(math.factorial(h))
    if model.kind == "gamma":
        k = Fraction(model.shape)
        out = Fraction(1)
        for i in range(h):
            out *= (k + i) / k
        return out
    p = Fraction(model.p_zero)
    return (1 - p) * (1 / (1 - p)) ** h


def w_log_w_mean(model: WeightModel) -> float:
    """E[W log W]; r must exceed its exponential for a nondegenerate limit."""
    k = model.gamma_shape
    if k is not None:
        return float(special.digamma(k + 1.0)) - math.log(k)
    if model.kind == "degenerate":
        return 0.0
    return math.log(model.atom)


def check_r(model: WeightModel, r: int) -> int:
    """Validate r as an integer with r > exp(E[W log W])."""
    if int(r) != r or r < 2:
        raise DomainError(f"r must be an integer >= 2, got {r}")
    r = int(r)
    if math.log(r) <= w_log_w_mean(model):
        raise DomainError(
            f"r={r} does not exceed exp(E[W log W])={math.exp(w_log_w_mean(model)):.6g}; "
            "the infinite cascade is degenerate"
        )
    return r
