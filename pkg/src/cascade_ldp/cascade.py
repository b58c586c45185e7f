"""Sampling the cascade mass and its zero-mass probabilities.

Finite trees are sampled exactly by a streaming depth-first walk (see
``kernels``); the infinite-tree mass is approximated by population dynamics
on the fixed-point equation Z = (1/r) sum_i W_i Z_i.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError, NonConvergence, ResourceError
from .wmodel import WeightModel, check_r, draw_weights, rng_stream

BLOCK = 4096
NODE_GUARD = 2**26
POOL_N = 100_000
ITERS_T = 30


@dataclass
class CascadeSampleBatch:
    r: int
    level: float  # positive integer, or math.inf for a population pool
    samples: np.ndarray
    seed: int
    gen_params: dict
    model_id: str
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    def moment(self, h: int) -> tuple[float, float]:
        """Empirical E[Z^h] and its standard error."""
        x = self.samples ** h
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))

    def metadata(self) -> dict:
        return {
            "r": self.r,
            "level": "inf" if math.isinf(self.level) else int(self.level),
            "seed": self.seed,
            "model": self.model_id,
            "count": len(self.samples),
            "gen_params": self.gen_params,
            "stats": self.stats,
        }


def _summary(x: np.ndarray) -> dict:
    mean = float(x.mean())
    sd = float(x.std(ddof=1)) if len(x) > 1 else 0.0
    se = sd / math.sqrt(len(x))
    return {
        "mean": mean,
        "sd": sd,
        "second_moment": float(np.mean(x * x)),
        "min": float(x.min()),
        "max": float(x.max()),
        # flagged, not fatal: E[Z] = 1 should hold within Monte Carlo error
        "mean_flag": bool(abs(mean - 1.0) > 5.0 * se) if se > 0 else mean != 1.0,
    }


def _positive_int(name, v, low=1):
    if int(v) != v or v < low:
        raise ConfigError(f"{name} must be an integer >= {low}, got {v}")
    return int(v)


def _kernel_params(model: WeightModel):
    code = kernels.KIND_CODES[model.kind]
    param = {"gamma": model.shape, "twopoint": model.p_zero}.get(model.kind, 0.0)
    return code, float(param)


def sample_finite(model: WeightModel, r: int, n: int, count: int, seed: int,
                  threads: int = 1, backend=None) -> CascadeSampleBatch:
    """``count`` exact draws of the depth-n mass.

    Samples are grouped in blocks of ``BLOCK``; block b uses RNG stream
    (seed, b), so the batch is identical for any thread count.
    """
    r = _positive_int("r", r, 2)
    n = _positive_int("n", n)
    count = _positive_int("count", count)
    threads = _positive_int("threads", threads)
    if r**n > NODE_GUARD:
        raise ResourceError(f"r^n = {r}^{n} exceeds the per-sample guard 2^26")
    kern = kernels.get_backend(backend)
    code, param = _kernel_params(model)
    starts = range(0, count, BLOCK)

    def block(b):
        s = starts[b]
        return kern.sample_finite_block(code, param, r, n, min(BLOCK, count - s), rng_stream(seed, b))

    if threads == 1 or len(starts) == 1:
        parts = [block(b) for b in range(len(starts))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(block, range(len(starts))))
    x = np.concatenate(parts)
    return CascadeSampleBatch(r, n, x, int(seed), {"n": n, "block": BLOCK}, model.model_id, _summary(x))


def sample_infinite(model: WeightModel, r: int, pool_n: int = POOL_N, iters_t: int = ITERS_T,
                    seed: int = 0, renormalize: bool = True) -> CascadeSampleBatch:
    """Population-dynamics approximation of the limit mass.

    Each generation draws, for every slot, r fresh weights and r parents
    uniformly (with replacement) from the previous pool.

    The fixed-point equation is invariant under Z -> cZ, so resampling noise
    random-walks the pool along that neutral direction and, after T
    generations, inflates the error of every pool moment well beyond its
    i.i.d. standard error. With ``renormalize`` (the default) each generation
    is rescaled to mean exactly 1, which pins the solution with E[Z] = 1.
    The pre-rescaling generation means are kept as the drift diagnostic
    (``pool_mean_drift``), together with their running product, i.e. the
    mean the pool would have drifted to without rescaling.
    """
    r = check_r(model, r)
    pool_n = _positive_int("pool_n", pool_n, 2)
    iters_t = _positive_int("iters_t", iters_t)
    rng = rng_stream(seed, 0)
    pool = np.ones(pool_n)
    drift = []
    scale = 1.0
    for _ in range(iters_t):
        w = draw_weights(model, rng, (pool_n, r))
        parent = rng.integers(0, pool_n, size=(pool_n, r))
        acc = np.zeros(pool_n)
        for i in range(r):
            acc += w[:, i] * pool[parent[:, i]]
        pool = acc / r
        m = float(pool.mean())
        drift.append(m)
        if renormalize and m > 0:
            pool /= m
            scale *= m
    stats = _summary(pool)
    stats["pool_mean_drift"] = drift
    stats["cumulative_drift"] = scale if renormalize else drift[-1]
    params = {"pool_n": pool_n, "iters_t": iters_t, "renormalize": bool(renormalize)}
    return CascadeSampleBatch(r, math.inf, pool, int(seed), params, model.model_id, stats)


def zero_mass_finite(model: WeightModel, r: int, n: int) -> float:
    """P(Z^n = 0) from q^1 = p^r, q^n = (p + (1 - p) q^(n-1))^r."""
    r = _positive_int("r", r, 2)
    n = _positive_int("n", n)
    p = model.p_zero
    q = p**r
    for _ in range(n - 1):
        q = (p + (1.0 - p) * q) ** r
    return q


def zero_mass_infinite(model: WeightModel, r: int, tol: float = 0.0, max_iter: int = 1_000_000) -> float:
    """Smallest fixed point of x -> (p + (1 - p) x)^r, by monotone iteration from 0."""
    r = check_r(model, r)
    p = model.p_zero
    x = 0.0
    for _ in range(max_iter):
        nxt = (p + (1.0 - p) * x) ** r
        if nxt - x <= tol:
            return nxt
        x = nxt
    raise NonConvergence(f"zero-mass iteration did not settle within {max_iter} steps")
