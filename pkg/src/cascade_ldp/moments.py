"""Moments of the cascade mass.

Integer moments of the limit mass satisfy a closed recursion obtained by
expanding the h-th power of the fixed-point equation Z = (1/r) sum W_i Z_i
and moving the diagonal terms (one child carrying all h powers) to the left
side. Grouping the compositions of h by the multiset of their parts gives a
sum over integer partitions with at most r parts:

    E[Z^h] = h! r! / (r^h (1 - E[W^h] / r^(h-1)))
             * sum_{parts <= h-1} 1/m_0! prod_k (E[W^k] E[Z^k] / k!)^{m_k} / m_k!

where m_k counts parts of size k and m_0 = r - sum m_k counts children that
receive no power. The finite-depth version has no denominator and allows a
single part of size h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, MomentDivergence
from .wmodel import WeightModel, check_r, exact_raw_moment, log_raw_moment, raw_moment

H_MAX_DEFAULT = 40
CHI_SCAN_LIMIT = 1e4
MODES = ("float", "exact")


def partitions(h: int, max_part: int, max_count: int) -> Iterator[dict[int, int]]:
    """Partitions of h into parts <= max_part with at most max_count parts.

    Yields multiplicity maps {part size: count}, largest part first.
    """

    def descend(rest, top, room, acc):
        if rest == 0:
            yield dict(acc)
            return
        if room == 0 or top == 0:
            return
        # parts of size `top` used m times, then only smaller parts
        for m in range(min(rest // top, room), -1, -1):
            if m:
                acc[top] = m
            yield from descend(rest - m * top, top - 1, room - m, acc)
            acc.pop(top, None)

    if h < 0 or max_count < 0:
        return
    yield from descend(h, min(max_part, h), max_count, {})


@dataclass
class MomentTable:
    r: int
    level: float  # positive integer or math.inf
    h_max: int
    values: list  # Fraction in exact mode, float otherwise; index = h
    mode: str
    model_id: str
    meta: dict = field(default_factory=dict)

    @property
    def exact(self) -> list[bool]:
        return [self.mode == "exact"] * len(self.values)

    def as_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def __getitem__(self, h):
        return self.values[h]

    def metadata(self) -> dict:
        return {
            "r": self.r,
            "level": "inf" if math.isinf(self.level) else int(self.level),
            "h_max": self.h_max,
            "mode": self.mode,
            "model": self.model_id,
            **self.meta,
        }


# --------------------------------------------------------------------------
# threshold

def chi(model: WeightModel, r: int) -> float:
    """sup{h >= 1 : E[W^h] < r^(h-1)}, the moment threshold of the limit mass."""
    r = check_r(model, r)
    logr = math.log(r)

    def g(h):
        return log_raw_moment(model, h) - (h - 1.0) * logr

    if model.ess_sup < r:
        # g is convex with g(1) = 0, g'(1) < 0 and g -> -inf: never crosses back
        return math.inf
    lo, hi = 1.0, 2.0
    while g(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > CHI_SCAN_LIMIT and math.isfinite(model.ess_sup):
            return math.inf
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check_finite_moment(model: WeightModel, r: int, h: int):
    """Raise MomentDivergence unless E[W^h] < r^(h-1), decided exactly."""
    if h >= 2 and exact_raw_moment(model, h) >= Fraction(r) ** (h - 1):
        raise MomentDivergence(
            f"E[Z^{h}] is infinite for r={r}: E[W^{h}] >= r^{h - 1} (h exceeds the moment threshold)"
        )


# --------------------------------------------------------------------------
# recursions

def _check_mode(mode):
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")


def _level_sum_exact(h, r, w_mom, z_mom, max_part):
    total = Fraction(0)
    fact = [math.factorial(i) for i in range(h + 1)]
    for part in partitions(h, max_part, r):
        term = Fraction(1, math.factorial(r - sum(part.values())))
        for k, m in part.items():
            term *= (w_mom[k] * z_mom[k] / fact[k]) ** m / math.factorial(m)
        total += term
    return Fraction(math.factorial(h) * math.factorial(r), r**h) * total


def _level_sum_log(h, r, logw, logz, max_part):
    logs = []
    for part in partitions(h, max_part, r):
        t = -math.lgamma(r - sum(part.values()) + 1)
        for k, m in part.items():
            t += m * (logw[k] + logz[k] - math.lgamma(k + 1)) - math.lgamma(m + 1)
        logs.append(t)
    return math.lgamma(h + 1) + math.lgamma(r + 1) - h * math.log(r) + logsumexp(logs)


def cascade_moments(model: WeightModel, r: int, h_max: int, mode: str = "float") -> MomentTable:
    """E[Z^h] of the infinite-tree mass for h = 0..h_max."""
    _check_mode(mode)
    r = check_r(model, r)
    if int(h_max) != h_max or h_max < 1:
        raise DomainError(f"h_max must be a positive integer, got {h_max}")
    h_max = int(h_max)
    for h in range(2, h_max + 1):
        _check_finite_moment(model, r, h)

    if mode == "exact":
        w = [exact_raw_moment(model, k) for k in range(h_max + 1)]
        z = [Fraction(1), Fraction(1)]
        for h in range(2, h_max + 1):
            ratio = w[h] / Fraction(r) ** (h - 1)
            z.append(_level_sum_exact(h, r, w, z, h - 1) / (1 - ratio))
        return MomentTable(r, math.inf, h_max, z[: h_max + 1], mode, model.model_id)

    logw = [log_raw_moment(model, k) for k in range(h_max + 1)]
    logz = [0.0, 0.0]
    for h in range(2, h_max + 1):
        ratio = math.exp(logw[h] - (h - 1) * math.log(r))
        logz.append(_level_sum_log(h, r, logw, logz, h - 1) - math.log1p(-ratio))
    vals = [math.exp(v) for v in logz[: h_max + 1]]
    return MomentTable(r, math.inf, h_max, vals, mode, model.model_id, {"log_values": logz[: h_max + 1]})


def finite_tree_moments(model: WeightModel, r: int, n: int, h_max: int, mode: str = "float") -> MomentTable:
    """E[(Z^n)^h] of the depth-n mass for h = 0..h_max."""
    _check_mode(mode)
    if int(r) != r or r < 2:
        raise DomainError(f"r must be an integer >= 2, got {r}")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if int(h_max) != h_max or h_max < 1:
        raise DomainError(f"h_max must be a positive integer, got {h_max}")
    r, n, h_max = int(r), int(n), int(h_max)

    if mode == "exact":
        w = [exact_raw_moment(model, k) for k in range(h_max + 1)]
        z = [Fraction(1)] * (h_max + 1)
        for _ in range(n):
            z = [Fraction(1), Fraction(1)] + [_level_sum_exact(h, r, w, z, h) for h in range(2, h_max + 1)]
        return MomentTable(r, n, h_max, z[: h_max + 1], mode, model.model_id)

    logw = [log_raw_moment(model, k) for k in range(h_max + 1)]
    logz = [0.0] * (h_max + 1)
    for _ in range(n):
        logz = [0.0, 0.0] + [_level_sum_log(h, r, logw, logz, h) for h in range(2, h_max + 1)]
    vals = [math.exp(v) for v in logz[: h_max + 1]]
    return MomentTable(r, n, h_max, vals, mode, model.model_id, {"log_values": logz[: h_max + 1]})


# --------------------------------------------------------------------------
# bounds and growth

def moment_upper_bound(model: WeightModel, r: int, h: int, delta: float) -> float:
    """exp{h^2 / (2(r-h)) * (Var W + delta + C/h)} with C = 2 E[W^2] + 13/12."""
    if h >= r:
        raise DomainError(f"bound needs h < r, got h={h}, r={r}")
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if h <= 0:
        raise DomainError(f"h must be positive, got {h}")
    big_c = 2.0 * raw_moment(model, 2) + 13.0 / 12.0
    return math.exp(h * h / (2.0 * (r - h)) * (model.variance + delta + big_c / h))


def kappa_estimate(model: WeightModel, eta: float, r_list: Sequence[int]) -> np.ndarray:
    """Rows (r, (1/r) log E[Z^floor(eta r)]); finite-r values, no extrapolation."""
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    if math.isfinite(model.c) and eta >= model.c * math.e:
        raise DomainError(f"eta must lie below c*e = {model.c * math.e:.6g}")
    rows = []
    for r in r_list:
        h = int(math.floor(eta * r))
        if h <= 1:
            rows.append((r, 0.0))
            continue
        tab = cascade_moments(model, r, h)
        rows.append((r, tab.meta["log_values"][h] / r))
    return np.array(rows, dtype=float)
