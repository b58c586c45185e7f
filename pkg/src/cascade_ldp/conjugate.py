"""Legendre-Fenchel machinery for the weight law.

``cramer_transform`` is the convex conjugate of the cgf, ``conjugate_point``
inverts the cgf derivative, and ``h_cost`` is the one-level transition cost
used by the rate-function recursion, evaluated through its closed piecewise
form.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError
from .wmodel import WeightModel, cgf, cgf_derivative

# bracket search limits for the conjugate root
_MAX_DOUBLINGS = 1100
_EDGE_STEPS = 52


@dataclass(frozen=True)
class ConjugateResult:
    value: float
    argmax_t: float


def _upper_bracket(model: WeightModel, x: float):
    """Smallest probe t > 0 with cgf'(t) > x, or None if the slope never
    exceeds x inside the domain."""
    c = model.c
    if math.isfinite(c):
        for j in range(1, _EDGE_STEPS + 1):
            t = c * (1.0 - 2.0**-j)
            if cgf_derivative(model, t) > x:
                return t
        return None
    t = 1.0
    for _ in range(_MAX_DOUBLINGS):
        if cgf_derivative(model, t) > x:
            return t
        t *= 2.0
    return None


def _lower_bracket(model: WeightModel, x: float) -> float:
    t = -1.0
    for _ in range(_MAX_DOUBLINGS):
        if cgf_derivative(model, t) < x:
            return t
        t *= 2.0
    return t


def cramer_transform(model: WeightModel, x: float) -> ConjugateResult:
    """sup_t [t x - cgf(t)] together with its maximiser.

    The maximiser solves cgf'(t) = x and is found by bracketed root finding.
    Supremum values approached only as t -> +-inf (atoms at 0 or at the
    essential supremum, point masses) are returned in closed form.
    """
    x = float(x)
    if x < 0.0 or math.isnan(x):
        return ConjugateResult(math.inf, -math.inf)
    if model.is_point_mass:
        if x == 1.0:
            return ConjugateResult(0.0, 0.0)
        return ConjugateResult(math.inf, math.inf if x > 1.0 else -math.inf)
    if x == 1.0:
        return ConjugateResult(0.0, 0.0)
    if x == 0.0:
        p = model.p_zero
        return ConjugateResult(-math.log(p) if p > 0 else math.inf, -math.inf)
    ess = model.ess_sup
    if x > ess:
        return ConjugateResult(math.inf, math.inf)
    if x == ess:
        # only the two-point law has an atom at its essential supremum
        return ConjugateResult(-math.log1p(-model.p_zero), math.inf)

    def slope_gap(t):
        return cgf_derivative(model, t) - x

    if x > 1.0:
        hi = _upper_bracket(model, x)
        if hi is None:
            return _boundary_supremum(model, x)
        lo = 0.0
        if hi > 1.0 and math.isinf(model.c):
            lo = hi / 2.0
        t = optimize.brentq(slope_gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    else:
        lo = _lower_bracket(model, x)
        hi = 0.0 if lo >= -1.0 else lo / 2.0
        t = optimize.brentq(slope_gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    value = t * x - cgf(model, t)
    return ConjugateResult(max(value, 0.0), t)


def _boundary_supremum(model: WeightModel, x: float) -> ConjugateResult:
    """The cgf slope stays below x up to c: the concave objective increases
    all the way to the domain edge."""
    c = model.c
    lam_c = cgf(model, c)
    if math.isfinite(lam_c):
        return ConjugateResult(c * x - lam_c, c)
    res = optimize.minimize_scalar(
        lambda t: -(t * x - cgf(model, t)),
        bounds=(0.0, c * (1.0 - 2.0**-_EDGE_STEPS)),
        method="bounded",
        options={"xatol": 1e-14},
    )
    return ConjugateResult(-res.fun, res.x)


def cramer_values(model: WeightModel, xs) -> np.ndarray:
    """Array of conjugate values over ``xs``."""
    return np.array([cramer_transform(model, x).value for x in np.asarray(xs, float).ravel()])


def conjugate_point(model: WeightModel, a: float) -> float:
    """inf{s >= 0 : cgf'(s) = a}; +inf when a is at or past cgf'(c-)."""
    a = float(a)
    if not a >= 1.0:
        raise DomainError(f"conjugate point needs a >= 1, got {a}")
    if a == 1.0:
        return 0.0
    if model.is_point_mass or a >= model.max_slope:
        return math.inf
    hi = _upper_bracket(model, a)
    if hi is None:
        return math.inf
    return optimize.bisect(lambda s: cgf_derivative(model, s) - a, 0.0, hi, xtol=1e-12)


def branch_point(model: WeightModel, a: float) -> float:
    """c / a*: h_cost switches to its second branch past this z."""
    c = model.c
    if math.isinf(c):
        return math.inf
    s = conjugate_point(model, a)
    if s == 0.0:
        return math.inf
    return c / s


def h_cost(model: WeightModel, a: float, z: float) -> float:
    """Cost of reaching level a through a child of mass z, for 1 <= z <= a."""
    a = float(a)
    z = float(z)
    if not (1.0 <= z <= a):
        raise DomainError(f"h_cost needs 1 <= z <= a, got a={a}, z={z}")
    zb = branch_point(model, a)
    if z <= zb:
        return cramer_transform(model, a).value
    c = model.c
    # the unconstrained inner maximiser s = cgf'(c/z) must land in [1, a]
    s_opt = cgf_derivative(model, c / z)
    if not (1.0 - 1e-9 <= s_opt <= a * (1.0 + 1e-9)):
        warnings.warn(
            f"h_cost: inner maximiser s={s_opt:.6g} outside [1, {a:.6g}] at z={z:.6g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return c * a / z - cgf(model, c / z)


def a_w(model: WeightModel) -> float:
    """inf{a >= 1 : a * a* >= c}; past it h(a, a) is bounded below by
    the conjugate at this point."""
    c = model.c
    if math.isinf(c):
        return math.inf

    def gap(a):
        return a * conjugate_point(model, a) - c

    hi = 2.0
    while gap(hi) < 0.0:
        hi *= 2.0
    return optimize.bisect(gap, 1.0, hi, xtol=1e-12)


def rho(model: WeightModel) -> float:
    """Conjugate value at a_w: a uniform positive floor for h(a, z), a >= a_w."""
    aw = a_w(model)
    if math.isinf(aw):
        return math.inf
    return cramer_transform(model, aw).value
