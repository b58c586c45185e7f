"""Deviation rate functions of the cascade mass.

The large-deviation rate of the level-n mass is built by the min-plus
recursion

    I^1 = Lambda*,   I^n(a) = min_{1 <= z <= a} [ I^{n-1}(z) + h(a, z) ],

on a grid that is linear on [0, 1] (where every level equals Lambda*) and
geometric on [1, a_max]. The infinite-tree rate is the decreasing limit of
the levels. Moderate, very-large and left rates are closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .conjugate import branch_point, cramer_transform
from .errors import ConfigError, DomainError, NonConvergence
from .wmodel import WeightModel

DEFAULT_TOL = 1e-6
MAX_LEVEL = 64
BREAKPOINT_TOL = 1e-7


@dataclass(frozen=True)
class GridParams:
    a_max: float = 50.0
    lin_step: float = 0.01
    geo_ratio: float = 1.02

    def __post_init__(self):
        if not (self.a_max > 1.0 and math.isfinite(self.a_max)):
            raise ConfigError(f"a_max must be a finite number > 1, got {self.a_max}")
        if not (0.0 < self.lin_step <= 1.0):
            raise ConfigError(f"lin_step must lie in (0, 1], got {self.lin_step}")
        if not (1.0 < self.geo_ratio and math.isfinite(self.geo_ratio)):
            raise ConfigError(f"geo_ratio must be a finite number > 1, got {self.geo_ratio}")

    @property
    def tolerance(self) -> float:
        """Second-order discretisation scale of a grid minimum."""
        return max(self.lin_step, self.geo_ratio - 1.0) ** 2

    def to_dict(self) -> dict:
        return {"a_max": self.a_max, "lin_step": self.lin_step, "geo_ratio": self.geo_ratio}


def build_grid(params: GridParams) -> np.ndarray:
    n_lin = int(math.ceil(1.0 / params.lin_step - 1e-9))
    lin = np.linspace(0.0, 1.0, n_lin + 1)
    n_geo = int(math.floor(math.log(params.a_max) / math.log(params.geo_ratio) + 1e-12))
    geo = params.geo_ratio ** np.arange(1, n_geo + 1)
    geo = geo[geo < params.a_max]
    pts = np.concatenate([lin, geo, [params.a_max]])
    if pts.size < 3 or np.any(np.diff(pts) <= 0):
        raise ConfigError("grid is empty or not strictly increasing")
    return pts


@dataclass
class RateGrid:
    level: float  # positive integer, or math.inf for the infinite tree
    points: np.ndarray
    values: np.ndarray
    model_id: str
    grid_params: GridParams
    meta: dict = field(default_factory=dict)

    def at(self, a: float) -> float:
        """Linear interpolation of the stored values (exact on grid points)."""
        a = float(a)
        pts, vals = self.points, self.values
        if a < pts[0] or a > pts[-1]:
            raise DomainError(f"a={a} outside the grid [{pts[0]}, {pts[-1]}]")
        j = int(np.searchsorted(pts, a, side="right")) - 1
        if j >= len(pts) - 1 or pts[j] == a:
            return float(vals[j])
        lv, rv = vals[j], vals[j + 1]
        if math.isinf(lv) or math.isinf(rv):
            return math.inf
        w = (a - pts[j]) / (pts[j + 1] - pts[j])
        return float(lv + w * (rv - lv))

    def metadata(self) -> dict:
        return {
            "level": "inf" if math.isinf(self.level) else int(self.level),
            "model": self.model_id,
            "grid_params": self.grid_params.to_dict(),
            **self.meta,
        }


class _Ladder:
    """Incrementally computed levels I^1, I^2, ... on the right grid [1, a_max]."""

    def __init__(self, model: WeightModel, params: GridParams, backend=None):
        self.model = model
        self.params = params
        self.kern = kernels.get_backend(backend)
        self.points = build_grid(params)
        self.i1 = int(np.searchsorted(self.points, 1.0))
        self.ag = self.points[self.i1:]
        self.lstar_all = np.array([cramer_transform(model, x).value for x in self.points])
        self.zb = np.array([branch_point(model, a) for a in self.ag])
        self.c = model.c
        k = model.gamma_shape
        if math.isfinite(self.c) and k is None:
            raise ConfigError(f"no transition cost kernel for {model.model_id}")
        self.k = k if k is not None else 1.0
        self.levels = [self.lstar_all[self.i1:].copy()]
        self.argz = [np.ones_like(self.ag)]

    def level(self, n: int) -> np.ndarray:
        while len(self.levels) < n:
            self._advance(0)
        return self.levels[n - 1]

    def _advance(self, frozen: int):
        prev, parg = self.levels[-1], self.argz[-1]
        sl = slice(frozen, None)
        vals, argz = self.kern.minplus_level(
            self.ag, prev, self.ag[sl], self.lstar_all[self.i1:][sl], self.zb[sl],
            self.c, self.k, parg[sl],
        )
        self.levels.append(np.concatenate([prev[:frozen], vals]))
        self.argz.append(np.concatenate([parg[:frozen], argz]))

    def query(self, n: int, aq) -> np.ndarray:
        """I^n at arbitrary points a >= 1 inside the grid."""
        aq = np.atleast_1d(np.asarray(aq, dtype=float))
        lstar = np.array([cramer_transform(self.model, a).value for a in aq])
        if n == 1:
            return lstar
        zb = np.array([branch_point(self.model, a) for a in aq])
        vals, _ = self.kern.minplus_level(
            self.ag, self.level(n - 1), aq, lstar, zb, self.c, self.k, np.full(aq.shape, np.nan)
        )
        return vals

    def grid(self, level, values, meta=None) -> RateGrid:
        full = np.concatenate([self.lstar_all[: self.i1], values])
        return RateGrid(level, self.points.copy(), full, self.model.model_id, self.params, dict(meta or {}))


def _check_level(n):
    if int(n) != n or n < 1:
        raise DomainError(f"level must be a positive integer, got {n}")
    return int(n)


def rate_finite(model: WeightModel, n: int, grid_params: GridParams | None = None,
                backend=None) -> RateGrid:
    """Large-deviation rate of the level-n mass on the configured grid."""
    n = _check_level(n)
    ladder = _Ladder(model, grid_params or GridParams(), backend)
    return ladder.grid(n, ladder.level(n), {"grid_tol": ladder.params.tolerance})


def rate_levels(model: WeightModel, n_max: int, grid_params: GridParams | None = None,
                backend=None) -> list[RateGrid]:
    """The grids of levels 1..n_max, sharing one recursion."""
    n_max = _check_level(n_max)
    ladder = _Ladder(model, grid_params or GridParams(), backend)
    return [ladder.grid(n, ladder.level(n), {"grid_tol": ladder.params.tolerance})
            for n in range(1, n_max + 1)]


def _diff(new, old):
    both_inf = np.isinf(new) & np.isinf(old) & (new == old)
    with np.errstate(invalid="ignore"):
        d = np.abs(new - old)
    return np.where(both_inf, 0.0, d)


def rate_infinite(model: WeightModel, grid_params: GridParams | None = None,
                  tol: float = DEFAULT_TOL, max_level: int = MAX_LEVEL, backend=None) -> RateGrid:
    """Infinite-tree rate as the stabilised limit of the finite levels.

    Levels are iterated until the sup-norm change drops below ``tol``. The
    prefix of the grid on which two consecutive levels coincide exactly is
    frozen: the recursion only looks left, so it can never move again. The
    metadata records how far that exact stabilisation reached; beyond it,
    convergence rests on the sup-norm test alone.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    ladder = _Ladder(model, grid_params or GridParams(), backend)
    frozen = 0
    changes = []
    for n in range(2, max_level + 1):
        ladder._advance(frozen)
        new, old = ladder.levels[-1], ladder.levels[-2]
        d = _diff(new, old)
        moving = np.flatnonzero(d > 0.0)
        frozen = int(moving[0]) if moving.size else len(d)
        sup = float(d.max())
        changes.append(sup)
        if sup < tol:
            stab = float(ladder.ag[frozen - 1]) if frozen > 0 else 1.0
            meta = {
                "tol": tol,
                "terminal_n": n,
                "stabilized_up_to": stab,
                "sup_norm_only_region": None if frozen == len(d) else [float(ladder.ag[frozen]), float(ladder.ag[-1])],
                "sup_changes": changes,
                "grid_tol": ladder.params.tolerance,
            }
            return ladder.grid(math.inf, new, meta)
        # drop history that is no longer needed
        ladder.levels[:-2] = [None] * (len(ladder.levels) - 2)
    bad = np.flatnonzero(d >= tol)
    unstable = (float(ladder.ag[bad[0]]), float(ladder.ag[bad[-1]]))
    raise NonConvergence(
        f"rate levels still moving by {changes[-1]:.3g} >= tol={tol} after n={max_level}",
        unstable=unstable,
    )


@dataclass
class Breakpoints:
    a_n: np.ndarray  # a_n[i] is the breakpoint of level n = i + 1
    half_width: float
    beyond_grid: list
    model_id: str


def breakpoints(model: WeightModel, n_max: int, grid_params: GridParams | None = None,
                tol: float = BREAKPOINT_TOL, backend=None) -> Breakpoints:
    """a_n = inf{a >= 1 : I^{n+1}(a) < I^n(a)} for n = 1 .. n_max - 1.

    The first grid point where the drop exceeds ``tol`` is bracketed against
    its left neighbour and refined by bisection on off-grid evaluations.
    """
    n_max = _check_level(n_max)
    params = grid_params or GridParams()
    if math.isinf(model.c):
        return Breakpoints(np.full(max(n_max - 1, 0), math.inf), 0.0, [], model.model_id)
    ladder = _Ladder(model, params, backend)
    out = []
    beyond = []
    half = 0.0
    for n in range(1, n_max):
        lo_vals, hi_vals = ladder.level(n), ladder.level(n + 1)
        drop = np.flatnonzero(hi_vals < lo_vals - tol)
        if drop.size == 0:
            out.append(math.inf)
            beyond.append(n)
            continue
        i = int(drop[0])
        if i == 0:
            out.append(1.0)
            continue
        lo, hi = float(ladder.ag[i - 1]), float(ladder.ag[i])
        for _ in range(60):
            if hi - lo <= 1e-10 * hi:
                break
            mid = 0.5 * (lo + hi)
            upper, lower = ladder.query(n, [mid])[0], ladder.query(n + 1, [mid])[0]
            if lower < upper - tol:
                hi = mid
            else:
                lo = mid
        out.append(hi)
        half = max(half, 0.5 * (hi - lo))
    return Breakpoints(np.array(out), half, beyond, model.model_id)


# --------------------------------------------------------------------------
# closed-form rates

def moderate_rate(model: WeightModel, a: float) -> float:
    """a^2 / (2 Var W), the rate at speeds r^(1 - 2 alpha)."""
    var = model.variance
    if var <= 0:
        raise DomainError("moderate deviations need Var(W) > 0")
    return a * a / (2.0 * var)


def very_large_rate_finite(model: WeightModel, n: int, a: float) -> float:
    n = _check_level(n)
    if a < 0:
        return math.inf
    if a == 0:
        return 0.0
    return model.c * n * a ** (1.0 / n)


def very_large_rate_infinite(model: WeightModel, alpha: float, a: float) -> float:
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if a < 0:
        return math.inf
    if a == 0:
        return 0.0
    return model.c * alpha * math.e


def left_rate(model: WeightModel, a: float) -> float:
    """Rate of {Z <= a} for a in [0, 1], common to every level."""
    if not (0.0 <= a <= 1.0):
        raise DomainError(f"left rate needs a in [0, 1], got {a}")
    return cramer_transform(model, a).value


def rate_value(model: WeightModel, level, a: float, grid_params: GridParams | None = None,
               tol: float = DEFAULT_TOL, backend=None) -> float:
    """Point value I^level(a); level may be math.inf."""
    a = float(a)
    if a <= 1.0:
        return cramer_transform(model, a).value
    params = grid_params or GridParams(a_max=max(50.0, 2.0 * a))
    if math.isinf(level):
        return rate_infinite(model, params, tol=tol, backend=backend).at(a)
    n = _check_level(level)
    if n == 1:
        return cramer_transform(model, a).value
    ladder = _Ladder(model, params, backend)
    return float(ladder.query(n, [a])[0])
