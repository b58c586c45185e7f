"""Pure numpy implementation of the hot kernels.

Mirrors ``_ckernels.pyx`` operation for operation; see ``kernels.py`` for
the selection logic and the shared contracts.
"""
import math

import numpy as np

GOLDEN_ITERS = 48
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_CHUNK = 1 << 22

KIND_CODES = {"degenerate": 0, "exp": 1, "gamma": 2, "twopoint": 3}


def _cost(a, z, lstar, zb, c, k):
    """Transition cost h(a, z), broadcasting."""
    if math.isinf(c):
        return np.broadcast_to(lstar, np.broadcast(a, z).shape).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        second = c * a / z + k * np.log1p(-c / (k * z))
    return np.where(z <= zb, lstar, second)


def _interp(ag, prev, z):
    m = ag.shape[0]
    j = np.clip(np.searchsorted(ag, z, side="right") - 1, 0, m - 1)
    jn = np.minimum(j + 1, m - 1)
    lv = prev[j]
    rv = prev[jn]
    span = ag[jn] - ag[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(span > 0, (z - ag[j]) / np.where(span > 0, span, 1.0), 0.0)
        out = lv + w * (rv - lv)
    infinite = np.isinf(lv) | np.isinf(rv)
    out = np.where(infinite, np.inf, out)
    return np.where(w == 0.0, lv, out)


def minplus_level(ag, prev, aq, lstar_q, zb_q, c, k, prev_arg):
    """One level of the min-plus recursion, evaluated at every query.

    Returns ``(values, argz)``.
    """
    ag = np.ascontiguousarray(ag, dtype=float)
    prev = np.ascontiguousarray(prev, dtype=float)
    aq = np.ascontiguousarray(aq, dtype=float)
    lstar_q = np.ascontiguousarray(lstar_q, dtype=float)
    zb_q = np.ascontiguousarray(zb_q, dtype=float)
    prev_arg = np.ascontiguousarray(prev_arg, dtype=float)
    m = ag.shape[0]
    q = aq.shape[0]
    best = np.empty(q)
    bj = np.empty(q, dtype=np.int64)
    rows = max(1, _CHUNK // max(m, 1))
    for s in range(0, q, rows):
        sl = slice(s, min(q, s + rows))
        a = aq[sl, None]
        cost = _cost(a, ag[None, :], lstar_q[sl, None], zb_q[sl, None], c, k)
        tot = prev[None, :] + cost
        tot = np.where(ag[None, :] <= a, tot, np.inf)
        j = np.argmin(tot, axis=1)
        bj[sl] = j
        best[sl] = tot[np.arange(j.shape[0]), j]
    bz = ag[bj].copy()

    jcount = np.searchsorted(ag, aq, side="right")

    def f(z):
        return _interp(ag, prev, z) + _cost(aq, z, lstar_q, zb_q, c, k)

    # off-grid right endpoint z = a
    has_end = (ag[jcount - 1] < aq) & (jcount < m)
    if has_end.any():
        v_end = f(aq)
        upd = has_end & (v_end < best)
        best = np.where(upd, v_end, best)
        bj = np.where(upd, jcount, bj)
        bz = np.where(upd, aq, bz)

    at_end = bj == jcount
    lo = np.where(at_end, ag[np.maximum(jcount - 1, 0)], ag[np.maximum(bj - 1, 0)])
    hi_grid = ag[np.minimum(bj + 1, m - 1)]
    hi = np.where(at_end | (bj + 1 >= m), aq, np.minimum(hi_grid, aq))
    active = (hi > lo) & np.isfinite(best)
    if active.any():
        lo = np.where(active, lo, 1.0)
        hi = np.where(active, hi, 1.0)
        x1 = hi - _INVPHI * (hi - lo)
        x2 = lo + _INVPHI * (hi - lo)
        f1 = f(x1)
        f2 = f(x2)
        for _ in range(GOLDEN_ITERS):
            left = f1 <= f2
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
            nx1 = np.where(left, hi - _INVPHI * (hi - lo), x2)
            nx2 = np.where(left, x1, lo + _INVPHI * (hi - lo))
            probe = np.where(left, nx1, nx2)
            fp = f(probe)
            f2, f1 = np.where(left, f1, fp), np.where(left, fp, f2)
            x1, x2 = nx1, nx2
        zg = 0.5 * (lo + hi)
        vg = f(zg)
        upd = active & (vg < best)
        best = np.where(upd, vg, best)
        bz = np.where(upd, zg, bz)

    usable = np.isfinite(prev_arg) & (prev_arg >= 1.0) & (prev_arg <= aq)
    if usable.any():
        za = np.where(usable, prev_arg, 1.0)
        va = f(za)
        upd = usable & (va < best)
        best = np.where(upd, va, best)
        bz = np.where(upd, za, bz)
    return best, bz


# --------------------------------------------------------------------------
# finite-tree sampler

def _preorder_positions(r, n):
    """Per level, positions of the node weights inside one sample's
    pre-order draw sequence (lexicographic node order within a level)."""
    sub = [0] * (n + 1)  # weights strictly below a node at depth d
    for d in range(n - 1, -1, -1):
        sub[d] = r + r * sub[d + 1]
    bases = np.zeros(1, dtype=np.int64)
    offs = np.arange(r, dtype=np.int64)
    levels = []
    for d in range(n):
        levels.append((bases[:, None] + offs[None, :]).ravel())
        bases = (bases[:, None] + r + offs[None, :] * sub[d + 1]).ravel()
    return levels, sub[0]


def _draw(kind, param, rng, size):
    if kind == 1:
        return rng.standard_exponential(size)
    if kind == 2:
        return rng.standard_gamma(param, size) / param
    u = rng.random(size)
    return np.where(u >= param, 1.0 / (1.0 - param), 0.0)


def sample_finite_block(kind, param, r, n, count, rng):
    """``count`` draws of the level-n cascade mass.

    Weights are consumed in depth-first pre-order: a node draws its r child
    weights, then each child subtree is visited in turn. Children are summed
    left to right and divided by r, exactly as the compiled kernel does.
    """
    out = np.empty(count)
    if kind == 0:
        out.fill(1.0)
        return out
    levels, total = _preorder_positions(r, n)
    batch = max(1, _CHUNK // total)
    for s in range(0, count, batch):
        b = min(batch, count - s)
        w = _draw(kind, param, rng, b * total).reshape(b, total)
        z = None
        for d in range(n - 1, -1, -1):
            wl = w[:, levels[d]].reshape(b, -1, r)
            acc = np.zeros(wl.shape[:2])
            if z is None:
                for i in range(r):
                    acc = acc + wl[:, :, i]
            else:
                zl = z.reshape(b, -1, r)
                for i in range(r):
                    acc = acc + wl[:, :, i] * zl[:, :, i]
            z = acc / r
        out[s:s + b] = z[:, 0]
    return out
