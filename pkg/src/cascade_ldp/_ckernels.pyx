# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; semantics are defined by ``_pykernels``."""
import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport INFINITY, isinf, isfinite, log1p, sqrt
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential,
    random_standard_gamma,
)

DEF GOLDEN_ITERS = 48


cdef inline double _cost(double a, double z, double lstar, double zb,
                         double c, double k) noexcept nogil:
    if isinf(c) or z <= zb:
        return lstar
    return c * a / z + k * log1p(-c / (k * z))


cdef inline double _interp(const double[::1] ag, const double[::1] prev,
                           Py_ssize_t m, double z) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = m, mid
    # j = last index with ag[j] <= z
    while lo < hi:
        mid = (lo + hi) // 2
        if ag[mid] <= z:
            lo = mid + 1
        else:
            hi = mid
    cdef Py_ssize_t j = lo - 1
    if j < 0:
        j = 0
    if j >= m - 1:
        return prev[m - 1]
    cdef double span = ag[j + 1] - ag[j]
    cdef double w = (z - ag[j]) / span if span > 0 else 0.0
    cdef double lv = prev[j], rv = prev[j + 1]
    if w == 0.0:
        return lv
    if isinf(lv) or isinf(rv):
        return INFINITY
    return lv + w * (rv - lv)


cdef inline double _f(const double[::1] ag, const double[::1] prev, Py_ssize_t m,
                      double a, double z, double lstar, double zb,
                      double c, double k) noexcept nogil:
    return _interp(ag, prev, m, z) + _cost(a, z, lstar, zb, c, k)


def minplus_level(ag_in, prev_in, aq_in, lstar_in, zb_in, double c, double k, prev_arg_in):
    cdef const double[::1] ag = np.ascontiguousarray(ag_in, dtype=np.float64)
    cdef const double[::1] prev = np.ascontiguousarray(prev_in, dtype=np.float64)
    cdef const double[::1] aq = np.ascontiguousarray(aq_in, dtype=np.float64)
    cdef const double[::1] lstar = np.ascontiguousarray(lstar_in, dtype=np.float64)
    cdef const double[::1] zbq = np.ascontiguousarray(zb_in, dtype=np.float64)
    cdef const double[::1] parg = np.ascontiguousarray(prev_arg_in, dtype=np.float64)
    cdef Py_ssize_t m = ag.shape[0], q = aq.shape[0]
    best_arr = np.empty(q)
    bz_arr = np.empty(q)
    cdef double[::1] best_out = best_arr
    cdef double[::1] bz_out = bz_arr
    cdef Py_ssize_t i, j, jc, bj
    cdef double a, L, zb, best, bz, v, lo, hi, x1, x2, f1, f2, zg
    cdef double invphi = (sqrt(5.0) - 1.0) / 2.0
    cdef int it
    with nogil:
        for i in range(q):
            a = aq[i]
            L = lstar[i]
            zb = zbq[i]
            best = INFINITY
            bj = 0
            bz = ag[0]
            jc = 0
            while jc < m and ag[jc] <= a:
                jc += 1
            for j in range(jc):
                v = prev[j] + _cost(a, ag[j], L, zb, c, k)
                if v < best:
                    best = v
                    bj = j
                    bz = ag[j]
            if jc < m and ag[jc - 1] < a:
                v = _f(ag, prev, m, a, a, L, zb, c, k)
                if v < best:
                    best = v
                    bj = jc
                    bz = a
            if bj == jc:
                lo = ag[jc - 1]
                hi = a
            else:
                lo = ag[bj - 1] if bj >= 1 else ag[0]
                if bj + 1 >= m:
                    hi = a
                else:
                    hi = ag[bj + 1] if ag[bj + 1] < a else a
            if hi > lo and isfinite(best):
                x1 = hi - invphi * (hi - lo)
                x2 = lo + invphi * (hi - lo)
                f1 = _f(ag, prev, m, a, x1, L, zb, c, k)
                f2 = _f(ag, prev, m, a, x2, L, zb, c, k)
                for it in range(GOLDEN_ITERS):
                    if f1 <= f2:
                        hi = x2
                        x2 = x1
                        f2 = f1
                        x1 = hi - invphi * (hi - lo)
                        f1 = _f(ag, prev, m, a, x1, L, zb, c, k)
                    else:
                        lo = x1
                        x1 = x2
                        f1 = f2
                        x2 = lo + invphi * (hi - lo)
                        f2 = _f(ag, prev, m, a, x2, L, zb, c, k)
                zg = 0.5 * (lo + hi)
                v = _f(ag, prev, m, a, zg, L, zb, c, k)
                if v < best:
                    best = v
                    bz = zg
            if isfinite(parg[i]) and parg[i] >= 1.0 and parg[i] <= a:
                v = _f(ag, prev, m, a, parg[i], L, zb, c, k)
                if v < best:
                    best = v
                    bz = parg[i]
            best_out[i] = best
            bz_out[i] = bz
    return best_arr, bz_arr


# --------------------------------------------------------------------------
# finite-tree sampler

cdef inline double _weight(bitgen_t *bg, int kind, double param) noexcept nogil:
    if kind == 1:
        return random_standard_exponential(bg)
    if kind == 2:
        return random_standard_gamma(bg, param) / param
    if bg.next_double(bg.state) >= param:
        return 1.0 / (1.0 - param)
    return 0.0


cdef double _node(bitgen_t *bg, int kind, double param, int r, int depth, int n,
                  double *buf) noexcept nogil:
    # buf holds r weights per depth: O(n r) memory for the whole walk
    cdef double *w = buf + depth * r
    cdef int i
    cdef double acc = 0.0
    for i in range(r):
        w[i] = _weight(bg, kind, param)
    if depth + 1 == n:
        for i in range(r):
            acc += w[i]
    else:
        for i in range(r):
            acc += w[i] * _node(bg, kind, param, r, depth + 1, n, buf)
    return acc / r


def sample_finite_block(int kind, double param, int r, int n, Py_ssize_t count, rng):
    out_arr = np.empty(count)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t s
    if kind == 0:
        out_arr.fill(1.0)
        return out_arr
    bit_generator = rng.bit_generator
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("rng does not expose a numpy BitGenerator capsule")
    cdef bitgen_t *bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
    buf_arr = np.empty(n * r)
    cdef double[::1] buf = buf_arr
    with bit_generator.lock, nogil:
        for s in range(count):
            out[s] = _node(bg, kind, param, r, 0, n, &buf[0])
    return out_arr
