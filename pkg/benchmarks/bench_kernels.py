"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Times the finite-tree sampler and the rate recursion on both backends and
checks that they agree (samplers bit for bit, rates to rounding).
"""
import argparse
import time

import numpy as np

from cascade_ldp import WeightModel, kernels
from cascade_ldp import cascade as cs
from cascade_ldp import ratefn as rf


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args()

    backends = kernels.available()
    print("backends:", ", ".join(backends))
    expo = WeightModel.exponential()
    scale = 10 if args.quick else 1
    cases = [
        ("sampler r=32 n=2 (1e5 draws)", lambda b: cs.sample_finite(expo, 32, 2, 100_000 // scale, 1, backend=b).samples),
        ("sampler r=4 n=8 (2e3 draws)", lambda b: cs.sample_finite(expo, 4, 8, 2_000 // scale, 1, backend=b).samples),
        ("sampler twopoint r=3 n=10 (2e3)",
         lambda b: cs.sample_finite(WeightModel.two_point(0.3), 3, 10, 2_000 // scale, 1, backend=b).samples),
        ("rate levels 1..6, a_max=50", lambda b: np.concatenate([g.values for g in rf.rate_levels(expo, 6, backend=b)])),
        ("rate levels 1..3, a_max=1e6",
         lambda b: np.concatenate([g.values for g in rf.rate_levels(expo, 3, rf.GridParams(a_max=1e6), backend=b)])),
    ]
    print(f"{'case':38s}" + "".join(f"{b:>12s}" for b in backends) + "   speedup  agree")
    for name, fn in cases:
        res = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        row = f"{name:38s}" + "".join(f"{res[b][0]:11.3f}s" for b in backends)
        if len(backends) == 2:
            a, p = res["cython"][1], res["python"][1]
            fin = np.isfinite(a)
            agree = "exact" if np.array_equal(a, p) else (
                "1e-13" if np.allclose(a[fin], p[fin], rtol=1e-13, atol=1e-14) else "NO")
            row += f"{res['python'][0] / res['cython'][0]:9.1f}x  {agree}"
        print(row)


if __name__ == "__main__":
    main()
