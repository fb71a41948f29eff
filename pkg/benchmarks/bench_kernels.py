"""Compare the numba kernels against the pure-numpy fallback.

Times one LFA epoch over a masked matrix and one full annealing run over a
feature history, checks that both backends produce the same numbers, and
prints a small table.  Run with ``python3 benchmarks/bench_kernels.py``.
"""
import argparse
import timeit

import numpy as np

from sparsefs import _accel
from sparsefs.threeway import CostMatrix, SaParams, temperature_schedule


def sgd_case(rng, n, d, h, zeta):
    known = rng.random((n, d)) >= zeta
    rows, cols = np.nonzero(known)
    vals = rng.standard_normal(rows.size)
    order = rng.permutation(rows.size)
    P0 = rng.uniform(0, 0.1, (n, h))
    Q0 = rng.uniform(0, 0.1, (d, h))

    def run(kernel):
        P, Q = P0.copy(), Q0.copy()
        kernel(rows, cols, vals, order, P, Q, 0.01, 0.01)
        return P, Q

    return run


def anneal_case(rng, m):
    dep = rng.uniform(0, 1, m)
    rel = rng.uniform(size=m) < dep
    sa = SaParams()
    temps = temperature_schedule(sa)
    n = temps.size * sa.chain
    uniforms = rng.random(n)
    steps = rng.standard_normal((4 * n, 2)) * sa.step_sigma
    costs = np.array(CostMatrix().as_tuple(), dtype=float)

    def run(kernel):
        trace = np.empty(temps.size)
        out = kernel(dep, rel, costs, 0.9, 0.1, temps, sa.k, steps, uniforms, sa.chain, trace)
        return out[:3], trace

    return run


def bench(name, run, kernels, repeat):
    results = {}
    for label, kernel in kernels.items():
        run(kernel)  # warm-up, includes JIT compilation
        best = min(timeit.repeat(lambda: run(kernel), number=1, repeat=repeat))
        results[label] = (best, run(kernel))
    line = f"{name:<28}" + "".join(f"{results[k][0] * 1e3:>12.2f}" for k in kernels)
    if len(results) == 2:
        a, b = (results[k][1] for k in kernels)
        agree = all(np.allclose(x, y, atol=1e-10) for x, y in zip(a, b))
        line += f"{results['numpy'][0] / results['numba'][0]:>10.1f}x  agree={agree}"
    print(line)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500, help="matrix rows (default: 500)")
    ap.add_argument("--d", type=int, default=5, help="buffer columns (default: 5)")
    ap.add_argument("--h", type=int, default=10, help="latent rank (default: 10)")
    ap.add_argument("--zeta", type=float, default=0.1, help="missing fraction (default: 0.1)")
    ap.add_argument("--history", type=int, default=100, help="annealing history length (default: 100)")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats, best is kept (default: 5)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    sgd = {"numpy": _accel.sgd_epoch_numpy}
    ann = {"numpy": _accel.anneal_numpy}
    if _accel.NUMBA_ENABLED:
        sgd["numba"] = _accel.sgd_epoch_numba
        ann["numba"] = _accel.anneal_numba
    else:
        print("numba disabled or unavailable; timing the numpy path only")

    print(f"{'kernel':<28}" + "".join(f"{k + ' ms':>12}" for k in sgd) + ("   speedup" if len(sgd) == 2 else ""))
    h = min(args.h, args.n, args.d)
    bench(f"sgd epoch {args.n}x{args.d} h={h}", sgd_case(rng, args.n, args.d, h, args.zeta), sgd, args.repeat)
    bench(f"anneal m={args.history}", anneal_case(rng, args.history), ann, args.repeat)


if __name__ == "__main__":
    main()
