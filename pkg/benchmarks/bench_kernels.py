"""Compare the compiled and numpy Fourier kernels.

    python benchmarks/bench_kernels.py [--points N] [--omega W] [--repeats R]

Prints microseconds per point for the forward pass at each derivative order
and for the adjoint, plus the max difference between the two backends.
"""

import argparse
import timeit

import numpy as np

from flowsym.kernels import HAVE_COMPILED, get_backend


def bench(fn, repeats):
    return min(timeit.repeat(fn, number=1, repeat=repeats))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--omega", type=int, default=3)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    n1 = args.omega + 1
    theta = rng.normal(size=(2, 4, n1, n1)) * 0.1
    u = rng.random((args.points, 2)) * 3
    wF = rng.normal(size=(args.points, 2))
    wJ = rng.normal(size=(args.points, 2, 2))
    backends = ["python"] + (["compiled"] if HAVE_COMPILED else [])
    results = {}
    for name in backends:
        fwd, adj = get_backend(name)
        row = {}
        for order in (0, 1, 2):
            row[f"forward[{order}]"] = bench(lambda: fwd(theta, u, order), args.repeats)
        row["adjoint"] = bench(lambda: adj(theta.shape, u, wF, wJ), args.repeats)
        results[name] = row

    keys = list(results["python"])
    print(f"points={args.points} omega={args.omega}  (us per point, best of {args.repeats})")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if HAVE_COMPILED else ""))
    for k in keys:
        line = f"{k:<12}" + "".join(f"{1e6 * results[b][k] / args.points:>12.3f}" for b in backends)
        if HAVE_COMPILED:
            line += f"{results['python'][k] / results['compiled'][k]:>11.1f}x"
        print(line)

    if HAVE_COMPILED:
        (fp, ap_), (fc, ac) = get_backend("python"), get_backend("compiled")
        d = max(float(np.abs(a - b).max()) for a, b in zip(fp(theta, u, 2), fc(theta, u, 2)))
        d = max(d, float(np.abs(ap_(theta.shape, u, wF, wJ) - ac(theta.shape, u, wF, wJ)).max()))
        print(f"max backend difference: {d:.2e}")
    else:
        print("compiled extension not built; python backend only")


if __name__ == "__main__":
    main()
