"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from graft import kernels


def cases(rng):
    y = rng.normal(size=64)
    yield "pav m=64", lambda b: kernels.pav_decreasing(y, backend=b), 200
    y = rng.normal(size=1024)
    yield "pav m=1024", lambda b: kernels.pav_decreasing(y, backend=b), 20
    n = 2000
    s, t = rng.normal(size=n), rng.exponential(size=n)
    e = (rng.random(n) < 0.7).astype(np.int64)
    yield "c-index n=2000", lambda b: kernels.concordance_counts(s, t, e, backend=b), 3


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        from graft import _ckernels  # noqa: F401
    except ImportError:
        print("compiled extension not built; only the Python backend can be timed")
        backends = ["python"]
    else:
        backends = ["cython", "python"]

    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}" + "".join(f"{b:>14}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for name, fn, number in cases(rng):
        ref = fn(backends[-1])
        best = {}
        for b in backends:
            out = fn(b)
            assert np.array_equal(np.asarray(out), np.asarray(ref)), f"{name}: backends disagree"
            best[b] = min(timeit.repeat(lambda: fn(b), number=number, repeat=args.repeat)) / number
        row = f"{name:<16}" + "".join(f"{best[b] * 1e6:>12.1f}us" for b in backends)
        if len(backends) == 2:
            row += f"{best['python'] / best['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
