"""Timing of the compiled and pure-Python Dykstra kernels.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.  Both
backends project the same random points onto the same polytopes and the
largest disagreement between their projections is reported.
"""
import argparse
import time

import numpy as np

from minflex import kernels


def _problem(rng, dim, faces):
    A = rng.normal(size=(faces, dim))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    b = rng.uniform(0.5, 1.5, faces)
    return A, b


def _time(fn, cases, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = [fn(A, b, x, 10000, 1e-12)[0] for A, b, x in cases]
        best = min(best, time.perf_counter() - t0)
    return best, np.array(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--points", type=int, default=50)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(42)
    print(f"{'dim':>4} {'faces':>6} " + " ".join(f"{name:>10}" for name in sorted(kernels.BACKENDS))
          + f" {'speedup':>8} {'max diff':>10}")
    for dim, faces in ((3, 8), (3, 64), (5, 32), (10, 64)):
        A, b = _problem(rng, dim, faces)
        cases = [(A, b, rng.normal(scale=3.0, size=dim)) for _ in range(args.points)]
        times, outs = {}, {}
        for name, fn in sorted(kernels.BACKENDS.items()):
            times[name], outs[name] = _time(fn, cases, args.repeat)
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        diff = max(np.max(np.abs(o - outs["python"])) for o in outs.values())
        print(f"{dim:>4} {faces:>6} " + " ".join(f"{times[n]:>9.4f}s" for n in sorted(times))
              + f" {speed:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
