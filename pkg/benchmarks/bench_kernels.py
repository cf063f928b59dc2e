"""Compare the compiled and numpy kernel backends.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Prints the
best-of-N wall time per kernel and backend and the speedup, after checking
that both backends return the same numbers.
"""
import argparse
import time

import numpy as np

from fkquasi import kernels
from fkquasi.interaction import make_address_interaction, make_interaction
from fkquasi.pointset import build_cut_and_project
from fkquasi.potential import make_bump_potential


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(rng):
    fib = build_cut_and_project("fibonacci", (-5000, 5000))
    P = make_bump_potential(fib, 1.0, 0.5, -1)
    X1 = rng.uniform(-4900, 4900, size=(200_000, 1))
    ab = build_cut_and_project("ammann-beenker", {"radius": 40.0})
    Q = make_bump_potential(ab, 1.0, 0.99 * ab.packing_radius, 1)
    X2 = rng.uniform(-35, 35, size=(100_000, 2))

    lap = make_interaction("laplacian_quadratic", ([-300, -300], [300, 300]))
    U_lap = rng.normal(size=(len(lap.domain), 1))
    pp = make_interaction("p_power_1d", (-200_000, 200_000), p=4.0)
    U_pp = rng.normal(size=(len(pp.domain), 1))
    addr = make_address_interaction(fib, (-4000, 4000), 2)
    U_addr = rng.normal(size=(len(addr.domain), 1))

    return [
        ("bump_field fibonacci 2e5 queries", lambda: P.eval_batch(X1)),
        ("bump_field ammann-beenker 1e5 queries", lambda: Q.eval_batch(X2)),
        ("pair_forces laplacian 601x601", lambda: lap.forces(U_lap)),
        ("pair_forces p=4 chain 4e5", lambda: pp.forces(U_pp)),
        ("pair_forces address tau=2", lambda: addr.forces(U_addr)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available()
    print(f"backends: {', '.join(backends)}")
    rng = np.random.default_rng(0)
    for name, fn in cases(rng):
        out, times = {}, {}
        for b in backends:
            kernels.set_backend(b)
            out[b] = fn()
            times[b] = best_of(fn, args.repeat)
        ref = out["python"]
        for b in backends:
            got = out[b]
            pairs = zip(got, ref) if isinstance(ref, tuple) else [(got, ref)]
            err = max(float(np.max(np.abs(g - r))) for g, r in pairs)
            assert err < 1e-9, f"{name}: backend {b} differs by {err}"
        line = "  ".join(f"{b} {times[b] * 1e3:8.2f} ms" for b in backends)
        speed = ""
        if "cython" in times:
            speed = f"  speedup x{times['python'] / times['cython']:.1f}"
        print(f"{name:40s} {line}{speed}")
    kernels.set_backend("cython" if "cython" in backends else "python")


if __name__ == "__main__":
    main()
