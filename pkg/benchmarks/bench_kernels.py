"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--sizes 256 512 1024] [--repeat 5] [--json out.json]

JIT compilation is timed once and reported separately; the table shows the
best of ``--repeat`` runs and the largest entrywise difference between the two.
"""

import argparse
import json
import time

import numpy as np

from commutatorlab import _backend, _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def divdiff_case(n):
    x = np.linspace(-20, 20, n, endpoint=False)
    loc = np.array([-3.0, 0.0, 2.5])
    w = np.array([0.3, 1.0, 0.5])
    args = (x, x, loc, w, np.pi / 2)
    return _kernels.tanh_divdiff_np, _kernels.tanh_divdiff_nb, args


def weyl_case(n):
    x = np.linspace(-20, 20, n, endpoint=False)
    h = x[1] - x[0]
    rng = np.random.default_rng(0)
    shifts = np.arange(-n // 4, n // 4 + 1)
    xi = np.linspace(-10, 10, n // 4)
    coeff = rng.standard_normal((shifts.size, xi.size)) + 1j * rng.standard_normal((shifts.size, xi.size))
    return _kernels.weyl_accumulate_np, _kernels.weyl_accumulate_nb, (x, h, shifts, coeff, xi)


CASES = {"tanh_divdiff": divdiff_case, "weyl_accumulate": weyl_case}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", help="also write the rows to this file")
    args = p.parse_args(argv)
    if not _backend.NUMBA_AVAILABLE:
        p.error("numba is not installed; nothing to compare")

    rows = []
    for name, make in CASES.items():
        np_fn, nb_fn, small = make(16)
        t = time.perf_counter()
        nb_fn(*small)
        compile_s = time.perf_counter() - t
        print(f"{name}: first call (compile or cache load) {compile_s:.2f} s")
        for n in args.sizes:
            np_fn, nb_fn, a = make(n)
            t_np, ref = best_of(lambda: np_fn(*a), args.repeat)
            t_nb, out = best_of(lambda: nb_fn(*a), args.repeat)
            diff = float(np.max(np.abs(ref - out)) / np.max(np.abs(ref)))
            rows.append({"kernel": name, "N": n, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb, "rel_diff": diff})

    print(f"\n{'kernel':<16}{'N':>6}{'numpy s':>11}{'numba s':>11}{'speedup':>9}{'rel diff':>10}")
    for r in rows:
        print(f"{r['kernel']:<16}{r['N']:>6}{r['numpy_s']:>11.4f}{r['numba_s']:>11.4f}{r['speedup']:>9.1f}{r['rel_diff']:>10.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
