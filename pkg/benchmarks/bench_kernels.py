"""Compare the compiled kernels against the pure-Python fallback.

Runs the two hot kernels (Jaro similarity and the GRU sequence scan) through
both backends and reports per-call timings and the speedup.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import string
import time

import numpy as np

from tabsema.kernels import _pykernels

try:
    from tabsema.kernels import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, args_list, repeat):
    best = None
    for _ in range(repeat):
        start = time.perf_counter()
        for args in args_list:
            fn(*args)
        elapsed = time.perf_counter() - start
        best = elapsed if best is None else min(best, elapsed)
    return best / len(args_list)


def jaro_inputs(rng, n=2000):
    letters = list(string.ascii_lowercase)
    pairs = []
    for _ in range(n):
        a = "".join(rng.choice(letters, size=rng.randint(3, 25)))
        b = "".join(rng.choice(letters, size=rng.randint(3, 25)))
        pairs.append((a, b))
    return pairs


def gru_inputs(rng, n=200, t_len=10, hidden=150, d_w=300):
    args_list = []
    for _ in range(n):
        x = rng.normal(0, 1, (t_len, d_w))
        mats = [rng.normal(0, 0.05, shape) for shape in
                [(hidden, d_w), (hidden, hidden), (hidden,)] * 3]
        args_list.append(tuple([x] + mats))
    return args_list


def report(name, py_time, c_time):
    line = "%-14s python %10.3f us/call" % (name, py_time * 1e6)
    if c_time is not None:
        line += "   cython %10.3f us/call   speedup %.1fx" % (
            c_time * 1e6, py_time / c_time)
    else:
        line += "   (compiled backend not available)"
    print(line)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    rng = np.random.RandomState(0)

    pairs = jaro_inputs(rng)
    py = bench(_pykernels.jaro, pairs, args.repeat)
    cy = bench(_ckernels.jaro, pairs, args.repeat) if _ckernels else None
    report("jaro", py, cy)

    for label, shape in (("gru (small)", dict(t_len=4, hidden=16, d_w=24)),
                         ("gru (default)", dict(t_len=10, hidden=150,
                                                d_w=300))):
        seqs = gru_inputs(rng, **shape)
        py = bench(_pykernels.gru_sequence, seqs, args.repeat)
        cy = bench(_ckernels.gru_sequence, seqs,
                   args.repeat) if _ckernels else None
        report(label, py, cy)


if __name__ == "__main__":
    main()
