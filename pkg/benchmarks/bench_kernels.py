"""Time the compiled kernels against the NumPy fallback on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Prints one line per (kernel, backend) with the best wall time, the speedup
and the largest deviation of the outputs between the two backends.
"""

import argparse
import time

import numpy as np

from qwabsorb import _backend
from qwabsorb.hypercube import grover_coin, hypercube_graph
from qwabsorb.reduced import build_reduced_chain


def graph_case(quick):
    n = 8 if quick else 10
    g = hypercube_graph(n)
    nv = 1 << n
    psi = np.zeros((n, nv), dtype=np.complex128)
    psi[:, 0] = n ** -0.5
    mask = np.zeros(nv, dtype=np.uint8)
    mask[nv - 1] = 1
    coin = grover_coin(n).astype(np.complex128)
    args = (g.table, coin, mask, psi, 2000, 0.0, 100, True)
    return f"graph n={n} T=2000", args, lambda k, a: k.graph_first_passage(*a)[0]


def line_case(quick):
    t_max = 2000 if quick else 10000
    args = (30, 0.5 ** 0.5, 0.5 ** 0.5, t_max, 0.0, 300)
    return f"line m=30 T={t_max}", args, lambda k, a: k.line_first_passage(*a)[0]


def chain_case(quick):
    n = 100
    t_max = 20000 if quick else 200000
    chain = build_reduced_chain(n)
    targets, coeffs = chain.column_structure()
    mask = np.zeros(2 * n, dtype=np.uint8)
    mask[-1] = 1
    x0 = np.zeros(2 * n)
    x0[0] = 1.0

    def run(k, a):
        return k.chain_first_passage(targets, coeffs, mask, x0.copy(), t_max, 0.0, 1000)[0]

    return f"reduced chain n={n} T={t_max}", None, run


def labels_case(quick):
    count = 1 << (18 if quick else 22)
    labels = np.random.default_rng(1).integers(0, 8, size=count, dtype=np.int64)

    def run(k, a):
        times = np.zeros(count, dtype=np.int64)
        _, _, done = k.consume_labels(labels, np.int64(15), np.int64(15), np.int64(0), times, 0)
        return times[:done].astype(float)

    return f"classical labels {count}", None, run


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="smaller inputs")
    args = parser.parse_args()
    backends = _backend.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; timing the NumPy fallback only")
    for case in (graph_case, line_case, chain_case, labels_case):
        label, case_args, run = case(args.quick)
        results = {}
        for name, module in backends.items():
            results[name] = best_time(lambda: run(module, case_args), args.repeat)
        base = results["python"][0]
        for name, (secs, out) in results.items():
            speed = base / secs if secs > 0 else float("inf")
            dev = float(np.max(np.abs(np.asarray(out) - np.asarray(results["python"][1]))))
            print(f"{label:32s} {name:9s} {secs * 1e3:10.2f} ms  x{speed:7.1f}  max|diff|={dev:.2e}")


if __name__ == "__main__":
    main()
