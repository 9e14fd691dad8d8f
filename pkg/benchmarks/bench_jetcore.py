"""Time the compiled and numpy jet kernels on forward + reverse sweeps.

    python benchmarks/bench_jetcore.py [--repeat 20]

Prints the median wall time per call for each available backend, the speedup
and the largest difference between the backends' outputs.
"""
import argparse
import timeit

import numpy as np

from fennm.kernel import TANH, available_backends


def _case(layers, width, n_points, order, seed=0):
    rng = np.random.default_rng(seed)
    sizes = np.array((1,) + (width,) * layers + (1,), dtype=np.int64)
    n = sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))
    params = rng.normal(0, 0.5, n)
    x = np.linspace(-1, 1, n_points)
    seeds = rng.normal(size=(order + 1, n_points))
    return params, sizes, x, seeds


def bench(backend, params, sizes, x, seeds, order, repeat):
    def call():
        out, cache = backend.forward(params, sizes, TANH, order, x)
        return out, backend.backward(params, sizes, TANH, order, cache, seeds)

    times = timeit.repeat(call, number=1, repeat=repeat)
    return float(np.median(times)), call()


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the numpy backend is available")
    cases = [(2, 20, 40, 2), (2, 20, 400, 2), (3, 20, 100, 3), (4, 20, 250, 1)]
    print(f"{'layers':>6} {'width':>5} {'points':>6} {'order':>5} "
          + " ".join(f"{b + ' [ms]':>14}" for b in backends) + "  speedup  max_diff")
    for layers, width, npts, order in cases:
        params, sizes, x, seeds = _case(layers, width, npts, order)
        res = {b: bench(m, params, sizes, x, seeds, order, args.repeat) for b, m in backends.items()}
        line = f"{layers:6d} {width:5d} {npts:6d} {order:5d} " + " ".join(
            f"{res[b][0] * 1e3:14.3f}" for b in backends)
        if "cython" in res:
            speed = res["python"][0] / res["cython"][0]
            (o_py, g_py), (o_cy, g_cy) = res["python"][1], res["cython"][1]
            diff = max(np.max(np.abs(o_py - o_cy)), np.max(np.abs(g_py - g_cy)))
            line += f"  {speed:7.1f}x {diff:9.1e}"
        print(line)


if __name__ == "__main__":
    main()
