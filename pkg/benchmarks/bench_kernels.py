"""Time the compiled and pure-Python training kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from modelsel.classifiers import balanced_hinge_weights
from modelsel.kernels import get_backend


def softmax_inputs(n=1500, d=32, k=15, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, k, size=n).astype(np.intp)
    return X, y, rng.permutation(n).astype(np.intp), k


def run_softmax(impl, X, y, order, k, epochs=5):
    d = X.shape[1]
    W = np.random.default_rng(1).uniform(-0.01, 0.01, size=(d, k))
    b = np.zeros(k)
    mW, vW, mb, vb = np.zeros_like(W), np.zeros_like(W), np.zeros(k), np.zeros(k)
    t = 0
    for _ in range(epochs):
        t, _ = impl.softmax_adam_epoch(W, b, mW, vW, mb, vb, X, y, order, 60,
                                       1e-4, 0.9, 0.99, 1e-8, 1e-4, t)
    return W


def hinge_inputs(n=2000, d=32, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.6, 1.0, -1.0)
    return X, y, balanced_hinge_weights(y)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = {"python": get_backend("python")}
    try:
        backends["cython"] = get_backend("cython")
    except ImportError:
        print("compiled extension not built; timing the python backend only")

    sx = softmax_inputs()
    hx = hinge_inputs()
    cases = {
        "softmax_adam_epoch x5": lambda impl: run_softmax(impl, *sx),
        "hinge_descent 2000 it": lambda impl: impl.hinge_descent(*hx, 1e-2, 2000)[0],
    }
    print(f"{'kernel':<24}{'backend':<10}{'best s':>10}{'speedup':>10}")
    for name, case in cases.items():
        base = None
        results = {}
        for label, impl in backends.items():
            seconds, out = best_of(lambda: case(impl), args.repeat)
            results[label] = np.asarray(out)
            base = base or seconds
            print(f"{name:<24}{label:<10}{seconds:>10.4f}{base / seconds:>9.2f}x")
        if len(results) == 2:
            diff = float(np.max(np.abs(results["python"] - results["cython"])))
            print(f"{'':<24}max |python - cython| = {diff:.2e}")


if __name__ == "__main__":
    main()
