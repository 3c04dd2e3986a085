"""Benchmark the compiled conv kernels against the numpy im2col fallback.

Times the three backend primitives on layer shapes representative of the
search workload, plus one full training step of a reference architecture,
and prints a table with the speedup of the compiled extension.

Usage: python benchmarks/bench_backends.py [--repeats N] [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from evocae.engine import backends, init_weights
from evocae.engine.ops import conv2d, conv2d_backward, mse_loss
from evocae.network import TaskMode, expand, parse_arch

# (label, batch, in_ch, out_ch, size, kernel, stride)
LAYER_CASES = [
    ("image->64 k3 s1 @64", 16, 3, 64, 64, 3, 1),
    ("64->128 k5 s2 @64", 16, 64, 128, 64, 5, 2),
    ("128->128 k3 s1 @32", 16, 128, 128, 32, 3, 1),
    ("16->16 k3 s1 @8 (desk)", 4, 16, 16, 8, 3, 1),
]

REFERENCE_ARCH = "CS(64,1)-C(128,5)"


def timeit(fn, repeats: int) -> float:
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_layer(case, repeats: int) -> dict[str, dict[str, float]]:
    label, batch, ci, co, size, kernel, stride = case
    rng = np.random.default_rng(0)
    x = rng.normal(size=(batch, ci, size, size)).astype(np.float32)
    w = rng.normal(size=(co, ci, kernel, kernel)).astype(np.float32)
    bias = np.zeros(co, dtype=np.float32)
    out = conv2d(x, w, bias, stride)
    grad = rng.normal(size=out.shape).astype(np.float32)

    results: dict[str, dict[str, float]] = {}
    for name in backends.available_backends():
        backends.set_backend(name)
        results[name] = {
            "forward": timeit(lambda: conv2d(x, w, bias, stride), repeats),
            "backward": timeit(lambda: conv2d_backward(x, w, grad, stride), repeats),
        }
    return results


def bench_train_step(repeats: int) -> dict[str, float]:
    cae = expand(parse_arch(REFERENCE_ARCH), TaskMode.INPAINTING, 3, (64, 64))
    rng = np.random.default_rng(1)
    x = rng.uniform(size=(16, 3, 64, 64)).astype(np.float32)
    target = rng.uniform(size=x.shape).astype(np.float32)

    results = {}
    for name in backends.available_backends():
        backends.set_backend(name)
        net = init_weights(cae, np.random.default_rng(2))

        def step():
            loss, grads, _ = net.forward_backward(x, target)
            return loss

        results[name] = timeit(step, repeats)
    return results


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="desk-size cases only")
    args = parser.parse_args()

    names = backends.available_backends()
    if len(names) < 2:
        print(f"only {names} available; build the extension to compare backends")

    cases = [LAYER_CASES[-1]] if args.quick else LAYER_CASES
    header = f"{'case':<28}{'pass':<10}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for case in cases:
        per_backend = bench_layer(case, args.repeats)
        for direction in ("forward", "backward"):
            row = f"{case[0]:<28}{direction:<10}"
            times = [per_backend[n][direction] for n in names]
            row += "".join(f"{t * 1e3:>10.2f}ms" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.2f}x"
            print(row)

    if not args.quick:
        step_times = bench_train_step(args.repeats)
        row = f"{'train step ' + REFERENCE_ARCH:<28}{'fw+bw':<10}"
        times = [step_times[n] for n in names]
        row += "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.2f}x"
        print(row)
        if len(names) == 2:
            print(
                "\nspeedup column: cython time / numpy time "
                "(values > 1 mean numpy is faster)"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
