"""Time the jitted labeling kernel against the pure-numpy fallback.

Run from the repository root after installing the package:

    python benchmarks/bench_labeling.py --size 256 --windows 200

Both kernels see identical inputs and their outputs are cross-checked, so
the numbers stay honest. The first jitted call pays compilation; a warmup
round keeps that out of the timings.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from winspect.kernels import label_components_numba, label_components_numpy


def make_inputs(count: int, size: int, density: float, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [
        (rng.random((size, size)) < density).astype(np.uint8) for _ in range(count)
    ]


def time_kernel(fn, inputs, connectivity: int) -> tuple[float, list]:
    start = time.perf_counter()
    outputs = [fn(m, connectivity) for m in inputs]
    return time.perf_counter() - start, outputs


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256, help="window side length")
    ap.add_argument("--windows", type=int, default=200, help="number of random windows")
    ap.add_argument("--density", type=float, default=0.4, help="foreground fraction")
    ap.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    inputs = make_inputs(args.windows, args.size, args.density, args.seed)

    if label_components_numba is None:
        print("numba unavailable; only the numpy kernel can run")
        elapsed, _ = time_kernel(label_components_numpy, inputs, args.connectivity)
        print(f"numpy: {elapsed:.3f}s total, {elapsed / len(inputs) * 1e3:.2f} ms/window")
        return 0

    label_components_numba(inputs[0], args.connectivity)  # compile outside the clock

    jit_s, jit_out = time_kernel(label_components_numba, inputs, args.connectivity)
    np_s, np_out = time_kernel(label_components_numpy, inputs, args.connectivity)

    for (a_lab, a_n), (b_lab, b_n) in zip(jit_out, np_out):
        if a_n != b_n or not np.array_equal(a_lab, b_lab):
            raise SystemExit("kernel outputs disagree; benchmark aborted")

    per = len(inputs)
    print(f"windows: {per} x {args.size}x{args.size}, density {args.density}, "
          f"connectivity {args.connectivity}")
    print(f"numba: {jit_s:.3f}s total, {jit_s / per * 1e3:.2f} ms/window")
    print(f"numpy: {np_s:.3f}s total, {np_s / per * 1e3:.2f} ms/window")
    print(f"speedup: {np_s / jit_s:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
