"""Compare the numba and pure-numpy backends on the two hot kernels.

Run:  python3 benchmarks/bench_backends.py

The active backend is chosen at import time, so each backend runs in a
subprocess with HYPEREM_NO_NUMBA set accordingly.
"""

import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, time
import numpy as np
from hyperem import accel
from hyperem.synthrtm import build_lut

rng = np.random.default_rng(0)

def timeit(fn, repeats=3):
    fn()  # warm-up (includes JIT compilation for the numba backend)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

results = {"backend": "numba" if accel.NUMBA_ENABLED else "numpy"}

x = rng.standard_normal((8, 16, 32, 32))
w = rng.standard_normal((32, 16, 3, 3))
b = rng.standard_normal(32)
results["conv2d_forward_3x3"] = timeit(
    lambda: accel.conv2d_forward_raw(x, w, b, 1, 1))
y = accel.conv2d_forward_raw(x, w, b, 1, 1)
results["conv2d_backward_3x3"] = timeit(
    lambda: accel.conv2d_backward_raw(x, w, y, 1, 1))

lut = build_lut()
table = lut.spectra_matrix()
queries = np.clip(table[rng.integers(0, table.shape[0], 200)]
                  + 0.01 * rng.standard_normal((200, table.shape[1])), 0, 1)
results["lut_nearest_200x17253"] = timeit(
    lambda: accel.lut_nearest_raw(queries, table), repeats=2)

print(json.dumps(results))
"""


def run_backend(no_numba: bool) -> dict:
    env = dict(os.environ, HYPEREM_NO_NUMBA="1" if no_numba else "0")
    out = subprocess.run([sys.executable, "-c", WORKER], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    numba = run_backend(no_numba=False)
    numpy_ = run_backend(no_numba=True)
    keys = [k for k in numba if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"{'kernel':<{width}}  {'numba (s)':>10}  {'numpy (s)':>10}  speedup")
    for k in keys:
        ratio = numpy_[k] / numba[k]
        print(f"{k:<{width}}  {numba[k]:>10.4f}  {numpy_[k]:>10.4f}  {ratio:>6.2f}x")


if __name__ == "__main__":
    main()
