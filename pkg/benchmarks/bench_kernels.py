"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py

Times the three contraction primitives across the bond-dimension range the
sampler actually visits, then an end-to-end sampling benchmark in both lanes
(subprocesses, since the lane is fixed at import time via COHSURF_NUMBA).
"""

import os
import subprocess
import sys
import time
from timeit import repeat

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cohsurf import _kernels  # noqa: E402


def bench_primitives():
    np_step, np_right, np_pair, np_theta = _kernels.numpy_kernels()
    lane_fns = {
        "transfer_step": (_kernels.transfer_step, np_step),
        "transfer_step_pair": (_kernels.transfer_step_pair, np_pair),
        "build_theta": (_kernels.build_theta, np_theta),
    }
    print(f"active lane: {_kernels.active_lane()}")
    print(f"{'kernel':>20} {'chi':>5} {'numba us':>10} {'numpy us':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for chi in (2, 4, 8, 16, 32, 64):
        c = lambda *s: (rng.normal(size=s) + 1j * rng.normal(size=s))  # noqa: E731
        v = c(chi)
        a = np.ascontiguousarray(c(chi, 4, chi))
        b = np.ascontiguousarray(c(chi, 4, chi))
        w = c(4)
        wmat = c(4, 4)
        args = {
            "transfer_step": (v, a, w),
            "transfer_step_pair": (v, a, b, wmat),
            "build_theta": (a, b, wmat),
        }
        for name, (fast, slow) in lane_fns.items():
            fast(*args[name])  # warm the JIT
            n = 2000 if chi <= 16 else 400
            t_fast = min(repeat(lambda: fast(*args[name]), number=n, repeat=3)) / n
            t_slow = min(repeat(lambda: slow(*args[name]), number=n, repeat=3)) / n
            print(
                f"{name:>20} {chi:>5} {t_fast * 1e6:>10.1f} {t_slow * 1e6:>10.1f}"
                f" {t_slow / t_fast:>7.1f}x"
            )


SAMPLE_SNIPPET = """
import time
from cohsurf.lattice import build_layout
from cohsurf.channel import ErrorChannelParams
from cohsurf.sampler import sample_batch

lay = build_layout(7, 7)
params = ErrorChannelParams.uniform(0.1, 0.5, 49)
sample_batch(lay, params, 3, master_seed=0, collect_entropies=False)  # warm
t0 = time.time()
sample_batch(lay, params, 60, master_seed=1, collect_entropies=False)
print((time.time() - t0) / 60 * 1000)
"""


def bench_end_to_end():
    print("\nend-to-end: d=7 sampling, ms per sample")
    for lane, flag in (("numba", "1"), ("numpy", "0")):
        env = dict(os.environ, COHSURF_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, "-c", SAMPLE_SNIPPET], capture_output=True, text=True, env=env
        )
        print(f"  {lane:>6}: {float(out.stdout.strip()):.1f} ms")


if __name__ == "__main__":
    t0 = time.time()
    bench_primitives()
    bench_end_to_end()
    print(f"\ntotal benchmark time: {time.time() - t0:.0f}s")
