"""Compare the compiled and pure-Python SCH window kernels.

Usage: python benchmarks/bench_kernels.py [--episodes N] [--repeat R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dualconn import _kernels
from dualconn.channel import BfArchitecture, BfKind
from dualconn.env import DcEnv
from dualconn.scenario import default_scenario


def time_episodes(run_window, episodes: int, repeat: int) -> float:
    """Best-of-repeat seconds for running every window of ``episodes`` episodes."""
    sc = default_scenario()
    env = DcEnv(sc, seed=0, bf=BfArchitecture(BfKind.DIGITAL_ANALOG), run_window=run_window)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for ep in range(episodes):
            env.reset(ep)
            while not env.done:
                env.step(env.initial_action)
        best = min(best, time.perf_counter() - t0)
    return best


def time_kernel(run_window, repeat: int) -> float:
    """Best-of-repeat seconds for one long window over a synthetic trace."""
    rng = np.random.default_rng(0)
    n, m, rows = 200_000, 2, 4000
    crt = np.cumsum(rng.normal(0, 1.0, (rows, m)), axis=0) * 0.3
    visible = np.sort(rng.integers(0, rows, n)).astype(np.int64)
    gt = np.ascontiguousarray(crt[visible] + rng.normal(0, 1.0, (n, m)))
    gt_lte = rng.normal(5, 3, n)
    state = (0, 0, -1, 0, -2, -2, 0, 0, 0, 0.0)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        run_window(state, crt, visible, gt, gt_lte, -4.0, 100, 1.0, 2.0, 20, -6.0, 0, n)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    print(f"active backend: {_kernels.BACKEND}")
    kinds = [("python", _kernels.run_window_py)]
    if _kernels.run_window_compiled is not None:
        kinds.append(("cython", _kernels.run_window_compiled))
    else:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    results = {}
    for name, fn in kinds:
        results[name] = (time_kernel(fn, args.repeat), time_episodes(fn, args.episodes, args.repeat))
    print(f"{'backend':<8} {'kernel 200k steps [s]':>22} {f'{args.episodes} episodes [s]':>16}")
    for name, (k, e) in results.items():
        print(f"{name:<8} {k:>22.4f} {e:>16.4f}")
    if len(results) == 2:
        kp, ep = results["python"]
        kc, ec = results["cython"]
        print(f"speed-up: kernel x{kp / kc:.1f}, episodes x{ep / ec:.1f}")


if __name__ == "__main__":
    main()
