import os
import subprocess
import sys

import numpy as np
import pytest

from dualconn import _kernels
from dualconn.channel import BfArchitecture, BfKind
from dualconn.env import DcEnv

compiled = pytest.mark.skipif(_kernels.run_window_compiled is None, reason="compiled kernel not built")


def _random_inputs(seed, n=3000, m=3, rows=80):
    rng = np.random.default_rng(seed)
    crt = np.cumsum(rng.normal(0, 1.5, (rows, m)), axis=0) * 0.5 - 2.0
    visible = np.sort(rng.integers(0, rows, n)).astype(np.int64)
    gt = crt[visible] + rng.normal(0, 1.0, (n, m))
    gt_lte = rng.normal(5, 3, n)
    return crt, visible, np.ascontiguousarray(gt), gt_lte


@compiled
@pytest.mark.parametrize("seed", range(8))
def test_compiled_matches_fallback(seed):
    crt, visible, gt, gt_lte = _random_inputs(seed)
    rng = np.random.default_rng(100 + seed)
    state = (0, 0, -1, 0, -2, -2, 0, 0, 0, 0.0)
    start = 0
    for stop in (700, 1500, 3000):
        thr = float(rng.choice([-8.0, -4.0, 0.0]))
        ttt = int(rng.choice([1, 25, 150]))
        args = (crt, visible, gt, gt_lte, thr, ttt, 1.0, 2.0, 20, -6.0, start, stop)
        a = _kernels.run_window_compiled(state, *args)
        b = _kernels.run_window_py(state, *args)
        assert a[0] == b[0]
        assert [tuple(e) for e in a[1]] == [tuple(e) for e in b[1]]
        assert a[2:] == b[2:]
        state, start = a[0], stop


@compiled
@pytest.mark.parametrize("kind", list(BfKind))
def test_env_identical_under_both_backends(short_scenario, kind):
    def run(kernel):
        env = DcEnv(short_scenario, seed=3, bf=BfArchitecture(kind), run_window=kernel)
        env.reset(0)
        rng = np.random.default_rng(0)
        rewards = []
        while not env.done:
            rewards.append(env.step(int(rng.integers(env.n_actions)))[1])
        return rewards, [r.row() for r in env.records]

    assert run(_kernels.run_window_compiled) == run(_kernels.run_window_py)


def test_backend_selection_respects_env_var():
    code = "import dualconn._kernels as k; print(k.BACKEND)"
    env = dict(os.environ, DUALCONN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert _kernels.BACKEND in ("cython", "python")
