"""Time the hot kernels under the numba and pure-numpy backends.

Each backend runs in its own interpreter because the switch is read at import
time. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

_CHILD = r"""
import json, sys, time
import numpy as np
from intersense import _accel, kernels
from intersense import ChannelParams, SensingErrorModel, DualPeriodPolicy, SimConfig, simulate_dual_period

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
tf, tb = rng.uniform(0.01, 5.0, 200_000), rng.uniform(0.01, 5.0, 200_000)
c = np.array([1e-3, 1e-3]); u = np.array([0.6, 0.3])
d = rng.uniform(10.0, 3000.0, (20_000, 4))
chs = [ChannelParams(0.2, 1.0), ChannelParams(0.15, 0.8), ChannelParams(0.11, 0.6)]
errs = [SensingErrorModel(0.1, 0.05)] * 3
pols = [DualPeriodPolicy(0.6, 0.33)] * 3

cases = {
    "dual_period_grid (200k points)": lambda: kernels.dual_period_grid(1.2, 0.2 / 1.2, 0.1, 0.05, tf, tb),
    "joint_grid (20k tables)": lambda: kernels.joint_grid(c, u, d, 10.0),
    "simulate_dual_period (4 runs)": lambda: simulate_dual_period(chs, errs, pols, 0.01, SimConfig(horizon=2e4, runs=4, seed=1)),
}
out = {"backend": _accel.backend_name(), "times": {}}
for name, fn in cases.items():
    fn()  # warm-up, includes compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); best = min(best, time.perf_counter() - t0)
    out["times"][name] = best
print(json.dumps(out))
"""


def _run(flag, repeat):
    env = dict(os.environ, INTERSENSE_DISABLE_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", _CHILD, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = _run("0", args.repeat), _run("1", args.repeat)
    print(f"{'kernel':34s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:34s} {t_fast * 1e3:9.1f}ms {t_slow * 1e3:9.1f}ms {t_slow / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
