"""Time the RK4 kernels with numba and with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]

Each backend runs in its own interpreter (the choice is fixed at import time
by THERMORAY_NO_JIT). Numba timings exclude the first, compiling call.
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from thermoray import _jit, flow as fl, riccati as rc
from thermoray.geometry import ChartFunction, ConformalSurface, ThermostatParams

steps, repeat = int(sys.argv[1]), int(sys.argv[2])
s = ConformalSurface("torus", ChartFunction.cos_product(0.2))
p = ThermostatParams(s, ChartFunction.trig([(1, 0, 0.3, 0), (2, 1, 0.1, 0.05)]),
                     ChartFunction.trig([(0, 1, 0, 0.2)]))
dt = 1e-3

def flow():
    return fl.integrate_steps(p, (0.1, 0.2, 0.3), steps, dt)

traj = flow()

def jacobi():
    return fl.integrate_jacobi(traj, 0.1, 1.0, 0.2)

def riccati():
    return rc.riccati_integrate(traj, 0.3)

out = {"backend": _jit.backend(), "steps": steps}
for name, fn in (("flow", flow), ("jacobi", jacobi), ("riccati", riccati)):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
json.dump(out, sys.stdout)
"""


def run(no_jit, steps, repeat):
    env = dict(os.environ)
    env.pop("THERMORAY_NO_JIT", None)
    if no_jit:
        env["THERMORAY_NO_JIT"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(steps), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.steps, args.repeat)
    slow = run(True, args.steps, args.repeat)
    print(f"{'kernel':<10}{'numba [s]':>12}{'python [s]':>12}{'speedup':>10}   ({args.steps} RK4 steps)")
    for k in ("flow", "jacobi", "riccati"):
        print(f"{k:<10}{fast[k]:>12.4f}{slow[k]:>12.4f}{slow[k] / fast[k]:>9.0f}x")


if __name__ == "__main__":
    main()
