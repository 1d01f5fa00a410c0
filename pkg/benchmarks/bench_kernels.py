"""Time the compiled kernels against the interpreted fallback.

Each workload runs in a fresh interpreter so the backend flag is read at import.
The compiled timing excludes JIT compilation (one warm-up call first).

    python benchmarks/bench_kernels.py [--scale 1.0]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOADS = {
    "ou_euler": """
from steadystein.mphn import OUSpec, OuConfig, coxian2, ou_simulate
spec = OUSpec(coxian2(), 30.0, 30, 1.0)
def run(steps):
    return ou_simulate(spec, "state_dependent",
                       OuConfig(dt=0.01, steps=steps, burn_in=1.0, replications=2, seed=1)).abs_total.value
""",
    "des_events": """
from steadystein.mphn import DesConfig, des_simulate, coxian2
def run(steps):
    cfg = DesConfig(horizon=steps / 60.0, burn_in=1.0, replications=2, seed=1)
    return des_simulate(coxian2(), 30.0, 30, 1.0, cfg).abs_total.value
""",
    "c2_gauss_seidel": """
from steadystein.coxian import mphn_c2_stationary
from steadystein.mphn import coxian2
pt = coxian2()
def run(steps):
    n = max(4, int(steps ** 0.5) // 20)
    return mphn_c2_stationary(pt.nu[0], pt.nu[1], float(pt.P[0, 1]), float(n), n, 1.0, 1e-10).abs_scaled_mean()
""",
}

DRIVER = """
import json, time
from steadystein._accel import backend_name
{body}
run(2000)
t0 = time.perf_counter()
value = run({steps})
print(json.dumps({{"backend": backend_name(), "seconds": time.perf_counter() - t0, "value": value}}))
"""


def measure(name: str, steps: int, disable: bool) -> dict:
    env = dict(os.environ)
    env.pop("STEADYSTEIN_DISABLE_NUMBA", None)
    if disable:
        env["STEADYSTEIN_DISABLE_NUMBA"] = "1"
    code = DRIVER.format(body=WORKLOADS[name], steps=steps)
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="multiply workload sizes")
    args = ap.parse_args()
    steps = int(40_000 * args.scale)
    print(f"{'workload':<18}{'numba s':>10}{'numpy s':>10}{'speedup':>10}  values agree")
    for name in WORKLOADS:
        fast = measure(name, steps, False)
        slow = measure(name, steps, True)
        agree = abs(fast["value"] - slow["value"]) <= 1e-9 * max(1.0, abs(slow["value"]))
        print(f"{name:<18}{fast['seconds']:>10.3f}{slow['seconds']:>10.3f}"
              f"{slow['seconds'] / max(fast['seconds'], 1e-9):>10.1f}  {agree}")


if __name__ == "__main__":
    main()
