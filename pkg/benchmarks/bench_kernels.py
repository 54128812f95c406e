"""Compare the numba kernels with the plain-Python fallback.

Each path runs in its own interpreter because the switch is read at import.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from sitnikov import USE_NUMBA, build_kepler_pair, shoot
from sitnikov.spectral import SLWeight, prufer_phase

repeat = int(sys.argv[1])
ens = build_kepler_pair(0.2)
w = SLWeight.homotopy(ens, 1.0)
shoot(ens, 1.15, 0.5, 1, 1, n_points=64)       # warm-up (compilation)
prufer_phase(w, 0.3, 1)
out = {"numba": USE_NUMBA}

t0 = time.perf_counter()
for _ in range(repeat):
    s = shoot(ens, 1.15, 0.5, 1, 1, n_points=64)
out["shoot_s"] = (time.perf_counter() - t0) / repeat
out["residual"] = s.residual
out["dR_dzeta"] = s.derivative_wrt_amplitude

t0 = time.perf_counter()
for _ in range(repeat):
    th = prufer_phase(w, 0.3, 1)
out["prufer_s"] = (time.perf_counter() - t0) / repeat
out["theta"] = th
print(json.dumps(out))
"""


def run(disable_jit: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env["SITNIKOV_DISABLE_JIT"] = "1" if disable_jit else "0"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    print(f"{'kernel':<10}{'numba [s]':>12}{'python [s]':>12}{'speedup':>10}")
    for key, label in (("shoot_s", "shoot"), ("prufer_s", "prufer")):
        print(f"{label:<10}{fast[key]:>12.4g}{slow[key]:>12.4g}{slow[key] / fast[key]:>10.1f}")
    diff = max(abs(fast[k] - slow[k]) for k in ("residual", "dR_dzeta", "theta"))
    print(f"max |numba - python| over outputs: {diff:.3e}")
    return diff


if __name__ == "__main__":
    main()
