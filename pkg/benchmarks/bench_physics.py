"""Compare the numba kernels against the pure-Python/numpy fallback.

    python3 benchmarks/bench_physics.py [--steps 240] [--scene-seed 1]

Each backend runs in its own interpreter because the choice is fixed at
import time by CLUTTERREACH_DISABLE_NUMBA.
"""

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from clutterreach._accel import backend_name
from clutterreach.config import EffectorConfig
from clutterreach.effector import LEFT, TaxelGrid, ransac_plane_compensate
from clutterreach.physics import VelocityCmd, create_world
from clutterreach.scene import generate_continuous_scene

steps, seed = int(sys.argv[1]), int(sys.argv[2])
scene = generate_continuous_scene(seed, count=18)
cmd = VelocityCmd(0.0, 0.045, 0.0)

# warm-up covers JIT compilation (or cache load)
w = create_world(scene)
w.advance(cmd, 12)

w = create_world(scene)
t0 = time.perf_counter()
w.advance(cmd, steps)
physics = (time.perf_counter() - t0) / steps

cfg = EffectorConfig()
rng = np.random.default_rng(0)
f = rng.normal(0, 0.02, (cfg.taxel_rows, cfg.taxel_cols, 3))
grid = TaxelGrid(LEFT, f, cfg.link_length / cfg.taxel_cols)
ransac_plane_compensate(grid, rng=np.random.default_rng(1))
reps = 20
t0 = time.perf_counter()
for k in range(reps):
    ransac_plane_compensate(grid, rng=np.random.default_rng(k))
ransac = (time.perf_counter() - t0) / reps

print(json.dumps({"backend": backend_name(), "step_s": physics, "ransac_s": ransac,
                  "state_hash": w.state_hash()}))
"""


def run_backend(disable: bool, steps: int, seed: int) -> dict:
    env = dict(os.environ, CLUTTERREACH_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(steps), str(seed)], env=env,
                         check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=240)
    ap.add_argument("--scene-seed", type=int, default=1)
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    fast = run_backend(False, args.steps, args.scene_seed)
    slow = run_backend(True, args.steps, args.scene_seed)
    print(f"{'backend':<8} {'us/step':>10} {'ms/ransac':>10}")
    for r in (fast, slow):
        print(f"{r['backend']:<8} {1e6 * r['step_s']:>10.1f} {1e3 * r['ransac_s']:>10.2f}")
    print(f"speed-up: physics x{slow['step_s'] / fast['step_s']:.0f}, "
          f"ransac x{slow['ransac_s'] / fast['ransac_s']:.0f}")
    print(f"final states identical: {fast['state_hash'] == slow['state_hash']}")
    print(f"wall time {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
