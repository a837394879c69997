"""Time the trajectory kernel on both backends and check they agree.

Runs the same ensemble workload in two fresh subprocesses, one with
``JCHSIM_BACKEND=numba`` and one with ``JCHSIM_BACKEND=numpy``, so each
process selects its kernel at import time.  The compiled backend gets a
small warm-up run before timing so compilation cost is reported separately.
The ensemble means must agree bit for bit across backends — the compiled
kernel is a transcription, not a reimplementation.

Usage: python benchmarks/benchmark_backends.py [n_traj] [t_end]
"""

from __future__ import annotations

import json
import os
import subprocess
import sys

_CHILD = r"""
import hashlib, json, sys, time
import numpy as np

from jchsim.dynamics import BACKEND, TimeGrid, mcwf_ensemble
from jchsim.model import build_reduced_model, prepare_product_polariton_state
from jchsim.observables import ProjectorSpec
from jchsim.config import scenario_from_mapping

n_traj = int(sys.argv[1])
t_end = float(sys.argv[2])

cfg = scenario_from_mapping({
    "model": {"n_sites": 2, "n_max": 2, "hop": 0.03, "gamma": 0.05},
    "initial": {"labels": "2-, G"},
    "grid": {"t_end": t_end, "spacing": "auto"},
    "run": {"n_traj": n_traj, "master_seed": 99},
    "observables": {"projectors": "P20, P11"},
    "output": {"name": "bench"},
})
params = cfg.model
model = build_reduced_model(params, max_exc=cfg.max_excitation)
psi0 = model.space.reduce_vector(prepare_product_polariton_state(cfg.initial, params))
ops = {s.name: s.operator(params, model.space) for s in cfg.observables}

t0 = time.perf_counter()
mcwf_ensemble(model.h, model.collapse, psi0, cfg.grid, n_traj=2,
              master_seed=cfg.master_seed, observables=ops)
warmup = time.perf_counter() - t0

t0 = time.perf_counter()
ens = mcwf_ensemble(model.h, model.collapse, psi0, cfg.grid, n_traj=n_traj,
                    master_seed=cfg.master_seed, observables=ops)
elapsed = time.perf_counter() - t0

digest = hashlib.sha256()
for name in sorted(ens.mean_observables):
    digest.update(np.ascontiguousarray(ens.mean_observables[name]).tobytes())
print(json.dumps({"backend": BACKEND, "warmup_s": warmup,
                  "elapsed_s": elapsed, "checksum": digest.hexdigest()}))
"""


def run_backend(backend: str, n_traj: int, t_end: float) -> dict:
    env = dict(os.environ, JCHSIM_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, "-c", _CHILD, str(n_traj), str(t_end)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    n_traj = int(sys.argv[1]) if len(sys.argv) > 1 else 400
    t_end = float(sys.argv[2]) if len(sys.argv) > 2 else 300.0
    print(f"workload: two damped sites, {n_traj} trajectories, "
          f"window {t_end:g}/g")
    results = {}
    for backend in ("numba", "numpy"):
        try:
            results[backend] = run_backend(backend, n_traj, t_end)
        except subprocess.CalledProcessError as exc:
            print(f"{backend}: failed\n{exc.stderr}", file=sys.stderr)
            return 1
    for backend, res in results.items():
        print(f"{backend:>6}: {res['elapsed_s']:8.3f} s"
              f"   (first-call overhead {res['warmup_s']:.3f} s)")
    speedup = results["numpy"]["elapsed_s"] / results["numba"]["elapsed_s"]
    print(f"speedup: {speedup:.1f}x")
    if results["numba"]["checksum"] != results["numpy"]["checksum"]:
        print("MISMATCH: backends disagree bit for bit", file=sys.stderr)
        return 1
    print("ensemble means identical across backends (sha256 match)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
