"""Throughput measurements and compiled-vs-pure kernel comparison."""
from __future__ import annotations

import os
import subprocess
import sys
import time

import numpy as np

from . import _kernels
from .env import Environment


def measure_steps_per_sec(sensors, n_steps: int = 400, seed: int = 7,
                          warmup: int = 30) -> float:
    env = Environment(task="kick_the_ball", playground="SimpleEnv",
                      sensors=sensors, seed=seed, max_steps=10 ** 9)
    env.reset()
    action = np.array([1.0, 0.2, 0.0, 0.0, 0.0, 0.0])
    for _ in range(warmup):
        env.step(action)
    t0 = time.perf_counter()
    for _ in range(n_steps):
        env.step(action)
    return n_steps / (time.perf_counter() - t0)


def standard_benchmark(n_steps: int = 400) -> dict:
    """The two engineering-target measurements."""
    return {
        "backend": _kernels.backend_name(),
        "audio_tactile_steps_per_sec": measure_steps_per_sec(
            ("audio", "tactile", "proprio"), n_steps),
        "vision_steps_per_sec": measure_steps_per_sec(
            ("vision", "audio", "tactile", "proprio"), max(50, n_steps // 8)),
    }


def kernel_benchmark(n_rays: int = 7056, repeats: int = 5) -> dict:
    """Raycast and taxel-depth timings on a fixed synthetic scene."""
    from scipy.spatial.transform import Rotation

    from ._kernels import pure
    rng = np.random.default_rng(11)
    prims = [pure.pack_sphere(rng.uniform(-2, 2, 3), rng.uniform(0.2, 0.6))
             for _ in range(3)]
    prims += [pure.pack_box(rng.uniform(-2, 2, 3),
                            Rotation.random(random_state=i).as_matrix(),
                            rng.uniform(0.2, 0.9, 3)) for i in range(4)]
    p0 = rng.uniform(-2, 2, 3)
    prims.append(pure.pack_capsule(p0, p0 + np.array([0.0, 1.0, 0.0]), 0.3))
    prims.append(pure.pack_plane([0.0, 1.0, 0.0], 0.0))
    prims = np.stack(prims)
    owner = np.arange(prims.shape[0], dtype=np.int32)
    tris = np.zeros((0, 9))
    tri_owner = np.zeros(0, dtype=np.int32)

    o = rng.uniform(-3, 3, (n_rays, 3))
    d = rng.normal(size=(n_rays, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    pts = rng.uniform(-2, 2, (816, 3))
    nr = rng.normal(size=(816, 3))
    nr /= np.linalg.norm(nr, axis=1, keepdims=True)

    def timeit(fn, *args):
        fn(*args)  # warm
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn(*args)
        return (time.perf_counter() - t0) / repeats

    out = {"n_rays": n_rays, "backend": _kernels.backend_name()}
    out["raycast_ms"] = timeit(_kernels.raycast, o, d, prims, owner, tris, tri_owner) * 1e3
    out["line_depth_ms"] = timeit(_kernels.line_depth, pts, nr, prims, tris) * 1e3
    out["raycast_pure_ms"] = timeit(pure.raycast, o, d, prims, owner, tris, tri_owner) * 1e3
    out["line_depth_pure_ms"] = timeit(pure.line_depth, pts, nr, prims, tris) * 1e3
    return out


def run_pure_subprocess(n_steps: int = 200) -> dict:
    """Re-run the step benchmark with the fallback forced, in a fresh process."""
    code = (
        "import json\n"
        "from sensorium import bench, _kernels\n"
        "out = bench.standard_benchmark(%d)\n"
        "print(json.dumps(out))\n" % n_steps
    )
    envv = dict(os.environ, ENGINE_PURE_PYTHON="1")
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True,
                          text=True, env=envv, check=True)
    import json
    return json.loads(proc.stdout.strip().splitlines()[-1])
