"""Fixed-timestep clock and reproducible random streams.

Simulated time is an integer step count times a constant dt; the engine never
reads wall time, so arbitrary host delays cannot change any simulated
quantity. Random streams are counter-based (Philox) keyed on
(seed, stream_id) so each subsystem draws from an independent sequence that
reproduces bit-for-bit across runs and platforms.
"""
from __future__ import annotations

import numpy as np

DEFAULT_DT_PHYSICS = 0.004  # 250 Hz
DEFAULT_SUBSTEPS = 5        # control at 50 Hz

# stream ids, one per subsystem
STREAM_PHYSICS = 0
STREAM_SCENE = 1
STREAM_DATASET = 2
STREAM_TASK = 3


class SimClock:
    """Integer-step simulation clock decoupled from wall time.

    dt is fixed at construction; time is always reported as steps * dt
    (a single product, never a float accumulation).
    """

    __slots__ = ("_dt", "steps")

    def __init__(self, dt_physics: float = DEFAULT_DT_PHYSICS, steps: int = 0):
        if dt_physics <= 0:
            raise ValueError("dt_physics must be > 0")
        if steps < 0:
            raise ValueError("steps must be >= 0")
        self._dt = float(dt_physics)
        self.steps = int(steps)

    @property
    def dt_physics(self) -> float:
        return self._dt

    @property
    def time(self) -> float:
        return self.steps * self._dt

    def advance(self, n: int = 1) -> None:
        if n < 0:
            raise ValueError("cannot advance by a negative step count")
        self.steps += n

    def reset(self) -> None:
        self.steps = 0

    def __repr__(self):
        return f"SimClock(dt={self._dt}, steps={self.steps})"


def derive_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent deterministic generator for (seed, stream_id).

    Philox is counter-based, so identical keys give identical sequences on
    every platform and distinct keys give statistically independent ones.
    """
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
