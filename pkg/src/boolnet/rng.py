"""Counter-based random streams.

A draw is a pure function of (seed, stream, step, coordinate), so results do
not depend on how coordinates are scheduled across workers.
"""
from __future__ import annotations

import numpy as np


def counter_uniforms(seed: int, stream: int, step: int, shape) -> np.ndarray:
    bitgen = np.random.Philox(key=[int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream) & 0xFFFFFFFFFFFFFFFF],
                              counter=[0, int(step), 0, 0])
    return np.random.Generator(bitgen).random(shape)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])
