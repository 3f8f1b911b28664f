"""Seed derivation helpers.

Every random quantity in the package descends from a single root seed.
The split scheme is root -> purpose -> worker: a stream is addressed by
the root seed plus a path of small integers, hashed through numpy's
SeedSequence so sibling streams are statistically independent and the
whole tree is reproducible across platforms.
"""

from __future__ import annotations

import numpy as np

# purpose slots used by the CLI experiments (documented, fixed forever)
TASK_STREAM = 0
PARTITION_STREAM = 1
SMOOTHING_STREAM = 2
EVAL_STREAM = 3
ATTACK_STREAM = 4
GAME_STREAM = 5
AUX_STREAM = 6


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent Generator for ``(seed, *path)``.

    Same arguments always give the same stream; different paths give
    streams that do not collide. The path length is part of the entropy:
    SeedSequence zero-pads its pool, so without it (s,), (s, 0) and
    (s, 0, 0) would all hash alike.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, len(path)]
    entropy += [int(p) & 0xFFFFFFFFFFFFFFFF for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy))


def point_stream(seed: int, x: np.ndarray) -> np.random.Generator:
    """Generator keyed by a point's exact float64 bytes.

    Used by randomized classifiers that must stay deterministic per query:
    re-evaluating the same point replays the same noise.
    """
    words = np.frombuffer(np.ascontiguousarray(x, dtype=np.float64).tobytes(), dtype=np.uint64)
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, len(words)] + [int(w) for w in words]
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy))
