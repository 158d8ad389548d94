"""Classical curve-matching baselines: cosine, dynamic time warping, random.

These operate on raw 1-d profiles (or extracted edge vectors) and exist to
give the learned matcher something honest to beat.  DTW is the classic
boundary-matched dynamic program with |x - y| local cost and no window
constraint; a batched variant runs one target against a whole candidate
pool without leaving numpy.
"""

from __future__ import annotations

import numpy as np

from .features import EdgeVector


class ScorerInputError(ValueError):
    """Raised when a baseline receives an unusable profile."""


def _values(x) -> np.ndarray:
    if isinstance(x, EdgeVector):
        return x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ScorerInputError("profile must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ScorerInputError("profile contains non-finite values")
    return arr


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two equal-length profiles, in [-1, 1]."""
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise ScorerInputError(f"profiles differ in length: {va.size} vs {vb.size}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ScorerInputError("cosine similarity is undefined for a zero profile")
    return float(np.clip(float(va @ vb) / (na * nb), -1.0, 1.0))


def dtw_distance_batch(target, pool: np.ndarray) -> np.ndarray:
    """DTW distance from one target to every row of ``pool``.

    The dynamic program is unrolled over target samples with the whole pool
    carried as a batch axis, so only the inner column loop stays in Python.
    """
    t = _values(target)
    pool = np.asarray(pool, dtype=np.float64)
    if pool.ndim != 2 or pool.shape[0] == 0 or pool.shape[1] == 0:
        raise ScorerInputError("candidate pool must be a non-empty 2-d array")
    if not np.all(np.isfinite(pool)):
        raise ScorerInputError("candidate pool contains non-finite values")
    m, k = pool.shape
    prev = np.full((m, k + 1), np.inf)
    prev[:, 0] = 0.0
    curr = np.empty((m, k + 1))
    for i in range(1, t.size + 1):
        curr[:, 0] = np.inf
        cost = np.abs(t[i - 1] - pool)
        for j in range(1, k + 1):
            best = np.minimum(prev[:, j], prev[:, j - 1])
            np.minimum(best, curr[:, j - 1], out=best)
            curr[:, j] = cost[:, j - 1] + best
        prev, curr = curr, prev
    return prev[:, k].copy()


def dtw_distance(a, b) -> float:
    """DTW distance between two profiles of arbitrary lengths."""
    vb = _values(b)
    return float(dtw_distance_batch(a, vb[None, :])[0])


def random_similarity(rng: np.random.Generator) -> float:
    """A uniform score in [0, 1); the floor of any real matcher."""
    return float(rng.random())
