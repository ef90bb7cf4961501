"""Small statistics used by the experiments."""
from __future__ import annotations

import numpy as np

from ..cluster import PointConfiguration
from ..rng import split_stream


def estimate_intensity(points: PointConfiguration, window=None, blocks: int = 20,
                       resamples: int = 500, seed: int = 0):
    """``count / length`` on ``window`` with a block-bootstrap standard error.

    ``window`` may be one interval or a list of disjoint intervals; the
    estimate pools counts and lengths.  The bootstrap resamples per-block
    counts of equal-length blocks with a fixed internal stream, so the
    error is reproducible.
    """
    wins = [points.window] if window is None else (
        [window] if np.isscalar(window[0]) else list(window))
    lengths = np.array([b - a for a, b in wins], dtype=float)
    if (lengths <= 0).any():
        raise ValueError("window length must be positive")
    counts = []
    for (a, b), L in zip(wins, lengths):
        edges = np.linspace(a, b, blocks + 1)
        c = np.histogram(points.points, edges)[0]
        c[-1] += int(np.sum(points.points == b))
        counts.append(c)
    counts = np.concatenate(counts).astype(float)
    total = lengths.sum()
    lam = counts.sum() / total
    if counts.sum() == 0:
        return 0.0, 0.0
    per_block = np.repeat(lengths / blocks, blocks)
    rng = split_stream(seed, 0, "block-bootstrap")
    idx = rng.integers(0, len(counts), size=(resamples, len(counts)))
    boot = counts[idx].sum(axis=1) / per_block[idx].sum(axis=1)
    return float(lam), float(boot.std(ddof=1))


def mean_se(values):
    """Mean and standard error of the mean (0 for fewer than two values)."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return float("nan"), float("nan")
    se = v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else 0.0
    return float(v.mean()), float(se)


def within(value, target, se, k=3.0) -> bool:
    return bool(abs(value - target) <= k * se)
