"""Occupation diagnostics for symmetrized random walks."""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Union

import numpy as np

from .distributions import SymmetrizedSpec
from .rng import RngStream

TRANSIENT, RECURRENT, INCONCLUSIVE = "transient", "recurrent", "inconclusive"


@dataclass(frozen=True)
class LatticeLaw:
    """Law on the integers, ``P(k) = probs[k - k_min]``."""

    k_min: int
    probs: np.ndarray

    def sample(self, stream: RngStream, size=None):
        idx = stream.choice(len(self.probs), size=size, p=self.probs)
        return idx + self.k_min


@dataclass(frozen=True)
class WalkSpec:
    step: Union[SymmetrizedSpec, LatticeLaw]
    n_steps: int = 2 ** 16
    h: float = 1.0
    replications: int = 1000
    k_min: int = 5


@dataclass
class OccupationCurve:
    checkpoints: np.ndarray
    mean_visits: np.ndarray
    stderr: np.ndarray
    replications: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,mean_visits,stderr\n")
        for n, v, s in zip(self.checkpoints, self.mean_visits, self.stderr):
            buf.write(f"{int(n)},{v:.17g},{s:.17g}\n")
        return buf.getvalue()


def checkpoints(n_steps: int, k_min: int = 5) -> np.ndarray:
    k_max = int(np.floor(np.log2(n_steps)))
    return 2 ** np.arange(k_min, k_max + 1)


def occupation_counts(spec: WalkSpec, stream: RngStream, block: int = 1 << 22):
    """Visits to ``[-h, h]`` among ``S_0, ..., S_n`` per replication and checkpoint.

    Replications are simulated in row blocks that keep memory near
    ``block`` doubles; the result has shape ``(replications, checkpoints)``.
    """
    cps = checkpoints(spec.n_steps, spec.k_min)
    n = int(cps[-1]) if len(cps) else 0
    out = np.zeros((spec.replications, len(cps)), dtype=np.int64)
    rows = max(1, block // max(n, 1))
    for r0 in range(0, spec.replications, rows):
        r1 = min(spec.replications, r0 + rows)
        steps = np.asarray(spec.step.sample(stream, (r1 - r0, n)), dtype=float)
        walk = np.cumsum(steps, axis=1)
        hit = np.abs(walk) <= spec.h
        cum = np.cumsum(hit, axis=1)
        out[r0:r1] = 1 + cum[:, cps - 1]   # S_0 = 0 is always a visit
    return cps, out


def occupation_curve(spec: WalkSpec, stream: RngStream) -> OccupationCurve:
    cps, counts = occupation_counts(spec, stream)
    r = spec.replications
    if r == 0:
        return OccupationCurve(cps, np.zeros(len(cps)), np.zeros(len(cps)), 0)
    mean = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / np.sqrt(r) if r > 1 else np.zeros(len(cps))
    return OccupationCurve(cps, mean, se, r)


def tail_slope(curve: OccupationCurve, last: int = 2) -> float:
    """Log-log slope of mean visits over the last ``last`` dyadic intervals."""
    x = np.log(curve.checkpoints[-(last + 1):])
    y = np.log(curve.mean_visits[-(last + 1):])
    return float(np.polyfit(x, y, 1)[0])


def classify_transience(curve: OccupationCurve, s_lo: float = 0.05, s_hi: float = 0.2,
                        last: int = 2) -> str:
    """``transient`` for a flat tail, ``recurrent`` for a clearly growing one."""
    if len(curve.checkpoints) < 4:
        raise ValueError("need at least 4 checkpoints")
    slope = tail_slope(curve, last)
    if slope < s_lo:
        return TRANSIENT
    if slope > s_hi:
        return RECURRENT
    return INCONCLUSIVE
