"""Hawkes processes with renewal immigration, and the two-index critical
construction on ``[0, inf)``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cluster import PointConfiguration, grow_families, grow_family
from .distributions import DisplacementSpec, TruncatedSpec, branching_to_truncation
from .rng import RngStream, spawn

DEFAULT_FAMILY_BUDGET = 1_000_000


@dataclass(frozen=True)
class RenewalImmigrationSpec:
    """Immigrants arrive with interarrivals ``F_{c(m)} / target_lambda``.

    ``burnin`` is the length of the left extension run before the window
    opens; ``None`` means ten horizons.
    """

    F: DisplacementSpec
    m: float
    target_lambda: float = 1.0
    horizon: float = 1e5
    burnin: Optional[float] = None
    family_budget: int = DEFAULT_FAMILY_BUDGET

    def __post_init__(self):
        if not 0 <= self.m < 1:
            raise ValueError("renewal immigration needs 0 <= m < 1")
        if self.target_lambda <= 0 or self.horizon <= 0:
            raise ValueError("target_lambda and horizon must be positive")

    @property
    def burnin_length(self) -> float:
        return 10.0 * self.horizon if self.burnin is None else float(self.burnin)

    def interarrival(self) -> TruncatedSpec:
        return TruncatedSpec(self.F, branching_to_truncation(self.F, self.m))


@dataclass(frozen=True)
class TwoIndexSpec:
    F1: DisplacementSpec   # immigrant interarrivals
    F2: DisplacementSpec   # displacements of the critical families
    horizon: float = 1e4
    family_budget: int = 100_000


def renewal_epochs(inter, start: float, stop: float, stream: RngStream, scale: float = 1.0):
    """Epochs ``start, start + Y1, start + Y1 + Y2, ...`` up to ``stop``."""
    mean = inter.mean * scale
    chunk = int(min(max(64, 1.2 * (stop - start) / mean + 64), 2_000_000)) if np.isfinite(mean) and mean > 0 else 1024
    parts = [np.array([start])]
    last = start
    while last <= stop:
        steps = inter.sample(stream, chunk) * scale
        ep = last + np.cumsum(steps)
        parts.append(ep)
        last = ep[-1]
    ep = np.concatenate(parts)
    return ep[ep <= stop]


def simulate_renewal_hawkes(spec: RenewalImmigrationSpec, stream: RngStream) -> PointConfiguration:
    """Stationary-in-the-limit Hawkes process with renewal immigration.

    Immigration starts with an epoch at ``-burnin``; statistics should be
    read on the window ``[0, horizon]``.
    """
    inter = spec.interarrival()
    b = spec.burnin_length
    epochs = renewal_epochs(inter, -b, spec.horizon, stream, 1.0 / spec.target_lambda)
    batch = grow_families(epochs, spec.F, spec.m, spec.family_budget, stream,
                          right_limit=spec.horizon)
    out = PointConfiguration(batch.positions, (0.0, spec.horizon), b)
    out.meta.update(
        immigrants=epochs[epochs >= 0],
        n_immigrants_window=int(np.sum(epochs >= 0)),
        censored_families=int(batch.censored.sum()),
        families=len(epochs),
        burnin=b,
        c=inter.c,
        m=spec.m,
    )
    return out


def simulate_two_index(spec: TwoIndexSpec, stream: RngStream) -> PointConfiguration:
    """Renewal epochs from ``F1`` (first epoch at 0), each starting a critical family.

    Every family has its own child stream, so raising ``family_budget`` on the
    same seed can only remove censoring.
    """
    epochs = renewal_epochs(spec.F1, 0.0, spec.horizon, stream)
    streams = spawn(stream, len(epochs))
    parts, censored = [], np.zeros(len(epochs), dtype=bool)
    counts = np.zeros(len(epochs), dtype=np.int64)
    for i, (t, s) in enumerate(zip(epochs, streams)):
        pos, _, cens = grow_family(spec.F2, 1.0, spec.family_budget, s, origin=t,
                                   right_limit=spec.horizon)
        parts.append(pos)
        censored[i] = cens
        counts[i] = len(pos)
    pts = np.concatenate(parts) if parts else np.zeros(0)
    out = PointConfiguration(pts, (0.0, spec.horizon), 0.0)
    out.meta.update(epochs=epochs, family_counts=counts, censored=censored,
                    censored_families=int(censored.sum()))
    return out
