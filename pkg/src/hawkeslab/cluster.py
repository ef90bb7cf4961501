"""Point configurations, the Poisson clustering operation, and Hawkes families."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distributions import DisplacementSpec
from .errors import BudgetExceeded
from .rng import RngStream

DEFAULT_POINT_CAP = 50_000_000


@dataclass
class PointConfiguration:
    """Sorted multiset of positions stored on ``[w_lo - buffer, w_hi]``.

    Statistics are read on the window ``[w_lo, w_hi]`` only; the buffer holds
    points that may still have offspring inside the window.
    """

    points: np.ndarray
    window: tuple
    buffer: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.sort(np.asarray(self.points, dtype=float))
        lo, hi = self.window
        if hi < lo:
            raise ValueError("window must satisfy w_lo <= w_hi")
        if self.buffer < 0:
            raise ValueError("buffer must be nonnegative")

    @classmethod
    def empty(cls, window, buffer=0.0):
        return cls(np.zeros(0), window, buffer)

    @property
    def stored_range(self):
        return self.window[0] - self.buffer, self.window[1]

    @property
    def window_length(self):
        return self.window[1] - self.window[0]

    def count(self, a=None, b=None):
        """Number of points in ``[a, b]`` (defaults to the window)."""
        a = self.window[0] if a is None else a
        b = self.window[1] if b is None else b
        return int(np.searchsorted(self.points, b, "right") - np.searchsorted(self.points, a, "left"))

    def in_window(self):
        lo, hi = self.window
        i = np.searchsorted(self.points, lo, "left")
        j = np.searchsorted(self.points, hi, "right")
        return self.points[i:j]

    def __len__(self):
        return len(self.points)

    def merged(self, other):
        if other.window != self.window or other.buffer != self.buffer:
            raise ValueError("can only merge configurations on the same window")
        return PointConfiguration(np.concatenate([self.points, other.points]), self.window,
                                  self.buffer, dict(self.meta))

    def export(self) -> str:
        """One position per line with 17 significant digits."""
        return "".join(f"{x:.17g}\n" for x in self.points)

    @classmethod
    def parse(cls, text, window, buffer=0.0):
        pts = [float(line) for line in text.split()]
        return cls(np.array(pts), window, buffer)


@dataclass(frozen=True)
class ClusterField:
    """``[F, m]``: every point receives ``Pois(m)`` children displaced by ``F``."""

    F: DisplacementSpec
    m: float = 1.0

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("branching coefficient must be nonnegative")


def children(parents: np.ndarray, field: ClusterField, stream: RngStream):
    """Children positions and the index of each child's parent."""
    k = stream.poisson(field.m, len(parents))
    parent_idx = np.repeat(np.arange(len(parents)), k)
    pos = parents[parent_idx] + field.F.sample(stream, len(parent_idx))
    return pos, parent_idx


def cluster_once(field: ClusterField, config: PointConfiguration, stream: RngStream) -> PointConfiguration:
    """Apply ``[F, m]`` once and return only the children."""
    pos, _ = children(config.points, field, stream)
    lo, hi = config.stored_range
    pos = pos[(pos >= lo) & (pos <= hi)]
    return PointConfiguration(pos, config.window, config.buffer)


def poisson_configuration(intensity, window, buffer, stream) -> PointConfiguration:
    lo, hi = window[0] - buffer, window[1]
    n = stream.poisson(intensity * (hi - lo)) if intensity > 0 else 0
    return PointConfiguration(stream.uniform(lo, hi, n), window, buffer)


def iterate_generations(eta, field: ClusterField, g_max, window, buffer, stream,
                        point_cap=DEFAULT_POINT_CAP) -> PointConfiguration:
    """Superpose ``N^(0), ..., N^(g_max)`` with ``N^(0)`` Poisson of intensity ``eta``.

    Generation counts on the window are kept in ``meta["generation_counts"]``.
    """
    gen = poisson_configuration(eta, window, buffer, stream)
    parts = [gen.points]
    counts = [gen.count()]
    stored = len(gen)
    for _ in range(g_max):
        if len(gen) == 0:
            counts.append(0)
            continue
        gen = cluster_once(field, gen, stream)
        stored += len(gen)
        if stored > point_cap:
            raise BudgetExceeded(f"{stored} stored points exceed the cap {point_cap}")
        parts.append(gen.points)
        counts.append(gen.count())
    out = PointConfiguration(np.concatenate(parts), window, buffer)
    out.meta.update(generation_counts=counts, escaped_mass_bound=float(field.F.sf(buffer)),
                    eta=eta, m=field.m, g_max=g_max)
    return out


@dataclass
class FamilyResult:
    """A Hawkes family grown from an ancestor at 0 (positions are relative)."""

    points: PointConfiguration
    total_count: int
    generations: int
    censored: bool


def grow_family(F: DisplacementSpec, m: float, budget: int, stream: RngStream,
                origin: float = 0.0, right_limit: float = np.inf,
                max_generations: Optional[int] = None):
    """Breadth-first family growth; returns ``(positions, generations, censored)``.

    Points beyond ``right_limit`` are discarded together with their subtrees
    (displacements are nonnegative, so they cannot come back).  ``budget``
    caps the number of retained points; the generation that would exceed it
    is cut in breadth-first order and the family is flagged censored.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    current = np.array([origin])
    parts = [current]
    total = 1
    generations = 0
    censored = False
    while len(current):
        if max_generations is not None and generations >= max_generations:
            break
        k = stream.poisson(m, len(current))
        n_kids = int(k.sum())
        if n_kids == 0:
            break
        kids = np.repeat(current, k) + F.sample(stream, n_kids)
        kids = kids[kids <= right_limit]
        if total + len(kids) > budget:
            kids = kids[:budget - total]
            censored = True
        total += len(kids)
        if len(kids):
            parts.append(kids)
            generations += 1
        current = kids
        if censored:
            break
    return np.concatenate(parts), generations, censored


def simulate_family(F: DisplacementSpec, m: float, budget: int, stream: RngStream,
                    max_generations: Optional[int] = None,
                    right_limit: float = np.inf) -> FamilyResult:
    """One Galton-Watson family with ``Pois(m)`` offspring and ``F`` displacements."""
    pos, gens, censored = grow_family(F, m, budget, stream, 0.0, right_limit, max_generations)
    hi = right_limit if np.isfinite(right_limit) else float(pos.max())
    config = PointConfiguration(pos, (0.0, hi), 0.0)
    return FamilyResult(config, len(pos), gens, censored)


@dataclass
class FamilyBatch:
    positions: np.ndarray
    family: np.ndarray
    counts: np.ndarray
    censored: np.ndarray
    generation: np.ndarray = None
    expanded: np.ndarray = None   # offspring were drawn for this point


def grow_families(origins: np.ndarray, F: DisplacementSpec, m: float, budget: int,
                  stream: RngStream, right_limit: float = np.inf,
                  max_generations: Optional[int] = None) -> FamilyBatch:
    """Grow many independent families at once, generation by generation.

    Same semantics as :func:`grow_family` per family, but all families
    share one stream, so per-family paths depend on the whole batch.
    """
    origins = np.asarray(origins, dtype=float)
    n_fam = len(origins)
    keep = origins <= right_limit
    cur_pos = origins[keep]
    cur_fam = np.nonzero(keep)[0]
    counts = keep.astype(np.int64)
    censored = np.zeros(n_fam, dtype=bool)
    pos_parts, fam_parts = [cur_pos], [cur_fam]
    gen_parts = [np.zeros(len(cur_pos), dtype=np.int64)]
    exp_parts = [np.zeros(len(cur_pos), dtype=bool)]
    cur_idx = np.arange(len(cur_pos))
    g = 0
    while len(cur_pos):
        if max_generations is not None and g >= max_generations:
            break
        exp_parts[-1][cur_idx] = True
        k = stream.poisson(m, len(cur_pos))
        kid_fam = np.repeat(cur_fam, k)
        kid_pos = np.repeat(cur_pos, k) + F.sample(stream, len(kid_fam))
        inside = kid_pos <= right_limit
        kid_pos, kid_fam = kid_pos[inside], kid_fam[inside]
        new = np.bincount(kid_fam, minlength=n_fam)
        over = counts + new > budget
        if over.any():
            # rank of each child within its family, in breadth-first order
            order = np.argsort(kid_fam, kind="stable")
            starts = np.concatenate([[0], np.cumsum(new)[:-1]])
            rank = np.empty(len(kid_fam), dtype=np.int64)
            rank[order] = np.arange(len(kid_fam)) - starts[kid_fam[order]]
            room = budget - counts
            ok = rank < room[kid_fam]
            kid_pos, kid_fam = kid_pos[ok], kid_fam[ok]
            censored |= over
            new = np.bincount(kid_fam, minlength=n_fam)
        counts += new
        alive = ~censored[kid_fam]
        pos_parts.append(kid_pos)
        fam_parts.append(kid_fam)
        gen_parts.append(np.full(len(kid_pos), g + 1, dtype=np.int64))
        exp_parts.append(np.zeros(len(kid_pos), dtype=bool))
        cur_idx = np.nonzero(alive)[0]
        cur_pos, cur_fam = kid_pos[alive], kid_fam[alive]
        g += 1
    return FamilyBatch(np.concatenate(pos_parts), np.concatenate(fam_parts), counts, censored,
                       np.concatenate(gen_parts), np.concatenate(exp_parts))
