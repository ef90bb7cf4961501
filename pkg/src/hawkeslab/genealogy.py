"""Kesten (size-biased) trees, their two position labelings, and the backward
Palm construction.

Trees are stored as flat arrays in creation order; a parent is always
created before its children, so labelings can be filled level by level.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cluster import PointConfiguration, grow_families
from .distributions import DisplacementSpec
from .rng import RngStream

NORMAL, SPECIAL = "normal", "special"


@dataclass(frozen=True)
class GenealogyNode:
    id: int
    parent: Optional[int]
    kind: str
    position: Optional[float]
    depth: int


@dataclass
class KestenTree:
    parent: np.ndarray      # -1 for the root
    special: np.ndarray     # bool
    depth: np.ndarray
    offspring: np.ndarray   # drawn offspring count, -1 if never drawn
    spine: np.ndarray       # ids of special nodes from the root outwards
    truncated: bool
    position: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def budget_used(self):
        return len(self.parent)

    def __len__(self):
        return len(self.parent)

    def node(self, i) -> GenealogyNode:
        p = int(self.parent[i])
        pos = None if self.position is None else float(self.position[i])
        return GenealogyNode(int(i), None if p < 0 else p,
                             SPECIAL if self.special[i] else NORMAL, pos, int(self.depth[i]))

    def export(self) -> str:
        buf = io.StringIO()
        buf.write("id,parent,kind,position\n")
        pos = self.position if self.position is not None else np.full(len(self), np.nan)
        for i in range(len(self)):
            p = "" if self.parent[i] < 0 else str(int(self.parent[i]))
            kind = SPECIAL if self.special[i] else NORMAL
            buf.write(f"{i},{p},{kind},{pos[i]:.17g}\n")
        return buf.getvalue()


class _TreeBuilder:
    def __init__(self, budget):
        self.budget = budget
        self.parent, self.special, self.depth = [], [], []
        self.n = 0

    def add(self, parent, special, depth):
        room = self.budget - self.n
        take = min(room, len(parent))
        self.parent.append(np.asarray(parent[:take], dtype=np.int64))
        self.special.append(np.asarray(special[:take], dtype=bool))
        self.depth.append(np.asarray(depth[:take], dtype=np.int64))
        ids = np.arange(self.n, self.n + take)
        self.n += take
        return ids, take < len(parent)

    def arrays(self):
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)
        return cat(self.parent, np.int64), cat(self.special, bool), cat(self.depth, np.int64)


def grow_kesten(node_budget: int, stream: RngStream, spine_depth: Optional[int] = None,
                max_family_depth: Optional[int] = None) -> KestenTree:
    """Grow a Kesten tree with ``Pois(1)`` normal and ``1 + Pois(1)`` special offspring.

    Without ``spine_depth`` growth is plainly breadth-first until
    ``node_budget`` nodes exist.  With ``spine_depth = D`` the spine
    (special nodes at depths ``0..D``) is built first and the normal
    subtrees are then filled breadth-first, each at most ``max_family_depth``
    generations below its spine node.  The special child of a special node
    sits at a uniformly chosen slot among its children.
    """
    if node_budget < 1:
        raise ValueError("node_budget must be at least 1")
    if spine_depth is None:
        return _grow_bfs(node_budget, stream)
    return _grow_spine_first(node_budget, stream, spine_depth, max_family_depth)


def _grow_bfs(budget, stream):
    b = _TreeBuilder(budget)
    ids, _ = b.add(np.array([-1]), np.array([True]), np.array([0]))
    offspring = []
    frontier, f_special, f_depth = ids, np.array([True]), np.array([0])
    truncated = False
    while len(frontier):
        if b.n >= budget:
            truncated = True
            break
        k = stream.poisson(1.0, len(frontier)) + f_special.astype(np.int64)
        offspring.append((frontier, k))
        slot = np.where(f_special, (stream.random(len(frontier)) * k).astype(np.int64), -1)
        par = np.repeat(frontier, k)
        within = np.arange(len(par)) - np.repeat(np.cumsum(k) - k, k)
        spec = within == np.repeat(slot, k)
        dep = np.repeat(f_depth, k) + 1
        new_ids, cut = b.add(par, spec, dep)
        truncated |= cut
        frontier, f_special, f_depth = new_ids, spec[:len(new_ids)], dep[:len(new_ids)]
    return _finish(b, offspring, truncated)


def _grow_spine_first(budget, stream, spine_depth, max_family_depth):
    b = _TreeBuilder(budget)
    n_spine = spine_depth + 1
    par = np.arange(-1, n_spine - 1)
    spine_ids, cut = b.add(par, np.ones(n_spine, bool), np.arange(n_spine))
    truncated = True  # the spine itself is infinite
    k = stream.poisson(1.0, len(spine_ids)) + 1
    offspring = [(spine_ids, k)]
    # normal children of spine nodes, filled breadth-first after the spine
    n_normal = k - 1
    frontier_par = np.repeat(spine_ids, n_normal)
    dep = np.repeat(b.depth[0][:len(spine_ids)], n_normal) + 1
    fam_depth = np.ones(len(frontier_par), dtype=np.int64)
    if max_family_depth is not None and max_family_depth < 1:
        frontier_par = frontier_par[:0]
    frontier, cut = b.add(frontier_par, np.zeros(len(frontier_par), bool), dep)
    f_depth, f_fam = dep[:len(frontier)], fam_depth[:len(frontier)]
    while len(frontier):
        if max_family_depth is not None:
            live = f_fam < max_family_depth
            frontier, f_depth, f_fam = frontier[live], f_depth[live], f_fam[live]
            if not len(frontier):
                break
        if b.n >= budget:
            break
        k = stream.poisson(1.0, len(frontier))
        offspring.append((frontier, k))
        par = np.repeat(frontier, k)
        dep = np.repeat(f_depth, k) + 1
        fam = np.repeat(f_fam, k) + 1
        frontier, cut = b.add(par, np.zeros(len(par), bool), dep)
        f_depth, f_fam = dep[:len(frontier)], fam[:len(frontier)]
    tree = _finish(b, offspring, truncated)
    tree.meta.update(spine_depth=spine_depth, max_family_depth=max_family_depth)
    return tree


def _finish(b, offspring, truncated):
    parent, special, depth = b.arrays()
    off = np.full(len(parent), -1, dtype=np.int64)
    for ids, k in offspring:
        off[ids] = k
    spine = np.nonzero(special)[0]
    spine = spine[np.argsort(depth[spine], kind="stable")]
    return KestenTree(parent, special, depth, off, spine, bool(truncated))


def _label(tree, draw, stream, sign_special):
    pos = np.zeros(len(tree))
    if len(tree) <= 1:
        tree.position = pos
        return tree
    order = np.argsort(tree.depth, kind="stable")
    d_sorted = tree.depth[order]
    bounds = np.searchsorted(d_sorted, np.arange(1, d_sorted[-1] + 2))
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        ids = order[lo:hi]
        if not len(ids):
            continue
        step = draw(tree.special[ids], stream)
        pos[ids] = pos[tree.parent[ids]] + np.where(tree.special[ids], sign_special, 1.0) * step
    tree.position = pos
    return tree


def label_renewal(tree: KestenTree, F1: DisplacementSpec, F2: DisplacementSpec,
                  stream: RngStream) -> KestenTree:
    """Normal nodes step by ``F1``, special nodes by ``F2``, both forwards."""
    def draw(special, s):
        y1 = F1.sample(s, len(special))
        y2 = F2.sample(s, len(special))
        return np.where(special, y2, y1)
    return _label(tree, draw, stream, 1.0)


def label_backward(tree: KestenTree, F: DisplacementSpec, stream: RngStream) -> KestenTree:
    """Normal nodes step forward by ``F``; special nodes step backward by ``F``."""
    return _label(tree, lambda special, s: F.sample(s, len(special)), stream, -1.0)


def backward_palm_simulate(F: DisplacementSpec, spine_depth: int, family_budget: int,
                           window, stream: RngStream,
                           max_generations: Optional[int] = None) -> PointConfiguration:
    """Palm version built backwards from a special point at 0.

    Ancestors sit at ``-X1, -X1-X2, ...`` (``spine_depth`` of them); the point
    at 0 and every ancestor seed an independent critical family.  Only points
    in ``window`` are returned; points right of the window are pruned during
    growth, and ``family_budget`` caps the retained points per family.
    """
    if spine_depth < 0:
        raise ValueError("spine_depth must be nonnegative")
    lo, hi = window
    steps = F.sample(stream, spine_depth) if spine_depth else np.zeros(0)
    spine = -np.concatenate([[0.0], np.cumsum(steps)])
    batch = grow_families(spine, F, 1.0, family_budget, stream, right_limit=hi,
                          max_generations=max_generations)
    pts = batch.positions
    out = PointConfiguration(pts[(pts >= lo) & (pts <= hi)], (lo, hi), 0.0)
    out.meta.update(spine=spine, censored_families=int(batch.censored.sum()),
                    families=len(spine), expanded=pts[batch.expanded])
    return out


def _cell_masses(F, edges, parents, sign):
    """Expected number of ``parent + sign * X`` per cell, summed over parents."""
    if not len(parents):
        return np.zeros(len(edges) - 1)
    if sign > 0:
        c = F.cdf(edges[None, :] - parents[:, None])
    else:
        c = F.sf(parents[:, None] - edges[None, :])
    return np.diff(c, axis=1).sum(axis=0)


def palm_cell_counts(config: PointConfiguration, edges) -> np.ndarray:
    """Plain histogram of a backward Palm configuration on half-open cells."""
    return np.histogram(config.points, np.asarray(edges, dtype=float))[0].astype(float)


def palm_cell_conditional(config: PointConfiguration, F: DisplacementSpec, edges) -> np.ndarray:
    """Conditional-expectation estimate of the Palm mean measure per cell.

    Every point whose offspring were drawn contributes its expected children
    ``F(B - z)`` instead of the children's indicators, and every spine step
    contributes ``P(z - X in B)``.  The estimate has the same mean as
    :func:`palm_cell_counts` and a much smaller variance.
    """
    edges = np.asarray(edges, dtype=float)
    est = _cell_masses(F, edges, config.meta["expanded"], 1.0)
    est += _cell_masses(F, edges, config.meta["spine"][:-1], -1.0)
    est += np.histogram([0.0], edges)[0]
    return est


def tree_cell_conditional(tree: KestenTree, F: DisplacementSpec, edges) -> np.ndarray:
    """Same estimator as :func:`palm_cell_conditional` for a backward-labeled tree."""
    edges = np.asarray(edges, dtype=float)
    pos = tree.position
    drawn = tree.offspring >= 0
    # one normal child expected from every expanded node, special or not
    est = _cell_masses(F, edges, pos[drawn], 1.0)
    has_special_child = np.zeros(len(tree), dtype=bool)
    has_special_child[tree.parent[tree.special & (tree.parent >= 0)]] = True
    est += _cell_masses(F, edges, pos[has_special_child], -1.0)
    est += np.histogram([0.0], edges)[0]
    return est
