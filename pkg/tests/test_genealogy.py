import numpy as np
import pytest

from hawkeslab.distributions import DisplacementSpec
from hawkeslab.genealogy import (
    backward_palm_simulate, grow_kesten, label_backward, label_renewal, palm_cell_conditional,
    palm_cell_counts, tree_cell_conditional,
)
from hawkeslab.rng import split_stream

PARETO = DisplacementSpec.pareto(0.3, 1.0)


def _check_spine(tree):
    sp = tree.spine
    assert tree.parent[sp[0]] == -1
    assert np.array_equal(tree.depth[sp], np.arange(len(sp)))
    assert np.array_equal(tree.parent[sp[1:]], sp[:-1])
    # one special child per expanded special node
    for i in sp:
        if tree.offspring[i] >= 0:
            kids = np.nonzero(tree.parent == i)[0]
            if len(kids) == tree.offspring[i]:
                assert tree.special[kids].sum() == 1


def test_bfs_tree_structure():
    tree = grow_kesten(5000, split_stream(1, 0, "k"))
    assert len(tree) == 5000 and tree.truncated
    _check_spine(tree)
    assert (tree.parent[1:] < np.arange(1, len(tree))).all()
    assert (tree.depth[1:] == tree.depth[tree.parent[1:]] + 1).all()
    drawn = tree.offspring >= 0
    assert (tree.offspring[drawn & tree.special] >= 1).all()


def test_spine_first_tree_structure():
    tree = grow_kesten(20_000, split_stream(2, 0, "k"), spine_depth=30, max_family_depth=5)
    _check_spine(tree)
    assert len(tree.spine) == 31
    # every normal node lies at most five generations below its spine ancestor
    spine_depth_of = np.zeros(len(tree), dtype=np.int64)
    for i in range(len(tree)):
        p = tree.parent[i]
        spine_depth_of[i] = tree.depth[i] if tree.special[i] else spine_depth_of[p]
    assert (tree.depth - spine_depth_of <= 5).all()
    assert tree.meta["spine_depth"] == 30


def test_offspring_means():
    tree = grow_kesten(200_000, split_stream(3, 0, "k"))
    drawn = tree.offspring >= 0
    sp = tree.offspring[drawn & tree.special]
    nm = tree.offspring[drawn & ~tree.special]
    assert nm.mean() == pytest.approx(1.0, abs=4 * nm.std() / np.sqrt(len(nm)))
    assert sp.mean() == pytest.approx(2.0, abs=4 * sp.std() / np.sqrt(len(sp)))
    assert (sp >= 1).all()


def test_budget_validation():
    with pytest.raises(ValueError):
        grow_kesten(0, split_stream(0))
    assert len(grow_kesten(1, split_stream(0))) == 1


def test_labelings():
    tree = grow_kesten(3000, split_stream(4, 0, "k"), spine_depth=10, max_family_depth=3)
    label_backward(tree, DisplacementSpec.deterministic(1.0), split_stream(4, 1, "k"))
    pos = tree.position
    assert pos[tree.spine].tolist() == [-float(d) for d in range(11)]
    normal = ~tree.special
    assert np.allclose(pos[normal] - pos[tree.parent[normal]], 1.0)
    label_renewal(tree, DisplacementSpec.deterministic(1.0), DisplacementSpec.deterministic(2.0),
                  split_stream(4, 2, "k"))
    assert tree.position[tree.spine].tolist() == [2.0 * d for d in range(11)]
    assert np.allclose(tree.position[normal] - tree.position[tree.parent[normal]], 1.0)


def test_export():
    tree = grow_kesten(5, split_stream(5))
    label_backward(tree, PARETO, split_stream(6))
    lines = tree.export().strip().split("\n")
    assert lines[0] == "id,parent,kind,position"
    assert lines[1].startswith("0,,special,0")
    assert len(lines) == 6
    node = tree.node(0)
    assert node.parent is None and node.kind == "special"


def test_backward_palm_simulate():
    cfg = backward_palm_simulate(PARETO, 20, 1000, (-10, 10), split_stream(7))
    assert 0.0 in cfg.points
    assert cfg.points.min() >= -10 and cfg.points.max() <= 10
    sp = cfg.meta["spine"]
    assert len(sp) == 21 and sp[0] == 0.0 and (np.diff(sp) <= -1.0).all()
    with pytest.raises(ValueError):
        backward_palm_simulate(PARETO, -1, 10, (-1, 1), split_stream(0))


def test_conditional_estimator_unbiased():
    edges = np.arange(-5.0, 6.0)
    F = DisplacementSpec.pareto(0.5, 1.0)
    raw, cond = [], []
    for seed in range(400):
        cfg = backward_palm_simulate(F, 20, 10 ** 5, (-5, 5), split_stream(seed, 0, "palm"),
                                     max_generations=20)
        raw.append(palm_cell_counts(cfg, edges))
        cond.append(palm_cell_conditional(cfg, F, edges))
    raw, cond = np.array(raw), np.array(cond)
    diff = raw - cond
    se = diff.std(axis=0, ddof=1) / np.sqrt(len(diff))
    assert (np.abs(diff.mean(axis=0)) <= 4 * se + 1e-12).all()
    # the conditional estimator is less noisy
    assert cond.std(axis=0).sum() < raw.std(axis=0).sum()
    # the cell holding 0 contains the typical point itself
    assert (cond[:, 5] >= 1).all()


def test_tree_conditional_matches_backward_construction():
    edges = np.arange(-5.0, 6.0)
    F = DisplacementSpec.pareto(0.5, 1.0)
    a, b = [], []
    for seed in range(300):
        cfg = backward_palm_simulate(F, 15, 10 ** 5, (-5, 5), split_stream(seed, 0, "bw"),
                                     max_generations=15)
        a.append(palm_cell_conditional(cfg, F, edges))
        tree = grow_kesten(10 ** 6, split_stream(seed, 0, "kt"), spine_depth=15,
                           max_family_depth=15)
        label_backward(tree, F, split_stream(seed, 1, "kt"))
        b.append(tree_cell_conditional(tree, F, edges))
    a, b = np.array(a), np.array(b)
    se = np.sqrt(a.var(axis=0, ddof=1) / len(a) + b.var(axis=0, ddof=1) / len(b))
    assert (np.abs(a.mean(axis=0) - b.mean(axis=0)) <= 4 * se).all()
