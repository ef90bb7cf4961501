import numpy as np
import pytest

from hawkeslab.distributions import DisplacementSpec, TruncatedSpec
from hawkeslab.hawkes_sim import (
    RenewalImmigrationSpec, TwoIndexSpec, renewal_epochs, simulate_renewal_hawkes,
    simulate_two_index,
)
from hawkeslab.rng import split_stream

PARETO = DisplacementSpec.pareto(0.5, 1.0)


def test_renewal_epochs_deterministic_grid():
    ep = renewal_epochs(DisplacementSpec.deterministic(2.0), -3.0, 7.0, split_stream(0))
    assert ep.tolist() == [-3.0, -1.0, 1.0, 3.0, 5.0, 7.0]
    ep = renewal_epochs(DisplacementSpec.deterministic(2.0), 0.0, 5.0, split_stream(0), scale=0.5)
    assert ep.tolist() == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]


def test_renewal_epochs_atom_at_zero():
    # truncated interarrivals put atoms at zero, so epochs can coincide
    inter = TruncatedSpec(PARETO, 9.0)
    ep = renewal_epochs(inter, 0.0, 1e4, split_stream(1))
    assert np.all(np.diff(ep) >= 0)
    assert np.mean(np.diff(ep) == 0) == pytest.approx(1 / 3, abs=0.03)
    assert len(ep) / 1e4 == pytest.approx(0.5, rel=0.05)


def test_spec_validation():
    with pytest.raises(ValueError):
        RenewalImmigrationSpec(PARETO, 1.0)
    with pytest.raises(ValueError):
        RenewalImmigrationSpec(PARETO, 0.5, target_lambda=0)
    spec = RenewalImmigrationSpec(PARETO, 0.5, horizon=100.0)
    assert spec.burnin_length == 1000.0
    assert spec.interarrival().c == pytest.approx(9.0)
    assert RenewalImmigrationSpec(PARETO, 0.5, burnin=5.0).burnin_length == 5.0


def test_renewal_hawkes_intensity_small():
    spec = RenewalImmigrationSpec(PARETO, 0.5, horizon=2e4)
    lam, imm = [], []
    for seed in range(8):
        cfg = simulate_renewal_hawkes(spec, split_stream(seed, 0, "rh"))
        lam.append(cfg.count() / spec.horizon)
        imm.append(cfg.meta["n_immigrants_window"] / spec.horizon)
    se = np.std(lam, ddof=1) / np.sqrt(8)
    assert abs(np.mean(lam) - 1.0) < 3 * se + 0.01
    assert np.mean(imm) == pytest.approx(0.5, abs=0.01)
    assert cfg.meta["c"] == pytest.approx(9.0)
    assert cfg.meta["burnin"] == 2e5
    assert cfg.points.min() >= -2e5 and cfg.points.max() <= 2e4


def test_renewal_hawkes_target_lambda_scales():
    spec = RenewalImmigrationSpec(DisplacementSpec.exponential(0.25), 0.5, target_lambda=3.0,
                                  horizon=1e4, burnin=200.0)
    cfg = simulate_renewal_hawkes(spec, split_stream(3))
    assert cfg.count() / 1e4 == pytest.approx(3.0, rel=0.05)


def test_renewal_hawkes_deterministic():
    spec = RenewalImmigrationSpec(PARETO, 0.9, horizon=1e3)
    a = simulate_renewal_hawkes(spec, split_stream(11))
    b = simulate_renewal_hawkes(spec, split_stream(11))
    assert np.array_equal(a.points, b.points)


def test_two_index_structure():
    spec = TwoIndexSpec(PARETO, DisplacementSpec.pareto(0.5, 1.0), horizon=500.0, family_budget=1000)
    cfg = simulate_two_index(spec, split_stream(4))
    ep = cfg.meta["epochs"]
    assert ep[0] == 0.0
    assert cfg.points.min() >= 0.0 and cfg.points.max() <= 500.0
    assert cfg.meta["family_counts"].sum() == len(cfg)
    assert (cfg.meta["family_counts"] <= 1000).all()


def test_two_index_budget_monotone():
    F1, F2 = DisplacementSpec.pareto(0.3, 1.0), DisplacementSpec.pareto(0.7, 1.0)
    small = simulate_two_index(TwoIndexSpec(F1, F2, 1e3, 20), split_stream(5))
    big = simulate_two_index(TwoIndexSpec(F1, F2, 1e3, 10 ** 6), split_stream(5))
    assert np.array_equal(small.meta["epochs"], big.meta["epochs"])
    assert big.meta["censored_families"] == 0
    # per-family streams: uncensored families are identical under both budgets
    ok = ~small.meta["censored"]
    assert np.array_equal(small.meta["family_counts"][ok], big.meta["family_counts"][ok])
    assert (small.meta["family_counts"] <= big.meta["family_counts"]).all()
