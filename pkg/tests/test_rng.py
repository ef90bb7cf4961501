import numpy as np
import pytest

from hawkeslab.rng import spawn, split_stream


def test_same_key_same_draws():
    a = split_stream(7, 3, "walk").random(5)
    b = split_stream(7, 3, "walk").random(5)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("other", [(8, 3, "walk"), (7, 4, "walk"), (7, 3, "inar")])
def test_distinct_keys_differ(other):
    a = split_stream(7, 3, "walk").random(5)
    b = split_stream(*other).random(5)
    assert not np.array_equal(a, b)


def test_stream_uses_philox():
    assert isinstance(split_stream(0).bit_generator, np.random.Philox)


def test_negative_keys_rejected():
    with pytest.raises(ValueError):
        split_stream(-1)
    with pytest.raises(ValueError):
        split_stream(0, -1)


def test_large_seed_accepted():
    split_stream(2 ** 64 - 1, 0).random()


def test_spawn_is_reproducible():
    a = [s.random() for s in spawn(split_stream(1), 3)]
    b = [s.random() for s in spawn(split_stream(1), 3)]
    assert a == b
    assert len(set(a)) == 3


def test_neighbouring_replicates_uncorrelated():
    a = split_stream(5, 1).random(10_000)
    b = split_stream(5, 2).random(10_000)
    assert abs(np.corrcoef(a, b)[0, 1]) <= 3 / np.sqrt(10_000)
