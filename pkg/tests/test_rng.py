import numpy as np
from hypothesis import given, strategies as st

from rnnpuf import rng


def test_hash_is_pure_and_index_addressed():
    idx = np.arange(1000)
    full = rng.standard_normal(3, idx)
    assert np.array_equal(full, rng.standard_normal(3, idx))
    # any slice of indices reproduces the same values: draws do not depend on batch layout
    assert np.array_equal(full[500:], rng.standard_normal(3, idx[500:]))
    assert np.array_equal(full[::-1], rng.standard_normal(3, idx[::-1]))


def test_streams_and_seeds_differ():
    idx = np.arange(100)
    assert not np.array_equal(rng.uniform(1, idx, 0), rng.uniform(1, idx, 1))
    assert not np.array_equal(rng.uniform(1, idx), rng.uniform(2, idx))


def test_normal_moments():
    z = rng.standard_normal(11, np.arange(200_000))
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    # the two comparator inputs draw from independent streams
    other = rng.standard_normal(11, np.arange(200_000), stream=1)
    assert abs(np.corrcoef(z, other)[0, 1]) < 0.01


def test_uniform_range():
    u = rng.uniform(5, np.arange(100_000))
    assert u.min() >= 0.0 and u.max() < 1.0
    counts = np.histogram(u, bins=10, range=(0, 1))[0]
    assert counts.min() > 9_500 and counts.max() < 10_500


@given(st.integers(0, 2**62), st.integers(0, 2**40))
def test_single_draw_matches_batch(seed, index):
    batch = rng.standard_normal(seed, np.array([index, index + 1]))
    assert rng.standard_normal(seed, np.array([index]))[0] == batch[0]


def test_derive_seed_is_stable():
    assert rng.derive_seed(1, 2, 3) == rng.derive_seed(1, 2, 3)
    assert rng.derive_seed(1, 2, 3) != rng.derive_seed(3, 2, 1)
    assert 0 <= rng.derive_seed(7) < 2**63
