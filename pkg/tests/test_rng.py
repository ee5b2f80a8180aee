import numpy as np

from mmmt.rng import RngState


def test_splitmix64_published_anchor():
    # cross-implementation determinism anchor for seed 0
    assert RngState(0).next_u64() == 0xE220A8397B1DCDAF


def test_vectorized_fill_matches_scalar_draws():
    scalar = RngState(1234)
    vals = [scalar.next_u64() for _ in range(257)]
    vec = RngState(1234).fill_u64(257)
    assert [int(v) for v in vec] == vals


def test_fill_advances_state_like_scalar():
    a, b = RngState(99), RngState(99)
    a.fill_u64(10)
    for _ in range(10):
        b.next_u64()
    assert a.state == b.state
    assert a.next_u64() == b.next_u64()


def test_uniform_range_and_determinism():
    u = RngState(7).uniform(10000)
    assert (u >= 0).all() and (u < 1).all()
    assert np.array_equal(u, RngState(7).uniform(10000))
    assert abs(u.mean() - 0.5) < 0.02


def test_uniform_scalar_matches_vector():
    r = RngState(42)
    first = [r.next_uniform() for _ in range(5)]
    assert np.allclose(RngState(42).uniform(5), first, rtol=0, atol=0)


def test_gaussian_moments():
    g = RngState(3).gaussian(200_000)
    assert abs(g.mean()) < 0.01
    assert abs(g.std() - 1.0) < 0.01
    assert np.isfinite(g).all()


def test_shuffle_is_permutation_and_deterministic():
    arr = np.arange(50)
    RngState(11).shuffle(arr)
    assert sorted(arr.tolist()) == list(range(50))
    arr2 = np.arange(50)
    RngState(11).shuffle(arr2)
    assert np.array_equal(arr, arr2)
    assert not np.array_equal(arr, np.arange(50))


def test_choice_weighted_distribution():
    cum = np.array([0.25, 1.0])  # weights 1:3
    draws = RngState(5).choice_weighted(cum, 100_000)
    frac1 = (draws == 1).mean()
    assert abs(frac1 - 0.75) < 0.01


def test_derive_gives_distinct_streams():
    base = RngState(8)
    a, b = base.derive(1), base.derive(2)
    assert a.next_u64() != b.next_u64()
    # derivation does not consume from the parent
    assert base.state == RngState(8).state
