import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chaoscast.grid import BinGrid, build_grid, expectation, label_of, sample, std_dev


def brute_moments(alpha, p):
    mean = 0.0
    for i in range(len(p)):
        mean += 0.5 * (alpha[i] + alpha[i + 1]) * p[i]
    var = 0.0
    for i in range(len(p)):
        var += (0.5 * (alpha[i] + alpha[i + 1]) - mean) ** 2 * p[i]
    return mean, var**0.5


def test_padding_rule():
    # range 2 = 4 bins of 0.5, plus 5 padding bins each side
    g = build_grid(np.linspace(-1, 1, 11), 0.5, 1.0)
    assert g.n_bins == 14
    assert g.alpha[0] == pytest.approx(-3.5) and g.alpha[-1] == pytest.approx(3.5)
    assert g.width == 0.5


def test_width_follows_reference_sd():
    g = build_grid(np.array([0.0, 0.3, 1.0]), 0.02, 2.5)
    assert g.width == pytest.approx(0.05)
    assert np.allclose(np.diff(g.alpha), 0.05, atol=1e-12, rtol=0)


def test_degenerate_samples():
    with pytest.raises(ValueError):
        build_grid(np.full(10, 0.7), 0.02, 1.0)
    with pytest.raises(ValueError):
        build_grid(np.array([]), 0.02, 1.0)


@pytest.fixture
def grid10():
    return BinGrid.uniform(-1.0, 0.2, 10)


def test_label_left_closed(grid10):
    assert label_of(grid10, grid10.alpha[2]) == 2
    assert label_of(grid10, grid10.midpoints[6]) == 6


def test_label_clamps(grid10):
    assert label_of(grid10, grid10.alpha[0] - 100.0) == 0
    assert label_of(grid10, grid10.alpha[-1]) == 9
    assert label_of(grid10, 1e300) == 9


def test_label_of_midpoints_is_identity(grid10):
    assert np.array_equal(label_of(grid10, grid10.midpoints), np.arange(10))


def test_expectation_examples():
    g = BinGrid(np.array([0.0, 1.0, 2.0, 3.0]), 1.0)
    assert expectation(g, [0.25, 0.5, 0.25]) == pytest.approx(1.5, abs=1e-15)
    assert expectation(g, [0, 0, 1.0]) == 2.5


def test_symmetric_uniform_mean_is_zero(grid10):
    assert abs(expectation(grid10, np.full(10, 0.1))) < 1e-12


def test_std_examples():
    g = BinGrid(np.array([-1.5, -0.5, 0.5, 1.5]), 1.0)
    assert std_dev(g, [0.5, 0.0, 0.5]) == pytest.approx(1.0, abs=1e-15)
    assert std_dev(g, [0.0, 1.0, 0.0]) == 0.0


def test_uniform_std_matches_brute(grid10):
    p = np.full(10, 0.1)
    assert std_dev(grid10, p) == pytest.approx(brute_moments(grid10.alpha, p)[1], abs=1e-12)


probs = arrays(np.float64, 12, elements=st.floats(0.0, 1.0)).filter(lambda a: a.sum() > 1e-3).map(lambda a: a / a.sum())


@settings(max_examples=200)
@given(p=probs, lo=st.floats(-5, 5), width=st.floats(0.01, 2.0))
def test_moments_match_brute_force(p, lo, width):
    g = BinGrid.uniform(lo, width, 12)
    m, s = brute_moments(g.alpha, p)
    assert expectation(g, p) == pytest.approx(m, abs=1e-12)
    assert std_dev(g, p) == pytest.approx(s, abs=1e-12)


@given(p=probs, seed=st.integers(0, 2**32 - 1))
def test_samples_land_on_midpoints(p, seed):
    g = BinGrid.uniform(0.0, 0.5, 12)
    rng = np.random.default_rng(seed)
    v = sample(g, p, rng)
    i = int(np.argmin(np.abs(g.midpoints - v)))
    assert v == g.midpoints[i]
    assert p[i] > 0


def test_one_hot_sampling(grid10):
    p = np.zeros(10)
    p[4] = 1.0
    rng = np.random.default_rng(0)
    assert {sample(grid10, p, rng) for _ in range(100)} == {grid10.midpoints[4]}


def test_sampling_frequencies():
    g = BinGrid(np.array([0.0, 1.0, 2.0, 3.0]), 1.0)
    rng = np.random.default_rng(123)
    draws = np.array([sample(g, [0.5, 0.0, 0.5], rng) for _ in range(100_000)])
    assert 0.49 <= np.mean(draws == 0.5) <= 0.51
    assert 0.49 <= np.mean(draws == 2.5) <= 0.51


def test_sampling_reproducible(grid10):
    p = np.linspace(1, 2, 10)
    p /= p.sum()
    a = [sample(grid10, p, np.random.default_rng(5)) for _ in range(3)]
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    assert [sample(grid10, p, r1) for _ in range(50)] == [sample(grid10, p, r2) for _ in range(50)]
    assert len(set(a)) == 1


def test_grid_invariants():
    with pytest.raises(ValueError):
        BinGrid(np.array([0.0, 1.0, 2.0]), 1.0)
    with pytest.raises(ValueError):
        BinGrid(np.array([0.0, 1.0, 2.5, 3.0]), 1.0)
    g = BinGrid.uniform(0.0, 0.1, 5)
    assert BinGrid.from_dict(g.to_dict()) == g
