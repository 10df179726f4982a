import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_c_index, direct_ibs
from graft.errors import NumericError
from graft.km import fit_km
from graft.metrics import brier_scores, c_index, censoring_km, ibs, make_eval_grid


def censored_instance(n, seed):
    rng = np.random.default_rng(seed)
    t = np.round(rng.exponential(5, n), 1) + 0.1  # rounding forces ties
    e = (rng.random(n) < 0.7).astype(int)
    s = np.round(rng.normal(size=n), 1)
    return s, t, e


def test_c_index_perfect_and_reversed():
    t = np.array([1.0, 2, 3])
    e = np.ones(3, dtype=int)
    assert c_index(np.array([1.0, 2, 3]), t, e) == 1.0
    assert c_index(np.array([3.0, 2, 1]), t, e) == 0.0


def test_c_index_score_ties_count_half():
    assert c_index(np.zeros(3), np.array([1.0, 2, 3]), np.ones(3)) == 0.5


def test_c_index_no_comparable_pairs():
    with pytest.raises(NumericError):
        c_index(np.array([1.0, 2]), np.array([1.0, 2]), np.array([0, 0]))


@pytest.mark.parametrize("seed", range(10))
def test_c_index_brute_force(seed):
    s, t, e = censored_instance(200, seed)
    assert c_index(s, t, e) == brute_c_index(s, t, e)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 60), st.integers(0, 2**31))
def test_c_index_symmetry_and_monotone_invariance(n, seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=n)
    t = rng.exponential(size=n)
    e = np.ones(n, dtype=int)
    c = c_index(s, t, e)
    assert c + c_index(-s, t, e) == pytest.approx(1.0, abs=1e-12)
    assert c_index(np.exp(3 * s) + 1, t, e) == c


def test_ibs_constant_half_no_censoring():
    rng = np.random.default_rng(0)
    t = rng.exponential(3, 100) + 0.01
    e = np.ones(100, dtype=int)
    grid = make_eval_grid(t, censoring_km(t, e)).times
    assert len(grid) == 100
    S = np.full((100, len(grid)), 0.5)
    assert abs(ibs(S, t, e, grid, t, e) - 0.25) <= 1e-12


def test_ibs_oracle_curves_zero():
    t = np.arange(1.0, 21.0)
    e = np.ones(20, dtype=int)
    grid = np.linspace(1, 20, 100)
    S = (t[:, None] > grid[None, :]).astype(float)
    assert ibs(S, t, e, grid, t, e) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_ibs_direct_summation(seed):
    rng = np.random.default_rng(seed)
    n = 60
    t = rng.exponential(4, n) + 0.05
    e = (rng.random(n) < 0.65).astype(int)
    tt = rng.exponential(4, 80) + 0.05
    te = (rng.random(80) < 0.65).astype(int)
    grid = np.linspace(t.min(), t.max(), 100)
    S = np.exp(-np.outer(rng.uniform(0.1, 0.5, n), grid))
    got = ibs(S, t, e, grid, tt, te)
    assert abs(got - direct_ibs(S, t, e, grid, tt, te)) <= 1e-10


def test_ibs_callable_matches_matrix():
    rng = np.random.default_rng(3)
    t = rng.exponential(2, 30) + 0.1
    e = (rng.random(30) < 0.7).astype(int)
    rate = rng.uniform(0.2, 1, 30)
    grid = np.linspace(t.min(), t.max(), 100)
    S = np.exp(-np.outer(rate, grid))
    assert ibs(lambda g: np.exp(-np.outer(rate, g)), t, e, grid, t, e) == ibs(S, t, e, grid, t, e)


def test_grid_truncated_where_censoring_survival_vanishes():
    t = np.array([1.0, 2, 3, 4])
    e = np.array([1, 1, 1, 0])
    G = censoring_km(t, e)
    grid = make_eval_grid(t, G).times
    assert grid.max() < 4.0 and np.all(G(grid) > 0)


def test_brier_uses_left_limit():
    # subject dies at t=2 while another is censored at t=2: G(2-) = 1, G(2) < 1
    t = np.array([2.0, 2.0, 5.0])
    e = np.array([1, 0, 1])
    G = censoring_km(t, e)
    bs = brier_scores(np.array([[0.4], [0.5], [0.9]]), t, e, np.array([3.0]), G)
    expected = (0.4 ** 2 / 1.0 + (1 - 0.9) ** 2 / G(3.0)) / 3
    assert bs[0] == pytest.approx(expected, abs=1e-15)


def test_ibs_zero_censoring_survival_errors():
    t = np.array([1.0, 2.0])
    e = np.array([0, 0])
    with pytest.raises(NumericError):
        ibs(np.ones((2, 2)), t, e, np.array([3.0, 4.0]), t, e)


def test_marginal_km_beats_constant_half():
    rng = np.random.default_rng(0)
    t = rng.exponential(2, 300) + 0.01
    e = np.ones(300, dtype=int)
    grid = make_eval_grid(t, censoring_km(t, e)).times
    km = fit_km(t, e)
    S_km = np.tile(km(grid), (300, 1))
    S_half = np.full_like(S_km, 0.5)
    a, b = ibs(S_km, t, e, grid, t, e), ibs(S_half, t, e, grid, t, e)
    assert 0 <= a <= b
