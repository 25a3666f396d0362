"""Solver oracle tests: brute-force agreement, certificates, seeded behavior."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualseed.errors import InfeasibleSeed, NonFinite, NonSquare, ShapeMismatch, TooLarge
from dualseed.lap_core import (
    Assignment,
    CostMatrix,
    DualPotentials,
    brute_force,
    center_duals,
    reduced_costs,
    solve_cold,
    solve_seeded,
    verify_certificate,
)


def _random_matrix(rng, n, integer=False):
    if integer:
        return CostMatrix.from_array(rng.integers(0, 20, size=(n, n)).astype(np.float64))
    return CostMatrix.from_array(rng.random((n, n)))


# ---------------------------------------------------------------- CostMatrix

def test_cost_matrix_rejects_non_square():
    with pytest.raises(NonSquare):
        CostMatrix.from_array(np.zeros((2, 3)))


def test_cost_matrix_rejects_nan():
    bad = np.zeros((2, 2))
    bad[0, 1] = np.nan
    with pytest.raises(NonFinite):
        CostMatrix.from_array(bad)


def test_cost_matrix_rejects_empty():
    with pytest.raises(NonSquare):
        CostMatrix.from_array(np.zeros((0, 0)))


# ---------------------------------------------------------------- brute force

def test_brute_force_2x2():
    cost, perm = brute_force(CostMatrix.from_array(np.array([[1.0, 2.0], [2.0, 1.0]])))
    assert cost == 2.0
    assert list(perm) == [0, 1]


def test_brute_force_3x3_enumerated():
    c = CostMatrix.from_array(np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]))
    cost, perm = brute_force(c)
    assert cost == 5.0
    assert list(perm) == [1, 0, 2]


def test_brute_force_1x1():
    cost, perm = brute_force(CostMatrix.from_array(np.array([[5.0]])))
    assert cost == 5.0
    assert list(perm) == [0]


def test_brute_force_lexicographic_ties():
    # every permutation of a constant matrix costs the same; the identity is
    # the lexicographically smallest
    c = CostMatrix.from_array(np.full((4, 4), 3.0))
    cost, perm = brute_force(c)
    assert cost == 12.0
    assert list(perm) == [0, 1, 2, 3]


def test_brute_force_size_guard():
    with pytest.raises(TooLarge):
        brute_force(CostMatrix.from_array(np.zeros((11, 11))))


def test_brute_force_matches_exhaustive_enumeration():
    rng = np.random.default_rng(7)
    c = _random_matrix(rng, 5)
    best = min(
        (sum(c.values[i, p[i]] for i in range(5)), list(p))
        for p in itertools.permutations(range(5))
    )
    cost, perm = brute_force(c)
    assert cost == pytest.approx(best[0], abs=1e-12)
    assert list(perm) == best[1]


# ---------------------------------------------------------------- solve_cold

def test_cold_2x2_diagonal():
    a, d, s = solve_cold(CostMatrix.from_array(np.array([[1.0, 2.0], [2.0, 1.0]])))
    assert a.total_cost == 2.0
    assert list(a.row_to_col) == [0, 1]


def test_cold_3x3_example():
    c = CostMatrix.from_array(np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]))
    a, d, s = solve_cold(c)
    assert a.total_cost == 5.0
    assert list(a.row_to_col) == [1, 0, 2]
    assert verify_certificate(c, a, d)


def test_cold_1x1():
    a, d, s = solve_cold(CostMatrix.from_array(np.array([[7.5]])))
    assert a.total_cost == 7.5
    assert list(a.row_to_col) == [0]
    assert s.greedy_matched + s.free_rows == 1


def test_cold_100_random_8x8_vs_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        c = _random_matrix(rng, 8)
        a, d, s = solve_cold(c)
        oracle_cost, _ = brute_force(c)
        assert a.total_cost == pytest.approx(oracle_cost, abs=1e-9)
        assert verify_certificate(c, a, d)


def test_cold_stats_invariants():
    rng = np.random.default_rng(3)
    for n in (1, 2, 5, 17, 40):
        c = _random_matrix(rng, n)
        _, _, s = solve_cold(c)
        assert s.greedy_matched + s.free_rows == n
        assert s.augment_searches == s.free_rows
        assert set(s.phase_times) == {"init", "greedy", "augment"}


def test_cold_deterministic():
    rng = np.random.default_rng(5)
    c = _random_matrix(rng, 12)
    a1, d1, s1 = solve_cold(c)
    a2, d2, s2 = solve_cold(c)
    assert np.array_equal(a1.row_to_col, a2.row_to_col)
    assert np.array_equal(d1.u, d2.u) and np.array_equal(d1.v, d2.v)
    assert (s1.greedy_matched, s1.dual_update_steps) == (s2.greedy_matched, s2.dual_update_steps)


# -------------------------------------------------------------- solve_seeded

def test_seeded_equality_edges_example():
    c = CostMatrix.from_array(np.array([[1.0, 2.0], [2.0, 1.0]]))
    seed = DualPotentials(np.array([1.0, 2.0]), np.array([0.0, -1.0]))
    r = reduced_costs(c.values, seed.u, seed.v)
    assert np.array_equal(r, np.array([[0.0, 2.0], [0.0, 0.0]]))
    a, d, s = solve_seeded(c, seed)
    assert a.total_cost == 2.0
    assert s.greedy_matched == 2
    assert s.dual_update_steps == 0


def test_seeded_zero_seed():
    c = CostMatrix.from_array(np.array([[1.0, 2.0], [2.0, 1.0]]))
    a_cold, _, _ = solve_cold(c)
    a, _, _ = solve_seeded(c, DualPotentials(np.zeros(2), np.zeros(2)))
    assert a.total_cost == a_cold.total_cost
    assert np.array_equal(a.row_to_col, a_cold.row_to_col)


def test_seeded_rejects_infeasible():
    c = CostMatrix.from_array(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(InfeasibleSeed):
        solve_seeded(c, DualPotentials(np.array([2.0, 0.0]), np.array([0.0, 0.0])))


def test_seeded_rejects_wrong_shape():
    c = CostMatrix.from_array(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ShapeMismatch):
        solve_seeded(c, DualPotentials(np.zeros(3), np.zeros(3)))


def test_optimal_seed_idle_on_50_instances():
    rng = np.random.default_rng(21)
    for _ in range(50):
        c = _random_matrix(rng, 16)
        _, duals, _ = solve_cold(c)
        shift = duals.u.mean()
        u_star = duals.u - shift
        # columnwise-minimum completion of the gauge-fixed row potentials
        v_hat = (c.values - u_star[:, None]).min(axis=0)
        a, d, s = solve_seeded(c, DualPotentials(u_star, v_hat))
        assert s.dual_update_steps == 0
        assert np.array_equal(d.u, u_star) and np.array_equal(d.v, v_hat)


def test_seed_independence_of_value_200_seeds():
    rng = np.random.default_rng(33)
    c = _random_matrix(rng, 32)
    a_cold, _, _ = solve_cold(c)
    for _ in range(200):
        u = rng.normal(0.0, 0.3, 32)
        v = (c.values - u[:, None]).min(axis=0)
        a, d, s = solve_seeded(c, DualPotentials(u, v))
        assert a.total_cost == pytest.approx(a_cold.total_cost, abs=1e-9)
        assert verify_certificate(c, a, d)
        assert s.greedy_matched + s.free_rows == 32
        assert s.augment_searches == s.free_rows


# --------------------------------------------------------- verify_certificate

def test_certificate_accepts_solver_output():
    rng = np.random.default_rng(2)
    c = _random_matrix(rng, 9)
    a, d, _ = solve_cold(c)
    result = verify_certificate(c, a, d)
    assert result
    assert result.reason is None


def test_certificate_rejects_infeasible_dual():
    rng = np.random.default_rng(4)
    c = _random_matrix(rng, 6)
    a, d, _ = solve_cold(c)
    spread = float(c.values.max() - c.values.min())
    bad = DualPotentials(d.u.copy(), d.v.copy())
    bad.u[2] += 2.0 * spread
    result = verify_certificate(c, a, bad)
    assert not result
    assert result.reason == "infeasible-dual"


def test_certificate_rejects_slack_assignment():
    c = CostMatrix.from_array(np.array([[0.0, 1.0], [1.0, 0.0]]))
    a, d, _ = solve_cold(c)
    swapped = Assignment(a.row_to_col[::-1].copy(), float(c.values[0, 1] + c.values[1, 0]))
    result = verify_certificate(c, swapped, d)
    assert not result
    assert result.reason == "slackness-violated"


def test_certificate_rejects_non_bijection():
    c = CostMatrix.from_array(np.array([[0.0, 1.0], [1.0, 0.0]]))
    a, d, _ = solve_cold(c)
    broken = Assignment(np.array([0, 0]), 0.0)
    result = verify_certificate(c, broken, d)
    assert not result
    assert result.reason == "not-bijection"


# -------------------------------------------------------------- center_duals

def test_center_duals_preserves_certificate_and_tightness():
    rng = np.random.default_rng(17)
    for n in (2, 3, 8, 20):
        c = _random_matrix(rng, n)
        a, d, _ = solve_cold(c)
        centered = center_duals(c, a, d)
        assert verify_certificate(c, a, centered)


def test_center_duals_creates_interior_margins():
    # after centering, non-assigned edges should usually have strictly
    # positive reduced cost in both the row and column of each assignment
    rng = np.random.default_rng(19)
    c = _random_matrix(rng, 30)
    a, d, _ = solve_cold(c)
    centered = center_duals(c, a, d)
    r = reduced_costs(c.values, centered.u, centered.v)
    assigned = r[np.arange(30), a.row_to_col]
    assert np.abs(assigned).max() <= 1e-9
    off = r + np.isclose(r, assigned[:, None]).astype(float) * 0  # shape check only
    assert (r >= -1e-9).all()


# ------------------------------------------------------------ property tests

@settings(max_examples=120, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=6),
    integer=st.booleans(),
    data=st.data(),
)
def test_property_exactness_and_certificates(n, integer, data):
    seed = data.draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    c = _random_matrix(rng, n, integer=integer)
    oracle_cost, _ = brute_force(c)

    a, d, s = solve_cold(c)
    if integer:
        assert a.total_cost == oracle_cost
    else:
        assert a.total_cost == pytest.approx(oracle_cost, abs=1e-9)
    assert verify_certificate(c, a, d)

    # a fuzzed feasible seed: random u, columnwise-minimum completion
    u = rng.normal(0.0, 1.0, n)
    v = (c.values - u[:, None]).min(axis=0)
    a2, d2, s2 = solve_seeded(c, DualPotentials(u, v))
    assert a2.total_cost == pytest.approx(oracle_cost, abs=1e-9)
    assert verify_certificate(c, a2, d2)
    assert s2.greedy_matched + s2.free_rows == n
    assert s2.augment_searches == s2.free_rows


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_property_returned_duals_always_feasible(data):
    seed = data.draw(st.integers(min_value=0, max_value=2**31 - 1))
    n = data.draw(st.integers(min_value=1, max_value=12))
    rng = np.random.default_rng(seed)
    c = _random_matrix(rng, n)
    for result in (solve_cold(c), ):
        a, d, s = result
        r = reduced_costs(c.values, d.u, d.v)
        assert r.min() >= -1e-9
