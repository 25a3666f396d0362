"""Feature extraction, min-trick completion, density gate, pipeline tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualseed.errors import NonFinite, ShapeMismatch
from dualseed.lap_core import CostMatrix, DualPotentials, reduced_costs, solve_cold
from dualseed.warmstart import (
    FEATURE_NAMES,
    STAGE_NAMES,
    FeatureMatrix,
    PipelineConfig,
    equality_density,
    extract_features,
    min_trick,
    run_pipeline,
    warm_solve,
)

F = {name: i for i, name in enumerate(FEATURE_NAMES)}


def _raw_features(values, **cfg_kwargs):
    c = CostMatrix.from_array(np.asarray(values, dtype=np.float64))
    return extract_features(c, PipelineConfig(**cfg_kwargs), normalize=False)


# ------------------------------------------------------------------ features

def test_feature_names_cover_all_21():
    assert len(FEATURE_NAMES) == 21
    assert FEATURE_NAMES[:4] == ("row_min", "row_max", "row_mean", "row_std")
    assert FEATURE_NAMES[13:] == tuple(f"pe_{i}" for i in range(8))


def test_row_statistics_hand_computed():
    feats = _raw_features([[1, 2, 3, 4], [4, 3, 2, 1], [2, 2, 2, 2], [1, 1, 4, 4]])
    row = feats.values[0]
    assert row[F["row_min"]] == 1.0
    assert row[F["row_max"]] == 4.0
    assert row[F["row_mean"]] == 2.5
    assert row[F["row_std"]] == pytest.approx(1.11803, abs=1e-5)
    # sorted gaps [1,1,1] -> difficulty 1/(1 + 1e-12)
    assert row[F["difficulty"]] == pytest.approx(1.0, abs=1e-9)
    # threshold 1.1*1: only the 1 qualifies
    assert row[F["near_best"]] == 0.25


def test_constant_row_features():
    feats = _raw_features([[5, 5, 5], [1, 2, 3], [3, 1, 2]])
    row = feats.values[0]
    assert row[F["row_std"]] == 0.0
    assert row[F["entropy"]] == pytest.approx(np.log(3.0), abs=1e-12)
    assert row[F["near_best"]] == 1.0


def test_is_col_best_2x2():
    feats = _raw_features([[0, 1], [1, 0]])
    assert feats.values[0, F["is_col_best"]] == 0.5
    assert feats.values[1, F["is_col_best"]] == 0.5


def test_entropy_bounds_and_order_stats():
    rng = np.random.default_rng(0)
    c = CostMatrix.from_array(rng.random((12, 12)))
    feats = extract_features(c, PipelineConfig(), normalize=False).values
    assert (feats[:, F["entropy"]] >= 0).all()
    assert (feats[:, F["entropy"]] <= np.log(12) + 1e-12).all()
    assert (feats[:, F["row_min"]] <= feats[:, F["row_mean"]]).all()
    assert (feats[:, F["row_mean"]] <= feats[:, F["row_max"]]).all()
    assert (feats[:, F["row_std"]] >= 0).all()
    assert (feats[:, F["near_best"]] > 0).all()
    assert (feats[:, F["near_best"]] <= 1).all()
    assert (feats[:, F["is_col_best"]] >= 0).all()
    assert np.isfinite(feats).all()


def test_positional_encodings_formula():
    rng = np.random.default_rng(1)
    n = 9
    c = CostMatrix.from_array(rng.random((n, n)))
    feats = extract_features(c, PipelineConfig()).values
    i = np.arange(n) / n
    for m, f in enumerate((1, 2, 4, 8)):
        assert np.allclose(feats[:, 13 + 2 * m], np.sin(2 * np.pi * f * i), atol=1e-12)
        assert np.allclose(feats[:, 13 + 2 * m + 1], np.cos(2 * np.pi * f * i), atol=1e-12)


def test_zscore_normalization():
    rng = np.random.default_rng(2)
    c = CostMatrix.from_array(rng.random((30, 30)))
    feats = extract_features(c, PipelineConfig()).values
    block = feats[:, :13]
    assert np.allclose(block.mean(axis=0), 0.0, atol=1e-9)
    stds = block.std(axis=0)
    assert ((np.isclose(stds, 1.0, atol=1e-6)) | (stds < 1e-6)).all()


def test_reduced_dims_are_prefixes():
    rng = np.random.default_rng(3)
    c = CostMatrix.from_array(rng.random((8, 8)))
    full = extract_features(c, PipelineConfig(feature_dim=21)).values
    for d in (4, 13):
        part = extract_features(c, PipelineConfig(feature_dim=d)).values
        assert part.shape == (8, d)
        assert np.array_equal(part, full[:, :d])


def test_column_permutation_invariance_bit_exact():
    rng = np.random.default_rng(4)
    c = CostMatrix.from_array(rng.random((17, 17)))
    feats = extract_features(c, PipelineConfig()).values
    for _ in range(5):
        perm = rng.permutation(17)
        permuted = CostMatrix.from_array(c.values[:, perm])
        feats_p = extract_features(permuted, PipelineConfig()).values
        assert np.array_equal(feats, feats_p)


def test_features_require_n_at_least_2():
    with pytest.raises(ShapeMismatch):
        extract_features(CostMatrix.from_array(np.array([[1.0]])), PipelineConfig())


def test_pipeline_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(eps=0.0)
    with pytest.raises(ValueError):
        PipelineConfig(tau=-0.1)
    with pytest.raises(ValueError):
        PipelineConfig(feature_dim=7)
    with pytest.raises(ValueError):
        PipelineConfig(refine_k=0)


# ----------------------------------------------------------------- min_trick

def test_min_trick_column_minima():
    c = CostMatrix.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]))
    d = min_trick(c, np.array([0.0, 0.0]))
    assert np.array_equal(d.v, np.array([1.0, 2.0]))


def test_min_trick_fully_tight():
    c = CostMatrix.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]))
    d = min_trick(c, np.array([1.0, 3.0]))
    assert np.array_equal(d.v, np.array([0.0, 1.0]))
    r = reduced_costs(c.values, d.u, d.v)
    assert np.array_equal(r, np.zeros((2, 2)))


def test_min_trick_optimal_dual_objective():
    rng = np.random.default_rng(5)
    for _ in range(50):
        c = CostMatrix.from_array(rng.random((16, 16)))
        a, duals, _ = solve_cold(c)
        shift = duals.u.mean()
        u_star = duals.u - shift
        d = min_trick(c, u_star)
        assert d.u.sum() + d.v.sum() == pytest.approx(a.total_cost, abs=1e-9)


def test_min_trick_validates_input():
    c = CostMatrix.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]))
    with pytest.raises(ShapeMismatch):
        min_trick(c, np.zeros(3))
    with pytest.raises(NonFinite):
        min_trick(c, np.array([np.nan, 0.0]))


@settings(max_examples=250, deadline=None)
@given(data=st.data())
def test_property_min_trick_always_feasible(data):
    seed = data.draw(st.integers(min_value=0, max_value=2**31 - 1))
    n = data.draw(st.integers(min_value=1, max_value=12))
    scale = data.draw(st.sampled_from([1.0, 1e-6, 1e6]))
    rng = np.random.default_rng(seed)
    c = CostMatrix.from_array(rng.random((n, n)) * scale)
    u_hat = rng.normal(0.0, scale, n)
    d = min_trick(c, u_hat)
    r = reduced_costs(c.values, d.u, d.v)
    assert r.min() >= 0.0 or r.min() >= -0.0  # exact in floating point


def test_min_trick_feasibility_fuzz_1000():
    rng = np.random.default_rng(6)
    violations = 0
    for trial in range(1000):
        n = int(rng.integers(1, 24))
        c = CostMatrix.from_array(rng.random((n, n)) * (10.0 ** rng.integers(-3, 4)))
        u_hat = rng.normal(0.0, 10.0 ** rng.integers(-3, 4), n)
        d = min_trick(c, u_hat)
        if reduced_costs(c.values, d.u, d.v).min() < 0:
            violations += 1
    assert violations == 0


# ---------------------------------------------------------- equality density

def test_density_fully_tight_is_2():
    c = CostMatrix.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]))
    d = min_trick(c, np.array([1.0, 3.0]))
    assert equality_density(c, d, 1e-5) == 2.0


def test_density_column_minima_is_1():
    c = CostMatrix.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]))
    d = min_trick(c, np.array([0.0, 0.0]))
    assert equality_density(c, d, 1e-5) == 1.0


def test_density_at_least_1_for_optimal_duals():
    rng = np.random.default_rng(7)
    for _ in range(20):
        c = CostMatrix.from_array(rng.random((24, 24)))
        _, duals, _ = solve_cold(c)
        assert equality_density(c, duals, 1e-5) >= 1.0


def test_gauge_shift_preserves_equality_edges():
    rng = np.random.default_rng(8)
    c = CostMatrix.from_array(rng.random((15, 15)))
    u_hat = rng.normal(0.0, 0.5, 15)
    d0 = min_trick(c, u_hat)
    edges0 = np.abs(reduced_costs(c.values, d0.u, d0.v)) < 1e-9
    for shift in (-3.0, 0.25, 10.0):
        d1 = min_trick(c, u_hat + shift)
        edges1 = np.abs(reduced_costs(c.values, d1.u, d1.v)) < 1e-9
        assert np.array_equal(edges0, edges1)


# ------------------------------------------------------------------ pipeline

def test_pipeline_constant_predictor_exact():
    rng = np.random.default_rng(9)
    c = CostMatrix.from_array(rng.random((20, 20)))
    a_cold, _, _ = solve_cold(c)
    cfg = PipelineConfig()
    assignment, report = run_pipeline(
        c, lambda feats: np.zeros(20), cfg, needs_features=False
    )
    assert assignment.total_cost == pytest.approx(a_cold.total_cost, abs=1e-12)
    assert set(report.stage_times) == set(STAGE_NAMES)
    assert all(ns >= 0 for ns in report.stage_times.values())


def test_pipeline_integer_costs_bit_exact():
    rng = np.random.default_rng(10)
    c = CostMatrix.from_array(rng.integers(0, 50, size=(18, 18)).astype(np.float64))
    a_cold, _, _ = solve_cold(c)
    for trial in range(10):
        u_hat = rng.normal(0.0, 5.0, 18)
        assignment, _ = run_pipeline(c, lambda feats: u_hat, PipelineConfig(), needs_features=False)
        assert assignment.total_cost == a_cold.total_cost  # bit-for-bit


def test_pipeline_gate_saturation():
    rng = np.random.default_rng(11)
    c = CostMatrix.from_array(rng.random((16, 16)))
    _, duals, _ = solve_cold(c)
    cfg = PipelineConfig(tau=float("inf"))
    assignment, report = run_pipeline(c, lambda feats: duals.u, cfg, needs_features=False)
    assert report.fallback_triggered
    a_cold, _, _ = solve_cold(c)
    assert assignment.total_cost == pytest.approx(a_cold.total_cost, abs=1e-12)
    assert report.stage_times["solver"] > 0


def test_pipeline_gate_open_with_oracle_seed():
    rng = np.random.default_rng(12)
    c = CostMatrix.from_array(rng.random((16, 16)))
    _, duals, _ = solve_cold(c)
    cfg = PipelineConfig(tau=1.0)
    assignment, report = run_pipeline(c, lambda feats: duals.u, cfg, needs_features=False)
    assert not report.fallback_triggered
    assert report.density_rho >= 1.0
    assert report.solve_stats.dual_update_steps == 0


def test_warm_solve_checks_model_dim():
    from dualseed.rowdualnet import init_model

    rng = np.random.default_rng(13)
    c = CostMatrix.from_array(rng.random((6, 6)))
    model = init_model(13, hidden_dim=8, seed=0)
    with pytest.raises(ShapeMismatch):
        warm_solve(c, model, PipelineConfig(feature_dim=21))


def test_warm_solve_runs_end_to_end():
    from dualseed.rowdualnet import init_model

    rng = np.random.default_rng(14)
    c = CostMatrix.from_array(rng.random((10, 10)))
    a_cold, _, _ = solve_cold(c)
    model = init_model(21, hidden_dim=8, seed=0)
    assignment, report = warm_solve(c, model, PipelineConfig())
    assert assignment.total_cost == pytest.approx(a_cold.total_cost, abs=1e-12)
    assert report.total_cost == assignment.total_cost
