import math

import numpy as np
import pytest

from moviegross.correlation import CorrelationMatrix
from moviegross.efa import (
    FactorModel,
    GenreFactorAnalysis,
    canonicalize,
    count_kaiser,
    eigen_symmetric,
    factor_score_weights,
    factor_scores,
    minres_extract,
    minres_objective,
    variance_explained,
    varimax,
    varimax_criterion,
)
from moviegross.errors import DegenerateInputError, DomainError, ShapeError


def corr(values, labels=None):
    values = np.asarray(values, dtype=float)
    labels = labels or tuple(f"v{i}" for i in range(values.shape[0]))
    return CorrelationMatrix(labels=tuple(labels), values=values, kind="pearson")


def one_factor_corr(loadings):
    loadings = np.asarray(loadings)
    values = np.outer(loadings, loadings)
    np.fill_diagonal(values, 1.0)
    return corr(values)


def model_from_loadings(loadings, labels=None):
    loadings = np.asarray(loadings, dtype=float)
    p, k = loadings.shape
    proportion, cumulative = variance_explained(loadings, p)
    return FactorModel(
        labels=tuple(labels or (f"v{i}" for i in range(p))),
        loadings=loadings,
        communalities=np.sum(loadings ** 2, axis=1),
        rotation=np.eye(k),
        proportion_var=proportion,
        cumulative_var=cumulative,
        objective=0.0,
    )


class TestEigen:
    def test_identity(self):
        values, vectors = eigen_symmetric(np.eye(3))
        assert np.allclose(values, [1, 1, 1])
        assert np.allclose(vectors @ vectors.T, np.eye(3))

    def test_diagonal(self):
        values, vectors = eigen_symmetric(np.diag([4.0, 1.0, 0.25]))
        assert np.allclose(values, [4.0, 1.0, 0.25])
        assert np.allclose(np.linalg.norm(vectors, axis=0), 1.0)

    def test_two_by_two_hand(self):
        # char. poly of [[2,1],[1,2]]: (2-l)^2 - 1 = 0 -> l in {3, 1}
        values, _ = eigen_symmetric([[2.0, 1.0], [1.0, 2.0]])
        assert np.allclose(values, [3.0, 1.0])

    def test_reconstruction_and_trace(self):
        rng = np.random.default_rng(8)
        a = rng.normal(size=(6, 6))
        m = (a + a.T) / 2
        values, vectors = eigen_symmetric(m)
        assert np.allclose(vectors @ np.diag(values) @ vectors.T, m, atol=1e-7)
        assert np.sum(values) == pytest.approx(np.trace(m), abs=1e-8)
        assert np.all(np.diff(values) <= 1e-12)

    def test_asymmetric_rejected(self):
        with pytest.raises(ShapeError):
            eigen_symmetric([[1.0, 0.5], [0.2, 1.0]])


class TestKaiser:
    def test_count(self):
        assert count_kaiser([3.1, 1.2, 0.9, 0.4]) == 2

    def test_strict_boundary(self):
        assert count_kaiser([1.0, 1.0, 1.0]) == 0


class TestMinres:
    def test_one_factor_recovery(self):
        truth = np.array([0.8, 0.7, 0.6])
        model = minres_extract(one_factor_corr(truth), 1)
        assert np.allclose(np.abs(model.loadings[:, 0]), truth, atol=1e-3)
        assert model.objective < 1e-8
        assert model.converged

    def test_identity_matrix_gives_null_loadings(self):
        model = minres_extract(corr(np.eye(4)), 1)
        assert np.allclose(model.loadings, 0.0, atol=1e-6)

    def test_nested_objective_monotone(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(8, 3))
        values = a @ a.T
        d = np.sqrt(np.diag(values))
        values = values / np.outer(d, d)
        np.fill_diagonal(values, 1.0)
        r = corr(values)
        assert minres_extract(r, 7).objective <= minres_extract(r, 1).objective

    def test_objective_rotation_invariant(self):
        truth = np.array([0.8, 0.7, 0.6, 0.5])
        r = one_factor_corr(truth)
        model = minres_extract(r, 2)
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
        rotated = model.loadings @ q
        assert minres_objective(r.values, rotated) == pytest.approx(
            model.objective, abs=1e-9)

    def test_k_out_of_range(self):
        r = corr(np.eye(3))
        with pytest.raises(DomainError):
            minres_extract(r, 3)
        with pytest.raises(DomainError):
            minres_extract(r, 0)

    def test_indefinite_matrix_tolerated(self):
        # smallest eigenvalue is negative; extraction must still run
        values = np.array([
            [1.0, 0.9, -0.9],
            [0.9, 1.0, 0.9],
            [-0.9, 0.9, 1.0],
        ])
        assert np.linalg.eigvalsh(values).min() < 0
        model = minres_extract(corr(values), 2)
        assert np.all(model.communalities <= 1.0 + 1e-12)

    def test_deterministic(self):
        truth = np.array([0.8, 0.7, 0.6, 0.5, 0.4])
        r = one_factor_corr(truth)
        a = minres_extract(r, 2)
        b = minres_extract(r, 2)
        assert np.array_equal(a.loadings, b.loadings)


class TestVarimax:
    def test_simple_structure_is_fixed_point(self):
        loadings = np.array([
            [0.9, 0.0], [0.85, 0.0], [0.8, 0.0],
            [0.0, 0.9], [0.0, 0.85], [0.0, 0.8],
        ])
        rotated = varimax(model_from_loadings(loadings))
        assert np.allclose(rotated.loadings, loadings, atol=1e-6)
        assert np.allclose(rotated.rotation, np.eye(2), atol=1e-6)

    def test_row_sums_preserved(self):
        rng = np.random.default_rng(9)
        loadings = rng.uniform(-0.7, 0.7, size=(10, 3))
        rotated = varimax(model_from_loadings(loadings))
        assert np.allclose(np.sum(rotated.loadings ** 2, axis=1),
                           np.sum(loadings ** 2, axis=1), atol=1e-10)

    def test_recovers_forward_rotated_simple_structure(self):
        simple = np.array([
            [0.8, 0.0], [0.75, 0.0], [0.7, 0.0], [0.65, 0.0],
            [0.0, 0.8], [0.0, 0.75], [0.0, 0.7], [0.0, 0.65],
        ])
        theta = math.pi / 4
        mix = np.array([[math.cos(theta), -math.sin(theta)],
                        [math.sin(theta), math.cos(theta)]])
        rotated = varimax(model_from_loadings(simple @ mix))
        recovered, _ = canonicalize(rotated.loadings)
        target, _ = canonicalize(simple)
        assert np.allclose(np.sort(np.abs(recovered).ravel()),
                           np.sort(np.abs(target).ravel()), atol=1e-4)

    def test_criterion_never_decreases(self):
        rng = np.random.default_rng(10)
        loadings = rng.uniform(-0.8, 0.8, size=(12, 4))
        rotated = varimax(model_from_loadings(loadings))
        sweeps = rotated.sweep_criteria
        assert len(sweeps) >= 2
        assert all(b >= a - 1e-10 for a, b in zip(sweeps, sweeps[1:]))

    def test_single_factor_unchanged(self):
        model = model_from_loadings(np.array([[0.7], [0.6]]))
        assert varimax(model) is model

    def test_rotation_maps_input_to_output(self):
        rng = np.random.default_rng(12)
        loadings = rng.uniform(-0.8, 0.8, size=(9, 3))
        model = model_from_loadings(loadings)
        rotated = varimax(model)
        assert np.allclose(model.loadings @ rotated.rotation,
                           rotated.loadings, atol=1e-10)
        assert np.allclose(rotated.rotation.T @ rotated.rotation, np.eye(3),
                           atol=1e-10)


class TestVarianceExplained:
    def test_saturated(self):
        proportion, _ = variance_explained(np.ones((4, 1)), 4)
        assert proportion[0] == pytest.approx(1.0)

    def test_null(self):
        proportion, cumulative = variance_explained(np.zeros((4, 2)), 4)
        assert np.all(proportion == 0.0)
        assert np.all(cumulative == 0.0)

    def test_hand_arithmetic(self):
        proportion, _ = variance_explained(np.array([[0.8], [0.7], [0.6]]), 3)
        assert proportion[0] == pytest.approx((0.64 + 0.49 + 0.36) / 3)

    def test_full_decomposition_sums_to_one(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=(5, 5))
        values = a @ a.T
        d = np.sqrt(np.diag(values))
        values = values / np.outer(d, d)
        np.fill_diagonal(values, 1.0)
        eigenvalues, vectors = eigen_symmetric(values)
        loadings = vectors * np.sqrt(np.clip(eigenvalues, 0, None))
        _, cumulative = variance_explained(loadings, 5)
        assert cumulative[-1] == pytest.approx(1.0, abs=1e-8)


class TestFactorScores:
    def test_zero_row_maps_to_zero(self):
        r = one_factor_corr([0.8, 0.7, 0.6])
        model = minres_extract(r, 1)
        scores = factor_scores(np.zeros((2, 3)), r, model)
        assert np.allclose(scores, 0.0)

    def test_identity_correlation_weights_are_loadings(self):
        r = corr(np.eye(3))
        model = model_from_loadings(np.array([[0.5], [0.4], [0.3]]))
        weights = factor_score_weights(r, model)
        assert np.allclose(weights, model.loadings)

    def test_matches_direct_solve(self):
        r = one_factor_corr([0.8, 0.7, 0.6, 0.5])
        model = minres_extract(r, 1)
        rng = np.random.default_rng(13)
        z = rng.normal(size=(6, 4))
        expected = z @ np.linalg.solve(r.values, model.loadings)
        assert np.allclose(factor_scores(z, r, model), expected, atol=1e-10)

    def test_shape_mismatch(self):
        r = one_factor_corr([0.8, 0.7, 0.6])
        model = minres_extract(r, 1)
        with pytest.raises(ShapeError):
            factor_scores(np.zeros((2, 4)), r, model)


class TestEstimator:
    def test_fit_transform_on_synthetic_factors(self):
        rng = np.random.default_rng(14)
        n = 4000
        latent = rng.standard_normal((n, 2))
        pattern = [(0, 0.8), (0, 0.75), (0, 0.7), (1, 0.8), (1, 0.75), (1, 0.7)]
        x = np.empty((n, 6))
        for j, (f, lam) in enumerate(pattern):
            noise = math.sqrt(1 - lam * lam) * rng.standard_normal(n)
            x[:, j] = (lam * latent[:, f] + noise > 0).astype(float)
        est = GenreFactorAnalysis(n_factors=2).fit(x)
        assert est.loadings_.shape == (6, 2)
        # each estimated factor aligns with one generative block
        blocks = np.abs(est.loadings_) > 0.4
        assert sorted(map(tuple, blocks.T.tolist())) == sorted([
            (True,) * 3 + (False,) * 3, (False,) * 3 + (True,) * 3])
        scores = est.transform(x)
        assert scores.shape == (n, 2)
        assert est.model_.cumulative_var[-1] == pytest.approx(
            (0.8 ** 2 + 0.75 ** 2 + 0.7 ** 2) / 3, abs=0.1)

    def test_constant_column_rejected(self):
        x = np.column_stack([np.zeros(50), (np.arange(50) % 2)])
        with pytest.raises(DegenerateInputError):
            GenreFactorAnalysis(n_factors=1).fit(x)

    def test_get_params_roundtrip(self):
        est = GenreFactorAnalysis(n_factors=4, rotate=False)
        params = est.get_params()
        assert params["n_factors"] == 4
        clone = GenreFactorAnalysis(**params)
        assert clone.rotate is False
