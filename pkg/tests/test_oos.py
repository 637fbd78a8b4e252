"""Тесты назначения меток вне обучающей выборки (линейного и ядерного)."""

import numpy as np
import numpy.testing as npt
import pytest
from scipy.stats import ortho_group
from sklearn.datasets import make_circles

from data import DataMatrix, LabelVector, SplitSpec, make_rng, split_in_out
from errors import DimensionMismatch, EmptyCluster
from metrics import acc
from oos import (
    ClusterSubspace,
    SubspaceModel,
    assign_kernel_oos,
    assign_kernel_oos_batch,
    assign_oos,
    assign_oos_batch,
    fit_kernel_oos,
    fit_subspace_model,
    kernel_embed_test,
)


class TestSubspaceModel:
    def test_bases_orthonormal(self, four_subspaces):
        X, y = four_subspaces
        model = fit_subspace_model(X, y, 3)
        for s in model.subspaces:
            npt.assert_allclose(s.basis.T @ s.basis, np.eye(s.dim), atol=1e-10)

    def test_line_cluster_has_rank_one(self):
        direction = np.array([1.0, 2.0, 2.0]) / 3.0
        X = DataMatrix(np.outer(direction, [1.0, 2.0, 3.0, 5.0]))
        model = fit_subspace_model(X, LabelVector(np.ones(4, dtype=int), 1), 3)
        basis = model.subspaces[0].basis
        assert basis.shape == (3, 1)
        assert abs(basis[:, 0] @ direction) == pytest.approx(1.0)

    def test_noiseless_reconstruction(self, four_subspaces):
        X, y = four_subspaces
        model = fit_subspace_model(X, y, 3)
        for s in model.subspaces:
            members = X.values[:, y.indices_of(s.label)]
            for x in members.T:
                assert s.distance(x) <= 1e-8

    def test_d_larger_than_cluster(self):
        X = DataMatrix(make_rng(0).standard_normal((10, 3)))
        model = fit_subspace_model(X, LabelVector(np.ones(3, dtype=int), 1), 8)
        assert model.subspaces[0].dim == 2

    def test_empty_cluster(self):
        X = DataMatrix(np.eye(3))
        with pytest.raises(EmptyCluster):
            fit_subspace_model(X, LabelVector(np.array([1, 1, 1]), 2), 1)


class TestAssign:
    def test_in_subspace_point(self, four_subspaces):
        X, y = four_subspaces
        model = fit_subspace_model(X, y, 3)
        s = model.subspaces[2]
        x = s.mean + s.basis @ np.array([0.3, -1.0, 2.0])
        result = assign_oos(model, x)
        assert result.label == 3
        assert result.distances[2] <= 1e-8
        npt.assert_array_equal(result.one_hot(), [0, 0, 1, 0])

    def test_single_cluster(self):
        model = SubspaceModel((ClusterSubspace(1, np.zeros(2), np.zeros((2, 0))),))
        assert assign_oos(model, np.array([5.0, -3.0])).label == 1

    def test_dimension_mismatch(self, four_subspaces):
        X, y = four_subspaces
        with pytest.raises(DimensionMismatch):
            assign_oos(fit_subspace_model(X, y, 3), np.zeros(5))

    def test_rotation_invariant(self, four_subspaces):
        X, y = four_subspaces
        model = fit_subspace_model(X, y, 3)
        Q = ortho_group.rvs(3, random_state=1)
        rotated = SubspaceModel(
            tuple(ClusterSubspace(s.label, s.mean, s.basis @ Q) for s in model.subspaces)
        )
        x = make_rng(2).standard_normal(30)
        npt.assert_allclose(
            assign_oos(model, x).distances, assign_oos(rotated, x).distances, atol=1e-10
        )

    def test_held_out_accuracy(self, four_subspaces):
        X, y = four_subspaces
        split = split_in_out(X, y, SplitSpec(15, 25, seed=0))
        model = fit_subspace_model(split.in_data, split.in_labels, 3)
        predicted, distances = assign_oos_batch(model, split.out_data)
        assert distances.shape == (100, 4)
        assert acc(split.out_labels, predicted) == pytest.approx(100.0)

    def test_batch_matches_single(self, four_subspaces):
        X, y = four_subspaces
        model = fit_subspace_model(X, y, 3)
        points = DataMatrix(make_rng(3).standard_normal((30, 5)))
        labels, distances = assign_oos_batch(model, points)
        for j, x in enumerate(points.values.T):
            single = assign_oos(model, x)
            assert single.label == labels.labels[j]
            npt.assert_allclose(single.distances, distances[j], atol=1e-10)


class TestKernelModel:
    @pytest.fixture
    def fitted(self, two_subspaces):
        X, y = two_subspaces
        return X, y, fit_kernel_oos(X, y, 2, sigma2=5.0)

    def test_centered_kernel_consistency(self, fitted):
        X, _, model = fitted
        n = X.n_samples
        Y = model.coords
        K = Y.T @ Y
        npt.assert_allclose(K @ np.ones(n), 0.0, atol=1e-8 * np.linalg.norm(K))
        assert model.rank <= n - 1
        assert np.all(model.eigvals > 0)

    def test_coords_reproduce_centered_kernel(self, fitted):
        X, _, model = fitted
        from algos import gaussian_gram

        raw = gaussian_gram(X, 5.0)
        E = np.full(raw.shape, 1.0 / raw.shape[0])
        I = np.eye(raw.shape[0])
        K = (I - E) @ raw @ (I - E)
        Y = model.coords
        assert np.linalg.norm(Y.T @ Y - K) <= 1e-8 * np.linalg.norm(K)

    def test_training_point_self_embedding(self, fitted):
        X, _, model = fitted
        for n in (0, 17, 45):
            npt.assert_allclose(kernel_embed_test(model, X.values[:, n]), model.coords[:, n], atol=1e-6)

    def test_self_assignment_on_separated_blobs(self):
        rng = make_rng(6)
        centers = np.zeros((5, 2))
        centers[0, 1] = 10.0
        X = DataMatrix(np.repeat(centers, 20, axis=1) + 0.1 * rng.standard_normal((5, 40)))
        y = LabelVector(np.repeat([1, 2], 20), 2)
        model = fit_kernel_oos(X, y, 2, sigma2=1.0)
        for n in (0, 13, 25, 39):
            assert assign_kernel_oos(model, X.values[:, n]).label == y.labels[n]

    def test_identical_points_identical_coords(self, fitted):
        _, _, model = fitted
        x = make_rng(7).standard_normal(20)
        npt.assert_array_equal(kernel_embed_test(model, x), kernel_embed_test(model, x.copy()))

    def test_huge_sigma_flattens_embedding(self, two_subspaces):
        X, y = two_subspaces
        model = fit_kernel_oos(X, y, 2, sigma2=1e6)
        x = make_rng(4).standard_normal(20)
        assert np.linalg.norm(kernel_embed_test(model, x)) < 1e-2

    def test_linear_kernel_matches_linear_path(self, four_subspaces):
        X, y = four_subspaces
        centered = DataMatrix(X.values - X.values.mean(axis=1, keepdims=True))
        model = fit_kernel_oos(centered, y, 3, sigma2=1.0, kernel="linear")
        points = DataMatrix(make_rng(5).standard_normal((30, 20)))
        kernel_labels, _ = assign_kernel_oos_batch(model, points)
        linear_labels, _ = assign_oos_batch(fit_subspace_model(centered, y, 3), points)
        npt.assert_array_equal(kernel_labels.labels, linear_labels.labels)

    def test_two_circles(self):
        points, circle = make_circles(n_samples=400, factor=0.3, noise=0.03, random_state=0)
        X = DataMatrix(points.T)
        y = LabelVector(circle.astype(int) + 1, 2)
        split = split_in_out(X, y, SplitSpec(100, 100, seed=1))
        best = 0.0
        for sigma2 in (0.01, 0.05, 0.1, 0.5, 1.0):
            model = fit_kernel_oos(split.in_data, split.in_labels, 2, sigma2)
            predicted, _ = assign_kernel_oos_batch(model, split.out_data)
            best = max(best, acc(split.out_labels, predicted))
        assert best >= 95.0
