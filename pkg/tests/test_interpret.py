"""Тесты представителей кластеров и экспорта изображений."""

import numpy as np
import numpy.testing as npt
import png
import pytest

from data import DataMatrix, LabelVector, make_rng
from errors import EmptyCluster, ShapeMismatch
from interpret import (
    cluster_representatives,
    export_images,
    matricize,
    read_pgm,
    to_grayscale,
    vectorize,
    write_pgm,
)


class TestRepresentatives:
    def test_single_column(self):
        x = np.array([1.0, -2.0, 4.0])
        reps = cluster_representatives(DataMatrix(x[:, None]), LabelVector(np.array([1]), 1), 1)
        npt.assert_allclose(reps[0].vector, x, atol=1e-12)

    def test_repeated_columns(self):
        x = np.array([1.0, 2.0, 3.0])
        X = DataMatrix(np.tile(x[:, None], (1, 4)))
        reps = cluster_representatives(X, LabelVector(np.ones(4, dtype=int), 1), 3)
        assert reps[0].singular_values.shape == (1,)
        npt.assert_allclose(reps[0].vector, 2.0 * x, atol=1e-12)

    def test_norm_equals_singular_energy(self, four_subspaces):
        X, y = four_subspaces
        for rep in cluster_representatives(X, y, 3):
            assert np.sum(rep.vector**2) == pytest.approx(np.sum(rep.singular_values**2), rel=1e-10)

    def test_permutation_invariant(self, two_subspaces):
        X, y = two_subspaces
        order = make_rng(1).permutation(X.n_samples)
        a = cluster_representatives(X, y, 2)
        b = cluster_representatives(X.columns(order), y.subset(order), 2)
        for ra, rb in zip(a, b):
            npt.assert_allclose(ra.vector, rb.vector, atol=1e-10)

    def test_empty_cluster(self):
        with pytest.raises(EmptyCluster):
            cluster_representatives(DataMatrix(np.eye(2)), LabelVector(np.array([1, 1]), 2), 1)


class TestMatricize:
    def test_column_major(self):
        npt.assert_array_equal(matricize(np.array([1.0, 2.0, 3.0, 4.0]), 2, 2), [[1, 3], [2, 4]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            matricize(np.ones(5), 2, 2)

    def test_vectorize_inverts(self):
        a = np.arange(6, dtype=float)
        npt.assert_array_equal(vectorize(matricize(a, 2, 3)), a)


class TestGrayscale:
    def test_constant_image(self):
        npt.assert_array_equal(to_grayscale(np.full((2, 2), 3.0)), np.zeros((2, 2)))

    def test_half_up_rounding(self):
        npt.assert_array_equal(to_grayscale(np.array([[-1.0, 0.0, 1.0]])), [[0, 128, 255]])


class TestExport:
    def test_pgm_round_trip_and_size(self, tmp_path):
        pixels = to_grayscale(make_rng(2).standard_normal((16, 12)))
        path = write_pgm(pixels, tmp_path / "a.pgm")
        header = b"P5\n12 16\n255\n"
        assert path.read_bytes().startswith(header)
        assert path.stat().st_size == len(header) + 16 * 12
        npt.assert_array_equal(read_pgm(path), pixels)

    def test_png_readable(self, tmp_path):
        pixels = to_grayscale(make_rng(3).standard_normal((8, 5)))
        [path] = export_images([(1, pixels.astype(float))], tmp_path, "png")
        width, height, rows, info = png.Reader(filename=str(path)).read()
        assert (width, height) == (5, 8)
        assert info["greyscale"] and info["bitdepth"] == 8
        npt.assert_array_equal(np.array([list(r) for r in rows]), pixels)

    def test_file_names_and_determinism(self, tmp_path, two_subspaces):
        X, y = two_subspaces
        images = [(r.cluster, r.image(4, 5)) for r in cluster_representatives(X, y, 2)]
        first = export_images(images, tmp_path / "a")
        second = export_images(images, tmp_path / "b")
        assert [p.name for p in first] == ["cluster_1.pgm", "cluster_2.pgm"]
        for p, q in zip(first, second):
            assert p.read_bytes() == q.read_bytes()
