"""
Назначение меток объектам вне обучающей выборки (out-of-sample).

Линейный вариант: для каждого кластера среднее и ортонормированный базис
(первые d левых сингулярных векторов центрированного блока); объект получает
метку ближайшего подпространства. Ядерный вариант делает то же самое в
координатах нелинейной проекции, построенной по центрированной матрице Грама.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from algos import gaussian_gram
from config import Config
from data import DataMatrix, LabelVector
from errors import DimensionMismatch, EigFailure, EmptyCluster, InvalidSpec

logger = logging.getLogger(__name__)

KernelName = Literal["gaussian", "linear"]


@dataclass(frozen=True, eq=False)
class ClusterSubspace:
    """Аффинное подпространство кластера: среднее и базис D x d_c."""

    label: int
    mean: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def distance(self, x: np.ndarray) -> float:
        centered = x - self.mean
        residual = centered - self.basis @ (self.basis.T @ centered)
        return float(np.linalg.norm(residual))


@dataclass(frozen=True, eq=False)
class SubspaceModel:
    subspaces: tuple[ClusterSubspace, ...]

    @property
    def num_clusters(self) -> int:
        return len(self.subspaces)

    @property
    def ambient_dim(self) -> int:
        return self.subspaces[0].mean.shape[0]


@dataclass(frozen=True, eq=False)
class Assignment:
    """Метка (1..C) и расстояния до всех подпространств."""

    label: int
    distances: np.ndarray

    def one_hot(self) -> np.ndarray:
        indicator = np.zeros(self.distances.shape[0], dtype=np.int64)
        indicator[self.label - 1] = 1
        return indicator


@dataclass(frozen=True, eq=False)
class KernelOosModel:
    """
    Ядерная модель: обучающие данные, собственная система центрированного
    ядра, координаты Y = Λ^{1/2} U^T и линейная модель подпространств над Y.
    """

    train: DataMatrix
    sigma2: float
    kernel: KernelName
    eigvecs: np.ndarray
    eigvals: np.ndarray
    coords: np.ndarray
    subspace_model: SubspaceModel
    row_means: np.ndarray
    grand_mean: float

    @property
    def rank(self) -> int:
        return self.eigvals.shape[0]


def _subspace_of(block: np.ndarray, label: int, d: int) -> ClusterSubspace:
    mean = block.mean(axis=1)
    centered = block - mean[:, None]
    U, s, _ = linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        keep = 0
    else:
        keep = int(np.sum(s > Config.SUBSPACE_RANK_TOL * s[0]))
    keep = min(keep, d)
    return ClusterSubspace(label=label, mean=mean, basis=U[:, :keep])


def fit_subspace_model(X_in: DataMatrix, labels: LabelVector, d: int) -> SubspaceModel:
    """Среднее и базис каждого кластера; d_c = min(d, численный ранг)."""
    if d < 1:
        raise InvalidSpec(f"Размерность подпространства должна быть >= 1, получено {d}")
    if len(labels) != X_in.n_samples:
        raise DimensionMismatch(f"Меток {len(labels)}, а объектов {X_in.n_samples}")

    subspaces = []
    for c in range(1, labels.num_clusters + 1):
        members = labels.indices_of(c)
        if members.size == 0:
            raise EmptyCluster(f"Кластер {c} пуст")
        subspace = _subspace_of(X_in.values[:, members], c, d)
        if subspace.dim < d:
            logger.debug(f"Cluster {c}: basis truncated to rank {subspace.dim} (requested {d})")
        subspaces.append(subspace)
    return SubspaceModel(tuple(subspaces))


def _as_vector(model: SubspaceModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != model.ambient_dim:
        raise DimensionMismatch(f"Длина объекта {x.shape[0]}, ожидалось {model.ambient_dim}")
    return x


def assign_oos(model: SubspaceModel, x: np.ndarray) -> Assignment:
    """Метка ближайшего подпространства; при равенстве - меньший номер кластера."""
    x = _as_vector(model, x)
    distances = np.array([s.distance(x) for s in model.subspaces])
    return Assignment(label=int(np.argmin(distances)) + 1, distances=distances)


def assign_oos_batch(model: SubspaceModel, X_out: DataMatrix) -> tuple[LabelVector, np.ndarray]:
    """Назначение для всех столбцов X_out; distances имеет форму M x C."""
    if X_out.dim != model.ambient_dim:
        raise DimensionMismatch(f"Размерность {X_out.dim}, ожидалось {model.ambient_dim}")
    distances = np.empty((X_out.n_samples, model.num_clusters))
    for j, s in enumerate(model.subspaces):
        centered = X_out.values - s.mean[:, None]
        residual = centered - s.basis @ (s.basis.T @ centered)
        distances[:, j] = np.linalg.norm(residual, axis=0)
    labels = np.argmin(distances, axis=1).astype(np.int64) + 1
    return LabelVector(labels, model.num_clusters), distances


# --- Ядерный вариант ---


def _kernel_matrix(train: DataMatrix, sigma2: float, kernel: KernelName) -> np.ndarray:
    if kernel == "linear":
        return train.values.T @ train.values
    return gaussian_gram(train, sigma2)


def _kernel_vector(model: KernelOosModel, x: np.ndarray) -> np.ndarray:
    if model.kernel == "linear":
        return model.train.values.T @ x
    sq = cdist(x[None, :], model.train.values.T, metric="sqeuclidean")[0]
    return np.exp(-sq / (2.0 * model.sigma2))


def fit_kernel_oos(
    X_in: DataMatrix,
    labels: LabelVector,
    d: int,
    sigma2: float,
    rank_tol: float = Config.KERNEL_RANK_TOL,
    kernel: KernelName = "gaussian",
) -> KernelOosModel:
    """
    Центрированное ядро K = (I - E) 𝒦 (I - E), его собственная система,
    R = min(N - 1, число λ_j > rank_tol * λ_max), координаты Y = Λ^{1/2} U^T.
    """
    if kernel not in ("gaussian", "linear"):
        raise InvalidSpec(f"Неизвестное ядро: {kernel}")
    if kernel == "gaussian" and not sigma2 > 0:
        raise InvalidSpec(f"sigma2 должна быть > 0, получено {sigma2}")
    n = X_in.n_samples
    if n < 2:
        raise InvalidSpec("Для ядерной модели нужно хотя бы два объекта")

    raw = _kernel_matrix(X_in, sigma2, kernel)
    row_means = raw.mean(axis=1)
    grand_mean = float(raw.mean())
    K = raw - row_means[:, None] - row_means[None, :] + grand_mean
    K = (K + K.T) / 2

    try:
        eigvals, eigvecs = linalg.eigh(K)
    except linalg.LinAlgError as e:
        raise EigFailure(f"Собственное разложение ядра не сошлось: {e}") from e
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]

    lam_max = eigvals[0]
    if not lam_max > 0:
        raise EigFailure("Центрированное ядро не имеет положительных собственных значений")
    rank = min(n - 1, int(np.sum(eigvals > rank_tol * lam_max)))
    eigvals, eigvecs = eigvals[:rank], eigvecs[:, :rank]
    coords = np.sqrt(eigvals)[:, None] * eigvecs.T
    logger.info(f"Kernel OOS model: N={n}, retained rank R={rank}, kernel={kernel}")

    subspace_model = fit_subspace_model(DataMatrix(coords), labels, d)
    return KernelOosModel(
        train=X_in,
        sigma2=float(sigma2),
        kernel=kernel,
        eigvecs=eigvecs,
        eigvals=eigvals,
        coords=coords,
        subspace_model=subspace_model,
        row_means=row_means,
        grand_mean=grand_mean,
    )


def kernel_embed_test(model: KernelOosModel, x: np.ndarray) -> np.ndarray:
    """y = Λ^{-1/2} U^T k(x), где k(x) - центрированный вектор ядра."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != model.train.dim:
        raise DimensionMismatch(f"Длина объекта {x.shape[0]}, ожидалось {model.train.dim}")
    shifted = _kernel_vector(model, x) - model.row_means
    k = shifted - shifted.mean()
    return (model.eigvecs.T @ k) / np.sqrt(model.eigvals)


def kernel_embed_batch(model: KernelOosModel, X_out: DataMatrix) -> DataMatrix:
    """Координаты всех столбцов X_out (R x M)."""
    return DataMatrix(np.column_stack([kernel_embed_test(model, x) for x in X_out.values.T]))


def assign_kernel_oos(model: KernelOosModel, x: np.ndarray) -> Assignment:
    return assign_oos(model.subspace_model, kernel_embed_test(model, x))


def assign_kernel_oos_batch(
    model: KernelOosModel, X_out: DataMatrix
) -> tuple[LabelVector, np.ndarray]:
    return assign_oos_batch(model.subspace_model, kernel_embed_batch(model, X_out))
