"""
Общая «задняя половина» любого SC-конвейера: матрица сходства,
нормированный лапласиан, графовая фильтрация, спектральное вложение и k-means.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.cluster import KMeans

from config import Config
from data import DataMatrix, LabelVector
from errors import DimensionMismatch, EigFailure, NonSquare

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AffinityGraph:
    """Сходство W, степени вершин и нормированный лапласиан L."""

    W: np.ndarray
    degrees: np.ndarray
    laplacian: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True, eq=False)
class SpectralEmbedding:
    """Строки coords - вложенные объекты; eigenvalues по возрастанию."""

    coords: np.ndarray
    eigenvalues: np.ndarray


def _require_square(M: np.ndarray, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonSquare(f"{name} должна быть квадратной, получено {M.shape}")
    return M


def affinity_from_representation(Z: np.ndarray) -> np.ndarray:
    """W = (|Z| + |Z|^T) / 2."""
    Z = _require_square(Z, "Z")
    A = np.abs(Z)
    return (A + A.T) / 2


def normalized_laplacian(W: np.ndarray) -> AffinityGraph:
    """L = I - D^{-1/2} W D^{-1/2}; степени ограничены снизу DEGREE_FLOOR."""
    W = _require_square(W, "W")
    degrees = np.maximum(W.sum(axis=1), Config.DEGREE_FLOOR)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    L = np.eye(W.shape[0]) - inv_sqrt[:, None] * W * inv_sqrt[None, :]
    # симметрия точно, а не с точностью до округления
    L = (L + L.T) / 2
    return AffinityGraph(W=W, degrees=degrees, laplacian=L)


def graph_filter(X: DataMatrix, L: np.ndarray, k: int) -> DataMatrix:
    """
    Сглаживание признаков: X̄^T = (I - L/2)^k X^T.

    Степень не возводится явно: k последовательных умножений.
    """
    L = _require_square(L, "L")
    if L.shape[0] != X.n_samples:
        raise DimensionMismatch(f"L {L.shape} не согласована с N={X.n_samples}")
    if k < 0:
        raise DimensionMismatch(f"Порядок фильтра должен быть >= 0, получено {k}")
    if k == 0:
        return X
    H = np.eye(L.shape[0]) - L / 2
    Xt = X.values.T
    for _ in range(k):
        Xt = H @ Xt
    return DataMatrix(Xt.T)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Знак каждого собственного вектора: наибольшая по модулю компонента > 0."""
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _order_ties(eigenvalues: np.ndarray, vectors: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Внутри группы совпадающих (до tol) собственных значений столбцы идут по индексу главной компоненты."""
    group = np.concatenate([[0], np.cumsum(np.diff(eigenvalues) > tol)])
    pivots = np.argmax(np.abs(vectors), axis=0)
    order = np.lexsort((pivots, group))
    return eigenvalues[order], vectors[:, order]


def spectral_embed(L: np.ndarray, C: int) -> SpectralEmbedding:
    """Собственные векторы C наименьших собственных значений, строки нормированы."""
    L = _require_square(L, "L")
    n = L.shape[0]
    if not 1 <= C <= n:
        raise DimensionMismatch(f"C={C} должно быть в 1..{n}")
    try:
        eigenvalues, vectors = linalg.eigh(L, subset_by_index=[0, C - 1])
    except linalg.LinAlgError as e:
        raise EigFailure(f"Собственное разложение лапласиана не сошлось: {e}") from e

    vectors = _fix_signs(vectors)
    eigenvalues, vectors = _order_ties(eigenvalues, vectors, Config.EIG_TIE_TOL)
    norms = np.linalg.norm(vectors, axis=1)
    coords = vectors / np.maximum(norms, Config.ROW_NORM_FLOOR)[:, None]
    return SpectralEmbedding(coords=coords, eigenvalues=eigenvalues)


def kmeans(
    points: np.ndarray,
    C: int,
    seed: int,
    restarts: int = Config.KMEANS_RESTARTS,
) -> LabelVector:
    """k-means++ с restarts перезапусками; лучший по внутрикластерной сумме квадратов."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if C == 1:
        return LabelVector(np.ones(n, dtype=np.int64), 1)
    if n < C:
        raise DimensionMismatch(f"Точек {n} меньше, чем кластеров {C}")
    model = KMeans(
        n_clusters=C,
        init="k-means++",
        n_init=restarts,
        max_iter=Config.KMEANS_MAX_ITER,
        tol=0.0,
        random_state=int(seed) % (2**32),
        algorithm="lloyd",
    )
    labels = model.fit_predict(points)
    logger.debug(f"k-means: C={C}, inertia={model.inertia_:.6g}, iterations={model.n_iter_}")
    return LabelVector(labels.astype(np.int64) + 1, C)


def spectral_clustering(
    W: np.ndarray,
    C: int,
    seed: int,
    restarts: int = Config.KMEANS_RESTARTS,
) -> LabelVector:
    """Лапласиан -> спектральное вложение -> k-means."""
    graph = normalized_laplacian(W)
    embedding = spectral_embed(graph.laplacian, C)
    return kmeans(embedding.coords, C, seed, restarts)
