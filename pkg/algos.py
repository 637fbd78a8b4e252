"""
Алгоритмы подпространственной кластеризации за общим интерфейсом:
LSR в замкнутой форме, LSR с гауссовским ядром и LSR с графовой фильтрацией
(итеративная). Каждый строит матрицу сходства для модуля graph.

Ограничение diag(Z) = 0 для LSR не накладывается: замкнутое решение
Z = (X^T X + λI)^{-1} X^T X существует только без него.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist, squareform

from config import Config
from data import DataMatrix, LabelVector
from errors import DimensionMismatch, InvalidSpec, NonSquare, NotImplementedKind, SolveFailure
from graph import affinity_from_representation, graph_filter, normalized_laplacian, spectral_clustering

logger = logging.getLogger(__name__)


class AlgorithmKind(str, Enum):
    LSR = "lsr"
    KERNEL_LSR = "kernel_lsr"
    GF_LSR = "gf_lsr"
    # Зарезервированы под ADMM-решатели
    SSC = "ssc"
    S0L0_LRSSC = "s0l0_lrssc"


# Имена гиперпараметров, которые можно подбирать
PARAM_LAMBDA = "lambda"
PARAM_SIGMA2 = "sigma2"
PARAM_FILTER_ORDER = "filter_order"


@dataclass(frozen=True)
class ScAlgorithmSpec:
    """Тип алгоритма и его гиперпараметры."""

    kind: AlgorithmKind = AlgorithmKind.LSR
    lam: float = 1.0
    sigma2: Optional[float] = None
    filter_order: int = 0
    gf_epsilon: float = Config.GF_EPSILON
    gf_max_iter: int = Config.GF_MAX_ITER

    def validate(self) -> None:
        if self.kind in (AlgorithmKind.SSC, AlgorithmKind.S0L0_LRSSC):
            raise NotImplementedKind(f"Алгоритм '{self.kind.value}' зарезервирован, но не реализован")
        if not self.lam > 0:
            raise InvalidSpec(f"lambda должна быть > 0, получено {self.lam}")
        if self.kind is AlgorithmKind.KERNEL_LSR and not (self.sigma2 and self.sigma2 > 0):
            raise InvalidSpec(f"kernel_lsr требует sigma2 > 0, получено {self.sigma2}")
        if self.kind is AlgorithmKind.GF_LSR:
            if self.filter_order < 0:
                raise InvalidSpec(f"filter_order должен быть >= 0, получено {self.filter_order}")
            if not self.gf_epsilon > 0 or self.gf_max_iter < 1:
                raise InvalidSpec("gf_epsilon должен быть > 0, gf_max_iter >= 1")

    def with_param(self, name: str, value: float) -> ScAlgorithmSpec:
        """Копия спецификации с заменённым гиперпараметром."""
        if name == PARAM_LAMBDA:
            return replace(self, lam=float(value))
        if name == PARAM_SIGMA2:
            return replace(self, sigma2=float(value))
        if name == PARAM_FILTER_ORDER:
            return replace(self, filter_order=int(round(value)))
        raise InvalidSpec(f"Неизвестный гиперпараметр: {name}")

    def param(self, name: str) -> float:
        return {
            PARAM_LAMBDA: self.lam,
            PARAM_SIGMA2: self.sigma2,
            PARAM_FILTER_ORDER: self.filter_order,
        }[name]

    @property
    def secondary_param(self) -> Optional[str]:
        """Второй гиперпараметр алгоритма (для схемы из двух этапов)."""
        if self.kind is AlgorithmKind.KERNEL_LSR:
            return PARAM_SIGMA2
        if self.kind is AlgorithmKind.GF_LSR:
            return PARAM_FILTER_ORDER
        return None


@dataclass(frozen=True, eq=False)
class ClusterResult:
    labels: LabelVector
    affinity: np.ndarray
    representation: Optional[np.ndarray] = None
    iterations: int = 1
    converged: bool = True
    monitor: tuple[float, ...] = field(default_factory=tuple)


@dataclass(frozen=True, eq=False)
class GraphFilterOutcome:
    """Результат графовой фильтрации: последняя W_t и история ||W_t - W_{t-1}||_F^2."""

    affinity: np.ndarray
    iterations: int
    converged: bool
    monitor: tuple[float, ...]


def _spd_solve(G: np.ndarray, lam: float) -> np.ndarray:
    """Решение (G + λI) Z = G разложением Холецкого с проверкой невязки."""
    A = G + lam * np.eye(G.shape[0])
    try:
        factor = linalg.cho_factor(A, lower=True, check_finite=False)
        Z = linalg.cho_solve(factor, G, check_finite=False)
    except linalg.LinAlgError as e:
        raise SolveFailure(f"Разложение Холецкого не удалось (lambda={lam}): {e}") from e

    residual = np.linalg.norm(A @ Z - G)
    bound = Config.SOLVE_RESIDUAL_TOL * np.linalg.norm(G)
    if not residual <= bound:
        raise SolveFailure(f"Невязка {residual:.3e} превышает допуск {bound:.3e} (lambda={lam})")
    return Z


def lsr_representation(X: DataMatrix, lam: float) -> np.ndarray:
    """Z = (X^T X + λI)^{-1} X^T X."""
    if not lam > 0:
        raise InvalidSpec(f"lambda должна быть > 0, получено {lam}")
    G = X.values.T @ X.values
    return _spd_solve(G, lam)


def gaussian_gram(X: DataMatrix, sigma2: float) -> np.ndarray:
    """K_ij = exp(-||x_i - x_j||^2 / (2σ^2)); в показателе квадрат нормы."""
    if not sigma2 > 0:
        raise InvalidSpec(f"sigma2 должна быть > 0, получено {sigma2}")
    sq = squareform(pdist(X.values.T, metric="sqeuclidean"))
    return np.exp(-sq / (2.0 * sigma2))


def kernel_lsr_representation(K: np.ndarray, lam: float) -> np.ndarray:
    """Z = (K + λI)^{-1} K."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise NonSquare(f"Матрица Грама должна быть квадратной, получено {K.shape}")
    if not lam > 0:
        raise InvalidSpec(f"lambda должна быть > 0, получено {lam}")
    if np.linalg.norm(K - K.T) > 1e-10 * max(np.linalg.norm(K), 1.0):
        raise InvalidSpec("Матрица Грама не симметрична")
    return _spd_solve(K, lam)


def gf_lsr(
    X: DataMatrix,
    lam: float,
    k: int,
    epsilon: float = Config.GF_EPSILON,
    max_iter: int = Config.GF_MAX_ITER,
) -> GraphFilterOutcome:
    """
    LSR на графово-отфильтрованных данных.

    На каждой итерации фильтруется исходная X (а не X̄_t). Критерий останова
    проверяется начиная со второй итерации.
    """
    X_bar = X
    W_prev: Optional[np.ndarray] = None
    monitor: list[float] = []
    converged = False
    t = 0
    W = None
    while t < max_iter:
        t += 1
        Z = lsr_representation(X_bar, lam)
        W = affinity_from_representation(Z)
        if W_prev is not None:
            change = float(np.sum((W - W_prev) ** 2))
            monitor.append(change)
            logger.debug(f"gf_lsr t={t}: ||W_t - W_t-1||_F^2 = {change:.3e}")
            if change <= epsilon:
                converged = True
                break
        L = normalized_laplacian(W).laplacian
        X_bar = graph_filter(X, L, k)
        W_prev = W

    if not converged:
        logger.warning(f"gf_lsr stopped at iteration cap {max_iter} without meeting epsilon={epsilon}")
    return GraphFilterOutcome(affinity=W, iterations=t, converged=converged, monitor=tuple(monitor))


# --- Реестр построителей сходства ---

def _build_lsr(X: DataMatrix, spec: ScAlgorithmSpec) -> tuple:
    Z = lsr_representation(X, spec.lam)
    return affinity_from_representation(Z), Z, 1, True, ()


def _build_kernel_lsr(X: DataMatrix, spec: ScAlgorithmSpec) -> tuple:
    Z = kernel_lsr_representation(gaussian_gram(X, spec.sigma2), spec.lam)
    return affinity_from_representation(Z), Z, 1, True, ()


def _build_gf_lsr(X: DataMatrix, spec: ScAlgorithmSpec) -> tuple:
    outcome = gf_lsr(X, spec.lam, spec.filter_order, spec.gf_epsilon, spec.gf_max_iter)
    return outcome.affinity, None, outcome.iterations, outcome.converged, outcome.monitor


AFFINITY_BUILDERS: dict[AlgorithmKind, Callable[[DataMatrix, ScAlgorithmSpec], tuple]] = {
    AlgorithmKind.LSR: _build_lsr,
    AlgorithmKind.KERNEL_LSR: _build_kernel_lsr,
    AlgorithmKind.GF_LSR: _build_gf_lsr,
}


def cluster(
    X: DataMatrix,
    spec: ScAlgorithmSpec,
    C: int,
    seed: int,
    restarts: int = Config.KMEANS_RESTARTS,
) -> ClusterResult:
    """Сходство выбранным алгоритмом, затем спектральная кластеризация."""
    spec.validate()
    if not 1 <= C <= X.n_samples:
        raise DimensionMismatch(f"C={C} должно быть в 1..{X.n_samples}")
    builder = AFFINITY_BUILDERS.get(spec.kind)
    if builder is None:
        raise NotImplementedKind(f"Нет построителя сходства для '{spec.kind.value}'")

    W, Z, iterations, converged, monitor = builder(X, spec)
    labels = spectral_clustering(W, C, seed, restarts)
    logger.debug(
        f"cluster kind={spec.kind.value} lambda={spec.lam:.6g} "
        f"sigma2={spec.sigma2} k={spec.filter_order}: histogram={labels.histogram().tolist()}"
    )
    return ClusterResult(
        labels=labels,
        affinity=W,
        representation=Z,
        iterations=iterations,
        converged=converged,
        monitor=monitor,
    )
