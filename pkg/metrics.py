"""
Метрики качества кластеризации (ACC, NMI, попарная F1) и ранговый критерий
Уилкоксона. Все метрики в процентах и применимы как к паре
«истина / псевдометки», так и к двум наборам псевдометок.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment
from scipy.special import comb
from sklearn.metrics import mutual_info_score

from data import LabelVector
from errors import EmptySample, InvalidSpec, LengthMismatch

logger = logging.getLogger(__name__)

LabelsLike = Union[LabelVector, np.ndarray, Sequence[int]]

# Точный ранговый критерий применяется до этого размера меньшей выборки
EXACT_RANKSUM_MAX = 8


class MetricKind(str, Enum):
    ACC = "acc"
    NMI = "nmi"


@dataclass(frozen=True, eq=False)
class Contingency:
    """Таблица сопряжённости: counts[a-1, b-1] = #{n : y1_n = a, y2_n = b}."""

    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    total: int


def _as_labels(y: LabelsLike) -> tuple[np.ndarray, int]:
    if isinstance(y, LabelVector):
        return y.labels, y.num_clusters
    arr = np.asarray(y, dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidSpec("Ожидался непустой одномерный вектор меток")
    if arr.min() < 1:
        raise InvalidSpec("Метки должны быть в 1..C")
    return arr, int(arr.max())


def contingency(y1: LabelsLike, y2: LabelsLike) -> Contingency:
    a, c1 = _as_labels(y1)
    b, c2 = _as_labels(y2)
    if a.size != b.size:
        raise LengthMismatch(f"Длины меток различаются: {a.size} и {b.size}")
    counts = np.zeros((c1, c2), dtype=np.int64)
    np.add.at(counts, (a - 1, b - 1), 1)
    return Contingency(
        counts=counts,
        row_sums=counts.sum(axis=1),
        col_sums=counts.sum(axis=0),
        total=int(a.size),
    )


def acc(y1: LabelsLike, y2: LabelsLike) -> float:
    """Точность при оптимальном сопоставлении меток (венгерский алгоритм)."""
    table = contingency(y1, y2)
    size = max(table.counts.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: table.counts.shape[0], : table.counts.shape[1]] = table.counts
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return 100.0 * padded[rows, cols].sum() / table.total


def _entropy(sums: np.ndarray) -> float:
    sums = sums[sums > 0]
    return float(stats.entropy(sums))


def nmi(y1: LabelsLike, y2: LabelsLike) -> float:
    """
    NMI = MI / sqrt(H(y1) H(y2)), натуральный логарифм.

    Если одна из энтропий нулевая: 100 при совпадении разбиений, иначе 0.
    """
    table = contingency(y1, y2)
    h1 = _entropy(table.row_sums)
    h2 = _entropy(table.col_sums)
    if h1 == 0.0 or h2 == 0.0:
        return 100.0 if h1 == h2 == 0.0 else 0.0
    mi = max(mutual_info_score(None, None, contingency=table.counts), 0.0)
    return float(np.clip(100.0 * mi / np.sqrt(h1 * h2), 0.0, 100.0))


def pairwise_f1(y1: LabelsLike, y2: LabelsLike) -> float:
    """F1 по неупорядоченным парам: пара положительна, если объекты в одном кластере."""
    table = contingency(y1, y2)
    if table.total < 2:
        raise InvalidSpec("Для попарной F1 нужно хотя бы два объекта")
    tp = float(comb(table.counts, 2).sum())
    pairs1 = float(comb(table.row_sums, 2).sum())
    pairs2 = float(comb(table.col_sums, 2).sum())
    precision = tp / pairs2 if pairs2 > 0 else 0.0
    recall = tp / pairs1 if pairs1 > 0 else 0.0
    if precision + recall == 0:
        return 0.0
    return 100.0 * 2 * precision * recall / (precision + recall)


def score(kind: MetricKind, y1: LabelsLike, y2: LabelsLike) -> float:
    """Диспетчер ACC / NMI."""
    if kind is MetricKind.ACC:
        return acc(y1, y2)
    if kind is MetricKind.NMI:
        return nmi(y1, y2)
    raise InvalidSpec(f"Неизвестная метрика: {kind}")


def ranksum(a: Sequence[float], b: Sequence[float]) -> float:
    """
    Двусторонний p-value критерия Манна-Уитни / Уилкоксона.

    Точный перебор, если min(|a|, |b|) <= 8 и нет совпадений; иначе
    нормальная аппроксимация с поправками на совпадения и непрерывность.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise EmptySample("Обе выборки должны быть непустыми")
    pooled = np.concatenate([a, b])
    has_ties = np.unique(pooled).size < pooled.size
    exact = min(a.size, b.size) <= EXACT_RANKSUM_MAX and not has_ties
    result = stats.mannwhitneyu(
        a,
        b,
        use_continuity=True,
        alternative="two-sided",
        method="exact" if exact else "asymptotic",
    )
    p_value = float(result.pvalue)
    if np.isnan(p_value):
        # все значения совпадают: дисперсия статистики нулевая
        p_value = 1.0
    return min(max(p_value, 0.0), 1.0)
