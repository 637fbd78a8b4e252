"""
Интерпретируемость: представители кластеров из базисов подпространств
и их экспорт в 8-битные изображения (PGM или PNG).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence, Union

import numpy as np
import png
from scipy import linalg

from config import Config
from data import DataMatrix, LabelVector
from errors import EmptyCluster, InvalidSpec, ParseError, ShapeMismatch

logger = logging.getLogger(__name__)

ImageFormat = Literal["pgm", "png"]

_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


@dataclass(frozen=True, eq=False)
class ClusterRepresentative:
    cluster: int
    vector: np.ndarray
    singular_values: np.ndarray

    def image(self, dx: int, dy: int) -> np.ndarray:
        return matricize(self.vector, dx, dy)


def cluster_representatives(
    X_in: DataMatrix, labels: LabelVector, d: int
) -> list[ClusterRepresentative]:
    """
    a_c = Σ_j σ_j u_j по первым min(d, ранг) сингулярным тройкам
    нецентрированного блока кластера. Знак u_j выбирается так, чтобы сумма
    его компонент была неотрицательной.
    """
    if d < 1:
        raise InvalidSpec(f"d должно быть >= 1, получено {d}")
    representatives = []
    for c in range(1, labels.num_clusters + 1):
        members = labels.indices_of(c)
        if members.size == 0:
            raise EmptyCluster(f"Кластер {c} пуст")
        U, s, _ = linalg.svd(X_in.values[:, members], full_matrices=False)
        rank = int(np.sum(s > Config.SUBSPACE_RANK_TOL * s[0])) if s[0] > 0 else 0
        keep = min(d, rank)
        U, s = U[:, :keep], s[:keep]
        signs = np.where(U.sum(axis=0) < 0, -1.0, 1.0)
        U = U * signs
        representatives.append(ClusterRepresentative(c, U @ s, s))
    return representatives


def matricize(a: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Вектор длины Dx*Dy в изображение Dx x Dy, по столбцам."""
    a = np.asarray(a, dtype=np.float64).ravel()
    if dx < 1 or dy < 1 or a.size != dx * dy:
        raise ShapeMismatch(f"Длина {a.size} не равна {dx}x{dy}")
    return a.reshape((dx, dy), order="F")


def vectorize(A: np.ndarray) -> np.ndarray:
    return np.asarray(A, dtype=np.float64).ravel(order="F")


def to_grayscale(A: np.ndarray) -> np.ndarray:
    """Min-max в [0, 255] с округлением половины вверх; константа -> 0."""
    A = np.asarray(A, dtype=np.float64)
    lo, hi = A.min(), A.max()
    if hi == lo:
        return np.zeros(A.shape, dtype=np.uint8)
    scaled = np.floor((A - lo) / (hi - lo) * 255.0 + 0.5)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def write_pgm(pixels: np.ndarray, path: Union[str, Path]) -> Path:
    """Бинарный P5: ширина = число столбцов, высота = число строк."""
    path = Path(path)
    pixels = np.asarray(pixels, dtype=np.uint8)
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    path.write_bytes(header + pixels.tobytes(order="C"))
    return path


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    payload = Path(path).read_bytes()
    match = _PGM_HEADER.match(payload)
    if match is None:
        raise ParseError(f"Не PGM P5: {path}")
    width, height, maxval = (int(g) for g in match.groups())
    if maxval != 255:
        raise ParseError(f"Поддерживается только maxval 255, получено {maxval}")
    body = payload[match.end():]
    if len(body) != width * height:
        raise ParseError(f"Ожидалось {width * height} байт пикселей, получено {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape((height, width))


def write_png(pixels: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    pixels = np.asarray(pixels, dtype=np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as f:
        png.Writer(width=width, height=height, greyscale=True, bitdepth=8).write(
            f, pixels.tolist()
        )
    return path


_WRITERS = {"pgm": write_pgm, "png": write_png}


def export_images(
    images: Sequence[tuple[int, np.ndarray]],
    directory: Union[str, Path],
    fmt: ImageFormat = "pgm",
) -> list[Path]:
    """
    Запись изображений cluster_<c>.<ext>.

    :param images: пары (номер кластера, вещественное изображение)
    :param directory: каталог назначения (создаётся при необходимости)
    :param fmt: "pgm" или "png"
    :return: список записанных файлов
    """
    if not images:
        raise InvalidSpec("Нет изображений для экспорта")
    writer = _WRITERS.get(fmt)
    if writer is None:
        raise InvalidSpec(f"Неизвестный формат изображения: {fmt}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [writer(to_grayscale(A), directory / f"cluster_{c}.{fmt}") for c, A in images]
    logger.info(f"Exported {len(paths)} {fmt.upper()} image(s) to {directory}")
    return paths
