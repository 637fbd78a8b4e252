"""
Представление данных, файловый ввод-вывод, синтетика «объединение
подпространств» и разбиение на in-sample / out-of-sample.

Форматы:
- CSV: UTF-8, запятая, без заголовка; строки = признаки, столбцы = объекты.
- BIN: b"LFSG", u32 LE D, u32 LE N, затем D*N float64 LE по столбцам.
- Метки: одно целое число на строку.
"""

from __future__ import annotations

import io
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from errors import EmptyMatrix, InsufficientClassSize, InvalidSpec, ParseError

logger = logging.getLogger(__name__)

BIN_MAGIC = b"LFSG"
_BIN_HEADER = struct.Struct("<4sII")

PathLike = Union[str, Path]


def make_rng(seed: int) -> np.random.Generator:
    """Единственный источник случайности: PCG64 с 64-битным seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """Матрица D x N, один объект на столбец."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidSpec(f"Ожидалась двумерная матрица, получено ndim={values.ndim}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise EmptyMatrix(f"Пустая матрица формы {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidSpec("Матрица содержит NaN или Inf")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    def columns(self, indices: Sequence[int]) -> DataMatrix:
        """Подматрица из выбранных столбцов."""
        return DataMatrix(self.values[:, np.asarray(indices, dtype=np.int64)])


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Метки кластеров в {1..C}; и истинные, и псевдометки."""

    labels: np.ndarray
    num_clusters: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise InvalidSpec("Метки должны быть одномерным массивом")
        if not np.issubdtype(labels.dtype, np.integer):
            if labels.size and not np.all(labels == np.round(labels)):
                raise InvalidSpec("Метки должны быть целыми числами")
        labels = labels.astype(np.int64)
        if self.num_clusters < 1:
            raise InvalidSpec(f"Число кластеров должно быть >= 1, получено {self.num_clusters}")
        if labels.size and (labels.min() < 1 or labels.max() > self.num_clusters):
            raise InvalidSpec(f"Метки выходят за пределы 1..{self.num_clusters}")
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_values(cls, values: Sequence[int]) -> LabelVector:
        """Переиндексация произвольных целых идентификаторов в 1..C по возрастанию."""
        values = np.asarray(values)
        if values.size == 0:
            raise InvalidSpec("Пустой вектор меток")
        unique, inverse = np.unique(values, return_inverse=True)
        return cls(inverse.astype(np.int64) + 1, int(unique.size))

    def __len__(self) -> int:
        return int(self.labels.size)

    def histogram(self) -> np.ndarray:
        """Число объектов в каждом кластере 1..C."""
        return np.bincount(self.labels - 1, minlength=self.num_clusters)

    def indices_of(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def subset(self, indices: Sequence[int]) -> LabelVector:
        return LabelVector(self.labels[np.asarray(indices, dtype=np.int64)], self.num_clusters)


@dataclass(frozen=True)
class SyntheticSpec:
    """Параметры генератора объединения линейных подпространств."""

    num_clusters: int
    ambient_dim: int
    subspace_dims: tuple[int, ...]
    points_per_cluster: tuple[int, ...]
    noise_std: float = 0.0
    seed: int = 0

    @classmethod
    def uniform(
        cls,
        num_clusters: int,
        ambient_dim: int,
        subspace_dim: int,
        points_per_cluster: int,
        noise_std: float = 0.0,
        seed: int = 0,
    ) -> SyntheticSpec:
        """Одинаковые размерности и размеры кластеров."""
        return cls(
            num_clusters=num_clusters,
            ambient_dim=ambient_dim,
            subspace_dims=(subspace_dim,) * num_clusters,
            points_per_cluster=(points_per_cluster,) * num_clusters,
            noise_std=noise_std,
            seed=seed,
        )

    def validate(self) -> None:
        if self.num_clusters < 1:
            raise InvalidSpec(f"num_clusters должен быть >= 1, получено {self.num_clusters}")
        if self.ambient_dim < 2:
            raise InvalidSpec(f"ambient_dim должен быть >= 2, получено {self.ambient_dim}")
        if len(self.subspace_dims) != self.num_clusters:
            raise InvalidSpec("Длина subspace_dims не совпадает с num_clusters")
        if len(self.points_per_cluster) != self.num_clusters:
            raise InvalidSpec("Длина points_per_cluster не совпадает с num_clusters")
        for d in self.subspace_dims:
            if d < 1 or d >= self.ambient_dim:
                raise InvalidSpec(
                    f"Размерность подпространства {d} должна быть в 1..{self.ambient_dim - 1}"
                )
        if any(n < 1 for n in self.points_per_cluster):
            raise InvalidSpec("Каждый кластер должен содержать хотя бы одну точку")
        if self.noise_std < 0:
            raise InvalidSpec(f"noise_std должен быть >= 0, получено {self.noise_std}")


@dataclass(frozen=True)
class SplitSpec:
    """Сколько объектов каждого класса уходит в in-sample и out-of-sample."""

    in_per_class: int
    out_per_class: int
    seed: int = 0

    def validate(self) -> None:
        if self.in_per_class < 1:
            raise InvalidSpec(f"in_per_class должен быть >= 1, получено {self.in_per_class}")
        if self.out_per_class < 0:
            raise InvalidSpec(f"out_per_class должен быть >= 0, получено {self.out_per_class}")


@dataclass(frozen=True, eq=False)
class Split:
    """Результат разбиения; out-часть пуста при out_per_class = 0."""

    in_data: DataMatrix
    in_labels: LabelVector
    in_indices: np.ndarray
    out_data: Optional[DataMatrix]
    out_labels: Optional[LabelVector]
    out_indices: np.ndarray

    @property
    def out_empty(self) -> bool:
        return self.out_data is None


# --- Ввод-вывод ---


def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        fmt = fmt.lower()
    else:
        fmt = "csv" if path.suffix.lower() == ".csv" else "bin"
    if fmt not in ("csv", "bin"):
        raise ParseError(f"Неизвестный формат матрицы: {fmt}")
    return fmt


def _parse_csv(text: str, path: Path) -> np.ndarray:
    if not text.strip():
        raise EmptyMatrix(f"Пустой файл: {path}")
    try:
        return np.loadtxt(io.StringIO(text), delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise ParseError(f"Ошибка разбора CSV {path}: {e}") from e


def _parse_bin(payload: bytes, path: Path) -> np.ndarray:
    if len(payload) == 0:
        raise EmptyMatrix(f"Пустой файл: {path}")
    if len(payload) < _BIN_HEADER.size:
        raise ParseError(f"Файл {path} короче заголовка")
    magic, dim, n = _BIN_HEADER.unpack_from(payload)
    if magic != BIN_MAGIC:
        raise ParseError(f"Неверная сигнатура {magic!r} в {path}")
    if dim == 0 or n == 0:
        raise EmptyMatrix(f"Пустая матрица {dim}x{n} в {path}")
    body = payload[_BIN_HEADER.size:]
    expected = dim * n * 8
    if len(body) != expected:
        raise ParseError(f"Ожидалось {expected} байт данных в {path}, получено {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape((dim, n), order="F").astype(np.float64)


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"{path}: файл не в кодировке UTF-8 (байт {e.start})") from e


def load_matrix(path: PathLike, fmt: Optional[str] = None, transpose: bool = False) -> DataMatrix:
    """
    Загрузка матрицы данных.

    :param path: путь к файлу
    :param fmt: "csv" или "bin"; по умолчанию определяется по расширению
    :param transpose: файл хранит объекты по строкам
    """
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if fmt == "csv":
        values = _parse_csv(_read_text(path), path)
    else:
        values = _parse_bin(path.read_bytes(), path)
    if transpose:
        values = values.T
    if values.size == 0:
        raise EmptyMatrix(f"Пустая матрица в {path}")
    matrix = DataMatrix(values)
    logger.info(f"Loaded {matrix.dim}x{matrix.n_samples} matrix from {path}")
    return matrix


def save_matrix(matrix: DataMatrix, path: PathLike, fmt: Optional[str] = None) -> Path:
    """Сохранение матрицы в CSV или BIN."""
    path = Path(path)
    fmt = _infer_format(path, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        rows = (",".join(repr(float(v)) for v in row) for row in matrix.values)
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    else:
        header = _BIN_HEADER.pack(BIN_MAGIC, matrix.dim, matrix.n_samples)
        body = np.asarray(matrix.values, dtype="<f8").tobytes(order="F")
        path.write_bytes(header + body)
    return path


def load_labels(path: PathLike) -> LabelVector:
    """Загрузка меток; произвольные идентификаторы сжимаются в 1..C."""
    path = Path(path)
    lines = [line.strip() for line in _read_text(path).splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise EmptyMatrix(f"Пустой файл меток: {path}")
    try:
        raw = np.array([int(line) for line in lines], dtype=np.int64)
    except ValueError as e:
        raise ParseError(f"Нецелая метка в {path}: {e}") from e
    labels = LabelVector.from_values(raw)
    if not np.array_equal(labels.labels, raw):
        logger.info(f"Label ids in {path} remapped to 1..{labels.num_clusters}")
    return labels


def save_labels(labels: LabelVector, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{int(v)}\n" for v in labels.labels), encoding="utf-8")
    return path


# --- Синтетика и разбиение ---


def generate_synthetic(spec: SyntheticSpec) -> tuple[DataMatrix, LabelVector]:
    """
    Точки x = A_i z из объединения C линейных подпространств.

    Базисы A_i: гауссовские D x d_i матрицы, ортонормированные QR;
    коэффициенты z ~ N(0, 1); опционально аддитивный шум N(0, noise_std^2).
    """
    spec.validate()
    rng = make_rng(spec.seed)
    blocks = []
    labels = []
    for i, (d, n) in enumerate(zip(spec.subspace_dims, spec.points_per_cluster), start=1):
        basis, _ = np.linalg.qr(rng.standard_normal((spec.ambient_dim, d)))
        block = basis @ rng.standard_normal((d, n))
        if spec.noise_std > 0:
            block = block + spec.noise_std * rng.standard_normal(block.shape)
        blocks.append(block)
        labels.append(np.full(n, i, dtype=np.int64))
    X = DataMatrix(np.hstack(blocks))
    y = LabelVector(np.concatenate(labels), spec.num_clusters)
    logger.info(
        f"Generated {X.dim}x{X.n_samples} synthetic matrix, "
        f"{spec.num_clusters} subspaces, noise={spec.noise_std}"
    )
    return X, y


def split_in_out(X: DataMatrix, y: LabelVector, spec: SplitSpec) -> Split:
    """Случайное разбиение каждого класса без возвращения, детерминированное по seed."""
    spec.validate()
    if len(y) != X.n_samples:
        raise InvalidSpec(f"Меток {len(y)}, а объектов {X.n_samples}")
    need = spec.in_per_class + spec.out_per_class
    rng = make_rng(spec.seed)
    in_parts = []
    out_parts = []
    for c in range(1, y.num_clusters + 1):
        members = y.indices_of(c)
        if members.size < need:
            raise InsufficientClassSize(
                f"В классе {c} {members.size} объектов, требуется {need}"
            )
        chosen = rng.choice(members, size=need, replace=False)
        in_parts.append(chosen[: spec.in_per_class])
        out_parts.append(chosen[spec.in_per_class:])

    in_idx = np.concatenate(in_parts)
    out_idx = np.concatenate(out_parts).astype(np.int64)
    out_data = X.columns(out_idx) if out_idx.size else None
    out_labels = y.subset(out_idx) if out_idx.size else None
    return Split(
        in_data=X.columns(in_idx),
        in_labels=y.subset(in_idx),
        in_indices=in_idx,
        out_data=out_data,
        out_labels=out_labels,
        out_indices=out_idx,
    )
