"""
Конфигурация инструментария подпространственной кластеризации.
"""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

# Загрузка переменных окружения из .env файла
load_dotenv()


class Config:
    """Класс конфигурации приложения."""

    # Логирование
    LOG_FILE: str = os.getenv("LFSG_LOG_FILE", "lfsg.log")
    LOG_LEVEL: str = os.getenv("LFSG_LOG_LEVEL", "INFO")

    # Параллелизм (потоки для независимых запусков SC)
    WORKERS: int = int(os.getenv("LFSG_WORKERS", "1"))

    # Журнал запусков бенчмарка (SQLite), пустая строка отключает журнал
    RUN_DB_PATH: str = os.getenv("LFSG_RUN_DB", "lfsg_runs.db")

    # k-means (финальное округление спектральной кластеризации)
    KMEANS_RESTARTS: int = int(os.getenv("LFSG_KMEANS_RESTARTS", "10"))
    KMEANS_MAX_ITER: int = 300

    # Граф
    DEGREE_FLOOR: float = 1e-12
    ROW_NORM_FLOOR: float = 1e-12
    EIG_TIE_TOL: float = 1e-10

    # Графовая фильтрация (gf_lsr)
    GF_EPSILON: float = 1e-4
    GF_MAX_ITER: int = 50

    # Допуск невязки для замкнутых решений LSR
    SOLVE_RESIDUAL_TOL: float = 1e-8

    # Ранги базисов подпространств
    SUBSPACE_RANK_TOL: float = 1e-10
    KERNEL_RANK_TOL: float = 1e-12

    # LFSG
    LFSG_EPSILON: float = 1e-3
    LFSG_MAX_ITERATIONS: int = 60
    SPACING_WARN_RATIO: float = 2.0

    # Бенчмарк
    BENCH_RUNS: int = 25

    @classmethod
    def validate(cls) -> bool:
        """Проверка корректности значений из окружения."""
        if cls.WORKERS < 1:
            raise ValueError(
                f"LFSG_WORKERS должен быть >= 1, получено {cls.WORKERS}"
            )
        if cls.KMEANS_RESTARTS < 1:
            raise ValueError(
                f"LFSG_KMEANS_RESTARTS должен быть >= 1, получено {cls.KMEANS_RESTARTS}"
            )
        if cls.LOG_LEVEL.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR"}:
            raise ValueError(f"Неизвестный уровень логирования: {cls.LOG_LEVEL}")
        return True


@dataclass(frozen=True)
class DatasetPreset:
    """Протокол эксперимента для одного набора данных."""

    name: str
    in_per_class: int
    out_per_class: int
    image_shape: tuple[int, int]  # (D_x, D_y)
    subspace_dim: int


# Разбиения in/out на класс и размеры изображений из протокола экспериментов
DATASET_PRESETS: dict[str, DatasetPreset] = {
    "mnist": DatasetPreset("mnist", 50, 50, (28, 28), 12),
    "usps": DatasetPreset("usps", 50, 50, (16, 16), 12),
    "eyaleb": DatasetPreset("eyaleb", 43, 21, (48, 42), 9),
    "orl": DatasetPreset("orl", 7, 3, (32, 32), 9),
    "coil20": DatasetPreset("coil20", 26, 26, (32, 32), 9),
    "coil100": DatasetPreset("coil100", 26, 26, (32, 32), 9),
}


def get_preset(name: str) -> DatasetPreset:
    """Получение пресета по имени набора данных."""
    try:
        return DATASET_PRESETS[name.lower()]
    except KeyError:
        known = ", ".join(sorted(DATASET_PRESETS))
        raise ValueError(f"Неизвестный набор данных '{name}'. Доступны: {known}")
