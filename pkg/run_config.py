"""
JSON-конфигурация запусков `hpo` и `bench`.

Один документ на запуск. Относительные пути к данным считаются от каталога,
в котором лежит сам файл конфигурации.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

from algos import AlgorithmKind, ScAlgorithmSpec, PARAM_LAMBDA
from config import Config, get_preset
from errors import InvalidSpec, ParseError
from lfsg import HyperGrid, LfsgConfig, SplitMode
from metrics import MetricKind

logger = logging.getLogger(__name__)

# Сетка по умолчанию: декады на [1e-5, 10]
DEFAULT_GRID = {"start": 1e-5, "stop": 10.0, "num": 7}


class SearchMode(str, Enum):
    LFSG = "lfsg"
    ORACLE = "oracle"
    BOTH = "both"

    @property
    def modes(self) -> tuple[SearchMode, ...]:
        if self is SearchMode.BOTH:
            return (SearchMode.LFSG, SearchMode.ORACLE)
        return (self,)


@dataclass(frozen=True)
class DataSource:
    matrix: Path
    labels: Optional[Path] = None
    format: Optional[str] = None
    transpose: bool = False


@dataclass(frozen=True)
class SearchSpace:
    """Подбираемые гиперпараметры: основной и, при наличии, второй."""

    param: str = PARAM_LAMBDA
    grid: HyperGrid = field(default_factory=lambda: parse_grid(None))
    second_param: Optional[str] = None
    second_grid: Optional[HyperGrid] = None

    @property
    def two_stage(self) -> bool:
        return self.second_grid is not None


@dataclass(frozen=True)
class HpoConfig:
    data: DataSource
    algorithm: ScAlgorithmSpec
    search: SearchSpace
    lfsg: LfsgConfig
    mode: SearchMode = SearchMode.LFSG
    num_clusters: Optional[int] = None
    seed: int = 0
    workers: int = Config.WORKERS
    output_dir: Path = Path("hpo_out")


@dataclass(frozen=True)
class BenchConfig:
    data: DataSource
    algorithm: ScAlgorithmSpec
    search: SearchSpace
    lfsg: LfsgConfig
    metrics: tuple[MetricKind, ...] = (MetricKind.ACC,)
    mode: SearchMode = SearchMode.BOTH
    runs: int = Config.BENCH_RUNS
    in_per_class: int = 1
    out_per_class: int = 0
    subspace_dim: int = 9
    seed: int = 0
    workers: int = Config.WORKERS
    preset: Optional[str] = None
    output_dir: Path = Path("bench_out")

    def validate(self) -> None:
        if self.runs < 1:
            raise InvalidSpec(f"runs должен быть >= 1, получено {self.runs}")
        if self.data.labels is None:
            raise InvalidSpec("Для бенчмарка нужен файл истинных меток (data.labels)")
        if self.subspace_dim < 1:
            raise InvalidSpec(f"subspace_dim должен быть >= 1, получено {self.subspace_dim}")
        if not self.metrics:
            raise InvalidSpec("Список metrics пуст")


# --- Разбор отдельных полей ---


def parse_grid(raw: Union[None, list, dict]) -> HyperGrid:
    """Сетка: список значений или {"start", "stop", "num"} (логарифмический шаг)."""
    if raw is None:
        raw = DEFAULT_GRID
    if isinstance(raw, list):
        return HyperGrid(tuple(float(v) for v in raw))
    if isinstance(raw, dict):
        try:
            return HyperGrid.logspace(float(raw["start"]), float(raw["stop"]), int(raw["num"]))
        except KeyError as e:
            raise InvalidSpec(f"В описании сетки нет ключа {e}") from e
    raise InvalidSpec(f"Сетка должна быть списком или объектом, получено {type(raw).__name__}")


def _parse_enum(enum_cls, value: Any, key: str):
    try:
        return enum_cls(str(value).lower())
    except ValueError as e:
        known = ", ".join(m.value for m in enum_cls)
        raise InvalidSpec(f"Недопустимое значение {key}={value!r}; допустимы: {known}") from e


def _parse_data(raw: Any, base: Path) -> DataSource:
    if not isinstance(raw, dict) or "matrix" not in raw:
        raise InvalidSpec("Секция data должна содержать путь matrix")

    def resolve(p: Optional[str]) -> Optional[Path]:
        if p is None:
            return None
        path = Path(p)
        return path if path.is_absolute() else base / path

    return DataSource(
        matrix=resolve(raw["matrix"]),
        labels=resolve(raw.get("labels")),
        format=raw.get("format"),
        transpose=bool(raw.get("transpose", False)),
    )


def _parse_algorithm(raw: Optional[dict]) -> ScAlgorithmSpec:
    raw = raw or {}
    spec = ScAlgorithmSpec(
        kind=_parse_enum(AlgorithmKind, raw.get("kind", "lsr"), "algorithm.kind"),
        lam=float(raw.get("lambda", 1.0)),
        sigma2=None if raw.get("sigma2") is None else float(raw["sigma2"]),
        filter_order=int(raw.get("filter_order", 0)),
        gf_epsilon=float(raw.get("gf_epsilon", Config.GF_EPSILON)),
        gf_max_iter=int(raw.get("gf_max_iter", Config.GF_MAX_ITER)),
    )
    return spec


def _parse_search(raw: dict, algorithm: ScAlgorithmSpec) -> SearchSpace:
    second_grid = raw.get("second_grid")
    second_param = raw.get("second_param")
    if second_grid is not None and second_param is None:
        second_param = algorithm.secondary_param
        if second_param is None:
            raise InvalidSpec(f"У алгоритма {algorithm.kind.value} нет второго гиперпараметра")
    return SearchSpace(
        param=raw.get("param", PARAM_LAMBDA),
        grid=parse_grid(raw.get("grid")),
        second_param=second_param,
        second_grid=parse_grid(second_grid) if second_grid is not None else None,
    )


def _parse_lfsg(raw: Optional[dict], metric: Any = "acc") -> LfsgConfig:
    raw = raw or {}
    config = LfsgConfig(
        metric=_parse_enum(MetricKind, raw.get("metric", metric), "lfsg.metric"),
        epsilon=float(raw.get("epsilon", Config.LFSG_EPSILON)),
        split_mode=_parse_enum(SplitMode, raw.get("split_mode", "thirds"), "lfsg.split_mode"),
        max_iterations=int(raw.get("max_iterations", Config.LFSG_MAX_ITERATIONS)),
        spacing_warn_ratio=float(raw.get("spacing_warn_ratio", Config.SPACING_WARN_RATIO)),
    )
    config.validate()
    return config


def _read_document(path: Union[str, Path]) -> tuple[dict, Path]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"Некорректный JSON в {path}: {e}") from e
    if not isinstance(document, dict):
        raise InvalidSpec(f"Конфигурация {path} должна быть JSON-объектом")
    return document, path.resolve().parent


# --- Загрузка целых конфигураций ---


def hpo_config_from_dict(document: dict, base: Path = Path(".")) -> HpoConfig:
    algorithm = _parse_algorithm(document.get("algorithm"))
    config = HpoConfig(
        data=_parse_data(document.get("data"), base),
        algorithm=algorithm,
        search=_parse_search(document, algorithm),
        lfsg=_parse_lfsg(document.get("lfsg")),
        mode=_parse_enum(SearchMode, document.get("mode", "lfsg"), "mode"),
        num_clusters=document.get("num_clusters"),
        seed=int(document.get("seed", 0)),
        workers=int(document.get("workers", Config.WORKERS)),
        output_dir=Path(document.get("output_dir", "hpo_out")),
    )
    if config.mode is not SearchMode.LFSG and config.data.labels is None:
        raise InvalidSpec("Оракульный поиск требует файл истинных меток (data.labels)")
    if config.data.labels is None and not config.num_clusters:
        raise InvalidSpec("Нужен либо num_clusters, либо файл меток data.labels")
    return config


def load_hpo_config(path: Union[str, Path], overrides: Optional[dict] = None) -> HpoConfig:
    document, base = _read_document(path)
    document.update(overrides or {})
    config = hpo_config_from_dict(document, base)
    logger.info(f"Loaded HPO config from {path}: mode={config.mode.value}")
    return config


def bench_config_from_dict(document: dict, base: Path = Path(".")) -> BenchConfig:
    """Пресет набора данных задаёт разбиение и d; явные ключи имеют приоритет."""
    defaults: dict[str, Any] = {}
    preset_name = document.get("preset")
    if preset_name:
        try:
            preset = get_preset(preset_name)
        except ValueError as e:
            raise InvalidSpec(str(e)) from e
        defaults = {
            "in_per_class": preset.in_per_class,
            "out_per_class": preset.out_per_class,
            "subspace_dim": preset.subspace_dim,
        }

    def pick(key: str, fallback: Any) -> Any:
        return document.get(key, defaults.get(key, fallback))

    algorithm = _parse_algorithm(document.get("algorithm"))
    raw_metrics = document.get("metrics", ["acc"])
    if isinstance(raw_metrics, str):
        raw_metrics = [raw_metrics]
    metrics = tuple(_parse_enum(MetricKind, m, "metrics") for m in raw_metrics)

    config = BenchConfig(
        data=_parse_data(document.get("data"), base),
        algorithm=algorithm,
        search=_parse_search(document, algorithm),
        lfsg=_parse_lfsg(document.get("lfsg"), metric=metrics[0].value if metrics else "acc"),
        metrics=metrics,
        mode=_parse_enum(SearchMode, document.get("mode", "both"), "mode"),
        runs=int(document.get("runs", Config.BENCH_RUNS)),
        in_per_class=int(pick("in_per_class", 1)),
        out_per_class=int(pick("out_per_class", 0)),
        subspace_dim=int(pick("subspace_dim", 9)),
        seed=int(document.get("seed", 0)),
        workers=int(document.get("workers", Config.WORKERS)),
        preset=preset_name,
        output_dir=Path(document.get("output_dir", "bench_out")),
    )
    config.validate()
    return config


def load_bench_config(path: Union[str, Path], overrides: Optional[dict] = None) -> BenchConfig:
    """Ключи из overrides (флаги командной строки) заменяют ключи документа."""
    document, base = _read_document(path)
    document.update(overrides or {})
    config = bench_config_from_dict(document, base)
    logger.info(
        f"Loaded bench config from {path}: {config.runs} run(s), mode={config.mode.value}, "
        f"metrics={[m.value for m in config.metrics]}"
    )
    return config


def config_schema() -> dict[str, Any]:
    """Все ключи конфигурации с значениями по умолчанию (для `config-schema`)."""
    return {
        "data": {
            "matrix": "<path, required>",
            "labels": "<path; required for bench and oracle modes>",
            "format": "csv | bin (inferred from suffix when null)",
            "transpose": False,
        },
        "algorithm": {
            "kind": "lsr | kernel_lsr | gf_lsr",
            "lambda": 1.0,
            "sigma2": None,
            "filter_order": 0,
            "gf_epsilon": Config.GF_EPSILON,
            "gf_max_iter": Config.GF_MAX_ITER,
        },
        "param": PARAM_LAMBDA,
        "grid": DEFAULT_GRID,
        "second_param": "sigma2 for kernel_lsr, filter_order for gf_lsr (when second_grid is set)",
        "second_grid": None,
        "lfsg": {
            "metric": "acc | nmi (hpo only; bench uses metrics)",
            "epsilon": Config.LFSG_EPSILON,
            "split_mode": "thirds | halves",
            "max_iterations": Config.LFSG_MAX_ITERATIONS,
            "spacing_warn_ratio": Config.SPACING_WARN_RATIO,
        },
        "mode": "lfsg | oracle | both (hpo default lfsg, bench default both)",
        "num_clusters": "<int; hpo only, inferred from labels when omitted>",
        "seed": 0,
        "workers": Config.WORKERS,
        "output_dir": "hpo_out | bench_out",
        "bench_only": {
            "runs": Config.BENCH_RUNS,
            "metrics": ["acc"],
            "in_per_class": 1,
            "out_per_class": 0,
            "subspace_dim": 9,
            "preset": "mnist | usps | eyaleb | orl | coil20 | coil100 | null",
        },
    }
