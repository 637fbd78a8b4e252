"""
Подбор гиперпараметров без меток (label-free self-guided, LFSG).

Идея: соседние значения гиперпараметра на сетке дают псевдометки; их
согласие h (ACC или NMI) максимально на перспективном подынтервале, который
затем делится на трети (или половины) до выполнения относительного критерия
(l4' - l1') / l1 <= epsilon. Оракул - тот же поиск по истинным меткам.

Предположения о монотонности h не проверяются: каждое значение h пишется в
трассу, поэтому нарушения видны после запуска.
"""

from __future__ import annotations

import csv
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Generic, Optional, Sequence, TypeVar, Union

import numpy as np

from algos import ScAlgorithmSpec, cluster
from config import Config
from data import DataMatrix, LabelVector
from errors import EmptyScores, InvalidSpec
from metrics import MetricKind, score

logger = logging.getLogger(__name__)

T = TypeVar("T")
Scorer = Callable[[Any, Any], float]
MetricLike = Union[MetricKind, Scorer]

TRACE_HEADER = ["iter", "l1", "l2", "l3", "l4", "h12", "h23", "h34"]


class SplitMode(str, Enum):
    THIRDS = "thirds"
    HALVES = "halves"


@dataclass(frozen=True)
class HyperGrid:
    """Строго возрастающая сетка положительных значений, M >= 2."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if len(values) < 2:
            raise InvalidSpec(f"Сетка должна содержать >= 2 значений, получено {len(values)}")
        if any(not v > 0 or not math.isfinite(v) for v in values):
            raise InvalidSpec("Все значения сетки должны быть конечными и > 0")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidSpec("Значения сетки должны строго возрастать")
        object.__setattr__(self, "values", values)

    @classmethod
    def logspace(cls, start: float, stop: float, num: int) -> HyperGrid:
        """num значений, равномерно распределённых в логарифмической шкале."""
        if not (start > 0 and stop > start) or num < 2:
            raise InvalidSpec(f"Некорректная логарифмическая сетка: {start}, {stop}, {num}")
        return cls(tuple(np.logspace(np.log10(start), np.log10(stop), num)))

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, index: int) -> float:
        return self.values[index]

    @property
    def preset_index(self) -> int:
        """Индекс (с нуля) значения τ_{⌈L/2⌉}."""
        return math.ceil(len(self.values) / 2) - 1


@dataclass(frozen=True)
class Interval:
    """Подынтервал поиска: четыре точки (трети) или три (половины)."""

    left: float
    right: float
    mode: SplitMode = SplitMode.THIRDS

    @property
    def points(self) -> tuple[float, ...]:
        l1, l4 = self.left, self.right
        if self.mode is SplitMode.HALVES:
            return (l1, (l1 + l4) / 2, l4)
        return (l1, (2 * l1 + l4) / 3, (l1 + 2 * l4) / 3, l4)

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def midpoint(self) -> float:
        return (self.left + self.right) / 2

    def relative_width(self, reference: float) -> float:
        return self.width / reference


@dataclass(frozen=True)
class LfsgConfig:
    metric: MetricKind = MetricKind.ACC
    epsilon: float = Config.LFSG_EPSILON
    split_mode: SplitMode = SplitMode.THIRDS
    max_iterations: int = Config.LFSG_MAX_ITERATIONS
    spacing_warn_ratio: float = Config.SPACING_WARN_RATIO

    def validate(self) -> None:
        if not self.epsilon > 0:
            raise InvalidSpec(f"epsilon должен быть > 0, получено {self.epsilon}")
        if self.max_iterations < 1:
            raise InvalidSpec(f"max_iterations должен быть >= 1, получено {self.max_iterations}")


@dataclass(frozen=True)
class TraceRecord:
    """Одна итерация уточнения: точки интервала и значения h между соседями."""

    iteration: int
    points: tuple[float, ...]
    scores: tuple[float, ...]

    def to_row(self) -> list[str]:
        points = [repr(p) for p in self.points] + [""] * (4 - len(self.points))
        scores = [f"{h:.6f}" for h in self.scores] + [""] * (3 - len(self.scores))
        return [str(self.iteration)] + points + scores


@dataclass(eq=False)
class HpoResult:
    """Результат поиска одного гиперпараметра."""

    optimum: float
    final_labels: Any
    evaluations: int  # различные точки, запрошенные этим поиском
    trace: list[TraceRecord]
    final_interval: Interval
    converged: bool
    grid_scores: np.ndarray
    grid_optimum: Optional[float] = None  # оракул: argmax по исходной сетке
    warnings: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def write_trace(self, path: Union[str, Path]) -> Path:
        """Трасса уточнения в CSV: iter, l1..l4, h12, h23, h34."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for record in self.trace:
                writer.writerow(record.to_row())
        return path


@dataclass(eq=False)
class TwoStageResult:
    """Результат координатной схемы для двух гиперпараметров."""

    optimum_a: float
    optimum_b: float
    preset_b: float
    stage_a: HpoResult
    stage_b: HpoResult

    @property
    def final_labels(self) -> Any:
        return self.stage_b.final_labels

    @property
    def converged(self) -> bool:
        return self.stage_a.converged and self.stage_b.converged

    @property
    def evaluations(self) -> int:
        return self.stage_a.evaluations + self.stage_b.evaluations


# --- Вычислители псевдометок ---


class Evaluator(Generic[T]):
    """
    Чистое отображение «значение гиперпараметра -> псевдометки» с кешем.

    Кеш индексируется точным битовым представлением (нормализованного)
    значения, поэтому повторная оценка концов интервала бесплатна.
    """

    def __init__(
        self,
        fn: Callable[[float], T],
        workers: int = 1,
        normalize: Optional[Callable[[float], float]] = None,
    ) -> None:
        self._fn = fn
        self._workers = max(1, int(workers))
        self._normalize = normalize or float
        self._cache: dict[str, T] = {}
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def for_algorithm(
        cls,
        X: DataMatrix,
        spec: ScAlgorithmSpec,
        num_clusters: int,
        seed: int,
        param: str = "lambda",
        workers: int = 1,
        restarts: int = Config.KMEANS_RESTARTS,
    ) -> Evaluator[LabelVector]:
        """Вычислитель над algos.cluster с фиксированными данными, C и seed."""

        def run(value: float) -> LabelVector:
            return cluster(X, spec.with_param(param, value), num_clusters, seed, restarts).labels

        return cls(run, workers=workers, normalize=_normalizer_for(param))

    def _key(self, value: float) -> str:
        return float(self._normalize(value)).hex()

    def __call__(self, value: float) -> T:
        return self.evaluate_many([value])[0]

    def evaluate_many(self, values: Sequence[float]) -> list[T]:
        """Оценка нескольких значений; непросчитанные считаются параллельно."""
        keys = [self._key(v) for v in values]
        with self._lock:
            pending: dict[str, float] = {}
            for key, value in zip(keys, values):
                if key not in self._cache and key not in pending:
                    pending[key] = float(self._normalize(value))

        if pending:
            items = list(pending.items())
            logger.debug(f"Evaluating {len(items)} uncached point(s): {[v for _, v in items]}")
            if self._workers > 1 and len(items) > 1:
                with ThreadPoolExecutor(max_workers=self._workers) as pool:
                    outcomes = list(pool.map(self._fn, [v for _, v in items]))
            else:
                outcomes = [self._fn(v) for _, v in items]
            with self._lock:
                for (key, _), outcome in zip(items, outcomes):
                    self._cache.setdefault(key, outcome)
                self.calls += len(items)

        with self._lock:
            return [self._cache[key] for key in keys]


class EvaluationTally(Generic[T]):
    """Вид на общий Evaluator, считающий различные точки одного поиска (включая попадания в кеш)."""

    def __init__(self, ev: Evaluator[T]) -> None:
        self._ev = ev
        self._keys: set[str] = set()

    def evaluate_many(self, values: Sequence[float]) -> list[T]:
        self._keys.update(self._ev._key(v) for v in values)
        return self._ev.evaluate_many(values)

    def __call__(self, value: float) -> T:
        return self.evaluate_many([value])[0]

    @property
    def count(self) -> int:
        return len(self._keys)


class Evaluator2D(Generic[T]):
    """Вычислитель двух гиперпараметров; срезы по одному из них - обычные Evaluator."""

    def __init__(
        self,
        fn: Callable[[float, float], T],
        workers: int = 1,
        normalize_a: Optional[Callable[[float], float]] = None,
        normalize_b: Optional[Callable[[float], float]] = None,
    ) -> None:
        self._fn = fn
        self._workers = workers
        self._normalize_a = normalize_a or float
        self._normalize_b = normalize_b or float
        self._slices: dict[tuple[str, str], Evaluator[T]] = {}
        self._lock = threading.Lock()

    @classmethod
    def for_algorithm(
        cls,
        X: DataMatrix,
        spec: ScAlgorithmSpec,
        num_clusters: int,
        seed: int,
        param_a: str,
        param_b: str,
        workers: int = 1,
        restarts: int = Config.KMEANS_RESTARTS,
    ) -> Evaluator2D[LabelVector]:
        def run(a: float, b: float) -> LabelVector:
            derived = spec.with_param(param_a, a).with_param(param_b, b)
            return cluster(X, derived, num_clusters, seed, restarts).labels

        return cls(
            run,
            workers=workers,
            normalize_a=_normalizer_for(param_a),
            normalize_b=_normalizer_for(param_b),
        )

    def _slice(self, axis: str, fixed: float) -> Evaluator[T]:
        normalize = self._normalize_b if axis == "b" else self._normalize_a
        fixed = float(normalize(fixed))
        key = (axis, fixed.hex())
        with self._lock:
            if key not in self._slices:
                if axis == "b":
                    ev = Evaluator(lambda a: self._fn(a, fixed), self._workers, self._normalize_a)
                else:
                    ev = Evaluator(lambda b: self._fn(fixed, b), self._workers, self._normalize_b)
                self._slices[key] = ev
            return self._slices[key]

    def fix_b(self, b: float) -> Evaluator[T]:
        return self._slice("b", b)

    def fix_a(self, a: float) -> Evaluator[T]:
        return self._slice("a", a)

    def __call__(self, a: float, b: float) -> T:
        return self.fix_b(b)(a)

    @property
    def calls(self) -> int:
        return sum(ev.calls for ev in self._slices.values())


def _normalizer_for(param: str) -> Callable[[float], float]:
    if param == "filter_order":
        return lambda v: float(int(round(v)))
    return float


def _resolve_scorer(metric: MetricLike) -> Scorer:
    if isinstance(metric, MetricKind):
        return lambda y1, y2: score(metric, y1, y2)
    if callable(metric):
        return metric
    raise InvalidSpec(f"Неизвестная метрика: {metric!r}")


# --- Операции поиска ---


def grid_scan(ev: Evaluator, grid: HyperGrid, metric: MetricLike) -> np.ndarray:
    """scores[i] = h(y(λ_i), y(λ_{i+1})), i = 0..M-2."""
    scorer = _resolve_scorer(metric)
    labels = ev.evaluate_many(grid.values)
    return np.array([scorer(labels[i], labels[i + 1]) for i in range(len(labels) - 1)])


def locate_max_subinterval(scores: Sequence[float]) -> int:
    """Индекс (с нуля) первого максимума."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyScores("Нет оценок для выбора подынтервала")
    return int(np.argmax(scores))


def refine_interval(iv: Interval, scores: Sequence[float]) -> Interval:
    """
    Правило выбора следующего подынтервала.

    Трети: цепочка if/elif/else, при равенстве побеждает более ранняя ветвь.
    Половины: левая половина, если h12 >= h23.
    """
    points = iv.points
    if iv.mode is SplitMode.HALVES:
        h12, h23 = scores[:2]
        if h12 >= h23:
            return Interval(points[0], points[1], iv.mode)
        return Interval(points[1], points[2], iv.mode)

    h12, h23, h34 = scores[:3]
    if h12 >= h23 and h12 >= h34:
        return Interval(points[0], points[1], iv.mode)
    elif h23 >= h12 and h23 >= h34:
        return Interval(points[1], points[2], iv.mode)
    else:
        return Interval(points[2], points[3], iv.mode)


def _refine_loop(
    ev: EvaluationTally,
    start: Interval,
    segment_scores: Callable[[list], tuple[float, ...]],
    config: LfsgConfig,
) -> tuple[Interval, list[TraceRecord], bool]:
    """Общий цикл уточнения для LFSG и оракула."""
    interval = start
    trace: list[TraceRecord] = []
    if interval.relative_width(interval.left) <= config.epsilon:
        return interval, trace, True

    for t in range(1, config.max_iterations + 1):
        points = interval.points
        labels = ev.evaluate_many(points)
        scores = segment_scores(labels)
        refined = refine_interval(interval, scores)
        trace.append(TraceRecord(t, points, tuple(float(s) for s in scores)))
        logger.debug(
            f"Iteration {t}: [{interval.left:.6g}, {interval.right:.6g}] "
            f"h={['%.2f' % s for s in scores]} -> [{refined.left:.6g}, {refined.right:.6g}]"
        )
        # знаменатель - левый конец предыдущей итерации
        stop = refined.width / interval.left <= config.epsilon
        interval = refined
        if stop:
            return interval, trace, True
    return interval, trace, False


def _finish(
    ev: EvaluationTally,
    interval: Interval,
    trace: list[TraceRecord],
    converged: bool,
    grid_scores: np.ndarray,
    config: LfsgConfig,
    warnings: list[str],
    grid_optimum: Optional[float] = None,
) -> HpoResult:
    optimum = interval.midpoint
    final_labels = ev(optimum)
    if not converged:
        message = (
            f"Search did not meet epsilon={config.epsilon} within "
            f"{config.max_iterations} iterations; returning best-so-far {optimum:.6g}"
        )
        logger.warning(message)
        warnings.append(message)
    return HpoResult(
        optimum=optimum,
        final_labels=final_labels,
        final_interval=interval,
        trace=trace,
        evaluations=ev.count,
        converged=converged,
        grid_scores=grid_scores,
        grid_optimum=grid_optimum,
        warnings=warnings,
    )


def lfsg_search_1d(ev: Evaluator, grid: HyperGrid, config: LfsgConfig = LfsgConfig()) -> HpoResult:
    """Поиск одного гиперпараметра по согласию псевдометок соседних значений."""
    config.validate()
    ev = EvaluationTally(ev)
    warnings = grid_spacing_check(grid, config.spacing_warn_ratio)
    scorer = _resolve_scorer(config.metric)

    scores = grid_scan(ev, grid, scorer)
    i = locate_max_subinterval(scores)
    start = Interval(grid[i], grid[i + 1], config.split_mode)
    logger.info(
        f"LFSG grid scan: max agreement {scores[i]:.2f} on [{start.left:.6g}, {start.right:.6g}]"
    )

    def pairwise(labels: list) -> tuple[float, ...]:
        return tuple(scorer(labels[j], labels[j + 1]) for j in range(len(labels) - 1))

    interval, trace, converged = _refine_loop(ev, start, pairwise, config)
    result = _finish(ev, interval, trace, converged, scores, config, warnings)
    logger.info(
        f"LFSG optimum {result.optimum:.6g} after {result.iterations} iterations, "
        f"{result.evaluations} SC runs"
    )
    return result


def oracle_grid_search(
    ev: Evaluator,
    grid: HyperGrid,
    truth: Any,
    metric: MetricLike,
    config: LfsgConfig = LfsgConfig(),
) -> HpoResult:
    """
    Тот же поиск, но h считается между псевдометками и истинными метками.

    Стартовый интервал - соседи лучшей точки сетки [λ_{i-1}, λ_{i+1}],
    обрезанные по краям; оценка отрезка - среднее оценок его концов.
    """
    config.validate()
    ev = EvaluationTally(ev)
    scorer = _resolve_scorer(metric)
    labels = ev.evaluate_many(grid.values)
    point_scores = np.array([scorer(y, truth) for y in labels])
    best = int(np.argmax(point_scores))
    lo = max(best - 1, 0)
    hi = min(best + 1, len(grid) - 1)
    start = Interval(grid[lo], grid[hi], config.split_mode)
    logger.info(
        f"Oracle grid argmax {grid[best]:.6g} (score {point_scores[best]:.2f}), "
        f"refining [{start.left:.6g}, {start.right:.6g}]"
    )

    def endpoint_means(points_labels: list) -> tuple[float, ...]:
        s = [scorer(y, truth) for y in points_labels]
        return tuple((s[j] + s[j + 1]) / 2 for j in range(len(s) - 1))

    interval, trace, converged = _refine_loop(ev, start, endpoint_means, config)
    return _finish(ev, interval, trace, converged, point_scores, config, [], grid_optimum=grid[best])


def lfsg_search_2d(
    ev2: Evaluator2D,
    grid_a: HyperGrid,
    grid_b: HyperGrid,
    config: LfsgConfig = LfsgConfig(),
) -> TwoStageResult:
    """Координатная схема: b = b_{⌈L/2⌉} -> поиск a*; затем a = a* -> поиск b*."""
    preset_b = grid_b[grid_b.preset_index]
    logger.info(f"Two-stage LFSG: stage 1 with b fixed at {preset_b:.6g}")
    stage_a = lfsg_search_1d(ev2.fix_b(preset_b), grid_a, config)
    logger.info(f"Two-stage LFSG: stage 2 with a fixed at {stage_a.optimum:.6g}")
    stage_b = lfsg_search_1d(ev2.fix_a(stage_a.optimum), grid_b, config)
    return TwoStageResult(stage_a.optimum, stage_b.optimum, preset_b, stage_a, stage_b)


def oracle_search_2d(
    ev2: Evaluator2D,
    grid_a: HyperGrid,
    grid_b: HyperGrid,
    truth: Any,
    metric: MetricLike,
    config: LfsgConfig = LfsgConfig(),
) -> TwoStageResult:
    """Оракульный аналог координатной схемы."""
    preset_b = grid_b[grid_b.preset_index]
    stage_a = oracle_grid_search(ev2.fix_b(preset_b), grid_a, truth, metric, config)
    stage_b = oracle_grid_search(ev2.fix_a(stage_a.optimum), grid_b, truth, metric, config)
    return TwoStageResult(stage_a.optimum, stage_b.optimum, preset_b, stage_a, stage_b)


def grid_spacing_check(grid: HyperGrid, warn_ratio: float = Config.SPACING_WARN_RATIO) -> list[str]:
    """Предупреждения о слишком близких соседних значениях сетки (никогда не ошибка)."""
    warnings = []
    for a, b in zip(grid.values, grid.values[1:]):
        if b / a < warn_ratio:
            message = (
                f"Grid points {a:.6g} and {b:.6g} are close (ratio {b / a:.3g} < {warn_ratio}); "
                f"pseudo-label agreement between them may be high regardless of quality, "
                f"inspect the refinement trace"
            )
            logger.warning(message)
            warnings.append(message)
    return warnings
