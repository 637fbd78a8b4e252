"""
Бенчмарк по протоколу повторных разбиений.

Для каждого запуска r (seed = seed + r): разбиение in/out по классам, подбор
гиперпараметров (LFSG и/или оракул) по каждой метрике выбора, оценка
финальных меток на in-sample, построение модели подпространств и назначение
out-of-sample. Итог: среднее ± std (n - 1) и ранговый критерий LFSG против
оракула. Запуски независимы и могут идти параллельно; агрегирование всегда
в порядке номера запуска, поэтому файлы отчёта побайтно стабильны.
"""

from __future__ import annotations

import csv
import logging
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from algos import AlgorithmKind, PARAM_SIGMA2
from data import DataMatrix, LabelVector, Split, SplitSpec, split_in_out
from errors import LfsgError
from lfsg import (
    Evaluator,
    Evaluator2D,
    lfsg_search_1d,
    lfsg_search_2d,
    oracle_grid_search,
    oracle_search_2d,
)
from metrics import MetricKind, acc, nmi, pairwise_f1, ranksum
from oos import assign_kernel_oos_batch, assign_oos_batch, fit_kernel_oos, fit_subspace_model
from run_config import BenchConfig, SearchMode
from run_log import RunLog

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "lfsg-bench-report/1"
QUALITY_KEYS = ("in_acc", "in_nmi", "in_f1", "out_acc", "out_nmi", "out_f1")
RANKSUM_MODES = "lfsg-vs-oracle"


@dataclass
class BlockResult:
    """Один (режим, метрика выбора) внутри одного запуска."""

    mode: SearchMode
    metric: MetricKind
    params: dict[str, float]
    quality: dict[str, float]
    converged: bool
    evaluations: int

    def to_payload(self) -> dict:
        return {
            "mode": self.mode.value,
            "metric": self.metric.value,
            "params": self.params,
            "quality": self.quality,
            "converged": self.converged,
            "evaluations": self.evaluations,
        }


@dataclass
class RunRecord:
    run_index: int
    seed: int
    blocks: list[BlockResult] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class SummaryRow:
    mode: str
    metric: str
    quantity: str
    mean: float
    std: float
    n: int


@dataclass
class BenchReport:
    bench_id: str
    records: list[RunRecord]
    summary: list[SummaryRow]
    ranksums: list[SummaryRow]
    notes: list[str]

    @property
    def failed_runs(self) -> list[int]:
        return [r.run_index for r in self.records if not r.ok]

    @property
    def all_converged(self) -> bool:
        return all(b.converged for r in self.records for b in r.blocks)

    def write(self, output_dir: Path) -> list[Path]:
        """report.csv (агрегаты), runs.csv (сырые значения) и summary.txt."""
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        return [
            self._write_report(output_dir / "report.csv"),
            self._write_runs(output_dir / "runs.csv"),
            self._write_summary(output_dir / "summary.txt"),
        ]

    def _write_report(self, path: Path) -> Path:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow([f"# schema: {REPORT_SCHEMA}"])
            writer.writerow(["section", "mode", "selection_metric", "quantity", "value", "std", "n"])
            for row in self.summary:
                writer.writerow(["summary", row.mode, row.metric, row.quantity,
                                 _fmt(row.mean), _fmt(row.std), row.n])
            for row in self.ranksums:
                writer.writerow(["ranksum", row.mode, row.metric, row.quantity,
                                 _fmt(row.mean), "", row.n])
        return path

    def _write_runs(self, path: Path) -> Path:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["run_index", "seed", "status", "mode", "selection_metric", "quantity", "value"])
            for record in self.records:
                if not record.ok:
                    writer.writerow([record.run_index, record.seed, "failed", "", "", "", ""])
                    continue
                for block in record.blocks:
                    values = {**{f"param_{k}": v for k, v in block.params.items()}, **block.quality}
                    for key, value in values.items():
                        writer.writerow([record.run_index, record.seed, "ok", block.mode.value,
                                         block.metric.value, key, _fmt(value)])
        return path

    def _write_summary(self, path: Path) -> Path:
        lines = []
        for row in self.summary:
            lines.append(
                f"{row.mode.upper()}-{row.metric.upper()} {row.quantity}: "
                f"{_fmt(row.mean, 2)} ± {_fmt(row.std, 2)} (n={row.n})"
            )
        for row in self.ranksums:
            lines.append(f"rank-sum {row.metric.upper()} {row.quantity}: p = {_fmt(row.mean, 4)}")
        lines.extend(f"note: {note}" for note in self.notes)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def _fmt(value: float, digits: int = 6) -> str:
    if value is None or not np.isfinite(value):
        return "nan"
    return f"{value:.{digits}f}"


# --- Один запуск ---


def _quality(truth: LabelVector, labels: LabelVector, prefix: str) -> dict[str, float]:
    return {
        f"{prefix}_acc": acc(truth, labels),
        f"{prefix}_nmi": nmi(truth, labels),
        f"{prefix}_f1": pairwise_f1(truth, labels),
    }


def _out_of_sample(
    config: BenchConfig, split: Split, labels: LabelVector, params: dict[str, float]
) -> dict[str, float]:
    """OOS: линейная модель для lsr, ядерная для kernel_lsr, нет для gf_lsr."""
    empty = {key: float("nan") for key in ("out_acc", "out_nmi", "out_f1")}
    kind = config.algorithm.kind
    if split.out_empty or kind is AlgorithmKind.GF_LSR:
        return empty
    d = config.subspace_dim
    if kind is AlgorithmKind.KERNEL_LSR:
        sigma2 = params.get(PARAM_SIGMA2, config.algorithm.sigma2)
        model = fit_kernel_oos(split.in_data, labels, d, sigma2)
        predicted, _ = assign_kernel_oos_batch(model, split.out_data)
    else:
        model = fit_subspace_model(split.in_data, labels, d)
        predicted, _ = assign_oos_batch(model, split.out_data)
    return _quality(split.out_labels, predicted, "out")


def run_once(config: BenchConfig, X: DataMatrix, y: LabelVector, run_index: int) -> RunRecord:
    """Один запуск протокола; исключения пробрасываются вызывающему."""
    seed = config.seed + run_index
    split = split_in_out(X, y, SplitSpec(config.in_per_class, config.out_per_class, seed))
    C = y.num_clusters
    search = config.search
    spec = config.algorithm

    if search.two_stage:
        ev2 = Evaluator2D.for_algorithm(split.in_data, spec, C, seed, search.param, search.second_param)
    else:
        ev = Evaluator.for_algorithm(split.in_data, spec, C, seed, search.param)

    record = RunRecord(run_index=run_index, seed=seed)
    for mode in config.mode.modes:
        for metric in config.metrics:
            lfsg_config = replace(config.lfsg, metric=metric)
            if search.two_stage:
                if mode is SearchMode.LFSG:
                    result = lfsg_search_2d(ev2, search.grid, search.second_grid, lfsg_config)
                else:
                    result = oracle_search_2d(ev2, search.grid, search.second_grid,
                                              split.in_labels, metric, lfsg_config)
                params = {search.param: result.optimum_a, search.second_param: result.optimum_b}
            else:
                if mode is SearchMode.LFSG:
                    result = lfsg_search_1d(ev, search.grid, lfsg_config)
                else:
                    result = oracle_grid_search(ev, search.grid, split.in_labels, metric, lfsg_config)
                params = {search.param: result.optimum}

            labels = result.final_labels
            quality = _quality(split.in_labels, labels, "in")
            quality.update(_out_of_sample(config, split, labels, params))
            record.blocks.append(
                BlockResult(mode, metric, params, quality, result.converged, result.evaluations)
            )
            logger.debug(f"Run {run_index} {mode.value}-{metric.value}: {params} -> {quality}")

    logger.info(f"Run {run_index} (seed {seed}) finished")
    return record


# --- Агрегирование ---


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0 or np.all(np.isnan(arr)):
        return float("nan"), float("nan")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(np.mean(arr)), float(np.std(arr, ddof=1))


def aggregate(config: BenchConfig, records: list[RunRecord], bench_id: str = "") -> BenchReport:
    ok = [r for r in records if r.ok]
    notes = []
    if len(ok) == 1:
        notes.append("single successful run: std reported as 0 (degenerate sample)")
    if len(ok) < len(records):
        notes.append(f"failed runs: {[r.run_index for r in records if not r.ok]}")
    if config.algorithm.kind is AlgorithmKind.GF_LSR:
        notes.append("gf_lsr has no out-of-sample extension: out_* columns are nan")

    params = [config.search.param] + ([config.search.second_param] if config.search.two_stage else [])
    quantities = [f"param_{p}" for p in params] + list(QUALITY_KEYS)

    def values_of(mode: SearchMode, metric: MetricKind, quantity: str) -> list[float]:
        out = []
        for record in ok:
            for block in record.blocks:
                if block.mode is mode and block.metric is metric:
                    if quantity.startswith("param_"):
                        out.append(block.params[quantity[len("param_"):]])
                    else:
                        out.append(block.quality[quantity])
        return out

    summary = []
    for mode in config.mode.modes:
        for metric in config.metrics:
            for quantity in quantities:
                values = values_of(mode, metric, quantity)
                mean, std = _mean_std(values)
                summary.append(SummaryRow(mode.value, metric.value, quantity, mean, std, len(values)))

    ranksums = []
    if config.mode is SearchMode.BOTH and ok:
        for metric in config.metrics:
            for quantity in QUALITY_KEYS:
                a = values_of(SearchMode.LFSG, metric, quantity)
                b = values_of(SearchMode.ORACLE, metric, quantity)
                if not a or np.any(np.isnan(a)) or np.any(np.isnan(b)):
                    continue
                ranksums.append(SummaryRow(RANKSUM_MODES, metric.value, quantity, ranksum(a, b), 0.0, len(a)))

    return BenchReport(
        bench_id=bench_id, records=records, summary=summary, ranksums=ranksums, notes=notes
    )


def run_benchmark(
    config: BenchConfig,
    X: DataMatrix,
    y: LabelVector,
    run_log: Optional[RunLog] = None,
) -> BenchReport:
    """Все запуски (параллельно по config.workers), журнал и агрегирование."""
    config.validate()
    bench_id = uuid.uuid4().hex
    logger.info(f"Benchmark {bench_id}: {config.runs} run(s), {config.workers} worker(s)")

    def guarded(run_index: int) -> RunRecord:
        seed = config.seed + run_index
        try:
            record = run_once(config, X, y, run_index)
        except (LfsgError, np.linalg.LinAlgError) as e:
            logger.warning(f"Run {run_index} (seed {seed}) failed: {e}")
            record = RunRecord(run_index=run_index, seed=seed, error=str(e))
        if run_log is not None:
            payload = (
                {"blocks": [b.to_payload() for b in record.blocks]}
                if record.ok
                else {"error": record.error}
            )
            run_log.log_run(bench_id, run_index, seed, "ok" if record.ok else "failed", payload)
        return record

    workers = max(1, min(config.workers, config.runs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(guarded, range(config.runs)))
    else:
        records = [guarded(r) for r in range(config.runs)]

    report = aggregate(config, records, bench_id)
    logger.info(
        f"Benchmark {bench_id} done: {config.runs - len(report.failed_runs)}/{config.runs} run(s) ok"
    )
    return report
