#!/usr/bin/env python3
"""
Командная строка инструментария подпространственной кластеризации.

Команды: gen, cluster, hpo, bench, eval, oos, viz, config-schema.
Коды выхода: 0 - успех, 1 - ошибка использования или конфигурации,
2 - поиск не сошёлся (результат всё равно записан), 3 - ошибка вычислений.
"""

import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import click
import typer

from algos import AlgorithmKind, ScAlgorithmSpec, cluster as run_cluster
from bench import run_benchmark
from config import Config, get_preset
from data import (
    LabelVector,
    SyntheticSpec,
    generate_synthetic,
    load_labels,
    load_matrix,
    save_labels,
    save_matrix,
)
from errors import InputError, LfsgError, NotImplementedKind
from interpret import cluster_representatives, export_images
from lfsg import (
    Evaluator,
    Evaluator2D,
    TwoStageResult,
    lfsg_search_1d,
    lfsg_search_2d,
    oracle_grid_search,
    oracle_search_2d,
)
from metrics import acc, nmi, pairwise_f1
from oos import assign_kernel_oos_batch, assign_oos_batch, fit_kernel_oos, fit_subspace_model
from run_config import HpoConfig, SearchMode, config_schema, load_bench_config, load_hpo_config
from run_log import open_run_log

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_RUNTIME = 3

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="lfsg",
    help="Subspace clustering (LSR family) with label-free hyperparameter search",
    add_completion=False,
)


def setup_logging(level: str, log_file: Optional[str]) -> None:
    """Корневой логгер: stderr и, если задан, UTF-8 файл."""
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        format=LOG_FORMAT,
        level=getattr(logging, level.upper(), logging.INFO),
        handlers=handlers,
        force=True,
    )
    # sklearn/threadpoolctl шумят на INFO
    logging.getLogger("sklearn").setLevel(logging.WARNING)


@contextmanager
def handled() -> Iterator[None]:
    """Исключения библиотеки -> сообщение в stderr и код выхода."""
    try:
        yield
    except (InputError, NotImplementedKind, ValueError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_USAGE)
    except LfsgError as e:
        logger.error(f"{type(e).__name__}: {e}")
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_RUNTIME)


@app.callback()
def main_callback(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="DEBUG-level logging"),
    log_file: str = typer.Option(
        Config.LOG_FILE, "--log-file", help="Log file path (empty string disables)"
    ),
) -> None:
    try:
        Config.validate()
    except ValueError as e:
        typer.echo(f"Configuration error: {e}", err=True)
        raise typer.Exit(EXIT_USAGE)
    setup_logging("DEBUG" if verbose else Config.LOG_LEVEL, log_file)


def _load_data(path: Path, fmt: Optional[str], transpose: bool):
    return load_matrix(path, fmt=fmt, transpose=transpose)


@app.command()
def gen(
    clusters: int = typer.Option(..., "--clusters", help="Number of subspaces C"),
    ambient: int = typer.Option(..., "--ambient", help="Ambient dimension D"),
    dim: int = typer.Option(..., "--dim", help="Subspace dimension d"),
    per_cluster: int = typer.Option(..., "--per-cluster", help="Points per subspace"),
    noise: float = typer.Option(0.0, "--noise", help="Gaussian noise std"),
    seed: int = typer.Option(0, "--seed"),
    fmt: str = typer.Option("bin", "--format", help="bin or csv"),
    output_dir: Path = typer.Option(..., "--output-dir", "-o"),
) -> None:
    """Synthetic union-of-subspaces data: data.<fmt> and labels.txt."""
    with handled():
        spec = SyntheticSpec.uniform(clusters, ambient, dim, per_cluster, noise, seed)
        X, y = generate_synthetic(spec)
        data_path = save_matrix(X, Path(output_dir) / f"data.{fmt}", fmt=fmt)
        labels_path = save_labels(y, Path(output_dir) / "labels.txt")
        typer.echo(f"D={X.dim} N={X.n_samples} C={y.num_clusters} -> {data_path}, {labels_path}")


@app.command()
def cluster(
    data: Path = typer.Option(..., "--data", "-d", help="Data matrix (CSV or BIN)"),
    clusters: int = typer.Option(..., "--clusters", help="Number of clusters C"),
    algorithm: AlgorithmKind = typer.Option(AlgorithmKind.LSR, "--algorithm", "-a"),
    lam: float = typer.Option(1.0, "--lambda", help="Regularization lambda"),
    sigma2: Optional[float] = typer.Option(None, "--sigma2", help="Gaussian kernel width (kernel_lsr)"),
    filter_order: int = typer.Option(0, "--filter-order", help="Graph filter order k (gf_lsr)"),
    seed: int = typer.Option(0, "--seed"),
    fmt: Optional[str] = typer.Option(None, "--format"),
    transpose: bool = typer.Option(False, "--transpose", help="Input rows are samples"),
    output: Path = typer.Option(Path("labels.txt"), "--output", "-o", help="Labels output file"),
) -> None:
    """Run one SC algorithm with fixed hyperparameters."""
    with handled():
        X = _load_data(data, fmt, transpose)
        spec = ScAlgorithmSpec(kind=algorithm, lam=lam, sigma2=sigma2, filter_order=filter_order)
        result = run_cluster(X, spec, clusters, seed)
        save_labels(result.labels, output)
        typer.echo(f"Cluster sizes: {result.labels.histogram().tolist()} -> {output}")
        if not result.converged:
            typer.echo("Warning: graph filtering hit its iteration cap", err=True)
            raise typer.Exit(EXIT_NOT_CONVERGED)


def _run_search(config: HpoConfig, mode: SearchMode, X, C: int, truth: Optional[LabelVector]):
    search = config.search
    if search.two_stage:
        ev2 = Evaluator2D.for_algorithm(
            X, config.algorithm, C, config.seed, search.param, search.second_param, config.workers
        )
        if mode is SearchMode.LFSG:
            return lfsg_search_2d(ev2, search.grid, search.second_grid, config.lfsg)
        return oracle_search_2d(ev2, search.grid, search.second_grid, truth, config.lfsg.metric, config.lfsg)

    ev = Evaluator.for_algorithm(X, config.algorithm, C, config.seed, search.param, config.workers)
    if mode is SearchMode.LFSG:
        return lfsg_search_1d(ev, search.grid, config.lfsg)
    return oracle_grid_search(ev, search.grid, truth, config.lfsg.metric, config.lfsg)


def _summarize(config: HpoConfig, mode: SearchMode, result, output_dir: Path) -> list[str]:
    """Трассы, метки и строки сводки одного режима."""
    search = config.search
    lines = []
    if isinstance(result, TwoStageResult):
        stages = [(search.param, result.stage_a), (search.second_param, result.stage_b)]
        lines.append(f"{mode.value} preset {search.second_param} = {result.preset_b!r}")
    else:
        stages = [(search.param, result)]
    for param, stage in stages:
        stage.write_trace(output_dir / f"trace_{mode.value}_{param}.csv")
        lines.append(f"{mode.value} {param}* = {stage.optimum!r}")
        if stage.grid_optimum is not None:
            lines.append(f"{mode.value} {param} grid argmax = {stage.grid_optimum!r}")
        lines.append(
            f"{mode.value} {param} iterations = {stage.iterations}, converged = {stage.converged}"
        )
    lines.append(f"{mode.value} SC evaluations = {result.evaluations}")
    save_labels(result.final_labels, output_dir / f"labels_{mode.value}.txt")
    return lines


@app.command()
def hpo(
    config_path: Path = typer.Argument(..., help="JSON run configuration"),
    mode: Optional[SearchMode] = typer.Option(None, "--mode", help="Override config mode"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o"),
) -> None:
    """Label-free (and/or oracle) hyperparameter search."""
    with handled():
        overrides = {"mode": mode.value} if mode else {}
        config = load_hpo_config(config_path, overrides)
        out = Path(output_dir or config.output_dir)
        out.mkdir(parents=True, exist_ok=True)

        X = _load_data(config.data.matrix, config.data.format, config.data.transpose)
        truth = load_labels(config.data.labels) if config.data.labels else None
        C = config.num_clusters or truth.num_clusters

        lines = []
        results = {}
        for current in config.mode.modes:
            logger.info(f"Starting {current.value} search")
            results[current] = _run_search(config, current, X, C, truth)
            lines.extend(_summarize(config, current, results[current], out))

        if truth is not None:
            for current, result in results.items():
                labels = result.final_labels
                lines.append(
                    f"{current.value} vs truth: ACC {acc(truth, labels):.2f} "
                    f"NMI {nmi(truth, labels):.2f} F1 {pairwise_f1(truth, labels):.2f}"
                )
        if config.mode is SearchMode.BOTH:
            lfsg_labels = results[SearchMode.LFSG].final_labels
            oracle_labels = results[SearchMode.ORACLE].final_labels
            lines.append(
                f"gap (oracle - lfsg): ACC {acc(truth, oracle_labels) - acc(truth, lfsg_labels):.2f} "
                f"NMI {nmi(truth, oracle_labels) - nmi(truth, lfsg_labels):.2f}"
            )

        (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        typer.echo("\n".join(lines))
        if not all(r.converged for r in results.values()):
            raise typer.Exit(EXIT_NOT_CONVERGED)


@app.command()
def bench(
    config_path: Path = typer.Argument(..., help="JSON benchmark configuration"),
    preset: Optional[str] = typer.Option(None, "--preset", help="Dataset preset (split sizes, d)"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Concurrent runs"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o"),
) -> None:
    """Repeated-split benchmark: report.csv, runs.csv, summary.txt."""
    with handled():
        overrides = {}
        if preset:
            overrides["preset"] = preset
        if workers:
            overrides["workers"] = workers
        config = load_bench_config(config_path, overrides)
        X = _load_data(config.data.matrix, config.data.format, config.data.transpose)
        y = load_labels(config.data.labels)

        run_log = open_run_log(Config.RUN_DB_PATH)
        try:
            report = run_benchmark(config, X, y, run_log)
        finally:
            if run_log is not None:
                run_log.close()

        paths = report.write(Path(output_dir or config.output_dir))
        typer.echo(paths[2].read_text(encoding="utf-8").rstrip())
        if report.failed_runs:
            typer.echo(f"Error: run(s) {report.failed_runs} failed", err=True)
            raise typer.Exit(EXIT_RUNTIME)
        if not report.all_converged:
            raise typer.Exit(EXIT_NOT_CONVERGED)


@app.command("eval")
def eval_labels(
    first: Path = typer.Argument(..., help="Labels file (e.g. ground truth)"),
    second: Path = typer.Argument(..., help="Labels file (e.g. clustering result)"),
) -> None:
    """ACC, NMI and pairwise F1 between two label files."""
    with handled():
        y1, y2 = load_labels(first), load_labels(second)
        typer.echo(f"ACC {acc(y1, y2):.2f} NMI {nmi(y1, y2):.2f} F1 {pairwise_f1(y1, y2):.2f}")


@app.command()
def oos(
    train_data: Path = typer.Option(..., "--train-data", help="In-sample data matrix"),
    train_labels: Path = typer.Option(..., "--train-labels", help="In-sample cluster labels"),
    test_data: Path = typer.Option(..., "--test-data", help="Out-of-sample data matrix"),
    dim: int = typer.Option(9, "--dim", help="Subspace dimension d"),
    sigma2: Optional[float] = typer.Option(None, "--sigma2", help="Use the kernel model with this sigma2"),
    truth: Optional[Path] = typer.Option(None, "--truth", help="Ground truth for the test points"),
    fmt: Optional[str] = typer.Option(None, "--format"),
    transpose: bool = typer.Option(False, "--transpose"),
    output: Path = typer.Option(Path("oos_labels.txt"), "--output", "-o"),
) -> None:
    """Assign out-of-sample points to the nearest cluster subspace."""
    with handled():
        X_in = _load_data(train_data, fmt, transpose)
        X_out = _load_data(test_data, fmt, transpose)
        labels = load_labels(train_labels)
        if sigma2 is not None:
            model = fit_kernel_oos(X_in, labels, dim, sigma2)
            predicted, _ = assign_kernel_oos_batch(model, X_out)
        else:
            predicted, _ = assign_oos_batch(fit_subspace_model(X_in, labels, dim), X_out)
        save_labels(predicted, output)
        typer.echo(f"Assigned {len(predicted)} point(s) -> {output}")
        if truth is not None:
            y = load_labels(truth)
            typer.echo(f"OOS ACC {acc(y, predicted):.2f} NMI {nmi(y, predicted):.2f}")


@app.command()
def viz(
    data: Path = typer.Option(..., "--data", "-d"),
    labels_path: Path = typer.Option(..., "--labels", "-l", help="Cluster labels"),
    dim: Optional[int] = typer.Option(None, "--dim", help="Subspace dimension d"),
    shape: Optional[str] = typer.Option(None, "--shape", help="Image shape DXxDY, e.g. 16x16"),
    preset: Optional[str] = typer.Option(None, "--preset", help="Take shape and d from a dataset preset"),
    fmt: str = typer.Option("pgm", "--format", help="pgm or png"),
    data_format: Optional[str] = typer.Option(None, "--data-format"),
    transpose: bool = typer.Option(False, "--transpose"),
    output_dir: Path = typer.Option(Path("images"), "--output-dir", "-o"),
) -> None:
    """Cluster representative images cluster_<c>.<ext>."""
    with handled():
        if preset:
            p = get_preset(preset)
            dx, dy = p.image_shape
            dim = dim or p.subspace_dim
        elif shape:
            try:
                dx, dy = (int(v) for v in shape.lower().split("x"))
            except ValueError:
                raise ValueError(f"Shape must look like 16x16, got '{shape}'")
        else:
            raise ValueError("Either --shape or --preset is required")

        X = _load_data(data, data_format, transpose)
        labels = load_labels(labels_path)
        representatives = cluster_representatives(X, labels, dim or 9)
        images = [(r.cluster, r.image(dx, dy)) for r in representatives]
        paths = export_images(images, output_dir, fmt)
        typer.echo(f"Wrote {len(paths)} image(s) to {output_dir}")


@app.command("config-schema")
def config_schema_command() -> None:
    """Print every run-configuration key with its default."""
    typer.echo(json.dumps(config_schema(), indent=2, ensure_ascii=False))


def main() -> int:
    """Точка входа: ошибки использования click тоже дают код 1."""
    try:
        result = app(standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
