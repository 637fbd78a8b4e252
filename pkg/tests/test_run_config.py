"""Тесты разбора JSON-конфигураций."""

import json

import pytest

from algos import AlgorithmKind
from errors import InvalidSpec, ParseError
from lfsg import SplitMode
from metrics import MetricKind
from run_config import (
    SearchMode,
    bench_config_from_dict,
    config_schema,
    hpo_config_from_dict,
    load_bench_config,
    parse_grid,
)


def test_default_grid_is_decades():
    grid = parse_grid(None)
    assert len(grid) == 7
    assert grid[0] == pytest.approx(1e-5)
    assert grid[-1] == pytest.approx(10.0)


def test_explicit_grid():
    assert parse_grid([0.1, 1.0, 10.0]).values == (0.1, 1.0, 10.0)


def test_bad_grid():
    with pytest.raises(InvalidSpec):
        parse_grid({"start": 1e-3})


class TestHpoConfig:
    def test_two_grids_pick_secondary_param(self, tmp_path):
        config = hpo_config_from_dict(
            {
                "data": {"matrix": "x.bin"},
                "num_clusters": 3,
                "algorithm": {"kind": "kernel_lsr"},
                "grid": [0.01, 0.1, 1.0],
                "second_grid": [0.5, 5.0],
                "lfsg": {"metric": "nmi", "split_mode": "halves"},
            },
            tmp_path,
        )
        assert config.algorithm.kind is AlgorithmKind.KERNEL_LSR
        assert config.search.two_stage
        assert config.search.second_param == "sigma2"
        assert config.lfsg.metric is MetricKind.NMI
        assert config.lfsg.split_mode is SplitMode.HALVES
        assert config.data.matrix == tmp_path / "x.bin"

    def test_oracle_needs_labels(self):
        with pytest.raises(InvalidSpec):
            hpo_config_from_dict({"data": {"matrix": "x.bin"}, "num_clusters": 2, "mode": "oracle"})

    def test_needs_cluster_count(self):
        with pytest.raises(InvalidSpec):
            hpo_config_from_dict({"data": {"matrix": "x.bin"}})

    def test_unknown_metric(self):
        with pytest.raises(InvalidSpec):
            hpo_config_from_dict(
                {"data": {"matrix": "x.bin"}, "num_clusters": 2, "lfsg": {"metric": "ari"}}
            )


class TestBenchConfig:
    def test_preset_fills_protocol(self):
        config = bench_config_from_dict(
            {"data": {"matrix": "usps.bin", "labels": "usps.txt"}, "preset": "usps"}
        )
        assert (config.in_per_class, config.out_per_class, config.subspace_dim) == (50, 50, 12)
        assert config.mode is SearchMode.BOTH
        assert config.runs == 25

    def test_explicit_keys_override_preset(self):
        config = bench_config_from_dict(
            {
                "data": {"matrix": "orl.bin", "labels": "orl.txt"},
                "preset": "orl",
                "out_per_class": 1,
                "metrics": ["acc", "nmi"],
            }
        )
        assert (config.in_per_class, config.out_per_class) == (7, 1)
        assert config.metrics == (MetricKind.ACC, MetricKind.NMI)

    def test_runs_positive(self):
        with pytest.raises(InvalidSpec):
            bench_config_from_dict({"data": {"matrix": "x", "labels": "y"}, "runs": 0})

    def test_needs_labels(self):
        with pytest.raises(InvalidSpec):
            bench_config_from_dict({"data": {"matrix": "x"}})

    def test_unknown_preset(self):
        with pytest.raises(InvalidSpec):
            bench_config_from_dict({"data": {"matrix": "x", "labels": "y"}, "preset": "cifar"})

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bench.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ParseError):
            load_bench_config(path)

    def test_overrides(self, tmp_path):
        path = tmp_path / "bench.json"
        path.write_text(json.dumps({"data": {"matrix": "x", "labels": "y"}}), encoding="utf-8")
        config = load_bench_config(path, {"workers": 3, "preset": "coil20"})
        assert config.workers == 3
        assert config.subspace_dim == 9


def test_schema_lists_sections():
    schema = config_schema()
    assert {"data", "algorithm", "grid", "lfsg", "mode", "bench_only"} <= set(schema)
    json.dumps(schema)
