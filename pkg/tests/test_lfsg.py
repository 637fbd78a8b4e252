"""
Тесты поиска гиперпараметров.

Большинство тестов используют аналитические профили: вычислитель возвращает
само значение λ, а оценка согласия - близость середины отрезка к заданной
точке λ°. Для отрезков равной ширины максимум такой оценки всегда у отрезка,
содержащего λ°, поэтому результат проверяется точно.
"""

import csv
import threading

import numpy as np
import pytest

from algos import ScAlgorithmSpec
from errors import EmptyScores, InvalidSpec
from lfsg import (
    Evaluator,
    Evaluator2D,
    HyperGrid,
    Interval,
    LfsgConfig,
    SplitMode,
    grid_scan,
    grid_spacing_check,
    lfsg_search_1d,
    lfsg_search_2d,
    locate_max_subinterval,
    oracle_grid_search,
    oracle_search_2d,
    refine_interval,
)
from metrics import MetricKind, acc

TARGET = 0.037
DECADES = HyperGrid.logspace(1e-5, 10.0, 7)


def midpoint_agreement(target):
    def scorer(a, b):
        return 100.0 - abs((a + b) / 2 - target)

    return scorer


class RecordingEvaluator(Evaluator):
    """Вычислитель-тождество, запоминающий каждый реальный вызов."""

    def __init__(self, workers=1):
        self.seen = []
        self._seen_lock = threading.Lock()

        def fn(value):
            with self._seen_lock:
                self.seen.append(value)
            return value

        super().__init__(fn, workers=workers)


class TestHyperGrid:
    def test_must_increase(self):
        with pytest.raises(InvalidSpec):
            HyperGrid((1.0, 1.0, 2.0))

    def test_needs_two_values(self):
        with pytest.raises(InvalidSpec):
            HyperGrid((1.0,))

    def test_positive(self):
        with pytest.raises(InvalidSpec):
            HyperGrid((-1.0, 1.0))

    def test_logspace_decades(self):
        np.testing.assert_allclose(DECADES.values, [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0])

    @pytest.mark.parametrize("size, index", [(7, 3), (6, 2), (2, 0)])
    def test_preset_index(self, size, index):
        grid = HyperGrid(tuple(float(v) for v in range(1, size + 1)))
        assert grid.preset_index == index


class TestRefinement:
    def test_thirds_points(self):
        assert Interval(1.0, 4.0).points == (1.0, 2.0, 3.0, 4.0)

    def test_halves_points(self):
        assert Interval(1.0, 3.0, SplitMode.HALVES).points == (1.0, 2.0, 3.0)

    @pytest.mark.parametrize(
        "scores, expected",
        [
            ((5.0, 5.0, 1.0), (1.0, 2.0)),
            ((5.0, 1.0, 5.0), (1.0, 2.0)),
            ((1.0, 5.0, 5.0), (2.0, 3.0)),
            ((1.0, 2.0, 3.0), (3.0, 4.0)),
        ],
    )
    def test_thirds_rule_with_ties(self, scores, expected):
        refined = refine_interval(Interval(1.0, 4.0), scores)
        assert (refined.left, refined.right) == expected

    def test_halves_tie_goes_left(self):
        refined = refine_interval(Interval(1.0, 3.0, SplitMode.HALVES), (2.0, 2.0))
        assert (refined.left, refined.right) == (1.0, 2.0)

    def test_locate_first_max(self):
        assert locate_max_subinterval([1.0, 3.0, 3.0]) == 1

    def test_locate_empty(self):
        with pytest.raises(EmptyScores):
            locate_max_subinterval([])


class TestEvaluator:
    def test_cache_avoids_recomputation(self):
        ev = RecordingEvaluator()
        ev.evaluate_many([1.0, 2.0, 1.0])
        ev(2.0)
        assert ev.seen == [1.0, 2.0]
        assert ev.calls == 2

    def test_parallel_preserves_order(self):
        values = [float(v) for v in range(1, 20)]
        assert RecordingEvaluator(workers=4).evaluate_many(values) == values

    def test_grid_scan_length(self):
        scores = grid_scan(RecordingEvaluator(), DECADES, midpoint_agreement(TARGET))
        assert scores.shape == (6,)
        assert locate_max_subinterval(scores) == 3


class TestLfsgSearch:
    @pytest.mark.parametrize("mode", [SplitMode.THIRDS, SplitMode.HALVES])
    def test_converges_to_target(self, mode):
        ev = RecordingEvaluator()
        config = LfsgConfig(metric=midpoint_agreement(TARGET), split_mode=mode)
        result = lfsg_search_1d(ev, DECADES, config)
        assert result.converged
        assert result.final_interval.left <= TARGET <= result.final_interval.right
        assert abs(result.optimum - TARGET) <= result.final_interval.width
        assert result.final_labels == result.optimum

    def test_stopping_rule(self):
        config = LfsgConfig(metric=midpoint_agreement(TARGET))
        result = lfsg_search_1d(RecordingEvaluator(), DECADES, config)
        previous_left = result.trace[-1].points[0]
        assert result.final_interval.width / previous_left <= config.epsilon
        if len(result.trace) > 1:
            before = result.trace[-2].points[0]
            width_before = result.trace[-1].points[-1] - result.trace[-1].points[0]
            assert width_before / before > config.epsilon

    def test_endpoints_reused(self):
        ev = RecordingEvaluator()
        result = lfsg_search_1d(ev, DECADES, LfsgConfig(metric=midpoint_agreement(TARGET)))
        assert len(ev.seen) == len(set(ev.seen))
        # сетка + две новые точки на итерацию + итоговая середина
        assert result.evaluations == len(DECADES) + 2 * result.iterations + 1

    def test_thirds_shrink_by_three(self):
        result = lfsg_search_1d(RecordingEvaluator(), DECADES, LfsgConfig(metric=midpoint_agreement(TARGET)))
        widths = [r.points[-1] - r.points[0] for r in result.trace] + [result.final_interval.width]
        for before, after in zip(widths, widths[1:]):
            assert before / after == pytest.approx(3.0, rel=1e-9)

    def test_optimum_near_dense_grid_argmax(self):
        profile = midpoint_agreement(TARGET)
        result = lfsg_search_1d(RecordingEvaluator(), DECADES, LfsgConfig(metric=profile))
        dense = np.linspace(1e-5, 0.1, 10_000)
        best = dense[np.argmax([profile(v, v) for v in dense])]
        final = result.final_interval
        assert final.width / final.left <= 1e-3
        assert abs(result.optimum - best) <= final.width

    def test_already_narrow_interval(self):
        grid = HyperGrid((1.0, 1.0005))
        result = lfsg_search_1d(RecordingEvaluator(), grid, LfsgConfig(metric=midpoint_agreement(1.0)))
        assert result.converged
        assert result.trace == []
        assert result.optimum == pytest.approx(1.00025)

    def test_iteration_cap(self):
        config = LfsgConfig(metric=midpoint_agreement(TARGET), epsilon=1e-12, max_iterations=2)
        result = lfsg_search_1d(RecordingEvaluator(), DECADES, config)
        assert not result.converged
        assert result.iterations == 2
        assert any("did not meet" in w for w in result.warnings)

    def test_trace_csv(self, tmp_path):
        config = LfsgConfig(metric=midpoint_agreement(TARGET), split_mode=SplitMode.HALVES)
        result = lfsg_search_1d(RecordingEvaluator(), DECADES, config)
        path = result.write_trace(tmp_path / "trace.csv")
        with open(path, encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["iter", "l1", "l2", "l3", "l4", "h12", "h23", "h34"]
        assert len(rows) == result.iterations + 1
        assert rows[1][4] == "" and rows[1][7] == ""

    def test_real_algorithm(self, two_subspaces):
        X, y = two_subspaces
        ev = Evaluator.for_algorithm(X, ScAlgorithmSpec(), 2, seed=0, param="lambda")
        grid = HyperGrid.logspace(1e-4, 1.0, 5)
        result = lfsg_search_1d(ev, grid, LfsgConfig(metric=MetricKind.ACC))
        assert grid[0] <= result.optimum <= grid[-1]
        assert acc(y, result.final_labels) == pytest.approx(100.0)


class TestTwoStage:
    def test_both_optima(self):
        a_target, b_target = 0.037, 0.42

        def scorer(y1, y2):
            a = (y1[0] + y2[0]) / 2
            b = (y1[1] + y2[1]) / 2
            return 100.0 - abs(a - a_target) - abs(b - b_target)

        ev2 = Evaluator2D(lambda a, b: (a, b))
        grid_b = HyperGrid.logspace(1e-3, 1e3, 7)
        result = lfsg_search_2d(ev2, DECADES, grid_b, LfsgConfig(metric=scorer))
        assert result.preset_b == pytest.approx(1.0)
        assert abs(result.optimum_a - a_target) <= result.stage_a.final_interval.width
        assert abs(result.optimum_b - b_target) <= result.stage_b.final_interval.width
        assert result.converged

    def test_oracle_two_stage(self):
        def scorer(y, truth):
            return 100.0 - abs(np.log10(y[0] / truth[0])) - abs(np.log10(y[1] / truth[1]))

        ev2 = Evaluator2D(lambda a, b: (a, b))
        result = oracle_search_2d(ev2, DECADES, DECADES, (1e-3, 1.0), scorer)
        assert result.stage_a.grid_optimum == pytest.approx(1e-3)
        assert result.stage_b.grid_optimum == pytest.approx(1.0)


class TestOracle:
    @staticmethod
    def log_closeness(y, truth):
        return 100.0 - abs(np.log10(y / truth))

    def test_grid_argmax_and_neighbourhood(self):
        result = oracle_grid_search(RecordingEvaluator(), DECADES, TARGET, self.log_closeness)
        assert result.grid_optimum == pytest.approx(0.1)
        assert 0.01 <= result.optimum <= 1.0
        assert result.converged

    def test_neighbourhood_clipped_at_edge(self):
        result = oracle_grid_search(RecordingEvaluator(), DECADES, 1e-7, self.log_closeness)
        assert result.grid_optimum == pytest.approx(1e-5)
        assert 1e-5 <= result.optimum <= 1e-4

    def test_evaluations_count_only_this_search(self):
        fresh = oracle_grid_search(RecordingEvaluator(), DECADES, TARGET, self.log_closeness)
        shared = RecordingEvaluator()
        lfsg_result = lfsg_search_1d(shared, DECADES, LfsgConfig(metric=midpoint_agreement(TARGET)))
        oracle_result = oracle_grid_search(shared, DECADES, TARGET, self.log_closeness)
        assert oracle_result.evaluations == fresh.evaluations
        # сетка общая: кеш переиспользован, но в счёт каждого поиска она входит
        assert lfsg_result.evaluations + oracle_result.evaluations > shared.calls


class TestSpacing:
    def test_close_points_warned(self):
        warnings = grid_spacing_check(HyperGrid((1.0, 1.5, 10.0)))
        assert len(warnings) == 1
        assert "1.5" in warnings[0]

    def test_decades_are_fine(self):
        assert grid_spacing_check(DECADES) == []
