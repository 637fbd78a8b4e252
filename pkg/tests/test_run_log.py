"""Тесты журнала запусков."""

from run_log import RunLog, open_run_log


def test_log_and_fetch_in_run_order(tmp_path):
    log = RunLog(str(tmp_path / "runs.db"))
    log.log_run("b1", 1, 8, "failed", {"error": "boom"})
    log.log_run("b1", 0, 7, "ok", {"blocks": [{"mode": "lfsg"}]})
    log.log_run("other", 0, 7, "ok")
    runs = log.fetch_runs("b1")
    log.close()
    assert [r["run_index"] for r in runs] == [0, 1]
    assert runs[0]["payload"]["blocks"][0]["mode"] == "lfsg"
    assert runs[1]["status"] == "failed"


def test_write_failure_is_swallowed(tmp_path):
    log = RunLog(str(tmp_path / "runs.db"))
    log.close()
    # закрытое соединение: ошибка логируется, исключение не выходит наружу
    log.log_run("b1", 0, 0, "ok")


def test_empty_path_disables_log():
    assert open_run_log("") is None
