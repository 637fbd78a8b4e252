"""
Журнал запусков бенчмарка в SQLite.

Каждый запуск (успешный или упавший) пишется сразу после завершения, поэтому
частичные результаты переживают аварийную остановку длинного бенчмарка.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import sqlite3
import threading
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class RunLog:
    """Хранение результатов запусков в SQLite."""

    def __init__(self, db_path: str) -> None:
        self._db_path = db_path
        # соединение делится между потоками бенчмарка
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(self._db_path, check_same_thread=False)
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._init_db()

    def _init_db(self) -> None:
        with self._conn:
            self._conn.execute(
                """
                CREATE TABLE IF NOT EXISTS bench_runs (
                    id         INTEGER PRIMARY KEY AUTOINCREMENT,
                    bench_id   TEXT NOT NULL,
                    run_index  INTEGER NOT NULL,
                    seed       INTEGER NOT NULL,
                    status     TEXT NOT NULL,
                    ts         TEXT NOT NULL,
                    payload    TEXT
                )
                """
            )

    def log_run(
        self,
        bench_id: str,
        run_index: int,
        seed: int,
        status: str,
        payload: Optional[Dict[str, Any]] = None,
    ) -> None:
        """
        Сохранить результат одного запуска.

        :param bench_id: идентификатор бенчмарка (общий для всех его запусков)
        :param run_index: номер запуска, с нуля
        :param seed: seed этого запуска
        :param status: "ok" или "failed"
        :param payload: метрики, выбранные гиперпараметры или текст ошибки
        """
        try:
            now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
            payload_json = (
                json.dumps(payload, ensure_ascii=False, default=float)
                if payload is not None
                else None
            )
            with self._lock, self._conn:
                self._conn.execute(
                    """
                    INSERT INTO bench_runs (bench_id, run_index, seed, status, ts, payload)
                    VALUES (?, ?, ?, ?, ?, ?)
                    """,
                    (bench_id, run_index, seed, status, now, payload_json),
                )
        except Exception as exc:
            # журнал не должен ломать бенчмарк
            logger.error("Failed to log benchmark run: %s", exc)

    def fetch_runs(self, bench_id: str) -> List[Dict[str, Any]]:
        """Запуски бенчмарка в порядке номера запуска."""
        with self._lock:
            rows = self._conn.execute(
                """
                SELECT run_index, seed, status, payload FROM bench_runs
                WHERE bench_id = ? ORDER BY run_index, id
                """,
                (bench_id,),
            ).fetchall()
        return [
            {
                "run_index": run_index,
                "seed": seed,
                "status": status,
                "payload": json.loads(payload) if payload else None,
            }
            for run_index, seed, status, payload in rows
        ]

    def close(self) -> None:
        with self._lock:
            self._conn.close()


def open_run_log(db_path: Optional[str]) -> Optional[RunLog]:
    """Журнал по пути из конфигурации; пустой путь отключает журнал."""
    if not db_path:
        return None
    try:
        return RunLog(db_path)
    except Exception as exc:
        logger.error("Failed to open run log %s: %s", db_path, exc)
        return None
