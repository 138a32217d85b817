from __future__ import annotations

import math
from datetime import datetime, timezone
from pathlib import Path

import aiosqlite


def utc_now_str() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M:%S")


def _real(value: float | None) -> float | None:
    # SQLite turns NaN into NULL anyway; keep infinities out of the averages too.
    if value is None or not math.isfinite(value):
        return None
    return float(value)


class Storage:
    def __init__(self, db_path: str | Path):
        self.db_path = str(db_path)

    async def init(self) -> None:
        async with aiosqlite.connect(self.db_path) as db:
            await db.execute(
                """
                CREATE TABLE IF NOT EXISTS solve_runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    command TEXT NOT NULL,
                    instance TEXT,
                    kind TEXT NOT NULL,
                    epsilon REAL NOT NULL,
                    dual_value REAL,
                    primal_value REAL,
                    grad_inf_norm REAL,
                    iterations INTEGER NOT NULL DEFAULT 0,
                    converged INTEGER NOT NULL DEFAULT 0,
                    wall_seconds REAL,
                    created_at TEXT NOT NULL
                )
                """
            )
            await self._ensure_solve_runs_columns(db)
            await db.execute("CREATE INDEX IF NOT EXISTS idx_solve_runs_created_at ON solve_runs(created_at)")
            await db.execute("CREATE INDEX IF NOT EXISTS idx_solve_runs_kind ON solve_runs(kind)")
            await db.commit()

    async def _ensure_solve_runs_columns(self, db: aiosqlite.Connection) -> None:
        cursor = await db.execute("PRAGMA table_info(solve_runs)")
        rows = await cursor.fetchall()
        existing = {str(row[1]) for row in rows}

        if "grad_inf_norm" not in existing:
            await db.execute("ALTER TABLE solve_runs ADD COLUMN grad_inf_norm REAL")
        if "wall_seconds" not in existing:
            await db.execute("ALTER TABLE solve_runs ADD COLUMN wall_seconds REAL")
        if "instance" not in existing:
            await db.execute("ALTER TABLE solve_runs ADD COLUMN instance TEXT")

    async def record_run(
        self,
        command: str,
        kind: str,
        epsilon: float,
        dual_value: float | None,
        primal_value: float | None,
        grad_inf_norm: float | None,
        iterations: int,
        converged: bool,
        instance: str | None = None,
        wall_seconds: float | None = None,
    ) -> int:
        now = utc_now_str()
        async with aiosqlite.connect(self.db_path) as db:
            cursor = await db.execute(
                """
                INSERT INTO solve_runs (
                    command, instance, kind, epsilon, dual_value, primal_value,
                    grad_inf_norm, iterations, converged, wall_seconds, created_at
                )
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    command,
                    instance,
                    kind,
                    float(epsilon),
                    _real(dual_value),
                    _real(primal_value),
                    _real(grad_inf_norm),
                    int(iterations),
                    1 if converged else 0,
                    _real(wall_seconds),
                    now,
                ),
            )
            await db.commit()
            return int(cursor.lastrowid)

    async def count_runs(self) -> int:
        async with aiosqlite.connect(self.db_path) as db:
            cursor = await db.execute("SELECT COUNT(*) FROM solve_runs")
            row = await cursor.fetchone()
            return int(row[0] if row else 0)

    async def get_recent_runs(self, limit: int = 15) -> list[dict[str, str | int | float | bool | None]]:
        async with aiosqlite.connect(self.db_path) as db:
            cursor = await db.execute(
                """
                SELECT id, command, instance, kind, epsilon, dual_value, primal_value,
                       grad_inf_norm, iterations, converged, wall_seconds, created_at
                FROM solve_runs
                ORDER BY id DESC
                LIMIT ?
                """,
                (max(1, int(limit)),),
            )
            rows = await cursor.fetchall()

        result: list[dict[str, str | int | float | bool | None]] = []
        for row in rows:
            result.append(
                {
                    "id": int(row[0]),
                    "command": row[1],
                    "instance": row[2],
                    "kind": row[3],
                    "epsilon": float(row[4]),
                    "dual_value": row[5],
                    "primal_value": row[6],
                    "grad_inf_norm": row[7],
                    "iterations": int(row[8]),
                    "converged": bool(row[9]),
                    "wall_seconds": row[10],
                    "created_at": row[11],
                }
            )
        return result

    async def get_run_stats(self) -> dict[str, int | float | str | None]:
        async with aiosqlite.connect(self.db_path) as db:
            cursor = await db.execute(
                """
                SELECT
                    COUNT(*),
                    COALESCE(SUM(converged), 0),
                    AVG(iterations),
                    MAX(created_at)
                FROM solve_runs
                """
            )
            totals = await cursor.fetchone()

        return {
            "runs": int(totals[0] or 0),
            "converged_runs": int(totals[1] or 0),
            "mean_iterations": float(totals[2]) if totals[2] is not None else None,
            "last_run_at": totals[3],
        }
