from __future__ import annotations

from dataclasses import dataclass

import aiosqlite
import structlog

log = structlog.get_logger().bind(component="journal")

SCHEMA_VERSION = 1

SCHEMA_V1_SQL = """\
CREATE TABLE IF NOT EXISTS schema_version (
    version INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS runs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    command TEXT NOT NULL,
    config_hash TEXT NOT NULL,
    library_version TEXT NOT NULL,
    status TEXT NOT NULL DEFAULT 'running',
    wall_seconds REAL,
    started_at TEXT NOT NULL DEFAULT (datetime('now')),
    finished_at TEXT
);
CREATE INDEX IF NOT EXISTS idx_runs_config ON runs(config_hash);

CREATE TABLE IF NOT EXISTS steps (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    run_id INTEGER NOT NULL REFERENCES runs(id),
    step TEXT NOT NULL,
    wall_seconds REAL NOT NULL,
    detail TEXT,
    created_at TEXT NOT NULL DEFAULT (datetime('now'))
);
CREATE INDEX IF NOT EXISTS idx_steps_run ON steps(run_id);
"""


@dataclass
class JournalStats:
    """Aggregate run statistics."""

    runs: int = 0
    succeeded: int = 0
    failed: int = 0
    steps: int = 0
    wall_seconds: float = 0.0


class Journal:
    """Append-only SQLite run journal; one writer (the CLI process) at a time."""

    def __init__(self, db_path: str = "journal.db") -> None:
        self._db_path = db_path
        self._conn: aiosqlite.Connection | None = None

    async def connect(self) -> None:
        """Open the database connection and initialise the schema."""
        self._conn = await aiosqlite.connect(self._db_path)
        await self._conn.execute("PRAGMA journal_mode=WAL")
        await self._conn.execute("PRAGMA foreign_keys=ON")
        await self._conn.executescript(SCHEMA_V1_SQL)

        async with self._conn.execute(
            "SELECT version FROM schema_version LIMIT 1"
        ) as cursor:
            row = await cursor.fetchone()
        if row is None:
            await self._conn.execute(
                "INSERT INTO schema_version (version) VALUES (?)",
                (SCHEMA_VERSION,),
            )
        elif row[0] > SCHEMA_VERSION:
            raise RuntimeError(
                f"journal schema v{row[0]} is newer than supported v{SCHEMA_VERSION}"
            )

        await self._conn.commit()
        log.info("connected", path=self._db_path, schema=SCHEMA_VERSION)

    async def close(self) -> None:
        """Close the database connection."""
        if self._conn:
            await self._conn.close()
            self._conn = None
            log.info("connection closed")

    @property
    def conn(self) -> aiosqlite.Connection:
        if self._conn is None:
            raise RuntimeError("Journal not connected. Call connect() first.")
        return self._conn

    # ── Runs ─────────────────────────────────────────────────────────────

    async def start_run(self, command: str, config_hash: str, library_version: str) -> int:
        """Record the start of a subcommand run and return its id."""
        cursor = await self.conn.execute(
            "INSERT INTO runs (command, config_hash, library_version) VALUES (?, ?, ?)",
            (command, config_hash, library_version),
        )
        await self.conn.commit()
        return int(cursor.lastrowid or 0)

    async def finish_run(self, run_id: int, status: str, wall_seconds: float) -> None:
        await self.conn.execute(
            "UPDATE runs SET status = ?, wall_seconds = ?, finished_at = datetime('now') "
            "WHERE id = ?",
            (status, wall_seconds, run_id),
        )
        await self.conn.commit()

    # ── Steps ────────────────────────────────────────────────────────────

    async def record_step(
        self,
        run_id: int,
        step: str,
        wall_seconds: float,
        detail: str | None = None,
    ) -> None:
        """Append one timed step of a run."""
        await self.conn.execute(
            "INSERT INTO steps (run_id, step, wall_seconds, detail) VALUES (?, ?, ?, ?)",
            (run_id, step, wall_seconds, detail),
        )
        await self.conn.commit()

    async def get_steps(self, run_id: int) -> list[tuple[str, float, str | None]]:
        """Returns list of (step, wall_seconds, detail) in insertion order."""
        async with self.conn.execute(
            "SELECT step, wall_seconds, detail FROM steps WHERE run_id = ? ORDER BY id",
            (run_id,),
        ) as cursor:
            return [row async for row in cursor]

    async def get_runs(self, limit: int = 20) -> list[tuple[int, str, str, str, str, float | None]]:
        """Most recent runs first.

        Returns list of (id, command, config_hash, library_version, status, wall_seconds).
        """
        async with self.conn.execute(
            "SELECT id, command, config_hash, library_version, status, wall_seconds "
            "FROM runs ORDER BY id DESC LIMIT ?",
            (limit,),
        ) as cursor:
            return [row async for row in cursor]

    async def get_stats(self) -> JournalStats:
        """Get aggregate run statistics."""
        stats = JournalStats()
        async with self.conn.execute(
            "SELECT status, COUNT(*), COALESCE(SUM(wall_seconds), 0) FROM runs GROUP BY status"
        ) as cursor:
            async for status, count, seconds in cursor:
                stats.runs += count
                stats.wall_seconds += seconds
                if status == "ok":
                    stats.succeeded += count
                elif status != "running":
                    stats.failed += count
        async with self.conn.execute("SELECT COUNT(*) FROM steps") as cursor:
            row = await cursor.fetchone()
            stats.steps = int(row[0]) if row else 0
        return stats
