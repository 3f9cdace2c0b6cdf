"""Durable single-file store for readings, events, and thresholds.

SQLite in WAL mode gives the properties the hub needs without an external
database: per-batch transactions (a killed process recovers to the last
committed batch), a primary key on (node_id, seq) enforcing reading
uniqueness, and snapshot reads so queries never block ingestion. Writers
are serialized behind one lock; each reader thread gets its own
connection.

The store also computes a content digest over readings, events, and
thresholds (not the version counter) so tests can assert that replayed
deliveries leave state bit-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import sqlite3
import threading
from typing import Iterable, Sequence

from .detection import PotholeEvent, Thresholds
from .domain import Confidence, GeoPoint, Severity, SensorReading

_SCHEMA = """
CREATE TABLE IF NOT EXISTS readings (
    node_id       TEXT    NOT NULL,
    seq           INTEGER NOT NULL,
    ts_ms         INTEGER NOT NULL,
    lat           REAL    NOT NULL,
    lon           REAL    NOT NULL,
    ultrasonic_in REAL    NOT NULL,
    accel_z       REAL    NOT NULL,
    severity      INTEGER NOT NULL,
    PRIMARY KEY (node_id, seq)
);
CREATE TABLE IF NOT EXISTS events (
    event_id      TEXT PRIMARY KEY,
    ord           INTEGER NOT NULL,
    lat           REAL    NOT NULL,
    lon           REAL    NOT NULL,
    severity      INTEGER NOT NULL,
    confidence    INTEGER NOT NULL,
    n_readings    INTEGER NOT NULL,
    first_seen_ms INTEGER NOT NULL,
    last_seen_ms  INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS event_members (
    node_id  TEXT    NOT NULL,
    seq      INTEGER NOT NULL,
    event_id TEXT    NOT NULL,
    ord      INTEGER NOT NULL,
    PRIMARY KEY (node_id, seq)
);
CREATE INDEX IF NOT EXISTS idx_members_event ON event_members (event_id, ord);
CREATE TABLE IF NOT EXISTS thresholds (
    id                 INTEGER PRIMARY KEY CHECK (id = 1),
    ultrasonic_base_in REAL    NOT NULL,
    severe_cutoff_in   REAL    NOT NULL,
    accel_z_threshold  REAL    NOT NULL,
    calibrated_at_ms   INTEGER
);
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""


class Storage:
    """Owns the database file; one writer, many snapshot readers."""

    def __init__(self, db_path: str):
        self.db_path = db_path
        parent = os.path.dirname(os.path.abspath(db_path))
        os.makedirs(parent, exist_ok=True)
        self._wlock = threading.Lock()
        # autocommit connection; transactions are opened explicitly so a
        # batch commits as one unit or not at all
        self._w = sqlite3.connect(db_path, check_same_thread=False, isolation_level=None)
        self._w.execute("PRAGMA journal_mode=WAL")
        self._w.execute("PRAGMA synchronous=FULL")
        self._w.executescript(_SCHEMA)
        self._w.execute(
            "INSERT OR IGNORE INTO meta (key, value) VALUES ('version', '0')"
        )
        self._local = threading.local()

    def _r(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = sqlite3.connect(self.db_path)
            conn.execute("PRAGMA query_only=ON")
            self._local.conn = conn
        return conn

    def close(self) -> None:
        self._w.close()
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
            self._local.conn = None

    # -- writes ----------------------------------------------------------

    def apply_ingest(
        self,
        labeled_readings: Sequence[tuple[SensorReading, Severity]],
        upserted_events: Sequence[PotholeEvent],
        event_orders: dict[str, int],
        bump_version: bool,
    ) -> None:
        """Commit one ingested batch atomically.

        ``event_orders`` maps event_id to its stable position in the
        clustering order, preserved across restarts so query output stays
        bit-identical. Raises sqlite3.IntegrityError on a duplicate
        (node_id, seq); callers dedup first under their own write lock.
        """
        with self._wlock:
            try:
                self._w.execute("BEGIN IMMEDIATE")
                self._w.executemany(
                    "INSERT INTO readings"
                    " (node_id, seq, ts_ms, lat, lon, ultrasonic_in, accel_z, severity)"
                    " VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                    [
                        (r.node_id, r.seq, r.ts_ms, r.pos.lat, r.pos.lon,
                         r.ultrasonic_in, r.accel_z, int(sev))
                        for r, sev in labeled_readings
                    ],
                )
                for ev in upserted_events:
                    self._w.execute(
                        "INSERT OR REPLACE INTO events"
                        " (event_id, ord, lat, lon, severity, confidence,"
                        "  n_readings, first_seen_ms, last_seen_ms)"
                        " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                        (
                            ev.event_id,
                            event_orders[ev.event_id],
                            ev.centroid.lat,
                            ev.centroid.lon,
                            int(ev.severity),
                            int(ev.confidence),
                            ev.n_readings,
                            ev.first_seen_ms,
                            ev.last_seen_ms,
                        ),
                    )
                    self._w.execute(
                        "DELETE FROM event_members WHERE event_id = ?", (ev.event_id,)
                    )
                    self._w.executemany(
                        "INSERT INTO event_members (node_id, seq, event_id, ord)"
                        " VALUES (?, ?, ?, ?)",
                        [
                            (node, seq, ev.event_id, i)
                            for i, (node, seq) in enumerate(ev.member_refs)
                        ],
                    )
                if bump_version:
                    self._bump_version_locked()
                self._w.commit()
            except BaseException:
                self._w.rollback()
                raise

    def put_thresholds(self, t: Thresholds) -> None:
        with self._wlock:
            try:
                self._w.execute("BEGIN IMMEDIATE")
                self._w.execute(
                    "INSERT OR REPLACE INTO thresholds"
                    " (id, ultrasonic_base_in, severe_cutoff_in,"
                    "  accel_z_threshold, calibrated_at_ms)"
                    " VALUES (1, ?, ?, ?, ?)",
                    (
                        t.ultrasonic_base_in,
                        t.severe_cutoff_in,
                        t.accel_z_threshold,
                        t.calibrated_at_ms,
                    ),
                )
                self._bump_version_locked()
                self._w.commit()
            except BaseException:
                self._w.rollback()
                raise

    def _bump_version_locked(self) -> None:
        self._w.execute(
            "UPDATE meta SET value = CAST(CAST(value AS INTEGER) + 1 AS TEXT)"
            " WHERE key = 'version'"
        )

    # -- reads -----------------------------------------------------------

    def version(self) -> int:
        row = self._r().execute(
            "SELECT value FROM meta WHERE key = 'version'"
        ).fetchone()
        return int(row[0])

    def reading_count(self) -> int:
        return self._r().execute("SELECT COUNT(*) FROM readings").fetchone()[0]

    def existing_seqs(self, node_id: str, seqs: Iterable[int]) -> set[int]:
        """Which of these seqs are already stored for the node."""
        out: set[int] = set()
        chunk: list[int] = []
        conn = self._r()

        def flush(chunk: list[int]) -> None:
            marks = ",".join("?" * len(chunk))
            rows = conn.execute(
                f"SELECT seq FROM readings WHERE node_id = ? AND seq IN ({marks})",
                [node_id, *chunk],
            )
            out.update(seq for (seq,) in rows)

        for seq in seqs:
            chunk.append(seq)
            if len(chunk) == 500:
                flush(chunk)
                chunk = []
        if chunk:
            flush(chunk)
        return out

    def _events_from_rows(self, rows) -> list[PotholeEvent]:
        conn = self._r()
        events = []
        for event_id, lat, lon, sev, conf, n, first, last in rows:
            members = conn.execute(
                "SELECT node_id, seq FROM event_members"
                " WHERE event_id = ? ORDER BY ord",
                (event_id,),
            ).fetchall()
            events.append(
                PotholeEvent(
                    event_id=event_id,
                    centroid=GeoPoint(lat, lon),
                    severity=Severity(sev),
                    confidence=Confidence(conf),
                    n_readings=n,
                    first_seen_ms=first,
                    last_seen_ms=last,
                    member_refs=tuple((node, seq) for node, seq in members),
                )
            )
        return events

    def load_events(self) -> list[PotholeEvent]:
        """All events in clustering order (the order ingest discovered them)."""
        rows = self._r().execute(
            "SELECT event_id, lat, lon, severity, confidence,"
            " n_readings, first_seen_ms, last_seen_ms FROM events ORDER BY ord"
        ).fetchall()
        return self._events_from_rows(rows)

    def query_events(
        self,
        bbox: tuple[float, float, float, float] | None = None,
        since_ms: int | None = None,
        min_severity: Severity | None = None,
    ) -> list[PotholeEvent]:
        """Filtered events, newest activity first (ties broken by event_id)."""
        where = []
        args: list = []
        if bbox is not None:
            min_lon, min_lat, max_lon, max_lat = bbox
            where.append("lon >= ? AND lat >= ? AND lon <= ? AND lat <= ?")
            args += [min_lon, min_lat, max_lon, max_lat]
        if since_ms is not None:
            where.append("last_seen_ms >= ?")
            args.append(since_ms)
        if min_severity is not None:
            where.append("severity >= ?")
            args.append(int(min_severity))
        sql = (
            "SELECT event_id, lat, lon, severity, confidence,"
            " n_readings, first_seen_ms, last_seen_ms FROM events"
        )
        if where:
            sql += " WHERE " + " AND ".join(where)
        sql += " ORDER BY last_seen_ms DESC, event_id ASC"
        rows = self._r().execute(sql, args).fetchall()
        return self._events_from_rows(rows)

    def get_thresholds(self) -> Thresholds | None:
        row = self._r().execute(
            "SELECT ultrasonic_base_in, severe_cutoff_in,"
            " accel_z_threshold, calibrated_at_ms FROM thresholds WHERE id = 1"
        ).fetchone()
        if row is None:
            return None
        return Thresholds(
            ultrasonic_base_in=row[0],
            severe_cutoff_in=row[1],
            accel_z_threshold=row[2],
            calibrated_at_ms=row[3],
        )

    def reading_ts_list(self) -> list[int]:
        rows = self._r().execute("SELECT ts_ms FROM readings").fetchall()
        return [ts for (ts,) in rows]

    def event_first_seen_list(self) -> list[int]:
        rows = self._r().execute("SELECT first_seen_ms FROM events").fetchall()
        return [ts for (ts,) in rows]

    def state_digest(self) -> str:
        """sha256 of canonical JSON over readings + events + thresholds.

        The version counter is deliberately excluded: the digest captures
        observable store content, which replayed batches must not change.
        """
        conn = self._r()
        readings = conn.execute(
            "SELECT node_id, seq, ts_ms, lat, lon, ultrasonic_in, accel_z, severity"
            " FROM readings ORDER BY node_id, seq"
        ).fetchall()
        events = [ev.to_dict() for ev in self.load_events()]
        t = self.get_thresholds()
        state = {
            "readings": [list(row) for row in readings],
            "events": events,
            "thresholds": t.to_dict() if t else None,
        }
        blob = json.dumps(state, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()
