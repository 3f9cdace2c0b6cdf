"""Vehicle-side store-and-forward agent.

Readings are appended to a durable per-node log the moment they are
enqueued; only a bounded window of parsed readings is held in memory and
anything past it stays on disk until the head advances (the spill). The
head pointer moves only when the server acknowledges a batch, so every
reading is delivered at least once across disconnects, retries, and agent
restarts; the server's keyed ingest collapses retries to exactly-once.

A batch keeps its batch_seq across retries (and across restarts, since the
counter is persisted with the head) so the upload is idempotent end to
end. Batches the server rejects outright are quarantined to a dead-letter
file and skipped; poison data must not wedge the queue.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Callable, Sequence

import requests

from .domain import SensorReading

DEFAULT_BATCH_CAP = 50
DEFAULT_MEM_CAP = 4096
DEFAULT_BACKOFF_INITIAL_MS = 500
DEFAULT_BACKOFF_MAX_MS = 30_000


class TransportError(Exception):
    """Delivery failed for a retryable reason (network, 5xx)."""


class BatchRejected(Exception):
    """The server refused the batch (4xx); retrying is pointless."""

    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"server rejected batch: {status} {detail}".strip())
        self.status = status
        self.detail = detail


Uplink = Callable[[dict], dict]


@dataclass(frozen=True)
class ReadingBatch:
    """At-least-once upload unit; batch_seq is the retry idempotency key."""

    node_id: str
    batch_seq: int
    readings: tuple[SensorReading, ...]

    def __post_init__(self) -> None:
        if not self.readings:
            raise ValueError("batch must contain at least one reading")
        if self.batch_seq < 0:
            raise ValueError("batch_seq must be >= 0")
        prev = -1
        for r in self.readings:
            if r.node_id != self.node_id:
                raise ValueError("all readings in a batch must share node_id")
            if r.seq <= prev:
                raise ValueError("batch readings must be ordered by seq")
            prev = r.seq

    def to_wire(self) -> dict:
        return {
            "node_id": self.node_id,
            "batch_seq": self.batch_seq,
            "readings": [
                {
                    "seq": r.seq,
                    "ts_ms": r.ts_ms,
                    "lat": r.pos.lat,
                    "lon": r.pos.lon,
                    "ultrasonic_in": r.ultrasonic_in,
                    "accel_z": r.accel_z,
                }
                for r in self.readings
            ],
        }


@dataclass(frozen=True)
class ConnectivitySchedule:
    """Sorted, disjoint up-windows [start_ms, end_ms); end may be +inf."""

    windows: tuple[tuple[float, float], ...]
    name: str = "custom"

    def __post_init__(self) -> None:
        prev_end = -math.inf
        for start, end in self.windows:
            if start >= end:
                raise ValueError(f"empty window [{start}, {end})")
            if start < prev_end:
                raise ValueError("windows must be sorted and disjoint")
            prev_end = end

    def is_up(self, t_ms: float) -> bool:
        return any(start <= t_ms < end for start, end in self.windows)

    def next_up_at(self, t_ms: float) -> float | None:
        """Earliest time >= t_ms inside a window, or None if offline forever."""
        for start, end in self.windows:
            if t_ms < start:
                return start
            if start <= t_ms < end:
                return t_ms
        return None

    @classmethod
    def always_on(cls, start_ms: int = 0) -> "ConnectivitySchedule":
        return cls(windows=((float(start_ms), math.inf),), name="always_on")

    @classmethod
    def depot(cls, open_at_ms: int) -> "ConnectivitySchedule":
        """Offline for the whole drive, online from arrival at the depot."""
        return cls(windows=((float(open_at_ms), math.inf),), name="depot")

    @classmethod
    def pilot(
        cls, start_ms: int, period_ms: int, up_ms: int, cycles: int
    ) -> "ConnectivitySchedule":
        """Periodic short windows during the run, then online for good."""
        if not (0 < up_ms < period_ms):
            raise ValueError("need 0 < up_ms < period_ms")
        wins = [
            (float(start_ms + i * period_ms), float(start_ms + i * period_ms + up_ms))
            for i in range(cycles)
        ]
        wins.append((float(start_ms + cycles * period_ms), math.inf))
        return cls(windows=tuple(wins), name="pilot")

    @classmethod
    def never(cls) -> "ConnectivitySchedule":
        return cls(windows=(), name="never")


class CacheQueue:
    """Durable FIFO of readings for one node.

    Layout under ``dir_path``:
      <node>.log.jsonl    append-only reading log (full history)
      <node>.state.json   {"acked": n, "batch_seq": k}, replaced atomically
      <node>.dead.jsonl   quarantined batches

    In memory the queue keeps byte offsets for every record plus a parsed
    window of at most ``mem_cap`` readings starting at the acked head;
    everything past the window is the spill and is re-read from the log as
    the head advances. Reopening the same directory replays the log, so a
    crashed agent resumes exactly where the last acknowledgment left it.
    """

    def __init__(self, dir_path: str, node_id: str, mem_cap: int = DEFAULT_MEM_CAP):
        if mem_cap < 1:
            raise ValueError("mem_cap must be >= 1")
        self.node_id = node_id
        self.mem_cap = mem_cap
        os.makedirs(dir_path, exist_ok=True)
        self._log_path = os.path.join(dir_path, f"{node_id}.log.jsonl")
        self._state_path = os.path.join(dir_path, f"{node_id}.state.json")
        self._dead_path = os.path.join(dir_path, f"{node_id}.dead.jsonl")

        self._offsets: list[int] = []
        self._last_seq = -1
        self._acked = 0
        self._batch_seq = 0
        self._window: list[SensorReading] = []

        if os.path.exists(self._state_path):
            with open(self._state_path, "r", encoding="utf-8") as f:
                state = json.load(f)
            self._acked = int(state["acked"])
            self._batch_seq = int(state["batch_seq"])

        if os.path.exists(self._log_path):
            self._replay_log()

        self._append = open(self._log_path, "a", encoding="utf-8")
        self._reader = open(self._log_path, "r", encoding="utf-8")
        self._fill_window()

    def _replay_log(self) -> None:
        pos = 0
        with open(self._log_path, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    self._offsets.append(pos)
                pos += len(line.encode("utf-8"))
        if self._offsets:
            with open(self._log_path, "r", encoding="utf-8") as f:
                f.seek(self._offsets[-1])
                self._last_seq = SensorReading.from_dict(json.loads(f.readline())).seq
        if self._acked > len(self._offsets):
            raise RuntimeError(
                f"corrupt queue state: acked {self._acked} > logged {len(self._offsets)}"
            )

    def _read_at(self, index: int) -> SensorReading:
        self._reader.seek(self._offsets[index])
        return SensorReading.from_dict(json.loads(self._reader.readline()))

    def _fill_window(self) -> None:
        want = min(self.mem_cap, len(self)) - len(self._window)
        start = self._acked + len(self._window)
        for i in range(start, start + want):
            self._window.append(self._read_at(i))

    def __len__(self) -> int:
        return len(self._offsets) - self._acked

    @property
    def in_memory_count(self) -> int:
        return len(self._window)

    @property
    def spilled_count(self) -> int:
        return len(self) - len(self._window)

    @property
    def batch_seq(self) -> int:
        """Sequence number the next (or currently in-flight) batch carries."""
        return self._batch_seq

    @property
    def last_seq(self) -> int:
        return self._last_seq

    def enqueue(self, reading: SensorReading) -> None:
        if reading.node_id != self.node_id:
            raise ValueError(f"reading for {reading.node_id!r} on queue {self.node_id!r}")
        if reading.seq <= self._last_seq:
            raise ValueError(
                f"out-of-order enqueue: seq {reading.seq} after {self._last_seq}"
            )
        offset = self._append.tell()
        self._append.write(json.dumps(reading.to_dict()))
        self._append.write("\n")
        self._append.flush()
        self._offsets.append(offset)
        self._last_seq = reading.seq
        if len(self._window) < self.mem_cap:
            self._window.append(reading)

    def peek_batch(self, batch_cap: int) -> list[SensorReading]:
        """Up to batch_cap readings from the head, without removing them."""
        if batch_cap < 1:
            raise ValueError("batch_cap must be >= 1")
        want = min(batch_cap, len(self))
        if want > len(self._window):
            self._fill_window()
        return self._window[:want]

    def _advance(self, n: int) -> None:
        self._window = self._window[n:]
        self._acked += n
        self._batch_seq += 1
        self._save_state()
        self._fill_window()

    def ack_batch(self, n: int) -> None:
        """Drop n readings from the head after a server acknowledgment."""
        if n < 1 or n > len(self):
            raise ValueError(f"cannot ack {n} of {len(self)} queued readings")
        self._advance(n)

    def quarantine_batch(self, batch: ReadingBatch, reason: str) -> None:
        """Dead-letter a rejected batch and move the head past it."""
        with open(self._dead_path, "a", encoding="utf-8") as f:
            f.write(json.dumps({"reason": reason, "batch": batch.to_wire()}))
            f.write("\n")
        self._advance(len(batch.readings))

    def _save_state(self) -> None:
        tmp = self._state_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump({"acked": self._acked, "batch_seq": self._batch_seq}, f)
        os.replace(tmp, self._state_path)

    def close(self) -> None:
        self._append.close()
        self._reader.close()


class HttpUplink:
    """POSTs batches to the ingestion server's readings endpoint."""

    def __init__(self, base_url: str, timeout_s: float = 10.0):
        self.url = base_url.rstrip("/") + "/api/v1/readings"
        self.timeout_s = timeout_s
        self._session = requests.Session()

    def __call__(self, batch_wire: dict) -> dict:
        try:
            resp = self._session.post(self.url, json=batch_wire, timeout=self.timeout_s)
        except requests.RequestException as e:
            raise TransportError(str(e)) from e
        if 200 <= resp.status_code < 300:
            return resp.json()
        if 400 <= resp.status_code < 500:
            raise BatchRejected(resp.status_code, resp.text[:500])
        raise TransportError(f"server returned {resp.status_code}")


class InProcessUplink:
    """Delivers batches straight into a service instance (single-process runs)."""

    def __init__(self, service):
        self._service = service

    def __call__(self, batch_wire: dict) -> dict:
        from .server import ValidationFailure

        try:
            return self._service.ingest_batch(batch_wire)
        except ValidationFailure as e:
            raise BatchRejected(e.status, str(e)) from e


@dataclass(frozen=True)
class BatchResult:
    batch_seq: int
    n_readings: int
    status: str  # "acked" or "quarantined"
    attempts: int
    accepted: int = 0
    duplicates: int = 0


@dataclass(frozen=True)
class SessionReport:
    """Conservation holds by construction: enqueued = acked + quarantined + remaining."""

    enqueued: int
    sent: int
    acked: int
    quarantined: int
    remaining: int

    def to_dict(self) -> dict:
        return {
            "enqueued": self.enqueued,
            "sent": self.sent,
            "acked": self.acked,
            "quarantined": self.quarantined,
            "remaining": self.remaining,
        }


class Agent:
    """Drains a CacheQueue through an uplink whenever connectivity allows."""

    def __init__(
        self,
        queue: CacheQueue,
        uplink: Uplink,
        clock,
        batch_cap: int = DEFAULT_BATCH_CAP,
        backoff_initial_ms: int = DEFAULT_BACKOFF_INITIAL_MS,
        backoff_max_ms: int = DEFAULT_BACKOFF_MAX_MS,
    ):
        self.queue = queue
        self.uplink = uplink
        self.clock = clock
        self.batch_cap = batch_cap
        self.backoff_initial_ms = backoff_initial_ms
        self.backoff_max_ms = backoff_max_ms
        self.sent_readings = 0  # readings across all send attempts, retries included

    def enqueue(self, reading: SensorReading) -> None:
        self.queue.enqueue(reading)

    def flush(self, schedule: ConnectivitySchedule) -> list[BatchResult]:
        """Send head batches while the window stays open and the queue is nonempty.

        Transport failures retry the identical batch (same batch_seq) with
        exponential backoff until the window closes; rejections are
        dead-lettered and skipped. Returns one result per settled batch.
        """
        results: list[BatchResult] = []
        while len(self.queue) > 0 and schedule.is_up(self.clock.now_ms()):
            readings = self.queue.peek_batch(self.batch_cap)
            batch = ReadingBatch(
                node_id=self.queue.node_id,
                batch_seq=self.queue.batch_seq,
                readings=tuple(readings),
            )
            wire = batch.to_wire()
            backoff_ms = self.backoff_initial_ms
            attempts = 0
            while True:
                attempts += 1
                self.sent_readings += len(readings)
                try:
                    resp = self.uplink(wire)
                except BatchRejected as e:
                    self.queue.quarantine_batch(batch, str(e))
                    results.append(
                        BatchResult(batch.batch_seq, len(readings), "quarantined", attempts)
                    )
                    break
                except TransportError:
                    self.clock.sleep_ms(backoff_ms)
                    backoff_ms = min(backoff_ms * 2, self.backoff_max_ms)
                    if not schedule.is_up(self.clock.now_ms()):
                        return results  # window closed mid-retry; batch stays queued
                    continue
                self.queue.ack_batch(len(readings))
                results.append(
                    BatchResult(
                        batch.batch_seq,
                        len(readings),
                        "acked",
                        attempts,
                        accepted=int(resp.get("accepted", 0)),
                        duplicates=int(resp.get("duplicates", 0)),
                    )
                )
                break
        return results

    def run_session(
        self,
        trace: Sequence[SensorReading],
        schedule: ConnectivitySchedule,
    ) -> SessionReport:
        """Replay a trace against the schedule, then drain remaining windows.

        Each reading is enqueued at its own timestamp; whenever the clock
        sits inside an up-window the queue is flushed opportunistically.
        After the drive the agent keeps flushing at every subsequent
        window until the queue drains or the schedule goes dark for good.
        The report's ``enqueued`` includes readings carried over from a
        previous run on the same queue directory.
        """
        carried = len(self.queue)
        sent_before = self.sent_readings
        enqueued = 0
        acked = 0
        quarantined = 0

        def absorb(results: list[BatchResult]) -> None:
            nonlocal acked, quarantined
            for r in results:
                if r.status == "acked":
                    acked += r.n_readings
                else:
                    quarantined += r.n_readings

        for reading in trace:
            if reading.ts_ms > self.clock.now_ms():
                self.clock.advance_to(reading.ts_ms)
            self.queue.enqueue(reading)
            enqueued += 1
            if schedule.is_up(self.clock.now_ms()):
                absorb(self.flush(schedule))

        while len(self.queue) > 0:
            now = self.clock.now_ms()
            if schedule.is_up(now):
                absorb(self.flush(schedule))
            else:
                nxt = schedule.next_up_at(now)
                if nxt is None:
                    break
                self.clock.advance_to(int(nxt))

        return SessionReport(
            enqueued=carried + enqueued,
            sent=self.sent_readings - sent_before,
            acked=acked,
            quarantined=quarantined,
            remaining=len(self.queue),
        )
