"""Central hub: idempotent batch ingestion, on-ingest detection, and the
JSON query API.

``PotholeService`` is the transport-independent core. Ingestion is
serialized behind one lock so centroid updates stay deterministic; every
batch commits atomically, so a killed process restarts into the state of
the last acknowledged batch and re-sent batches collapse to counted
no-ops. Queries read committed storage snapshots and never block
ingestion.

``ApiServer`` wraps the service in a threaded HTTP/1.1 server and also
serves the optional dashboard bundle at /ui/. The store version counter
(GET /api/v1/version) lets clients poll cheaply for changes instead of
holding a push channel open.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .detection import (
    DEFAULT_CLUSTER_RADIUS_M,
    CalibrationError,
    PotholeEvent,
    Thresholds,
    calibrate,
    classify_point,
    cluster_events,
)
from .domain import SensorReading, Severity
from .storage import Storage

log = logging.getLogger("roadwatch.server")

BUCKET_MS = {"day": 86_400_000, "hour": 3_600_000}

_READING_FIELDS = ("seq", "ts_ms", "lat", "lon", "ultrasonic_in", "accel_z")


class ValidationFailure(Exception):
    """Client error: 400 for malformed bodies, 422 for out-of-range values."""

    def __init__(self, status: int, message: str, bad_seqs: list[int] | None = None):
        super().__init__(message)
        self.status = status
        self.bad_seqs = bad_seqs or []

    def to_dict(self) -> dict:
        body = {"error": str(self)}
        if self.bad_seqs:
            body["bad_seqs"] = self.bad_seqs
        return body


def _require_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationFailure(400, f"{what} must be an integer")
    return value


def _require_num(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationFailure(400, f"{what} must be a number")
    return float(value)


class PotholeService:
    """Ingestion, detection, and query logic over one Storage instance."""

    def __init__(
        self,
        storage: Storage,
        cluster_radius_m: float = DEFAULT_CLUSTER_RADIUS_M,
        initial_thresholds: Thresholds | None = None,
    ):
        self._storage = storage
        self._cluster_radius_m = cluster_radius_m
        self._lock = threading.Lock()
        self._events: list[PotholeEvent] = storage.load_events()
        stored = storage.get_thresholds()
        self._thresholds = stored if stored is not None else (
            initial_thresholds if initial_thresholds is not None else Thresholds()
        )

    # -- ingestion -------------------------------------------------------

    def _parse_batch(self, wire) -> tuple[str, int, list[SensorReading]]:
        """Wire dict -> validated readings; 400 on shape, 422 on values."""
        if not isinstance(wire, dict):
            raise ValidationFailure(400, "body must be a JSON object")
        node_id = wire.get("node_id")
        if not isinstance(node_id, str) or not node_id:
            raise ValidationFailure(400, "node_id must be a non-empty string")
        batch_seq = _require_int(wire.get("batch_seq"), "batch_seq")
        if batch_seq < 0:
            raise ValidationFailure(400, "batch_seq must be >= 0")
        rows = wire.get("readings")
        if not isinstance(rows, list) or not rows:
            raise ValidationFailure(400, "readings must be a non-empty array")

        readings: list[SensorReading] = []
        bad_seqs: list[int] = []
        seen_seqs: set[int] = set()
        for i, row in enumerate(rows):
            if not isinstance(row, dict):
                raise ValidationFailure(400, f"readings[{i}] must be an object")
            missing = [k for k in _READING_FIELDS if k not in row]
            if missing:
                raise ValidationFailure(
                    400, f"readings[{i}] missing fields: {', '.join(missing)}"
                )
            seq = _require_int(row["seq"], f"readings[{i}].seq")
            ts_ms = _require_int(row["ts_ms"], f"readings[{i}].ts_ms")
            lat = _require_num(row["lat"], f"readings[{i}].lat")
            lon = _require_num(row["lon"], f"readings[{i}].lon")
            ultra = _require_num(row["ultrasonic_in"], f"readings[{i}].ultrasonic_in")
            accel = _require_num(row["accel_z"], f"readings[{i}].accel_z")
            if seq in seen_seqs:
                raise ValidationFailure(400, f"duplicate seq {seq} within batch")
            seen_seqs.add(seq)
            try:
                readings.append(
                    SensorReading.from_dict(
                        {
                            "node_id": node_id,
                            "seq": seq,
                            "ts_ms": ts_ms,
                            "lat": lat,
                            "lon": lon,
                            "ultrasonic_in": ultra,
                            "accel_z": accel,
                        }
                    )
                )
            except ValueError:
                bad_seqs.append(seq)
        if bad_seqs:
            raise ValidationFailure(
                422,
                f"out-of-range values in seqs: {bad_seqs}",
                bad_seqs=bad_seqs,
            )
        return node_id, batch_seq, readings

    def ingest_batch(self, wire: dict) -> dict:
        """Persist a batch exactly once; returns accepted/duplicate counts.

        The whole classify-cluster-commit path runs under the write lock,
        so concurrent uploads serialize and the clustering outcome depends
        only on arrival order.
        """
        node_id, _batch_seq, readings = self._parse_batch(wire)
        with self._lock:
            existing = self._storage.existing_seqs(node_id, [r.seq for r in readings])
            fresh = [r for r in readings if r.seq not in existing]
            duplicates = len(readings) - len(fresh)
            if not fresh:
                return {"accepted": 0, "duplicates": duplicates}

            t = self._thresholds
            labeled = [(r, classify_point(r, t)) for r in fresh]
            merged = cluster_events(
                labeled, self._cluster_radius_m, existing=self._events
            )
            changed = [
                ev
                for i, ev in enumerate(merged)
                if i >= len(self._events) or ev is not self._events[i]
            ]
            orders = {ev.event_id: i for i, ev in enumerate(merged)}
            self._storage.apply_ingest(
                [(r, lab.severity) for r, lab in labeled],
                changed,
                {ev.event_id: orders[ev.event_id] for ev in changed},
                bump_version=True,
            )
            self._events = merged
            return {"accepted": len(fresh), "duplicates": duplicates}

    # -- queries ---------------------------------------------------------

    @staticmethod
    def _check_bbox(bbox: tuple[float, float, float, float] | None) -> None:
        if bbox is None:
            return
        min_lon, min_lat, max_lon, max_lat = bbox
        if not all(math.isfinite(v) for v in bbox):
            raise ValidationFailure(400, "bbox values must be finite")
        if min_lon > max_lon or min_lat > max_lat:
            raise ValidationFailure(400, "bbox must satisfy min <= max")

    def get_potholes(
        self,
        bbox: tuple[float, float, float, float] | None = None,
        since_ms: int | None = None,
        min_severity: Severity | None = None,
    ) -> list[PotholeEvent]:
        self._check_bbox(bbox)
        return self._storage.query_events(bbox, since_ms, min_severity)

    def export_geojson(
        self,
        bbox: tuple[float, float, float, float] | None = None,
        since_ms: int | None = None,
        min_severity: Severity | None = None,
    ) -> dict:
        events = self.get_potholes(bbox, since_ms, min_severity)
        return {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "Point",
                        "coordinates": [ev.centroid.lon, ev.centroid.lat],
                    },
                    "properties": {
                        "event_id": ev.event_id,
                        "severity": ev.severity.label,
                        "confidence": ev.confidence.label,
                        "n_readings": ev.n_readings,
                        "first_seen_ms": ev.first_seen_ms,
                        "last_seen_ms": ev.last_seen_ms,
                    },
                }
                for ev in events
            ],
        }

    def get_stats(self, bucket: str = "day", since_ms: int | None = None) -> list[dict]:
        """New-event and new-reading counts per time bucket.

        Events bucket on first_seen_ms, readings on their sample ts_ms
        (both persisted, so the series is stable across restarts). The
        series spans the buckets actually touched by data, zero-filled in
        between; an empty store yields an empty series.
        """
        if bucket not in BUCKET_MS:
            raise ValidationFailure(400, "bucket must be 'day' or 'hour'")
        size = BUCKET_MS[bucket]
        ev_ts = self._storage.event_first_seen_list()
        rd_ts = self._storage.reading_ts_list()
        if since_ms is not None:
            ev_ts = [t for t in ev_ts if t >= since_ms]
            rd_ts = [t for t in rd_ts if t >= since_ms]
        all_ts = ev_ts + rd_ts
        if not all_ts:
            return []
        lo = min(all_ts) // size
        hi = max(all_ts) // size
        ev_counts: dict[int, int] = {}
        rd_counts: dict[int, int] = {}
        for t in ev_ts:
            b = t // size
            ev_counts[b] = ev_counts.get(b, 0) + 1
        for t in rd_ts:
            b = t // size
            rd_counts[b] = rd_counts.get(b, 0) + 1
        return [
            {
                "bucket_start_ms": b * size,
                "new_events": ev_counts.get(b, 0),
                "new_readings": rd_counts.get(b, 0),
            }
            for b in range(lo, hi + 1)
        ]

    # -- thresholds ------------------------------------------------------

    def get_thresholds(self) -> Thresholds:
        return self._thresholds

    def put_thresholds(self, body: dict) -> Thresholds:
        if not isinstance(body, dict):
            raise ValidationFailure(400, "body must be a JSON object")
        try:
            t = Thresholds.from_dict(body)
        except (KeyError, TypeError):
            raise ValidationFailure(
                400,
                "body must carry ultrasonic_base_in, severe_cutoff_in, accel_z_threshold",
            ) from None
        except ValueError as e:
            raise ValidationFailure(422, str(e)) from None
        with self._lock:
            self._storage.put_thresholds(t)
            self._thresholds = t
        return t

    def post_calibrate(self, body: dict) -> Thresholds:
        """Run calibration on an uploaded reference trace and install it."""
        if not isinstance(body, dict) or not isinstance(body.get("readings"), list):
            raise ValidationFailure(400, "body must carry a readings array")
        readings = []
        for i, row in enumerate(body["readings"]):
            if not isinstance(row, dict):
                raise ValidationFailure(400, f"readings[{i}] must be an object")
            try:
                readings.append(SensorReading.from_dict(row))
            except (KeyError, TypeError):
                raise ValidationFailure(400, f"readings[{i}] missing fields") from None
            except ValueError as e:
                raise ValidationFailure(422, f"readings[{i}]: {e}") from None
        try:
            t = calibrate(readings)
        except CalibrationError as e:
            raise ValidationFailure(422, str(e)) from None
        with self._lock:
            self._storage.put_thresholds(t)
            self._thresholds = t
        return t

    # -- misc ------------------------------------------------------------

    def version(self) -> int:
        return self._storage.version()

    def state_digest(self) -> str:
        return self._storage.state_digest()


# -- HTTP layer ------------------------------------------------------------

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


class _ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service: PotholeService
    ui_dir: str | None

    # -- plumbing --

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ValidationFailure(400, "empty request body")
        try:
            return json.loads(raw)
        except json.JSONDecodeError as e:
            raise ValidationFailure(400, f"invalid JSON: {e}") from None

    def _query(self) -> dict[str, str]:
        qs = parse_qs(urlparse(self.path).query, keep_blank_values=False)
        return {k: v[-1] for k, v in qs.items()}

    def _event_filters(self):
        q = self._query()
        bbox = None
        if "bbox" in q:
            parts = q["bbox"].split(",")
            if len(parts) != 4:
                raise ValidationFailure(400, "bbox must be min_lon,min_lat,max_lon,max_lat")
            try:
                bbox = tuple(float(p) for p in parts)
            except ValueError:
                raise ValidationFailure(400, "bbox values must be numbers") from None
        since_ms = None
        if "since_ms" in q:
            try:
                since_ms = int(q["since_ms"])
            except ValueError:
                raise ValidationFailure(400, "since_ms must be an integer") from None
        min_severity = None
        if "min_severity" in q:
            try:
                min_severity = Severity.from_label(q["min_severity"])
            except ValueError as e:
                raise ValidationFailure(400, str(e)) from None
        return bbox, since_ms, min_severity

    # -- routing --

    def do_GET(self):  # noqa: N802 (http.server API)
        try:
            path = urlparse(self.path).path
            if path == "/api/v1/potholes":
                bbox, since_ms, min_sev = self._event_filters()
                events = self.service.get_potholes(bbox, since_ms, min_sev)
                self._send_json(200, [ev.to_dict() for ev in events])
            elif path == "/api/v1/potholes.geojson":
                bbox, since_ms, min_sev = self._event_filters()
                self._send_json(200, self.service.export_geojson(bbox, since_ms, min_sev))
            elif path == "/api/v1/stats":
                q = self._query()
                since_ms = None
                if "since_ms" in q:
                    try:
                        since_ms = int(q["since_ms"])
                    except ValueError:
                        raise ValidationFailure(400, "since_ms must be an integer") from None
                self._send_json(200, self.service.get_stats(q.get("bucket", "day"), since_ms))
            elif path == "/api/v1/thresholds":
                self._send_json(200, self.service.get_thresholds().to_dict())
            elif path == "/api/v1/version":
                self._send_json(200, {"version": self.service.version()})
            elif path == "/api/v1/healthz":
                self._send_json(200, {"status": "ok"})
            elif path == "/ui" or path.startswith("/ui/"):
                self._serve_ui(path)
            else:
                self._send_json(404, {"error": f"no such path: {path}"})
        except ValidationFailure as e:
            self._send_json(e.status, e.to_dict())
        except Exception:
            log.exception("GET %s failed", self.path)
            self._send_json(500, {"error": "internal error"})

    def do_POST(self):  # noqa: N802
        try:
            path = urlparse(self.path).path
            if path == "/api/v1/readings":
                self._send_json(200, self.service.ingest_batch(self._read_body()))
            elif path == "/api/v1/calibrate":
                t = self.service.post_calibrate(self._read_body())
                self._send_json(200, t.to_dict())
            else:
                self._send_json(404, {"error": f"no such path: {path}"})
        except ValidationFailure as e:
            self._send_json(e.status, e.to_dict())
        except Exception:
            log.exception("POST %s failed", self.path)
            self._send_json(500, {"error": "internal error"})

    def do_PUT(self):  # noqa: N802
        try:
            path = urlparse(self.path).path
            if path == "/api/v1/thresholds":
                t = self.service.put_thresholds(self._read_body())
                self._send_json(200, t.to_dict())
            else:
                self._send_json(404, {"error": f"no such path: {path}"})
        except ValidationFailure as e:
            self._send_json(e.status, e.to_dict())
        except Exception:
            log.exception("PUT %s failed", self.path)
            self._send_json(500, {"error": "internal error"})

    # -- static dashboard --

    def _serve_ui(self, path: str) -> None:
        if self.ui_dir is None:
            self._send_json(404, {"error": "dashboard not installed"})
            return
        base = os.path.abspath(self.ui_dir)
        rel = path[len("/ui"):].lstrip("/") or "index.html"
        # resolve inside the bundle dir only; reject traversal
        full = os.path.normpath(os.path.join(base, rel))
        if full != base and not full.startswith(base + os.sep):
            self._send_json(404, {"error": "not found"})
            return
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            self._send_json(404, {"error": "not found"})
            return
        ext = os.path.splitext(full)[1].lower()
        ctype = _CONTENT_TYPES.get(ext, "application/octet-stream")
        with open(full, "rb") as f:
            body = f.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Cache-Control", "no-cache")
        self.end_headers()
        self.wfile.write(body)


class ApiServer:
    """Threaded HTTP server bound to a service; port 0 picks a free port."""

    def __init__(
        self,
        service: PotholeService,
        host: str = "127.0.0.1",
        port: int = 0,
        ui_dir: str | None = None,
    ):
        handler = type(
            "BoundApiHandler",
            (_ApiHandler,),
            {
                "service": service,
                "ui_dir": os.path.abspath(ui_dir) if ui_dir else None,
            },
        )
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.host = self.httpd.server_address[0]
        self.port = self.httpd.server_address[1]
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> None:
        """Serve on a daemon thread (tests and the demo command)."""
        self._thread = threading.Thread(
            target=self.httpd.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._thread.start()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
