"""The analytical core: threshold calibration, dual-sensor point
classification, and incremental clustering of hits into pothole events.

The classifier combines two rules. The ultrasonic distance is the primary
signal: readings past the severe cutoff mark a pothole, readings between
the calibrated baseline and the cutoff mark road wear. The accelerometer
is the fallback detector for holes the ranging misses, so the two combine
with OR; when both fire the label carries High confidence.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .domain import Confidence, GeoPoint, SensorReading, Severity, haversine_m

DEFAULT_K_SIGMA = 5.0
DEFAULT_SEVERE_DELTA_IN = 4.0
DEFAULT_CLUSTER_RADIUS_M = 5.0
DEFAULT_MATCH_RADIUS_M = 10.0
MIN_CALIBRATION_READINGS = 30


class CalibrationError(Exception):
    pass


@dataclass(frozen=True)
class Thresholds:
    """Calibrated cutoffs: ultrasonic baseline/severe distances (inches)
    and the accelerometer z-threshold (raw counts)."""

    ultrasonic_base_in: float = 6.0
    severe_cutoff_in: float = 10.0
    accel_z_threshold: float = 1150.0
    calibrated_at_ms: int | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.ultrasonic_base_in < self.severe_cutoff_in):
            raise ValueError(
                f"need 0 < base < severe cutoff, got {self.ultrasonic_base_in} "
                f"and {self.severe_cutoff_in}"
            )
        if self.accel_z_threshold <= 0.0:
            raise ValueError(f"accel_z_threshold must be > 0, got {self.accel_z_threshold}")

    def to_dict(self) -> dict:
        return {
            "ultrasonic_base_in": self.ultrasonic_base_in,
            "severe_cutoff_in": self.severe_cutoff_in,
            "accel_z_threshold": self.accel_z_threshold,
            "calibrated_at_ms": self.calibrated_at_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Thresholds":
        at = d.get("calibrated_at_ms")
        return cls(
            ultrasonic_base_in=float(d["ultrasonic_base_in"]),
            severe_cutoff_in=float(d["severe_cutoff_in"]),
            accel_z_threshold=float(d["accel_z_threshold"]),
            calibrated_at_ms=None if at is None else int(at),
        )


@dataclass(frozen=True)
class PointLabel:
    severity: Severity
    ultrasonic_hit: bool
    maintenance_hit: bool
    accel_hit: bool
    confidence: Confidence


@dataclass(frozen=True)
class PotholeEvent:
    """A cluster of pothole-labeled readings at one location.

    The centroid is the arithmetic mean of member coordinates (an
    equirectangular-local mean, fine at cluster scale); severity and
    confidence are the max over members.
    """

    event_id: str
    centroid: GeoPoint
    severity: Severity
    confidence: Confidence
    n_readings: int
    first_seen_ms: int
    last_seen_ms: int
    member_refs: tuple[tuple[str, int], ...]

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "centroid": {"lat": self.centroid.lat, "lon": self.centroid.lon},
            "severity": self.severity.label,
            "confidence": self.confidence.label,
            "n_readings": self.n_readings,
            "first_seen_ms": self.first_seen_ms,
            "last_seen_ms": self.last_seen_ms,
            "member_refs": [[n, s] for n, s in self.member_refs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PotholeEvent":
        return cls(
            event_id=d["event_id"],
            centroid=GeoPoint(float(d["centroid"]["lat"]), float(d["centroid"]["lon"])),
            severity=Severity.from_label(d["severity"]),
            confidence=Confidence.from_label(d["confidence"]),
            n_readings=int(d["n_readings"]),
            first_seen_ms=int(d["first_seen_ms"]),
            last_seen_ms=int(d["last_seen_ms"]),
            member_refs=tuple((m[0], int(m[1])) for m in d["member_refs"]),
        )


def calibrate(
    readings: Sequence[SensorReading],
    k_sigma: float = DEFAULT_K_SIGMA,
    severe_delta_in: float = DEFAULT_SEVERE_DELTA_IN,
) -> Thresholds:
    """Derive thresholds from a well-maintained-road run.

    Baseline = mean + k_sigma * stddev on each channel (population stddev,
    so a zero-variance trace yields exactly the mean); the severe cutoff
    sits a fixed delta past the ultrasonic baseline, matching the
    conventional 6-to-10-inch span. calibrated_at_ms is the newest sample
    timestamp, keeping the result a pure function of its inputs.
    """
    if len(readings) < MIN_CALIBRATION_READINGS:
        raise CalibrationError(
            f"need at least {MIN_CALIBRATION_READINGS} readings, got {len(readings)}"
        )
    ultra = [r.ultrasonic_in for r in readings]
    accel = [r.accel_z for r in readings]
    base = statistics.fmean(ultra) + k_sigma * statistics.pstdev(ultra)
    return Thresholds(
        ultrasonic_base_in=base,
        severe_cutoff_in=base + severe_delta_in,
        accel_z_threshold=statistics.fmean(accel) + k_sigma * statistics.pstdev(accel),
        calibrated_at_ms=max(r.ts_ms for r in readings),
    )


def classify_point(reading: SensorReading, t: Thresholds) -> PointLabel:
    d = reading.ultrasonic_in
    ultrasonic_hit = d > t.severe_cutoff_in
    maintenance_hit = t.ultrasonic_base_in < d <= t.severe_cutoff_in
    accel_hit = reading.accel_z > t.accel_z_threshold
    if ultrasonic_hit or accel_hit:
        severity = Severity.POTHOLE
    elif maintenance_hit:
        severity = Severity.MAINTENANCE_NEEDED
    else:
        severity = Severity.NORMAL
    confidence = Confidence.HIGH if (ultrasonic_hit and accel_hit) else Confidence.LOW
    return PointLabel(
        severity=severity,
        ultrasonic_hit=ultrasonic_hit,
        maintenance_hit=maintenance_hit,
        accel_hit=accel_hit,
        confidence=confidence,
    )


def cluster_events(
    labeled: Iterable[tuple[SensorReading, PointLabel]],
    cluster_radius_m: float = DEFAULT_CLUSTER_RADIUS_M,
    existing: Sequence[PotholeEvent] = (),
) -> list[PotholeEvent]:
    """Greedy incremental clustering of pothole-labeled points.

    Each point joins the nearest existing event whose centroid lies
    within the radius (the centroid then moves to the new mean), else it
    founds a new event named after the founding reading. Deterministic
    given input order; a member already recorded under its (node_id, seq)
    is skipped, so replays are no-ops. Non-pothole labels are ignored.
    """
    events = list(existing)
    seen: dict[tuple[str, int], None] = {ref: None for ev in events for ref in ev.member_refs}

    for reading, label in labeled:
        if label.severity is not Severity.POTHOLE:
            continue
        ref = (reading.node_id, reading.seq)
        if ref in seen:
            continue
        seen[ref] = None

        best_i = -1
        best_d = math.inf
        for i, ev in enumerate(events):
            dist = haversine_m(ev.centroid, reading.pos)
            if dist <= cluster_radius_m and dist < best_d:
                best_i, best_d = i, dist

        if best_i < 0:
            events.append(
                PotholeEvent(
                    event_id=f"ev-{reading.node_id}-{reading.seq}",
                    centroid=reading.pos,
                    severity=label.severity,
                    confidence=label.confidence,
                    n_readings=1,
                    first_seen_ms=reading.ts_ms,
                    last_seen_ms=reading.ts_ms,
                    member_refs=(ref,),
                )
            )
        else:
            ev = events[best_i]
            n = ev.n_readings
            events[best_i] = replace(
                ev,
                centroid=GeoPoint(
                    (ev.centroid.lat * n + reading.pos.lat) / (n + 1),
                    (ev.centroid.lon * n + reading.pos.lon) / (n + 1),
                ),
                severity=max(ev.severity, label.severity),
                confidence=max(ev.confidence, label.confidence),
                n_readings=n + 1,
                first_seen_ms=min(ev.first_seen_ms, reading.ts_ms),
                last_seen_ms=max(ev.last_seen_ms, reading.ts_ms),
                member_refs=ev.member_refs + (ref,),
            )
    return events


@dataclass(frozen=True)
class DetectionMetrics:
    recall: float | None
    precision: float | None
    matched: int
    missed: int
    spurious: int

    def to_dict(self) -> dict:
        return {
            "recall": self.recall,
            "precision": self.precision,
            "matched": self.matched,
            "missed": self.missed,
            "spurious": self.spurious,
        }


def detection_metrics(
    events: Sequence[PotholeEvent],
    truth: Sequence[GeoPoint],
    match_radius_m: float = DEFAULT_MATCH_RADIUS_M,
) -> DetectionMetrics:
    """Greedy one-to-one, nearest-first matching of events to truth points.

    recall = matched / |truth| (None when there is no truth to match),
    precision = matched / |events| (None when there are no events).
    """
    if match_radius_m <= 0:
        raise ValueError("match_radius_m must be > 0")
    pairs = [
        (haversine_m(ev.centroid, t), i, j)
        for i, ev in enumerate(events)
        for j, t in enumerate(truth)
        if haversine_m(ev.centroid, t) <= match_radius_m
    ]
    pairs.sort()
    used_ev: set[int] = set()
    used_truth: set[int] = set()
    for _, i, j in pairs:
        if i in used_ev or j in used_truth:
            continue
        used_ev.add(i)
        used_truth.add(j)
    matched = len(used_truth)
    return DetectionMetrics(
        recall=None if not truth else matched / len(truth),
        precision=None if not events else matched / len(events),
        matched=matched,
        missed=len(truth) - matched,
        spurious=len(events) - matched,
    )


def write_thresholds(t: Thresholds, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(t.to_dict(), f, indent=2)
        f.write("\n")


def read_thresholds(path: str) -> Thresholds:
    with open(path, "r", encoding="utf-8") as f:
        return Thresholds.from_dict(json.load(f))
