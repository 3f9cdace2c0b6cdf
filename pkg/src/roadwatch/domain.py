"""Shared vocabulary types and geospatial primitives.

Everything here is an immutable value type, safe to copy and share across
threads without coordination. Coordinates are WGS-84 degrees stored as
64-bit floats; the spherical model (R = 6,371,000 m) is good to well under
0.5% at the few-km scales this system operates at.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0


class Severity(enum.IntEnum):
    """Road-condition grade for a point or event, totally ordered."""

    NORMAL = 0
    MAINTENANCE_NEEDED = 1
    POTHOLE = 2

    @property
    def label(self) -> str:
        return _SEVERITY_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Severity":
        try:
            return _SEVERITY_BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown severity {label!r}") from None


_SEVERITY_LABELS = {
    Severity.NORMAL: "Normal",
    Severity.MAINTENANCE_NEEDED: "MaintenanceNeeded",
    Severity.POTHOLE: "Pothole",
}
_SEVERITY_BY_LABEL = {v: k for k, v in _SEVERITY_LABELS.items()}


class Confidence(enum.IntEnum):
    """Detection confidence grade; High means both sensors agreed."""

    LOW = 0
    HIGH = 1

    @property
    def label(self) -> str:
        return "High" if self is Confidence.HIGH else "Low"

    @classmethod
    def from_label(cls, label: str) -> "Confidence":
        if label == "High":
            return Confidence.HIGH
        if label == "Low":
            return Confidence.LOW
        raise ValueError(f"unknown confidence {label!r}")


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat!r}")
        if not (math.isfinite(self.lon) and -180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.lon!r}")


@dataclass(frozen=True)
class SensorReading:
    """One timestamped, geotagged sample from a vehicle node.

    ``ultrasonic_in`` is the sensor-to-ground distance in inches.
    ``accel_z`` is the vertical acceleration magnitude in raw sensor
    counts (unitless; the hardware never reported calibrated SI values).
    ``seq`` strictly increases along a node's trace and is assigned by
    the producing node, never the server, so ingest can be idempotent
    on the (node_id, seq) key.
    """

    node_id: str
    seq: int
    ts_ms: int
    pos: GeoPoint
    ultrasonic_in: float
    accel_z: float

    def __post_init__(self) -> None:
        if not self.node_id:
            raise ValueError("node_id must be non-empty")
        if self.seq < 0:
            raise ValueError(f"seq must be >= 0, got {self.seq}")
        if not (math.isfinite(self.ultrasonic_in) and self.ultrasonic_in >= 0.0):
            raise ValueError(f"ultrasonic_in must be finite and >= 0, got {self.ultrasonic_in!r}")
        if not (math.isfinite(self.accel_z) and self.accel_z >= 0.0):
            raise ValueError(f"accel_z must be finite and >= 0, got {self.accel_z!r}")

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "seq": self.seq,
            "ts_ms": self.ts_ms,
            "lat": self.pos.lat,
            "lon": self.pos.lon,
            "ultrasonic_in": self.ultrasonic_in,
            "accel_z": self.accel_z,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensorReading":
        return cls(
            node_id=d["node_id"],
            seq=int(d["seq"]),
            ts_ms=int(d["ts_ms"]),
            pos=GeoPoint(float(d["lat"]), float(d["lon"])),
            ultrasonic_in=float(d["ultrasonic_in"]),
            accel_z=float(d["accel_z"]),
        )


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on the R = 6,371,000 m sphere."""
    lat1, lon1 = math.radians(a.lat), math.radians(a.lon)
    lat2, lon2 = math.radians(b.lat), math.radians(b.lon)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def displace_m(origin: GeoPoint, bearing_deg: float, distance_m: float) -> GeoPoint:
    """Move ``distance_m`` from ``origin`` along ``bearing_deg`` (clockwise
    from north) using the local equirectangular approximation.

    Adequate below a few km; the inverse of the projection used to lay
    sample points along a straight route.
    """
    theta = math.radians(bearing_deg)
    north_m = distance_m * math.cos(theta)
    east_m = distance_m * math.sin(theta)
    dlat = math.degrees(north_m / EARTH_RADIUS_M)
    dlon = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat))))
    return GeoPoint(origin.lat + dlat, origin.lon + dlon)
