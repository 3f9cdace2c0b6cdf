"""Deterministic generator of synthetic roads and vehicle sensor traces.

Replaces the physical sensor rig: a road is a straight route with
rectangular potholes (intervals of extra sensor-to-ground clearance), and
a drive over it yields one reading per sample position. All randomness
comes from explicit seeds, so identical inputs produce bit-identical
output; every trace here doubles as ground truth for the detector.

Geometry conventions:
  - pothole intervals [start_m, start_m + length_m) are half-open, which
    removes boundary ambiguity;
  - sampling is distance-based (one reading every sample_spacing_m), so a
    pothole narrower than the spacing can fall between samples and go
    unseen; that gap is the simulator's miss mechanism, not a bug.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Iterable, TextIO

from .domain import GeoPoint, SensorReading, displace_m

PLACEMENT_ATTEMPTS = 10_000


class PlacementError(Exception):
    """Rejection sampling could not place all potholes (parameters too crowded)."""


class TraceFormatError(Exception):
    """A profile or trace file failed to parse; carries the offending line."""

    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}: line {line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class PotholeSpec:
    start_m: float
    length_m: float
    depth_in: float

    def __post_init__(self) -> None:
        if self.length_m <= 0:
            raise ValueError("pothole length_m must be > 0")
        if self.depth_in <= 0:
            raise ValueError("pothole depth_in must be > 0")

    @property
    def end_m(self) -> float:
        return self.start_m + self.length_m

    def contains(self, x_m: float) -> bool:
        return self.start_m <= x_m < self.end_m


@dataclass(frozen=True)
class RoadProfile:
    length_m: float
    origin: GeoPoint
    bearing_deg: float
    potholes: tuple[PotholeSpec, ...]
    seed: int

    def __post_init__(self) -> None:
        if self.length_m <= 0:
            raise ValueError("road length_m must be > 0")
        prev_end = -math.inf
        for p in self.potholes:
            if p.start_m < prev_end:
                raise ValueError("potholes must be sorted and disjoint")
            if p.start_m < 0 or p.end_m > self.length_m:
                raise ValueError(f"pothole [{p.start_m}, {p.end_m}) outside road")
            prev_end = p.end_m


@dataclass(frozen=True)
class VehicleConfig:
    """Constant-speed vehicle taking one sample every sample_spacing_m.

    The default spacing reproduces 150 samples over a 1 km road.
    """

    ride_height_in: float = 6.0
    speed_mps: float = 8.0
    sample_spacing_m: float = 1000.0 / 150.0

    def __post_init__(self) -> None:
        if self.ride_height_in <= 0 or self.speed_mps <= 0 or self.sample_spacing_m <= 0:
            raise ValueError("vehicle config fields must be > 0")


@dataclass(frozen=True)
class NoiseModel:
    """Additive-Gaussian sensor model.

    The accelerometer responds linearly to depth x speed; defaults are
    tuned so a 3 in hole at 8 m/s lands well past the 1150-count
    threshold while smooth road stays 5 sigma below it
    (950 + 5 * 40 = 1150).
    """

    sigma_ultra_in: float = 0.25
    sigma_accel: float = 40.0
    accel_base: float = 950.0
    accel_gain: float = 25.0

    def __post_init__(self) -> None:
        if self.sigma_ultra_in < 0 or self.sigma_accel < 0 or self.accel_gain < 0:
            raise ValueError("noise sigmas and gain must be >= 0")

    @classmethod
    def quiet(cls) -> "NoiseModel":
        """Zero-noise variant of the defaults, for calibration references."""
        return cls(sigma_ultra_in=0.0, sigma_accel=0.0)


def generate_profile(
    length_m: float,
    n_potholes: int,
    depth_range_in: tuple[float, float],
    length_range_m: tuple[float, float],
    origin: GeoPoint,
    bearing_deg: float,
    seed: int,
) -> RoadProfile:
    """Place ``n_potholes`` disjoint potholes by seeded rejection sampling."""
    d_lo, d_hi = depth_range_in
    l_lo, l_hi = length_range_m
    if not (0 < d_lo <= d_hi) or not (0 < l_lo <= l_hi):
        raise ValueError("depth and length ranges must be nonempty and positive")
    if n_potholes < 0:
        raise ValueError("n_potholes must be >= 0")
    if n_potholes * l_hi > length_m / 2:
        raise ValueError(
            f"infeasible placement: {n_potholes} potholes of up to {l_hi} m "
            f"exceed half the {length_m} m road"
        )

    rng = random.Random(seed)
    placed: list[PotholeSpec] = []
    attempts = 0
    while len(placed) < n_potholes:
        if attempts >= PLACEMENT_ATTEMPTS:
            raise PlacementError(
                f"gave up after {attempts} attempts with {len(placed)}/{n_potholes} placed"
            )
        attempts += 1
        hole_len = rng.uniform(l_lo, l_hi)
        depth = rng.uniform(d_lo, d_hi)
        start = rng.uniform(0.0, length_m - hole_len)
        end = start + hole_len
        if all(end <= p.start_m or start >= p.end_m for p in placed):
            placed.append(PotholeSpec(start_m=start, length_m=hole_len, depth_in=depth))

    placed.sort(key=lambda p: p.start_m)
    return RoadProfile(
        length_m=length_m,
        origin=origin,
        bearing_deg=bearing_deg,
        potholes=tuple(placed),
        seed=seed,
    )


def depth_at(profile: RoadProfile, x_m: float) -> float:
    """Depth in inches of the pothole covering ``x_m``, else 0.0."""
    if not (0.0 <= x_m < profile.length_m):
        raise ValueError(f"position {x_m} outside road [0, {profile.length_m})")
    for p in profile.potholes:
        if p.contains(x_m):
            return p.depth_in
        if p.start_m > x_m:
            break
    return 0.0


def sample_count(length_m: float, spacing_m: float) -> int:
    return math.ceil(length_m / spacing_m)


def sample_trace(
    profile: RoadProfile,
    vehicle: VehicleConfig,
    noise: NoiseModel,
    node_id: str,
    t0_ms: int,
    seed: int,
) -> list[SensorReading]:
    """Drive the road once and return one reading per sample position.

    Sample i sits at x = i * spacing. The ultrasonic channel reports ride
    height plus the depth under the sensor at exactly x; the accelerometer
    spikes by gain * depth * speed on samples taken over a hole. Both get
    additive Gaussian noise and clamp at zero.
    """
    rng = random.Random(seed)
    n = sample_count(profile.length_m, vehicle.sample_spacing_m)
    readings: list[SensorReading] = []
    for i in range(n):
        x = i * vehicle.sample_spacing_m
        depth = depth_at(profile, x)
        ultra = vehicle.ride_height_in + depth + rng.gauss(0.0, noise.sigma_ultra_in)
        accel = (
            noise.accel_base
            + noise.accel_gain * depth * vehicle.speed_mps
            + rng.gauss(0.0, noise.sigma_accel)
        )
        readings.append(
            SensorReading(
                node_id=node_id,
                seq=i,
                ts_ms=t0_ms + round(1000.0 * x / vehicle.speed_mps),
                pos=displace_m(profile.origin, profile.bearing_deg, x),
                ultrasonic_in=max(0.0, ultra),
                accel_z=max(0.0, accel),
            )
        )
    return readings


def export_ground_truth(profile: RoadProfile) -> list[GeoPoint]:
    """Centroid of each pothole projected onto the route, one per hole."""
    return [
        displace_m(profile.origin, profile.bearing_deg, p.start_m + p.length_m / 2.0)
        for p in profile.potholes
    ]


# --- serialization ---------------------------------------------------------
# Profile files hold the RoadProfile as a single JSON line; trace files hold
# one SensorReading object per line.


def profile_to_dict(profile: RoadProfile) -> dict:
    return {
        "length_m": profile.length_m,
        "origin": {"lat": profile.origin.lat, "lon": profile.origin.lon},
        "bearing_deg": profile.bearing_deg,
        "seed": profile.seed,
        "potholes": [
            {"start_m": p.start_m, "length_m": p.length_m, "depth_in": p.depth_in}
            for p in profile.potholes
        ],
    }


def profile_from_dict(d: dict) -> RoadProfile:
    return RoadProfile(
        length_m=float(d["length_m"]),
        origin=GeoPoint(float(d["origin"]["lat"]), float(d["origin"]["lon"])),
        bearing_deg=float(d["bearing_deg"]),
        seed=int(d["seed"]),
        potholes=tuple(
            PotholeSpec(float(p["start_m"]), float(p["length_m"]), float(p["depth_in"]))
            for p in d["potholes"]
        ),
    )


def write_profile(profile: RoadProfile, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(profile_to_dict(profile), f)
        f.write("\n")


def read_profile(path: str) -> RoadProfile:
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                return profile_from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as e:
                raise TraceFormatError(path, line_no, str(e)) from e
    raise TraceFormatError(path, 1, "empty profile file")


def write_trace(readings: Iterable[SensorReading], out: TextIO) -> int:
    n = 0
    for r in readings:
        out.write(json.dumps(r.to_dict()))
        out.write("\n")
        n += 1
    return n


def write_trace_file(readings: Iterable[SensorReading], path: str) -> int:
    with open(path, "w", encoding="utf-8") as f:
        return write_trace(readings, f)


def read_trace(path: str) -> list[SensorReading]:
    readings: list[SensorReading] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                readings.append(SensorReading.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as e:
                raise TraceFormatError(path, line_no, str(e)) from e
    return readings
