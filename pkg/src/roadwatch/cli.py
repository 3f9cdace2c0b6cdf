"""Command-line entry point: simulate, calibrate, agent, serve, evaluate,
export, and the end-to-end demo.

The demo command reproduces the reference experiment from a single
scenario file: generate a road, drive it, calibrate on a clean reference
road, push readings through the store-and-forward agent into an
in-process hub on a simulated clock, then score detected events against
ground truth. Everything is seeded, so a scenario file maps to exactly
one report, byte for byte.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import requests

from .agent import (
    DEFAULT_BATCH_CAP,
    Agent,
    CacheQueue,
    ConnectivitySchedule,
    HttpUplink,
    InProcessUplink,
    SessionReport,
)
from .clock import SimClock
from .detection import (
    DEFAULT_CLUSTER_RADIUS_M,
    DEFAULT_K_SIGMA,
    DEFAULT_MATCH_RADIUS_M,
    DEFAULT_SEVERE_DELTA_IN,
    DetectionMetrics,
    PotholeEvent,
    Thresholds,
    calibrate,
    detection_metrics,
    read_thresholds,
    write_thresholds,
)
from .domain import Confidence, GeoPoint, Severity
from .roadsim import (
    NoiseModel,
    RoadProfile,
    TraceFormatError,
    VehicleConfig,
    export_ground_truth,
    generate_profile,
    read_profile,
    read_trace,
    sample_trace,
    write_profile,
    write_trace_file,
)
from .server import ApiServer, PotholeService, ValidationFailure
from .storage import Storage

TRACE_SEED_OFFSET = 10_000
CALIBRATION_SEED_OFFSET = 20_000


class ScenarioError(Exception):
    """A scenario file that parses but cannot be run."""


@dataclass(frozen=True)
class RoadParams:
    length_m: float = 1000.0
    n_potholes: int = 25
    depth_range_in: tuple[float, float] = (3.0, 8.0)
    length_range_m: tuple[float, float] = (5.0, 8.0)
    origin: GeoPoint = field(default_factory=lambda: GeoPoint(13.35, 74.78))
    bearing_deg: float = 90.0


@dataclass(frozen=True)
class ScenarioConfig:
    """One end-to-end run: road, vehicle, noise, connectivity, seeds."""

    name: str = "scenario"
    node_id: str = "veh-001"
    seed: int = 42
    t0_ms: int = 1_700_000_000_000
    road: RoadParams = field(default_factory=RoadParams)
    reference_road_m: float = 500.0
    vehicle: VehicleConfig = field(default_factory=VehicleConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    calibration_noise: NoiseModel = field(
        default_factory=lambda: NoiseModel(sigma_ultra_in=0.0)
    )
    k_sigma: float = DEFAULT_K_SIGMA
    connectivity: str = "always_on"
    connectivity_windows: tuple[tuple[float, float], ...] = ()
    batch_cap: int = DEFAULT_BATCH_CAP
    cluster_radius_m: float = DEFAULT_CLUSTER_RADIUS_M
    match_radius_m: float = DEFAULT_MATCH_RADIUS_M
    recall_floor: float = 0.8


def _pair(value, what: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        raise ScenarioError(f"{what} must be a [low, high] pair")
    return float(value[0]), float(value[1])


def scenario_from_dict(d: dict) -> ScenarioConfig:
    """Build a scenario from loosely-typed JSON; unknown keys are errors."""
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object")
    known = {
        "name", "node_id", "seed", "t0_ms", "road", "reference_road_m",
        "vehicle", "noise", "calibration_noise", "k_sigma", "connectivity",
        "batch_cap", "cluster_radius_m", "match_radius_m", "recall_floor",
    }
    unknown = set(d) - known
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")

    base = ScenarioConfig()
    road_d = d.get("road", {})
    road_defaults = RoadParams()
    origin_d = road_d.get("origin")
    road = RoadParams(
        length_m=float(road_d.get("length_m", road_defaults.length_m)),
        n_potholes=int(road_d.get("n_potholes", road_defaults.n_potholes)),
        depth_range_in=_pair(road_d["depth_range_in"], "road.depth_range_in")
        if "depth_range_in" in road_d else road_defaults.depth_range_in,
        length_range_m=_pair(road_d["length_range_m"], "road.length_range_m")
        if "length_range_m" in road_d else road_defaults.length_range_m,
        origin=GeoPoint(float(origin_d["lat"]), float(origin_d["lon"]))
        if origin_d else road_defaults.origin,
        bearing_deg=float(road_d.get("bearing_deg", road_defaults.bearing_deg)),
    )

    def model(key: str, default):
        sub = d.get(key)
        if sub is None:
            return default
        if not isinstance(sub, dict):
            raise ScenarioError(f"{key} must be an object")
        try:
            return type(default)(**sub)
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"bad {key}: {e}") from None

    connectivity = d.get("connectivity", base.connectivity)
    windows: tuple[tuple[float, float], ...] = ()
    if isinstance(connectivity, dict):
        raw = connectivity.get("windows")
        if not isinstance(raw, list):
            raise ScenarioError("custom connectivity needs a windows array")
        windows = tuple(
            (float(w[0]), math_inf_if_none(w[1])) for w in raw
        )
        connectivity = "custom"
    elif connectivity not in ("always_on", "depot", "pilot", "never"):
        raise ScenarioError(f"unknown connectivity profile {connectivity!r}")

    try:
        return ScenarioConfig(
            name=str(d.get("name", base.name)),
            node_id=str(d.get("node_id", base.node_id)),
            seed=int(d.get("seed", base.seed)),
            t0_ms=int(d.get("t0_ms", base.t0_ms)),
            road=road,
            reference_road_m=float(d.get("reference_road_m", base.reference_road_m)),
            vehicle=model("vehicle", base.vehicle),
            noise=model("noise", base.noise),
            calibration_noise=model("calibration_noise", base.calibration_noise),
            k_sigma=float(d.get("k_sigma", base.k_sigma)),
            connectivity=connectivity,
            connectivity_windows=windows,
            batch_cap=int(d.get("batch_cap", base.batch_cap)),
            cluster_radius_m=float(d.get("cluster_radius_m", base.cluster_radius_m)),
            match_radius_m=float(d.get("match_radius_m", base.match_radius_m)),
            recall_floor=float(d.get("recall_floor", base.recall_floor)),
        )
    except (TypeError, ValueError) as e:
        raise ScenarioError(str(e)) from None


def math_inf_if_none(v) -> float:
    return math.inf if v is None else float(v)


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: line {e.lineno}: {e.msg}") from None
    try:
        return scenario_from_dict(raw)
    except ScenarioError as e:
        raise ScenarioError(f"{path}: {e}") from None


def schedule_for_scenario(sc: ScenarioConfig, trace_end_ms: int) -> ConnectivitySchedule:
    if sc.connectivity == "always_on":
        return ConnectivitySchedule.always_on(0)
    if sc.connectivity == "depot":
        return ConnectivitySchedule.depot(trace_end_ms + 60_000)
    if sc.connectivity == "pilot":
        duration = max(1, trace_end_ms - sc.t0_ms)
        cycles = max(1, -(-duration // 120_000))
        return ConnectivitySchedule.pilot(sc.t0_ms, 120_000, 20_000, cycles)
    if sc.connectivity == "never":
        return ConnectivitySchedule.never()
    return ConnectivitySchedule(windows=sc.connectivity_windows)


@dataclass(frozen=True)
class DemoResult:
    scenario: ScenarioConfig
    thresholds: Thresholds
    session: SessionReport
    metrics: DetectionMetrics
    n_events: int
    n_truth: int
    geojson: dict

    def report_dict(self) -> dict:
        return {
            "scenario": self.scenario.name,
            "seed": self.scenario.seed,
            "thresholds": self.thresholds.to_dict(),
            "session": self.session.to_dict(),
            "events": self.n_events,
            "ground_truth": self.n_truth,
            "metrics": self.metrics.to_dict(),
        }


def reference_profile(sc: ScenarioConfig) -> RoadProfile:
    """Flat calibration road sharing the scenario's origin and heading."""
    return RoadProfile(
        length_m=sc.reference_road_m,
        origin=sc.road.origin,
        bearing_deg=sc.road.bearing_deg,
        potholes=(),
        seed=sc.seed,
    )


def calibration_trace(sc: ScenarioConfig):
    """Reference-road drive taken an hour before the scenario run."""
    return sample_trace(
        reference_profile(sc),
        sc.vehicle,
        sc.calibration_noise,
        node_id=f"{sc.node_id}-cal",
        t0_ms=sc.t0_ms - 3_600_000,
        seed=sc.seed + CALIBRATION_SEED_OFFSET,
    )


def run_demo(sc: ScenarioConfig, workdir: str) -> DemoResult:
    """Execute the full pipeline for one scenario inside ``workdir``."""
    profile = generate_profile(
        length_m=sc.road.length_m,
        n_potholes=sc.road.n_potholes,
        depth_range_in=sc.road.depth_range_in,
        length_range_m=sc.road.length_range_m,
        origin=sc.road.origin,
        bearing_deg=sc.road.bearing_deg,
        seed=sc.seed,
    )
    trace = sample_trace(
        profile, sc.vehicle, sc.noise, sc.node_id, sc.t0_ms,
        seed=sc.seed + TRACE_SEED_OFFSET,
    )
    thresholds = calibrate(calibration_trace(sc), k_sigma=sc.k_sigma)

    storage = Storage(os.path.join(workdir, "hub.db"))
    try:
        storage.put_thresholds(thresholds)
        service = PotholeService(storage, cluster_radius_m=sc.cluster_radius_m)
        clock = SimClock(start_ms=sc.t0_ms)
        queue = CacheQueue(os.path.join(workdir, "queue"), sc.node_id)
        agent = Agent(
            queue, InProcessUplink(service), clock, batch_cap=sc.batch_cap
        )
        trace_end = trace[-1].ts_ms if trace else sc.t0_ms
        schedule = schedule_for_scenario(sc, trace_end)
        session = agent.run_session(trace, schedule)
        queue.close()

        events = service.get_potholes()
        truth = export_ground_truth(profile)
        metrics = detection_metrics(events, truth, match_radius_m=sc.match_radius_m)
        geojson = service.export_geojson()
    finally:
        storage.close()

    return DemoResult(
        scenario=sc,
        thresholds=thresholds,
        session=session,
        metrics=metrics,
        n_events=len(events),
        n_truth=len(truth),
        geojson=geojson,
    )


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    profile = generate_profile(
        length_m=args.length_m,
        n_potholes=args.potholes,
        depth_range_in=(args.depth_min, args.depth_max),
        length_range_m=(args.hole_len_min, args.hole_len_max),
        origin=GeoPoint(args.origin_lat, args.origin_lon),
        bearing_deg=args.bearing,
        seed=args.seed,
    )
    vehicle = VehicleConfig(
        ride_height_in=args.ride_height,
        speed_mps=args.speed,
        sample_spacing_m=args.spacing,
    )
    noise = NoiseModel.quiet() if args.quiet_noise else NoiseModel(
        sigma_ultra_in=args.sigma_ultra,
        sigma_accel=args.sigma_accel,
        accel_base=args.accel_base,
        accel_gain=args.accel_gain,
    )
    trace_seed = args.trace_seed if args.trace_seed is not None else args.seed + TRACE_SEED_OFFSET
    trace = sample_trace(profile, vehicle, noise, args.node_id, args.t0_ms, trace_seed)

    write_profile(profile, args.out_profile)
    n = write_trace_file(trace, args.out_trace)
    if args.out_truth:
        truth = [{"lat": p.lat, "lon": p.lon} for p in export_ground_truth(profile)]
        with open(args.out_truth, "w", encoding="utf-8") as f:
            json.dump(truth, f, indent=2)
            f.write("\n")
    print(f"wrote {args.out_profile} ({len(profile.potholes)} potholes) "
          f"and {args.out_trace} ({n} readings)")
    return 0


def cmd_calibrate(args) -> int:
    readings = read_trace(args.trace)
    t = calibrate(readings, k_sigma=args.k_sigma, severe_delta_in=args.severe_delta)
    write_thresholds(t, args.out)
    print(f"calibrated from {len(readings)} readings:")
    print(json.dumps(t.to_dict(), indent=2))
    return 0


def cmd_agent(args) -> int:
    trace = read_trace(args.trace)
    if not trace:
        print("error: trace is empty", file=sys.stderr)
        return 1
    node_id = trace[0].node_id
    queue = CacheQueue(args.queue_dir, node_id)
    uplink = HttpUplink(args.server)
    # replay on a simulated clock: timestamps come from the trace, and
    # retry backoff advances instantly instead of stalling the command
    clock = SimClock(start_ms=trace[0].ts_ms)
    agent = Agent(queue, uplink, clock, batch_cap=args.batch_cap)
    schedule = ConnectivitySchedule.always_on(0)
    try:
        report = agent.run_session(trace, schedule)
    finally:
        queue.close()
    print(json.dumps(report.to_dict(), indent=2))
    return 0 if report.remaining == 0 else 1


def cmd_serve(args) -> int:
    os.makedirs(args.data_dir, exist_ok=True)
    storage = Storage(os.path.join(args.data_dir, "hub.db"))
    initial = None
    if args.thresholds:
        initial = read_thresholds(args.thresholds)
        storage.put_thresholds(initial)
    service = PotholeService(storage, cluster_radius_m=args.cluster_radius)
    ui_dir = args.ui_dir if args.ui_dir and os.path.isdir(args.ui_dir) else None
    server = ApiServer(service, host=args.host, port=args.port, ui_dir=ui_dir)
    print(f"listening on {server.url} (data in {args.data_dir})")
    if ui_dir:
        print(f"dashboard at {server.url}/ui/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()
        storage.close()
    return 0


def _load_event_centroids(path: str) -> list[GeoPoint]:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise TraceFormatError(path, e.lineno, e.msg) from None
    if isinstance(data, dict) and data.get("type") == "FeatureCollection":
        return [
            GeoPoint(feat["geometry"]["coordinates"][1], feat["geometry"]["coordinates"][0])
            for feat in data.get("features", [])
        ]
    if isinstance(data, list):
        return [
            GeoPoint(float(ev["centroid"]["lat"]), float(ev["centroid"]["lon"]))
            for ev in data
        ]
    raise TraceFormatError(path, 1, "expected a FeatureCollection or event array")


def _load_truth(path: str) -> list[GeoPoint]:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise TraceFormatError(path, e.lineno, e.msg) from None
    if not isinstance(data, list):
        raise TraceFormatError(path, 1, "expected a JSON array of {lat, lon}")
    return [GeoPoint(float(p["lat"]), float(p["lon"])) for p in data]


def cmd_evaluate(args) -> int:
    events = _load_event_centroids(args.events)
    truth = _load_truth(args.truth)
    metrics = centroid_metrics(events, truth, args.match_radius)
    if args.json:
        print(json.dumps(metrics.to_dict(), indent=2))
    else:
        print(f"events:    {len(events)}")
        print(f"truth:     {len(truth)}")
        print(f"matched:   {metrics.matched}")
        print(f"missed:    {metrics.missed}")
        print(f"spurious:  {metrics.spurious}")
        print(f"recall:    {fmt_ratio(metrics.recall)}")
        print(f"precision: {fmt_ratio(metrics.precision)}")
    return 0


def centroid_metrics(events: list[GeoPoint], truth: list[GeoPoint], radius_m: float):
    """detection_metrics over bare centroids (no event metadata needed)."""
    shells = [
        PotholeEvent(
            event_id=f"ev-{i}",
            centroid=c,
            severity=Severity.POTHOLE,
            confidence=Confidence.LOW,
            n_readings=1,
            first_seen_ms=0,
            last_seen_ms=0,
            member_refs=(("x", i),),
        )
        for i, c in enumerate(events)
    ]
    return detection_metrics(shells, truth, match_radius_m=radius_m)


def fmt_ratio(v) -> str:
    return "n/a" if v is None else f"{v:.3f}"


def cmd_export(args) -> int:
    if args.server:
        params = {}
        if args.bbox:
            params["bbox"] = args.bbox
        if args.since_ms is not None:
            params["since_ms"] = str(args.since_ms)
        if args.min_severity:
            params["min_severity"] = args.min_severity
        path = "/api/v1/potholes.geojson" if args.format == "geojson" else "/api/v1/potholes"
        resp = requests.get(args.server.rstrip("/") + path, params=params, timeout=30)
        if resp.status_code != 200:
            print(f"error: server returned {resp.status_code}: {resp.text}", file=sys.stderr)
            return 1
        payload = resp.json()
    else:
        storage = Storage(os.path.join(args.data_dir, "hub.db"))
        try:
            service = PotholeService(storage)
            bbox = None
            if args.bbox:
                parts = args.bbox.split(",")
                if len(parts) != 4:
                    print("error: bbox must be min_lon,min_lat,max_lon,max_lat", file=sys.stderr)
                    return 1
                bbox = tuple(float(p) for p in parts)
            min_sev = Severity.from_label(args.min_severity) if args.min_severity else None
            if args.format == "geojson":
                payload = service.export_geojson(bbox, args.since_ms, min_sev)
            else:
                payload = [ev.to_dict() for ev in service.get_potholes(bbox, args.since_ms, min_sev)]
        finally:
            storage.close()

    out = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(out)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(out)
    return 0


def cmd_demo(args) -> int:
    sc = load_scenario(args.scenario)
    os.makedirs(args.out_dir, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix="roadwatch-demo-") as workdir:
        result = run_demo(sc, workdir)

    geojson_path = os.path.join(args.out_dir, "events.geojson")
    with open(geojson_path, "w", encoding="utf-8") as f:
        json.dump(result.geojson, f, indent=2, sort_keys=True)
        f.write("\n")
    report_path = os.path.join(args.out_dir, "report.json")
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(result.report_dict(), f, indent=2, sort_keys=True)
        f.write("\n")

    if args.json:
        print(json.dumps(result.report_dict(), sort_keys=True))
    else:
        m = result.metrics
        s = result.session
        print(f"scenario {sc.name} (seed {sc.seed})")
        print(f"  readings: {s.enqueued} enqueued, {s.acked} delivered, "
              f"{s.quarantined} quarantined, {s.remaining} undelivered")
        print(f"  events:   {result.n_events} detected, {result.n_truth} ground truth")
        print(f"  matched {m.matched}/{result.n_truth}  "
              f"recall {fmt_ratio(m.recall)}  precision {fmt_ratio(m.precision)}")
        print(f"  wrote {geojson_path} and {report_path}")

    if result.session.acked == 0 and result.session.enqueued > 0:
        print("error: 0 readings delivered", file=sys.stderr)
        return 1
    if result.metrics.recall is not None and result.metrics.recall < sc.recall_floor:
        print(
            f"error: recall {result.metrics.recall:.3f} below floor {sc.recall_floor}",
            file=sys.stderr,
        )
        return 1
    return 0


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="roadwatch",
        description="Pothole detection pipeline: simulate, ingest, detect, report.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a road profile and sensor trace")
    sim.add_argument("--length-m", type=float, default=1000.0)
    sim.add_argument("--potholes", type=int, default=25)
    sim.add_argument("--seed", type=int, default=42)
    sim.add_argument("--depth-min", type=float, default=3.0)
    sim.add_argument("--depth-max", type=float, default=8.0)
    sim.add_argument("--hole-len-min", type=float, default=5.0)
    sim.add_argument("--hole-len-max", type=float, default=8.0)
    sim.add_argument("--origin-lat", type=float, default=13.35)
    sim.add_argument("--origin-lon", type=float, default=74.78)
    sim.add_argument("--bearing", type=float, default=90.0)
    sim.add_argument("--ride-height", type=float, default=6.0)
    sim.add_argument("--speed", type=float, default=8.0)
    sim.add_argument("--spacing", type=float, default=1000.0 / 150.0)
    sim.add_argument("--sigma-ultra", type=float, default=0.25)
    sim.add_argument("--sigma-accel", type=float, default=40.0)
    sim.add_argument("--accel-base", type=float, default=950.0)
    sim.add_argument("--accel-gain", type=float, default=25.0)
    sim.add_argument("--quiet-noise", action="store_true",
                     help="zero sensor noise (calibration references)")
    sim.add_argument("--node-id", default="veh-001")
    sim.add_argument("--t0-ms", type=int, default=1_700_000_000_000)
    sim.add_argument("--trace-seed", type=int, default=None,
                     help="defaults to seed + 10000")
    sim.add_argument("--out-profile", default="profile.json")
    sim.add_argument("--out-trace", default="trace.jsonl")
    sim.add_argument("--out-truth", default=None,
                     help="also write ground-truth centroids as JSON")
    sim.set_defaults(func=cmd_simulate)

    cal = sub.add_parser("calibrate", help="derive thresholds from a reference trace")
    cal.add_argument("--trace", required=True)
    cal.add_argument("--out", default="thresholds.json")
    cal.add_argument("--k-sigma", type=float, default=DEFAULT_K_SIGMA)
    cal.add_argument("--severe-delta", type=float, default=DEFAULT_SEVERE_DELTA_IN)
    cal.set_defaults(func=cmd_calibrate)

    ag = sub.add_parser("agent", help="replay a trace through the uplink agent")
    ag.add_argument("--trace", required=True)
    ag.add_argument("--server", required=True, help="hub base URL")
    ag.add_argument("--queue-dir", required=True)
    ag.add_argument("--batch-cap", type=int, default=DEFAULT_BATCH_CAP)
    ag.set_defaults(func=cmd_agent)

    srv = sub.add_parser("serve", help="run the ingestion and query server")
    srv.add_argument("--host", default=os.environ.get("ROADWATCH_HOST", "127.0.0.1"))
    srv.add_argument("--port", type=int,
                     default=int(os.environ.get("ROADWATCH_PORT", "8080")))
    srv.add_argument("--data-dir",
                     default=os.environ.get("ROADWATCH_DATA_DIR", "./roadwatch-data"))
    srv.add_argument("--thresholds", default=os.environ.get("ROADWATCH_THRESHOLDS"),
                     help="thresholds JSON installed at boot")
    srv.add_argument("--cluster-radius", type=float, default=DEFAULT_CLUSTER_RADIUS_M)
    srv.add_argument("--ui-dir", default=os.environ.get("ROADWATCH_UI_DIR"),
                     help="static dashboard bundle served at /ui/")
    srv.set_defaults(func=cmd_serve)

    ev = sub.add_parser("evaluate", help="score detected events against ground truth")
    ev.add_argument("--events", required=True,
                    help="GeoJSON FeatureCollection or event array")
    ev.add_argument("--truth", required=True, help="JSON array of {lat, lon}")
    ev.add_argument("--match-radius", type=float, default=DEFAULT_MATCH_RADIUS_M)
    ev.add_argument("--json", action="store_true")
    ev.set_defaults(func=cmd_evaluate)

    ex = sub.add_parser("export", help="export events from a server or data dir")
    src = ex.add_mutually_exclusive_group(required=True)
    src.add_argument("--server", help="hub base URL")
    src.add_argument("--data-dir", help="read the store directly")
    ex.add_argument("--format", choices=("geojson", "events"), default="geojson")
    ex.add_argument("--bbox", help="min_lon,min_lat,max_lon,max_lat")
    ex.add_argument("--since-ms", type=int, default=None)
    ex.add_argument("--min-severity", choices=("Normal", "MaintenanceNeeded", "Pothole"))
    ex.add_argument("--out", default=None)
    ex.set_defaults(func=cmd_export)

    demo = sub.add_parser("demo", help="run a full scenario end to end")
    demo.add_argument("scenario", help="scenario JSON file")
    demo.add_argument("--out-dir", default="demo-out")
    demo.add_argument("--json", action="store_true",
                      help="machine-readable report on stdout")
    demo.set_defaults(func=cmd_demo)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TraceFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValidationFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
