"""Hub service: idempotent ingestion, queries, stats, thresholds, restart."""

import pytest

from roadwatch.detection import Thresholds
from roadwatch.domain import GeoPoint, Severity, displace_m
from roadwatch.server import PotholeService, ValidationFailure
from roadwatch.storage import Storage

ORIGIN = GeoPoint(13.35, 74.78)
DAY = 86_400_000


def wire_reading(seq, ultra=6.0, accel=950.0, offset_m=None, ts=None, lat=None, lon=None):
    pos = displace_m(ORIGIN, 90.0, offset_m if offset_m is not None else seq * 25.0)
    return {
        "seq": seq,
        "ts_ms": seq * 1000 if ts is None else ts,
        "lat": pos.lat if lat is None else lat,
        "lon": pos.lon if lon is None else lon,
        "ultrasonic_in": ultra,
        "accel_z": accel,
    }


def batch(readings, node="veh-1", batch_seq=0):
    return {"node_id": node, "batch_seq": batch_seq, "readings": readings}


@pytest.fixture
def service(tmp_path):
    storage = Storage(str(tmp_path / "hub.db"))
    svc = PotholeService(storage)
    yield svc
    storage.close()


def test_ingest_counts_fresh_and_duplicate(service):
    b = batch([wire_reading(i) for i in range(5)])
    assert service.ingest_batch(b) == {"accepted": 5, "duplicates": 0}
    assert service.ingest_batch(b) == {"accepted": 0, "duplicates": 5}
    mixed = batch([wire_reading(i) for i in range(3, 8)], batch_seq=1)
    assert service.ingest_batch(mixed) == {"accepted": 3, "duplicates": 2}


def test_ingest_replay_leaves_state_hash_unchanged(service):
    b = batch([wire_reading(i, ultra=12.0) for i in range(5)])
    service.ingest_batch(b)
    digest = service.state_digest()
    service.ingest_batch(b)
    assert service.state_digest() == digest


def test_ingest_rejects_malformed_body(service):
    for bad in (
        [],
        {"node_id": "", "batch_seq": 0, "readings": [wire_reading(0)]},
        {"node_id": "n", "batch_seq": -1, "readings": [wire_reading(0)]},
        {"node_id": "n", "batch_seq": 0, "readings": []},
        {"node_id": "n", "batch_seq": 0, "readings": [{"seq": 0}]},
        {"node_id": "n", "batch_seq": 0,
         "readings": [wire_reading(0), wire_reading(0)]},
        {"node_id": "n", "batch_seq": 0, "readings": [dict(wire_reading(0), seq=True)]},
    ):
        with pytest.raises(ValidationFailure) as exc:
            service.ingest_batch(bad)
        assert exc.value.status == 400


def test_ingest_rejects_out_of_range_listing_seqs(service):
    rows = [
        wire_reading(0),
        dict(wire_reading(1), lat=91.0),
        wire_reading(2),
        dict(wire_reading(3), ultrasonic_in=-1.0),
    ]
    digest = service.state_digest()
    with pytest.raises(ValidationFailure) as exc:
        service.ingest_batch(batch(rows))
    assert exc.value.status == 422
    assert exc.value.bad_seqs == [1, 3]
    # whole batch rejected: no state change
    assert service.state_digest() == digest


def test_ingest_clusters_into_events(service):
    # three severe hits 2 m apart, then one far away
    rows = [wire_reading(i, ultra=12.0, offset_m=2.0 * i) for i in range(3)]
    rows.append(wire_reading(3, ultra=12.0, offset_m=200.0))
    service.ingest_batch(batch(rows))
    events = service.get_potholes()
    assert len(events) == 2
    by_id = {ev.event_id: ev for ev in events}
    assert by_id["ev-veh-1-0"].n_readings == 3
    assert by_id["ev-veh-1-3"].n_readings == 1


def test_ingest_merges_events_across_batches(service):
    service.ingest_batch(batch([wire_reading(0, ultra=12.0, offset_m=0.0)]))
    service.ingest_batch(
        batch([wire_reading(1, ultra=12.0, offset_m=2.0)], batch_seq=1)
    )
    events = service.get_potholes()
    assert len(events) == 1
    assert events[0].n_readings == 2
    assert events[0].member_refs == (("veh-1", 0), ("veh-1", 1))


def test_normal_readings_make_no_events(service):
    service.ingest_batch(batch([wire_reading(i) for i in range(10)]))
    assert service.get_potholes() == []


def test_get_potholes_sorted_by_last_seen_desc(service):
    rows = [
        wire_reading(0, ultra=12.0, offset_m=0.0, ts=5_000),
        wire_reading(1, ultra=12.0, offset_m=100.0, ts=9_000),
        wire_reading(2, ultra=12.0, offset_m=200.0, ts=1_000),
    ]
    service.ingest_batch(batch(rows))
    events = service.get_potholes()
    assert [ev.last_seen_ms for ev in events] == [9_000, 5_000, 1_000]


def test_get_potholes_filters(service):
    rows = [
        wire_reading(0, ultra=12.0, accel=1300.0, offset_m=0.0, ts=1_000),
        wire_reading(1, ultra=12.0, offset_m=300.0, ts=50_000),
    ]
    service.ingest_batch(batch(rows))

    since = service.get_potholes(since_ms=50_000)
    assert [ev.event_id for ev in since] == ["ev-veh-1-1"]
    assert service.get_potholes(since_ms=50_001) == []

    west = service.get_potholes(bbox=(74.7, 13.3, 74.7805, 13.4))
    assert [ev.event_id for ev in west] == ["ev-veh-1-0"]
    assert service.get_potholes(bbox=(0.0, 0.0, 1.0, 1.0)) == []

    assert len(service.get_potholes(min_severity=Severity.POTHOLE)) == 2
    assert len(service.get_potholes(min_severity=Severity.NORMAL)) == 2


def test_get_potholes_filter_intersection(service):
    rows = [
        wire_reading(i, ultra=12.0, offset_m=i * 40.0, ts=i * 10_000) for i in range(6)
    ]
    service.ingest_batch(batch(rows))
    bbox = (74.78, 13.3, 74.7815, 13.4)  # roughly the first 160 m
    both = service.get_potholes(bbox=bbox, since_ms=20_000)
    only_bbox = {ev.event_id for ev in service.get_potholes(bbox=bbox)}
    only_since = {ev.event_id for ev in service.get_potholes(since_ms=20_000)}
    assert {ev.event_id for ev in both} == only_bbox & only_since
    assert len(both) > 0


def test_get_potholes_rejects_bad_bbox(service):
    with pytest.raises(ValidationFailure) as exc:
        service.get_potholes(bbox=(10.0, 0.0, 5.0, 1.0))
    assert exc.value.status == 400


def test_geojson_shape(service):
    service.ingest_batch(batch([wire_reading(0, ultra=12.0, accel=1300.0)]))
    fc = service.export_geojson()
    assert fc["type"] == "FeatureCollection"
    (feat,) = fc["features"]
    assert feat["geometry"]["type"] == "Point"
    lon, lat = feat["geometry"]["coordinates"]
    ev = service.get_potholes()[0]
    assert (lon, lat) == (ev.centroid.lon, ev.centroid.lat)
    assert feat["properties"]["severity"] == "Pothole"
    assert feat["properties"]["confidence"] == "High"
    assert feat["properties"]["event_id"] == "ev-veh-1-0"


def test_geojson_empty(service):
    assert service.export_geojson() == {"type": "FeatureCollection", "features": []}


def test_stats_single_day_bucket(service):
    t0 = 40 * DAY + 7_200_000  # some morning, well clear of the epoch
    rows = [
        wire_reading(i, ultra=12.0 if i < 3 else 6.0, offset_m=i * 100.0, ts=t0 + i)
        for i in range(10)
    ]
    service.ingest_batch(batch(rows))
    series = service.get_stats("day")
    assert series == [
        {"bucket_start_ms": 40 * DAY, "new_events": 3, "new_readings": 10}
    ]


def test_stats_straddling_midnight(service):
    before = 41 * DAY - 1
    after = 41 * DAY
    rows = [
        wire_reading(0, ultra=12.0, offset_m=0.0, ts=before),
        wire_reading(1, ultra=12.0, offset_m=300.0, ts=after),
    ]
    service.ingest_batch(batch(rows))
    series = service.get_stats("day")
    assert [b["new_events"] for b in series] == [1, 1]
    assert series[0]["bucket_start_ms"] == 40 * DAY
    assert series[1]["bucket_start_ms"] == 41 * DAY


def test_stats_zero_fill_between_buckets(service):
    rows = [
        wire_reading(0, ts=10 * DAY),
        wire_reading(1, ts=12 * DAY, offset_m=500.0),
    ]
    service.ingest_batch(batch(rows))
    series = service.get_stats("day")
    assert len(series) == 3
    assert series[1] == {
        "bucket_start_ms": 11 * DAY, "new_events": 0, "new_readings": 0
    }


def test_stats_since_filter_and_empty(service):
    assert service.get_stats("day") == []
    service.ingest_batch(batch([wire_reading(0, ts=10 * DAY), wire_reading(1, ts=12 * DAY, offset_m=500.0)]))
    series = service.get_stats("day", since_ms=11 * DAY)
    assert [b["bucket_start_ms"] for b in series] == [12 * DAY]


def test_stats_hour_bucket(service):
    service.ingest_batch(batch([wire_reading(0, ts=3_600_000 * 5 + 1)]))
    series = service.get_stats("hour")
    assert series == [
        {"bucket_start_ms": 3_600_000 * 5, "new_events": 0, "new_readings": 1}
    ]


def test_stats_rejects_bad_bucket(service):
    with pytest.raises(ValidationFailure):
        service.get_stats("week")


def test_thresholds_roundtrip_and_immediate_use(service):
    assert service.get_thresholds() == Thresholds()  # defaults until set
    service.put_thresholds(
        {"ultrasonic_base_in": 4.0, "severe_cutoff_in": 8.0, "accel_z_threshold": 1000.0}
    )
    assert service.get_thresholds().severe_cutoff_in == 8.0
    # 9 in is severe under the new cutoff, wear under the default one
    service.ingest_batch(batch([wire_reading(0, ultra=9.0)]))
    assert len(service.get_potholes()) == 1


def test_put_thresholds_validates(service):
    with pytest.raises(ValidationFailure) as exc:
        service.put_thresholds(
            {"ultrasonic_base_in": 12.0, "severe_cutoff_in": 10.0, "accel_z_threshold": 1.0}
        )
    assert exc.value.status == 422
    with pytest.raises(ValidationFailure) as exc:
        service.put_thresholds({"ultrasonic_base_in": 6.0})
    assert exc.value.status == 400


def test_threshold_change_never_relabels_stored_events(service):
    service.ingest_batch(batch([wire_reading(0, ultra=9.0)]))  # wear, no event
    assert service.get_potholes() == []
    service.put_thresholds(
        {"ultrasonic_base_in": 4.0, "severe_cutoff_in": 8.0, "accel_z_threshold": 1000.0}
    )
    # history does not change retroactively
    assert service.get_potholes() == []
    digest = service.state_digest()
    service.ingest_batch(batch([wire_reading(0, ultra=9.0)], batch_seq=1))  # duplicate
    assert service.state_digest() == digest


def test_post_calibrate_installs_result(service):
    rows = [
        {
            "node_id": "cal", "seq": i, "ts_ms": i,
            "lat": 13.35, "lon": 74.78, "ultrasonic_in": 6.0, "accel_z": 950.0,
        }
        for i in range(40)
    ]
    t = service.post_calibrate({"readings": rows})
    assert t.ultrasonic_base_in == pytest.approx(6.0, abs=1e-9)
    assert service.get_thresholds() == t


def test_post_calibrate_rejects_short_trace(service):
    rows = [
        {
            "node_id": "cal", "seq": i, "ts_ms": i,
            "lat": 13.35, "lon": 74.78, "ultrasonic_in": 6.0, "accel_z": 950.0,
        }
        for i in range(5)
    ]
    with pytest.raises(ValidationFailure) as exc:
        service.post_calibrate({"readings": rows})
    assert exc.value.status == 422


def test_version_bumps_on_change_only(service):
    v0 = service.version()
    b = batch([wire_reading(0, ultra=12.0)])
    service.ingest_batch(b)
    v1 = service.version()
    assert v1 == v0 + 1
    service.ingest_batch(b)  # pure duplicate: no observable change
    assert service.version() == v1
    service.put_thresholds(
        {"ultrasonic_base_in": 5.0, "severe_cutoff_in": 9.0, "accel_z_threshold": 1100.0}
    )
    assert service.version() == v1 + 1


def test_restart_preserves_query_results(tmp_path):
    db = str(tmp_path / "hub.db")
    storage = Storage(db)
    svc = PotholeService(storage)
    rows = [wire_reading(i, ultra=12.0, offset_m=i * 3.0) for i in range(6)]
    svc.ingest_batch(batch(rows))
    svc.put_thresholds(
        {"ultrasonic_base_in": 5.5, "severe_cutoff_in": 9.5, "accel_z_threshold": 1111.0}
    )
    before_events = [ev.to_dict() for ev in svc.get_potholes()]
    before_stats = svc.get_stats("hour")
    before_digest = svc.state_digest()
    storage.close()

    storage2 = Storage(db)
    svc2 = PotholeService(storage2)
    assert [ev.to_dict() for ev in svc2.get_potholes()] == before_events
    assert svc2.get_stats("hour") == before_stats
    assert svc2.state_digest() == before_digest
    assert svc2.get_thresholds().severe_cutoff_in == 9.5
    # clustering resumes against restored events rather than starting fresh
    svc2.ingest_batch(batch([wire_reading(6, ultra=12.0, offset_m=16.0)], batch_seq=1))
    merged = [ev for ev in svc2.get_potholes() if ("veh-1", 6) in ev.member_refs]
    assert len(merged) == 1
    storage2.close()
