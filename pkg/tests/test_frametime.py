import json
import xml.etree.ElementTree as ET

import pytest

from vrbridge.frametime import (
    EmptyReportError,
    FrameEvents,
    FrameTimingRecord,
    OutOfOrderEventsError,
    Rating,
    TimingSink,
    aggregate,
    export_report,
    export_stacked_svg,
    parse_report_json,
    rate_performance,
    record_frame,
)

T_MS = 1000.0 / 90.0


def make_record(i, scene_ms=5.0, other_ms=1.0, vsync=None, dropped=False):
    vsync = vsync if vsync is not None else i + 1
    return FrameTimingRecord(
        frame_index=i,
        poses_return_t=i * T_MS / 1000,
        second_submit_t=i * T_MS / 1000 + scene_ms / 1000,
        frame_end_t=i * T_MS / 1000 + (scene_ms + other_ms) / 1000,
        scene_ms=scene_ms,
        other_ms=other_ms,
        compositor_ms=1.0,
        idle_ms=T_MS - scene_ms - other_ms - 1.0,
        dropped=dropped,
        presented_vsync=vsync,
    )


def test_record_frame_segments():
    sink = TimingSink(refresh_hz=90.0, compositor_ms=1.0)
    rec = record_frame(
        sink,
        FrameEvents(0, poses_return_t=0.0, second_submit_t=0.005, frame_end_t=0.007,
                    dropped=False, presented_vsync=1),
    )
    assert rec.scene_ms == pytest.approx(5.0)
    assert rec.other_ms == pytest.approx(2.0)
    # compositor + idle fill the remaining 4.111 ms of the 11.111 ms interval
    assert rec.compositor_ms + rec.idle_ms == pytest.approx(T_MS - 7.0, abs=1e-9)
    total = rec.scene_ms + rec.other_ms + rec.compositor_ms + rec.idle_ms
    assert total == pytest.approx(T_MS, abs=1e-9)


def test_record_frame_out_of_order():
    sink = TimingSink(refresh_hz=90.0)
    with pytest.raises(OutOfOrderEventsError):
        record_frame(sink, FrameEvents(0, 0.005, 0.003, 0.006, False, 1))


def test_record_frame_zero_work():
    sink = TimingSink(refresh_hz=90.0)
    rec = record_frame(sink, FrameEvents(0, 0.001, 0.001, 0.001, False, 1))
    assert rec.scene_ms == 0.0
    assert rec.other_ms == 0.0


def test_aggregate_mean_fps_900_frames():
    records = [make_record(i) for i in range(900)]
    report = aggregate(records, 90.0)
    assert report.mean_fps == 90.0
    assert report.dropped_count == 0
    assert report.rating is Rating.VR_READY
    # ~10 s of virtual time elapsed
    assert (records[-1].presented_vsync - records[0].presented_vsync) * T_MS / 1000 == pytest.approx(
        10.0, abs=0.05
    )


def test_aggregate_alternating_dropped():
    records = [make_record(i, dropped=(i % 2 == 0)) for i in range(100)]
    report = aggregate(records, 90.0)
    assert report.dropped_pct == 50.0


def test_aggregate_single_record_percentiles():
    report = aggregate([make_record(0, scene_ms=4.2)], 90.0)
    assert report.p50_scene_ms == report.p95_scene_ms == report.p99_scene_ms == 4.2


def test_aggregate_order_independent():
    records = [make_record(i, scene_ms=float(i % 7)) for i in range(50)]
    a = aggregate(records, 90.0)
    b = aggregate(list(reversed(records)), 90.0)
    assert a.mean_fps == b.mean_fps
    assert a.p95_scene_ms == b.p95_scene_ms
    assert a.dropped_pct == b.dropped_pct


def test_aggregate_empty_rejected():
    with pytest.raises(EmptyReportError):
        aggregate([], 90.0)


def test_rate_performance_thresholds():
    assert rate_performance(90.0, 90.0) is Rating.VR_READY
    assert rate_performance(89.5, 90.0) is Rating.VR_READY
    assert rate_performance(45.0, 90.0) is Rating.INTERACTIVE
    assert rate_performance(10.0, 90.0) is Rating.INTERACTIVE
    assert rate_performance(9.5, 90.0) is Rating.INSUFFICIENT
    # monotone non-decreasing in fps
    order = [Rating.INSUFFICIENT, Rating.INTERACTIVE, Rating.VR_READY]
    prev = -1
    for fps in (0, 5, 9.99, 10, 30, 89, 89.5, 90, 200):
        cur = order.index(rate_performance(fps, 90.0))
        assert cur >= prev
        prev = cur


def test_csv_export_shape():
    report = aggregate([make_record(i) for i in range(3)], 90.0)
    lines = export_report(report, "csv").strip().splitlines()
    assert len(lines) == 4
    assert lines[0] == "frameIndex,sceneMs,otherMs,compositorMs,idleMs,dropped"
    assert lines[1].split(",")[0] == "0"


def test_json_round_trip():
    report = aggregate([make_record(i, scene_ms=float(2 + i)) for i in range(5)], 90.0)
    text = export_report(report, "json")
    back = parse_report_json(text)
    assert back.records == report.records
    assert back.mean_fps == report.mean_fps
    assert back.rating is report.rating
    # deterministic serialization
    assert export_report(back, "json") == text


def test_svg_heights_proportional():
    records = [make_record(i, scene_ms=float(1 + (i * 3) % 9)) for i in range(12)]
    report = aggregate(records, 90.0)
    svg = export_stacked_svg(report)
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    bars = [e for e in root.iter(f"{ns}rect") if e.get("class") == "scene_ms"]
    assert len(bars) == 12
    ratios = []
    for e, rec in zip(bars, records):
        h = float(e.get("height"))
        ms = float(e.get("data-ms"))
        assert ms == pytest.approx(rec.scene_ms, abs=1e-6)
        if ms > 0:
            ratios.append(h / ms)
    spread = (max(ratios) - min(ratios)) / max(ratios)
    assert spread < 0.005  # heights proportional to ms within 0.5%


def test_svg_highlights_dropped():
    records = [make_record(i, dropped=(i == 1)) for i in range(3)]
    svg = export_stacked_svg(aggregate(records, 90.0))
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    dropped = [e for e in root.iter(f"{ns}rect") if e.get("class") == "dropped"]
    assert len(dropped) == 1


def test_segment_conservation_invariant():
    sink = TimingSink(refresh_hz=90.0, compositor_ms=1.0)
    prev = 0
    for i in range(20):
        vsync = prev + 1 + (i % 3)
        base = prev * T_MS / 1000
        record_frame(
            sink,
            FrameEvents(i, base, base + 0.004, base + 0.005, False, vsync),
        )
        rec = sink.records[-1]
        interval = (vsync - prev) * T_MS
        total = rec.scene_ms + rec.other_ms + rec.compositor_ms + rec.idle_ms
        assert total == pytest.approx(interval, abs=1e-6)
        prev = vsync
