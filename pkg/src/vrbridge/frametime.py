"""Frame-timing instrumentation and reporting.

Each presented frame yields one record with four millisecond segments:

* ``scene_ms`` — from the pose-wait returning to the second eye submit
  (the application's scene work);
* ``other_ms`` — from the second submit to the frame end (companion view
  and everything else the app does afterwards);
* ``compositor_ms`` — a configurable constant standing in for compositor
  work, which is hardware-specific;
* ``idle_ms`` — the residual, so the four segments always sum to the
  presented frame interval. It may dip negative when work fills the whole
  interval.

Aggregates are a pure fold over the records; reports export to CSV, JSON and
a stacked-bar SVG.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum


class OutOfOrderEventsError(ValueError):
    pass


class EmptyReportError(ValueError):
    pass


class Rating(Enum):
    VR_READY = "VrReady"
    INTERACTIVE = "Interactive"
    INSUFFICIENT = "Insufficient"


@dataclass(frozen=True)
class FrameEvents:
    """Raw per-frame instants (seconds) plus the present decision."""

    frame_index: int
    poses_return_t: float
    second_submit_t: float
    frame_end_t: float
    dropped: bool
    presented_vsync: int


@dataclass(frozen=True)
class FrameTimingRecord:
    frame_index: int
    poses_return_t: float
    second_submit_t: float
    frame_end_t: float
    scene_ms: float
    other_ms: float
    compositor_ms: float
    idle_ms: float
    dropped: bool
    presented_vsync: int


@dataclass
class TimingSink:
    """Accumulates records for one device run; owned by the frame loop."""

    refresh_hz: float
    compositor_ms: float = 1.0
    records: list = field(default_factory=list)
    _last_present_vsync: int = 0

    @property
    def frame_period_ms(self) -> float:
        return 1000.0 / self.refresh_hz


def record_frame(sink: TimingSink, events: FrameEvents) -> FrameTimingRecord:
    """Turn raw frame events into a segment record and append it to the sink."""
    if not events.poses_return_t <= events.second_submit_t <= events.frame_end_t:
        raise OutOfOrderEventsError(
            "frame events out of order: "
            f"posesReturn={events.poses_return_t} secondSubmit={events.second_submit_t} "
            f"frameEnd={events.frame_end_t}"
        )
    scene_ms = (events.second_submit_t - events.poses_return_t) * 1000.0
    other_ms = (events.frame_end_t - events.second_submit_t) * 1000.0
    interval_ms = (events.presented_vsync - sink._last_present_vsync) * sink.frame_period_ms
    idle_ms = interval_ms - scene_ms - other_ms - sink.compositor_ms
    rec = FrameTimingRecord(
        frame_index=events.frame_index,
        poses_return_t=events.poses_return_t,
        second_submit_t=events.second_submit_t,
        frame_end_t=events.frame_end_t,
        scene_ms=scene_ms,
        other_ms=other_ms,
        compositor_ms=sink.compositor_ms,
        idle_ms=idle_ms,
        dropped=events.dropped,
        presented_vsync=events.presented_vsync,
    )
    sink.records.append(rec)
    sink._last_present_vsync = events.presented_vsync
    return rec


@dataclass(frozen=True)
class TimingReport:
    records: tuple
    refresh_hz: float
    mean_fps: float
    dropped_count: int
    dropped_pct: float
    p50_scene_ms: float
    p95_scene_ms: float
    p99_scene_ms: float
    rating: Rating


def _nearest_rank(sorted_values, pct: float) -> float:
    rank = max(1, math.ceil(pct / 100.0 * len(sorted_values)))
    return sorted_values[rank - 1]


def aggregate(records, refresh_hz: float) -> TimingReport:
    """Fold records into a report; record order does not affect aggregates."""
    records = tuple(records)
    if not records:
        raise EmptyReportError("cannot aggregate an empty record list")
    by_vsync = sorted(records, key=lambda r: r.presented_vsync)
    if len(records) >= 2:
        span = by_vsync[-1].presented_vsync - by_vsync[0].presented_vsync
        mean_fps = refresh_hz * (len(records) - 1) / span if span > 0 else float(refresh_hz)
    else:
        mean_fps = refresh_hz / max(by_vsync[0].presented_vsync, 1)
    dropped_count = sum(1 for r in records if r.dropped)
    scene_sorted = sorted(r.scene_ms for r in records)
    return TimingReport(
        records=records,
        refresh_hz=refresh_hz,
        mean_fps=mean_fps,
        dropped_count=dropped_count,
        dropped_pct=100.0 * dropped_count / len(records),
        p50_scene_ms=_nearest_rank(scene_sorted, 50),
        p95_scene_ms=_nearest_rank(scene_sorted, 95),
        p99_scene_ms=_nearest_rank(scene_sorted, 99),
        rating=rate_performance(mean_fps, refresh_hz),
    )


def rate_performance(mean_fps: float, refresh_hz: float) -> Rating:
    """VrReady at (refresh - 0.5) fps or better; interactive from 10 fps up."""
    if mean_fps >= refresh_hz - 0.5:
        return Rating.VR_READY
    if mean_fps >= 10.0:
        return Rating.INTERACTIVE
    return Rating.INSUFFICIENT


CSV_COLUMNS = ("frameIndex", "sceneMs", "otherMs", "compositorMs", "idleMs", "dropped")


def export_report(report: TimingReport, format: str = "csv") -> str:
    if format == "csv":
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        for r in report.records:
            out.write(
                f"{r.frame_index},{r.scene_ms:.6f},{r.other_ms:.6f},"
                f"{r.compositor_ms:.6f},{r.idle_ms:.6f},{int(r.dropped)}\n"
            )
        return out.getvalue()
    if format == "json":
        doc = {
            "refreshHz": report.refresh_hz,
            "aggregates": {
                "meanFps": report.mean_fps,
                "droppedCount": report.dropped_count,
                "droppedPct": report.dropped_pct,
                "p50SceneMs": report.p50_scene_ms,
                "p95SceneMs": report.p95_scene_ms,
                "p99SceneMs": report.p99_scene_ms,
                "rating": report.rating.value,
            },
            "records": [
                {
                    "frameIndex": r.frame_index,
                    "posesReturnT": r.poses_return_t,
                    "secondSubmitT": r.second_submit_t,
                    "frameEndT": r.frame_end_t,
                    "sceneMs": r.scene_ms,
                    "otherMs": r.other_ms,
                    "compositorMs": r.compositor_ms,
                    "idleMs": r.idle_ms,
                    "dropped": r.dropped,
                    "presentedVsync": r.presented_vsync,
                }
                for r in report.records
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def parse_report_json(text: str) -> TimingReport:
    """Inverse of ``export_report(..., 'json')``; recomputes nothing."""
    doc = json.loads(text)
    records = tuple(
        FrameTimingRecord(
            frame_index=r["frameIndex"],
            poses_return_t=r["posesReturnT"],
            second_submit_t=r["secondSubmitT"],
            frame_end_t=r["frameEndT"],
            scene_ms=r["sceneMs"],
            other_ms=r["otherMs"],
            compositor_ms=r["compositorMs"],
            idle_ms=r["idleMs"],
            dropped=r["dropped"],
            presented_vsync=r["presentedVsync"],
        )
        for r in doc["records"]
    )
    agg = doc["aggregates"]
    return TimingReport(
        records=records,
        refresh_hz=doc["refreshHz"],
        mean_fps=agg["meanFps"],
        dropped_count=agg["droppedCount"],
        dropped_pct=agg["droppedPct"],
        p50_scene_ms=agg["p50SceneMs"],
        p95_scene_ms=agg["p95SceneMs"],
        p99_scene_ms=agg["p99SceneMs"],
        rating=Rating(agg["rating"]),
    )


_SEGMENT_STYLE = (
    ("scene_ms", "#3b6fd4"),
    ("other_ms", "#8fb3ee"),
    ("compositor_ms", "#d9842b"),
    ("idle_ms", "#c9c9c9"),
)


def export_stacked_svg(report: TimingReport, width: int = 960, height: int = 320) -> str:
    """Stacked per-frame segment bars; dropped frames get a red outline."""
    n = len(report.records)
    if n == 0:
        raise EmptyReportError("cannot plot an empty report")
    margin = 30
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    totals = [
        max(r.scene_ms, 0) + max(r.other_ms, 0) + max(r.compositor_ms, 0) + max(r.idle_ms, 0)
        for r in report.records
    ]
    scale = plot_h / max(max(totals), 1e-9)
    bar_w = plot_w / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for i, rec in enumerate(report.records):
        x = margin + i * bar_w
        y = height - margin
        for attr, color in _SEGMENT_STYLE:
            ms = max(getattr(rec, attr), 0.0)
            h = ms * scale
            y -= h
            parts.append(
                f'<rect class="{attr}" data-frame="{rec.frame_index}" data-ms="{ms:.6f}" '
                f'x="{x:.3f}" y="{y:.3f}" width="{max(bar_w - 1.0, 0.5):.3f}" height="{h:.6f}" '
                f'fill="{color}"/>'
            )
        if rec.dropped:
            parts.append(
                f'<rect class="dropped" x="{x:.3f}" y="{margin}" width="{max(bar_w - 1.0, 0.5):.3f}" '
                f'height="{plot_h}" fill="none" stroke="#d43b3b" stroke-width="1"/>'
            )
    parts.append(
        f'<text x="{margin}" y="{margin - 10}" font-size="12">'
        f"mean {report.mean_fps:.1f} fps, dropped {report.dropped_pct:.1f}%, {report.rating.value}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts)
