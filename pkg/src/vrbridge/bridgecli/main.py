"""CLI dispatch: run | render | serve."""

from __future__ import annotations

import sys
from pathlib import Path

from .. import frametime, stereorender
from .config import RunConfig, describe_config, parse_cli
from .loop import BridgeSession, SessionError


def cmd_run(cfg: RunConfig) -> int:
    session = BridgeSession(cfg)
    frames = cfg.frames or 900
    for _ in range(frames):
        session.run_frame()
    report = session.report()
    if cfg.report:
        _write_report(report, cfg.report)
    print(
        f"{frames} frames: {report.mean_fps:.2f} fps, "
        f"{report.dropped_count} dropped ({report.dropped_pct:.1f}%), "
        f"rating {report.rating.value}"
    )
    return 0


def cmd_render(cfg: RunConfig) -> int:
    if not cfg.dump:
        print("render: --dump <dir> is required", file=sys.stderr)
        return 2
    session = BridgeSession(cfg)
    dump = Path(cfg.dump)
    dump.mkdir(parents=True, exist_ok=True)
    frames = cfg.frames or 1
    for i in range(frames):
        out = session.run_frame()
        stereorender.write_png(out.side_by_side, dump / f"frame_{i:04d}_stereo.png")
        stereorender.write_png(out.companion, dump / f"frame_{i:04d}_companion.png")
    if cfg.report:
        _write_report(session.report(), cfg.report)
    print(f"wrote {frames} stereo + companion frame(s) to {dump}")
    return 0


def cmd_serve(cfg: RunConfig) -> int:
    from .server import serve  # deferred: pulls in fastapi/uvicorn

    return serve(cfg)


def _write_report(report: frametime.TimingReport, path_str: str) -> None:
    path = Path(path_str)
    fmt = "csv" if path.suffix.lower() == ".csv" else "json"
    path.write_text(frametime.export_report(report, fmt))


def main(argv=None) -> int:
    cfg = parse_cli(sys.argv[1:] if argv is None else argv)
    if cfg.show_config:
        print(describe_config(cfg))
    try:
        if cfg.command == "run":
            return cmd_run(cfg)
        if cfg.command == "render":
            return cmd_render(cfg)
        return cmd_serve(cfg)
    except SessionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
