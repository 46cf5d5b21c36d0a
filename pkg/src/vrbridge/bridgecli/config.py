"""Run configuration and CLI parsing.

Subcommands: ``run`` (headless frame loop + report), ``render`` (frame dumps),
``serve`` (WebSocket server + companion UI). HMD fields are overridable one by
one with ``--hmd.<field>`` flags (camelCase, e.g. ``--hmd.refreshHz 45``).
"""

from __future__ import annotations

import argparse
import json
from dataclasses import dataclass, field, fields as dc_fields

from ..hmdsim import HmdConfig

POSE_KINDS = ("orbit", "trace", "live")


class UsageError(SystemExit):
    pass


@dataclass
class RunConfig:
    command: str = "run"
    network: str | None = None
    pose: str = "orbit"  # orbit | trace:<path> | live
    frames: int | None = None
    report: str | None = None
    dump: str | None = None
    serve: str = "127.0.0.1:8777"
    hmd_overrides: dict = field(default_factory=dict)
    texture: bool | None = None
    clock: str | None = None  # None: virtual for run/render, real for serve
    work_ms: float = 0.0
    pace_ms: float = 0.0  # wall-clock throttle per frame (serve on virtual clock)
    ui_dir: str | None = None
    show_config: bool = False

    def pose_kind(self) -> str:
        kind = self.pose.split(":", 1)[0]
        if kind not in POSE_KINDS:
            raise ValueError(f"pose source must be orbit, trace:<path> or live, got {self.pose!r}")
        return kind

    def trace_path(self) -> str:
        kind, _, path = self.pose.partition(":")
        if kind != "trace" or not path:
            raise ValueError(f"pose {self.pose!r} carries no trace path")
        return path

    def effective_clock(self) -> str:
        if self.clock is not None:
            return self.clock
        return "real" if self.command == "serve" else "virtual"


def _camel(name: str) -> str:
    parts = name.split("_")
    return parts[0] + "".join(p.capitalize() for p in parts[1:])


_HMD_FLAGS = {}
for f in dc_fields(HmdConfig):
    if f.name == "clock":
        continue  # owned by --clock
    _HMD_FLAGS[f"hmd.{_camel(f.name)}"] = (f.name, type(getattr(HmdConfig(), f.name)))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", help="network JSON file (default: the bundled example network)")
    p.add_argument("--pose", default="orbit", help="pose source: orbit | trace:<path> | live")
    p.add_argument("--frames", type=int, help="number of frames (default: run 900, render 1, serve unbounded)")
    p.add_argument("--report", help="write the timing report here (.csv or .json)")
    p.add_argument("--dump", help="directory for per-frame PNG dumps")
    p.add_argument("--clock", choices=("real", "virtual"), help="clock source (default: virtual; serve: real)")
    p.add_argument("--work-ms", type=float, default=0.0,
                   help="simulated per-frame scene work in ms (virtual clock)")
    p.add_argument("--pace-ms", type=float, default=0.0,
                   help="wall-clock pause per frame, for throttling virtual-clock serving")
    tex = p.add_mutually_exclusive_group()
    tex.add_argument("--texture", dest="texture", action="store_true", default=None,
                     help="force checker texturing on")
    tex.add_argument("--no-texture", dest="texture", action="store_false",
                     help="force texturing off")
    p.add_argument("--show-config", action="store_true", help="print the effective config as JSON first")
    for flag, (fname, ftype) in _HMD_FLAGS.items():
        p.add_argument(f"--{flag}", dest=f"hmd__{fname}", type=ftype, metavar="V",
                       help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrbridge",
        description="Dataflow-to-simulated-HMD bridge: run, render or serve a scene network.",
        epilog="HMD overrides: " + " ".join(f"--{f}" for f in _HMD_FLAGS),
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", metavar="run|render|serve")
    for name, desc in (
        ("run", "drive the frame loop headless and write a timing report"),
        ("render", "dump side-by-side and companion PNGs per frame"),
        ("serve", "serve the companion viewer and frame stream over WebSocket"),
    ):
        p = sub.add_parser(name, help=desc, allow_abbrev=False)
        _add_common(p)
        if name == "serve":
            p.add_argument("--serve", default="127.0.0.1:8777", metavar="HOST:PORT",
                           help="bind address (default 127.0.0.1:8777)")
            p.add_argument("--ui-dir", help="directory with the companion-ui bundle")
    return parser


def parse_cli(argv) -> RunConfig:
    """Parse CLI args into a RunConfig; exits with usage (code 2) on errors."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_usage()
        raise SystemExit(2)
    overrides = {}
    for key, value in vars(ns).items():
        if key.startswith("hmd__") and value is not None:
            overrides[key[len("hmd__"):]] = value
    cfg = RunConfig(
        command=ns.command,
        network=ns.network,
        pose=ns.pose,
        frames=ns.frames,
        report=ns.report,
        dump=ns.dump,
        serve=getattr(ns, "serve", RunConfig.serve),
        hmd_overrides=overrides,
        texture=ns.texture,
        clock=ns.clock,
        work_ms=ns.work_ms,
        pace_ms=ns.pace_ms,
        ui_dir=getattr(ns, "ui_dir", None),
        show_config=ns.show_config,
    )
    if cfg.frames is None:
        cfg.frames = {"run": 900, "render": 1}.get(cfg.command)
    if cfg.frames is not None and cfg.frames < 1:
        parser.error(f"--frames must be >= 1, got {cfg.frames}")
    try:
        cfg.pose_kind()
    except ValueError as exc:
        parser.error(str(exc))
    return cfg


def effective_hmd_config(cfg: RunConfig) -> HmdConfig:
    base = HmdConfig(clock=cfg.effective_clock())
    return base.with_overrides(cfg.hmd_overrides)


def describe_config(cfg: RunConfig) -> str:
    hmd = effective_hmd_config(cfg)
    doc = {
        "command": cfg.command,
        "network": cfg.network,
        "pose": cfg.pose,
        "frames": cfg.frames,
        "clock": cfg.effective_clock(),
        "workMs": cfg.work_ms,
        "texture": cfg.texture,
        "hmd": {_camel(f.name): getattr(hmd, f.name) for f in dc_fields(HmdConfig)},
    }
    return json.dumps(doc, indent=2, sort_keys=True)
