"""The frame loop: pose in, params through the network, two eyes out.

One session owns the device and the network; every frame it pulls a predicted
pose, publishes it on the bridge node's params (HMDPoseMatrix and
HMDQuaternionRot/Vec, so networks consume it through param links), evaluates
the scene, renders and distorts both eyes, renders the companion view, and
closes the frame for timing. Inbound control (param edits, live poses) is
applied only at frame boundaries.
"""

from __future__ import annotations

import importlib.resources
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import frametime, hmdsim, netgraph, stereorender
from ..meshvol import bounding_box
from ..xform import (
    Mat4,
    RigidTransform,
    Vec3,
    axis_angle_from_quat,
    compose,
    decompose,
    inverse_rigid,
    mat_mul,
)
from .config import RunConfig, effective_hmd_config


class SessionError(RuntimeError):
    """Startup failure (missing file, bad network, bad pose source)."""


@dataclass
class FrameOutput:
    frame_index: int
    pose: hmdsim.PoseSample
    left: stereorender.Framebuffer
    right: stereorender.Framebuffer
    side_by_side: stereorender.Framebuffer
    companion: stereorender.Framebuffer
    present: hmdsim.PresentInfo
    record: frametime.FrameTimingRecord


def bundled_network_path() -> Path:
    return Path(importlib.resources.files("vrbridge") / "data" / "fig6.json")


def _scene_bounds_m(scene: stereorender.Scene):
    los, his = [], []
    for item in scene.items:
        lo, hi = bounding_box(item.mesh)
        corners = np.array(
            [
                [x, y, z]
                for x in (lo.x, hi.x)
                for y in (lo.y, hi.y)
                for z in (lo.z, hi.z)
            ]
        )
        m = np.array(item.model_to_world.elements).reshape(4, 4)
        world = corners @ m[:3, :3].T + m[:3, 3]
        los.append(world.min(axis=0))
        his.append(world.max(axis=0))
    if not los:
        return np.zeros(3), 1.0
    lo = np.min(los, axis=0)
    hi = np.max(his, axis=0)
    center = (lo + hi) / 2
    radius = float(np.linalg.norm(hi - lo) / 2)
    return center, max(radius, 1e-3)


class BridgeSession:
    """Owns device + network; single-threaded frame stepping."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.hmd = effective_hmd_config(cfg)
        try:
            self.hmd.validate()
        except hmdsim.ConfigError as exc:
            raise SessionError(f"invalid HMD config: {exc}") from exc

        net_path = Path(cfg.network) if cfg.network else bundled_network_path()
        if not net_path.exists():
            raise SessionError(f"network file not found: {net_path}")
        try:
            self.network = netgraph.load_network(net_path.read_text())
        except netgraph.SchemaError as exc:
            raise SessionError(f"network {net_path}: {exc}") from exc
        self.network.base_dir = net_path.parent

        bridges = [n for n in self.network.nodes.values() if n.type.name == "HmdBridge"]
        if len(bridges) != 1:
            raise SessionError(
                f"network must contain exactly one HmdBridge node, found {len(bridges)}"
            )
        self.bridge = bridges[0]
        self._companion_linked = any(
            (t_id, t_p) == (self.bridge.id, "CompanionPoseMatrix")
            for _, _, t_id, t_p in self.network._param_links
        )

        if cfg.texture is not None:
            for node in self.network.nodes.values():
                if node.type.name == "SceneAssembler":
                    self.network.set_param(node.id, "textured", cfg.texture)

        # fail fast: evaluate once with the default pose before any frame runs
        try:
            scene = self.network.evaluate(f"{self.bridge.id}.scene")
        except netgraph.NetworkError as exc:
            raise SessionError(f"network does not evaluate: {exc}") from exc

        center, radius = _scene_bounds_m(scene)
        try:
            self.source = self._make_source(center, radius)
        except (OSError, hmdsim.ConfigError) as exc:
            raise SessionError(f"pose source {cfg.pose!r}: {exc}") from exc
        self.device = hmdsim.init_device(self.hmd, self.source)

        self.proj = hmdsim.projection_matrix(self.hmd)
        self.eye_to_head = {eye: hmdsim.eye_to_head(self.hmd, eye) for eye in hmdsim.Eye}
        self._viewport = (self.hmd.eye_width_px, self.hmd.eye_height_px)
        self._background = scene.background

    def _make_source(self, center, radius) -> hmdsim.PoseSource:
        kind = self.cfg.pose_kind()
        if kind == "orbit":
            return hmdsim.ScriptedOrbit(
                Vec3(*center),
                radius_m=2.2 * radius,
                angular_speed_rad_s=0.5,
                height_m=0.3 * radius,
            )
        if kind == "trace":
            return hmdsim.load_trace_csv(self.cfg.trace_path())
        return hmdsim.LiveSource()

    # -- per-frame ------------------------------------------------------------

    def apply_param(self, node_id: str, name: str, value) -> None:
        """Apply a control message value (JSON-typed) to a network param."""
        node = self.network.node(node_id)
        spec = node.param_spec(name)
        value = netgraph._param_from_json(spec, value, f"{node_id}.{name}")
        self.network.set_param(node_id, name, value)

    def run_frame(self) -> FrameOutput:
        dev = self.device
        sample = hmdsim.wait_get_poses(dev)
        pose = sample.device_to_world

        self.network.set_param(self.bridge.id, "HMDPoseMatrix", compose(pose))
        self.network.set_param(
            self.bridge.id, "HMDQuaternionRot/Vec", axis_angle_from_quat(pose.rotation)
        )
        scene = self.network.evaluate(f"{self.bridge.id}.scene")
        self._background = scene.background

        if self.cfg.work_ms > 0:
            dev.simulate_work(self.cfg.work_ms)

        k1, k2 = self.hmd.distortion_k1, self.hmd.distortion_k2
        eyes = {}
        for eye in hmdsim.Eye:
            eye_world = mat_mul(compose(pose), compose(self.eye_to_head[eye]))
            desc = stereorender.EyeRenderDesc(inverse_rigid(eye_world), self.proj, self._viewport)
            fb = stereorender.render_scene_eye(scene, desc)
            if k1 != 0.0 or k2 != 0.0:
                fb = stereorender.apply_distortion(fb, k1, k2, scene.background)
            hmdsim.submit_eye(dev, eye, fb)
            eyes[eye] = fb

        # companion view is application-other work (after the second submit)
        companion_pose = pose
        if self._companion_linked:
            companion_pose = decompose(
                self.network.get_param(self.bridge.id, "CompanionPoseMatrix")
            )
        desc = stereorender.EyeRenderDesc(Mat4.identity(), self.proj, self._viewport)
        companion = stereorender.render_companion(scene, companion_pose, desc)

        present = hmdsim.end_frame(dev)
        record = dev.timing.records[-1]
        side = stereorender.compose_side_by_side(eyes[hmdsim.Eye.LEFT], eyes[hmdsim.Eye.RIGHT])
        if self.cfg.pace_ms > 0:
            time.sleep(self.cfg.pace_ms / 1000.0)
        return FrameOutput(
            frame_index=present.frame_index,
            pose=sample,
            left=eyes[hmdsim.Eye.LEFT],
            right=eyes[hmdsim.Eye.RIGHT],
            side_by_side=side,
            companion=companion,
            present=present,
            record=record,
        )

    def report(self) -> frametime.TimingReport:
        return frametime.aggregate(self.device.timing.records, self.hmd.refresh_hz)
