"""Simulated OpenVR-style headset runtime: device constants, a vsync clock,
blocking pose acquisition with running start, per-eye submission, the present
schedule with dropped-frame accounting, and pose sources with prediction.

Schedule model (frame period T = 1/refresh): ``wait_get_poses`` unblocks at
the running-start instant ``k*T - runningStart`` of the next free vsync slot
and returns the pose predicted for photon time ``k*T + vsyncToPhotons``. The
frame then has until vsync ``(k+1)*T`` to submit both eyes; submitting later
marks it dropped. It is presented at the first vsync at or after the second
eye submit (never earlier than a previously presented frame). On the virtual
clock, time advances only inside blocking calls and explicit
``simulate_work`` — runs are fully deterministic.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field, fields, replace
from enum import Enum

from . import frametime
from .stereorender import Framebuffer
from .xform import (
    AxisAngle,
    Mat4,
    QuatRotation,
    RigidTransform,
    Vec3,
    axis_angle_from_quat,
    quat_from_axis_angle,
)

_EPS_S = 1e-12


class ConfigError(ValueError):
    pass


class SourceExhaustedError(RuntimeError):
    pass


class DimMismatchError(ValueError):
    pass


class DoubleSubmitError(RuntimeError):
    pass


class OutOfOrderError(RuntimeError):
    pass


class EyesMissingError(RuntimeError):
    pass


class WrongSourceKindError(TypeError):
    pass


class Eye(Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class HmdConfig:
    """Device constants; defaults match the simulated headset's panel and
    timing behavior (per-eye 1080x1200 at 90 Hz, ~110 degree FOV)."""

    eye_width_px: int = 1080
    eye_height_px: int = 1200
    refresh_hz: float = 90.0
    fov_deg: float = 110.0
    ipd_m: float = 0.064
    near_m: float = 0.1
    far_m: float = 100.0
    distortion_k1: float = 0.22
    distortion_k2: float = 0.24
    running_start_ms: float = 3.0
    vsync_to_photons_ms: float = 3.0
    compositor_ms: float = 1.0
    clock: str = "virtual"

    def validate(self) -> None:
        positive = (
            "eye_width_px", "eye_height_px", "refresh_hz", "fov_deg",
            "ipd_m", "near_m", "far_m",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        nonneg = ("distortion_k1", "distortion_k2", "running_start_ms", "vsync_to_photons_ms", "compositor_ms")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.near_m < self.far_m:
            raise ConfigError(f"near ({self.near_m}) must be < far ({self.far_m})")
        if self.fov_deg >= 180.0:
            raise ConfigError(f"fov_deg must be < 180, got {self.fov_deg}")
        if self.clock not in ("virtual", "real"):
            raise ConfigError(f"clock must be 'virtual' or 'real', got {self.clock!r}")

    @property
    def frame_period_s(self) -> float:
        return 1.0 / self.refresh_hz

    def with_overrides(self, overrides: dict) -> "HmdConfig":
        return replace(self, **overrides)


HMD_CONFIG_FIELDS = tuple(f.name for f in fields(HmdConfig))


@dataclass(frozen=True)
class PoseSample:
    t_s: float
    device_to_world: RigidTransform
    valid: bool = True


class VirtualClock:
    """Deterministic clock: time moves only when explicitly advanced."""

    def __init__(self):
        self._now = 0.0

    def now(self) -> float:
        return self._now

    def advance(self, dt_s: float) -> None:
        if dt_s < 0:
            raise ValueError("cannot advance a clock backwards")
        self._now += dt_s

    def sleep_until(self, t_s: float) -> None:
        if t_s > self._now:
            self._now = t_s


class RealClock:
    def __init__(self):
        self._anchor = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._anchor

    def advance(self, dt_s: float) -> None:
        if dt_s > 0:
            time.sleep(dt_s)

    def sleep_until(self, t_s: float) -> None:
        delta = t_s - self.now()
        if delta > 0:
            time.sleep(delta)


# -- pose sources -------------------------------------------------------------


def predict_pose(history, t_photon: float) -> RigidTransform:
    """Constant-velocity extrapolation from the last two samples.

    Translation is extrapolated linearly; rotation by scaling the shortest-arc
    delta between the last two orientations. A single sample is held.
    """
    history = list(history)
    if not history:
        raise ValueError("pose prediction needs at least one sample")
    if len(history) == 1:
        return history[-1].device_to_world
    a, b = history[-2], history[-1]
    dt = b.t_s - a.t_s
    if dt <= 0:
        return b.device_to_world
    f = (t_photon - b.t_s) / dt
    ta, tb = a.device_to_world.translation, b.device_to_world.translation
    trans = Vec3(
        tb.x + f * (tb.x - ta.x),
        tb.y + f * (tb.y - ta.y),
        tb.z + f * (tb.z - ta.z),
    )
    delta = b.device_to_world.rotation.multiply(a.device_to_world.rotation.conjugate())
    aa = axis_angle_from_quat(delta)
    scaled = quat_from_axis_angle(AxisAngle(aa.axis, aa.angle * f))
    return RigidTransform(scaled.multiply(b.device_to_world.rotation), trans)


class PoseSource:
    """Produces the pose predicted for a photon time; stateful per frame."""

    def predict(self, now_s: float, t_photon_s: float) -> PoseSample:
        raise NotImplementedError


class StaticSource(PoseSource):
    def __init__(self, pose: RigidTransform):
        self.pose = pose

    def predict(self, now_s, t_photon_s) -> PoseSample:
        return PoseSample(t_photon_s, self.pose)


class ScriptedOrbit(PoseSource):
    """Analytic orbit around a center point, looking at it; exact at any time."""

    def __init__(self, center: Vec3, radius_m: float, angular_speed_rad_s: float, height_m: float = 0.0):
        if radius_m <= 0:
            raise ConfigError(f"orbit radius must be positive, got {radius_m}")
        self.center = center
        self.radius_m = radius_m
        self.angular_speed = angular_speed_rad_s
        self.height_m = height_m

    def pose_at(self, t_s: float) -> RigidTransform:
        theta = self.angular_speed * t_s
        pos = Vec3(
            self.center.x + self.radius_m * math.sin(theta),
            self.center.y + self.height_m,
            self.center.z + self.radius_m * math.cos(theta),
        )
        # look at the center: -Z forward, Y up; heading equals orbit angle
        yaw = math.atan2(pos.x - self.center.x, pos.z - self.center.z)
        pitch = -math.atan2(self.height_m, self.radius_m)
        q_yaw = quat_from_axis_angle(AxisAngle(Vec3(0, 1, 0), yaw))
        q_pitch = quat_from_axis_angle(AxisAngle(Vec3(1, 0, 0), pitch))
        return RigidTransform(q_yaw.multiply(q_pitch), pos)

    def predict(self, now_s, t_photon_s) -> PoseSample:
        return PoseSample(t_photon_s, self.pose_at(t_photon_s))


class TraceSource(PoseSource):
    """Replays a recorded pose trace; extrapolates a short grace past its end."""

    def __init__(self, samples, extrapolation_grace_s: float = 0.05):
        samples = list(samples)
        if not samples:
            raise ConfigError("pose trace is empty")
        for prev, cur in zip(samples, samples[1:]):
            if cur.t_s <= prev.t_s:
                raise ConfigError(f"trace times must strictly increase ({prev.t_s} -> {cur.t_s})")
        self.samples = samples
        self.grace_s = extrapolation_grace_s

    def predict(self, now_s, t_photon_s) -> PoseSample:
        if t_photon_s > self.samples[-1].t_s + self.grace_s:
            raise SourceExhaustedError(
                f"trace ended at t={self.samples[-1].t_s:.6f}s "
                f"(photon time {t_photon_s:.6f}s exceeds the {self.grace_s * 1000:.0f} ms grace)"
            )
        history = [s for s in self.samples if s.t_s <= now_s] or self.samples[:1]
        return PoseSample(t_photon_s, predict_pose(history[-2:], t_photon_s))


class LiveSource(PoseSource):
    """Mailbox fed by an external writer; last writer within a frame wins."""

    def __init__(self):
        self._lock = threading.Lock()
        self._mailbox: PoseSample | None = None
        self._history: list = []

    def push(self, sample: PoseSample) -> None:
        with self._lock:
            self._mailbox = sample

    def predict(self, now_s, t_photon_s) -> PoseSample:
        with self._lock:
            incoming, self._mailbox = self._mailbox, None
        if incoming is not None:
            if self._history and incoming.t_s <= self._history[-1].t_s:
                self._history[-1] = incoming
            else:
                self._history.append(incoming)
            self._history = self._history[-2:]
        if not self._history:
            return PoseSample(t_photon_s, RigidTransform.identity(), valid=False)
        return PoseSample(t_photon_s, predict_pose(self._history, t_photon_s))


# -- device -------------------------------------------------------------------


class DeviceClass(Enum):
    HMD = "Hmd"
    CONTROLLER = "Controller"
    BASE_STATION = "BaseStation"


@dataclass(frozen=True)
class RosterEntry:
    device_class: DeviceClass
    device_id: str
    connected: bool = True


def default_roster() -> tuple:
    return (
        RosterEntry(DeviceClass.HMD, "hmd0"),
        RosterEntry(DeviceClass.CONTROLLER, "controller0"),
        RosterEntry(DeviceClass.CONTROLLER, "controller1"),
        RosterEntry(DeviceClass.BASE_STATION, "base0"),
        RosterEntry(DeviceClass.BASE_STATION, "base1"),
    )


@dataclass(frozen=True)
class PresentInfo:
    frame_index: int
    dropped: bool
    presented_vsync: int


@dataclass
class DeviceState:
    config: HmdConfig
    source: PoseSource
    clock: object
    timing: frametime.TimingSink
    roster: tuple = field(default_factory=default_roster)
    frame_index: int = 0
    last_pose: PoseSample | None = None
    _frame_open: bool = False
    _wake_vsync: int = 0
    _poses_return_t: float = 0.0
    _submit_times: dict = field(default_factory=dict)
    _eye_buffers: dict = field(default_factory=dict)
    _last_present_vsync: int = 0

    def simulate_work(self, ms: float) -> None:
        """Advance the clock as if the app spent ``ms`` of CPU time."""
        self.clock.advance(ms / 1000.0)


def init_device(config: HmdConfig, source: PoseSource) -> DeviceState:
    """Validate the config and stand up a device at t=0 with a full roster."""
    config.validate()
    clock = VirtualClock() if config.clock == "virtual" else RealClock()
    sink = frametime.TimingSink(refresh_hz=config.refresh_hz, compositor_ms=config.compositor_ms)
    return DeviceState(config=config, source=source, clock=clock, timing=sink)


def wait_get_poses(dev: DeviceState) -> PoseSample:
    """Block until the next running-start instant and return the predicted pose.

    Returns at ``k*T - runningStart`` for the earliest vsync slot ``k`` that
    is both in the future and after the previous frame's slot; the pose is
    predicted for photon time ``k*T + vsyncToPhotons``.
    """
    if dev._frame_open:
        raise OutOfOrderError("previous frame not finished: submit both eyes and call end_frame first")
    T = dev.config.frame_period_s
    rs = dev.config.running_start_ms / 1000.0
    now = dev.clock.now()
    k = max(dev._wake_vsync + 1, math.ceil((now + rs) / T - _EPS_S))
    wake = k * T - rs
    dev.clock.sleep_until(wake)
    t_photon = k * T + dev.config.vsync_to_photons_ms / 1000.0
    sample = dev.source.predict(dev.clock.now(), t_photon)
    dev._frame_open = True
    dev._wake_vsync = k
    dev._poses_return_t = dev.clock.now()
    dev._submit_times = {}
    dev._eye_buffers = {}
    dev.last_pose = sample
    return sample


def submit_eye(dev: DeviceState, eye: Eye, fb: Framebuffer) -> None:
    if not dev._frame_open:
        raise OutOfOrderError("submit_eye before wait_get_poses")
    eye = Eye(eye)
    if (fb.width, fb.height) != (dev.config.eye_width_px, dev.config.eye_height_px):
        raise DimMismatchError(
            f"framebuffer {fb.width}x{fb.height} does not match eye "
            f"{dev.config.eye_width_px}x{dev.config.eye_height_px}"
        )
    if eye in dev._submit_times:
        raise DoubleSubmitError(f"{eye.value} eye already submitted this frame")
    dev._submit_times[eye] = dev.clock.now()
    dev._eye_buffers[eye] = fb


def end_frame(dev: DeviceState) -> PresentInfo:
    """Close the frame: decide dropped/present vsync and record segment timing."""
    if not dev._frame_open:
        raise OutOfOrderError("end_frame before wait_get_poses")
    if len(dev._submit_times) < 2:
        missing = [e.value for e in Eye if e not in dev._submit_times]
        raise EyesMissingError(f"end_frame before both eyes submitted (missing: {', '.join(missing)})")
    T = dev.config.frame_period_s
    submit_t = max(dev._submit_times.values())
    end_t = dev.clock.now()
    deadline_t = (dev._wake_vsync + 1) * T
    dropped = submit_t > deadline_t + _EPS_S
    presented = max(math.ceil(submit_t / T - _EPS_S), 1, dev._last_present_vsync + 1)
    frametime.record_frame(
        dev.timing,
        frametime.FrameEvents(
            frame_index=dev.frame_index,
            poses_return_t=dev._poses_return_t,
            second_submit_t=submit_t,
            frame_end_t=end_t,
            dropped=dropped,
            presented_vsync=presented,
        ),
    )
    info = PresentInfo(dev.frame_index, dropped, presented)
    dev._last_present_vsync = presented
    dev.frame_index += 1
    dev._frame_open = False
    return info


def inject_live_pose(dev: DeviceState, sample: PoseSample) -> None:
    """Feed an externally tracked pose; requires a Live source."""
    if not isinstance(dev.source, LiveSource):
        raise WrongSourceKindError(
            f"inject_live_pose needs a Live pose source, device has {type(dev.source).__name__}"
        )
    dev.source.push(sample)


# -- optics -------------------------------------------------------------------


def projection_matrix(config: HmdConfig, eye: Eye = Eye.LEFT) -> Mat4:
    """Symmetric perspective frustum from the device FOV and panel aspect.

    The horizontal FOV is per-eye; the vertical half-extent scales by the
    panel aspect (eyeHeight/eyeWidth). Both eyes share the same frustum.
    """
    config.validate()
    tan_half_h = math.tan(math.radians(config.fov_deg) / 2.0)
    tan_half_v = tan_half_h * (config.eye_height_px / config.eye_width_px)
    n, f = config.near_m, config.far_m
    return Mat4(
        (
            1.0 / tan_half_h, 0.0, 0.0, 0.0,
            0.0, 1.0 / tan_half_v, 0.0, 0.0,
            0.0, 0.0, -(f + n) / (f - n), -2.0 * f * n / (f - n),
            0.0, 0.0, -1.0, 0.0,
        )
    )


def eye_to_head(config: HmdConfig, eye: Eye) -> RigidTransform:
    """Stereo baseline: each eye sits half the IPD from the head center."""
    eye = Eye(eye)
    dx = -config.ipd_m / 2.0 if eye is Eye.LEFT else config.ipd_m / 2.0
    return RigidTransform(QuatRotation.identity(), Vec3(dx, 0.0, 0.0))


# -- trace files ----------------------------------------------------------------

TRACE_HEADER = "t,px,py,pz,qx,qy,qz,qw"


def load_trace_csv(path) -> TraceSource:
    """Pose trace CSV: header ``t,px,py,pz,qx,qy,qz,qw``; seconds, meters,
    unit quaternions; strictly increasing t."""
    samples = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise ConfigError(f"trace header must be {TRACE_HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise ConfigError(f"trace line {lineno}: expected 8 fields, got {len(parts)}")
            try:
                t, px, py, pz, qx, qy, qz, qw = (float(p) for p in parts)
            except ValueError as exc:
                raise ConfigError(f"trace line {lineno}: {exc}") from None
            samples.append(
                PoseSample(t, RigidTransform(QuatRotation(qx, qy, qz, qw), Vec3(px, py, pz)))
            )
    return TraceSource(samples)


def save_trace_csv(samples, path) -> None:
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for s in samples:
            r, t = s.device_to_world.rotation, s.device_to_world.translation
            fh.write(f"{s.t_s:.9g},{t.x:.9g},{t.y:.9g},{t.z:.9g},{r.x:.9g},{r.y:.9g},{r.z:.9g},{r.w:.9g}\n")
