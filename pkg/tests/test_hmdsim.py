import math

import pytest

from vrbridge.hmdsim import (
    ConfigError,
    DeviceClass,
    DimMismatchError,
    DoubleSubmitError,
    Eye,
    EyesMissingError,
    HmdConfig,
    LiveSource,
    OutOfOrderError,
    PoseSample,
    ScriptedOrbit,
    SourceExhaustedError,
    StaticSource,
    TraceSource,
    WrongSourceKindError,
    end_frame,
    eye_to_head,
    init_device,
    inject_live_pose,
    load_trace_csv,
    predict_pose,
    projection_matrix,
    save_trace_csv,
    submit_eye,
    wait_get_poses,
)
from vrbridge.stereorender import Framebuffer
from vrbridge.xform import (
    AxisAngle,
    QuatRotation,
    RigidTransform,
    Vec3,
    axis_angle_from_quat,
    compose,
    inverse_rigid,
    mat_mul,
    quat_from_axis_angle,
    transform_point,
)

SMALL = HmdConfig(eye_width_px=8, eye_height_px=8)
T_MS = 1000.0 / 90.0


def make_device(config=SMALL, source=None):
    return init_device(config, source or StaticSource(RigidTransform.identity()))


def run_frames(dev, work_ms, frames):
    fb = Framebuffer.create(dev.config.eye_width_px, dev.config.eye_height_px)
    infos = []
    for _ in range(frames):
        wait_get_poses(dev)
        dev.simulate_work(work_ms)
        submit_eye(dev, Eye.LEFT, fb)
        submit_eye(dev, Eye.RIGHT, fb)
        infos.append(end_frame(dev))
    return infos


# -- init ---------------------------------------------------------------------


def test_init_defaults_and_period():
    dev = make_device(HmdConfig())
    assert dev.config.frame_period_s * 1000 == pytest.approx(T_MS)
    assert dev.config.eye_width_px == 1080 and dev.config.eye_height_px == 1200
    assert dev.frame_index == 0
    assert dev.clock.now() == 0.0


def test_init_rejects_bad_config():
    with pytest.raises(ConfigError):
        init_device(HmdConfig(refresh_hz=0), StaticSource(RigidTransform.identity()))
    with pytest.raises(ConfigError):
        init_device(HmdConfig(near_m=5, far_m=1), StaticSource(RigidTransform.identity()))


def test_default_roster():
    dev = make_device()
    classes = [e.device_class for e in dev.roster]
    assert classes.count(DeviceClass.HMD) == 1
    assert classes.count(DeviceClass.CONTROLLER) == 2
    assert classes.count(DeviceClass.BASE_STATION) == 2
    assert all(e.connected for e in dev.roster)


# -- wait_get_poses ------------------------------------------------------------


def test_first_wait_returns_at_running_start():
    dev = make_device()
    wait_get_poses(dev)
    assert dev.clock.now() * 1000 == pytest.approx(T_MS - 3.0, abs=1e-9)


def test_wait_return_times_on_vsync_grid():
    dev = make_device()
    fb = Framebuffer.create(8, 8)
    returns = []
    for _ in range(5):
        wait_get_poses(dev)
        returns.append(dev.clock.now())
        submit_eye(dev, Eye.LEFT, fb)
        submit_eye(dev, Eye.RIGHT, fb)
        end_frame(dev)
    T = dev.config.frame_period_s
    for k, t in enumerate(returns, start=1):
        assert t == pytest.approx(k * T - 0.003, abs=1e-12)


def test_static_pose_returned_exactly():
    pose = RigidTransform(
        quat_from_axis_angle(AxisAngle(Vec3(0, 1, 0), 0.3)), Vec3(1.0, 1.5, -2.0)
    )
    dev = make_device(source=StaticSource(pose))
    sample = wait_get_poses(dev)
    assert sample.device_to_world is pose
    assert sample.valid


def test_trace_prediction_horizon():
    # moving +x at 1 m/s; last sample at t=0, x=0
    samples = [
        PoseSample(-0.1, RigidTransform(QuatRotation.identity(), Vec3(-0.1, 0, 0))),
        PoseSample(0.0, RigidTransform(QuatRotation.identity(), Vec3(0.0, 0, 0))),
    ]
    dev = make_device(source=TraceSource(samples))
    sample = wait_get_poses(dev)
    # photon time = T + 3 ms = 14.111 ms past the last sample
    assert sample.t_s * 1000 == pytest.approx(T_MS + 3.0, abs=1e-9)
    assert sample.device_to_world.translation.x == pytest.approx(0.014111, abs=1e-6)


def test_trace_source_exhausts():
    samples = [PoseSample(0.0, RigidTransform.identity())]
    dev = make_device(source=TraceSource(samples, extrapolation_grace_s=0.001))
    with pytest.raises(SourceExhaustedError):
        wait_get_poses(dev)


def test_wait_before_end_frame_rejected():
    dev = make_device()
    wait_get_poses(dev)
    with pytest.raises(OutOfOrderError):
        wait_get_poses(dev)


# -- submit / end_frame ---------------------------------------------------------


def test_submit_dim_mismatch():
    dev = make_device()
    wait_get_poses(dev)
    with pytest.raises(DimMismatchError):
        submit_eye(dev, Eye.LEFT, Framebuffer.create(4, 4))


def test_double_submit():
    dev = make_device()
    wait_get_poses(dev)
    fb = Framebuffer.create(8, 8)
    submit_eye(dev, Eye.LEFT, fb)
    with pytest.raises(DoubleSubmitError):
        submit_eye(dev, Eye.LEFT, fb)


def test_submit_before_wait():
    dev = make_device()
    with pytest.raises(OutOfOrderError):
        submit_eye(dev, Eye.LEFT, Framebuffer.create(8, 8))


def test_end_frame_requires_both_eyes():
    dev = make_device()
    wait_get_poses(dev)
    submit_eye(dev, Eye.LEFT, Framebuffer.create(8, 8))
    with pytest.raises(EyesMissingError):
        end_frame(dev)


def test_scene_segment_measures_work():
    dev = make_device()
    fb = Framebuffer.create(8, 8)
    wait_get_poses(dev)
    dev.simulate_work(5.0)
    submit_eye(dev, Eye.LEFT, fb)
    dev.simulate_work(1.0)
    submit_eye(dev, Eye.RIGHT, fb)
    end_frame(dev)
    rec = dev.timing.records[0]
    assert rec.scene_ms == pytest.approx(6.0, abs=1e-9)


def test_light_frames_not_dropped():
    dev = make_device()
    infos = run_frames(dev, 5.0, 10)
    assert not any(i.dropped for i in infos)
    # steady state: presented every vsync
    deltas = {b.presented_vsync - a.presented_vsync for a, b in zip(infos, infos[1:])}
    assert deltas == {1}


def test_heavy_frames_all_dropped_present_every_second_vsync():
    dev = make_device()
    infos = run_frames(dev, 15.0, 10)
    assert all(i.dropped for i in infos)
    deltas = {b.presented_vsync - a.presented_vsync for a, b in zip(infos, infos[1:])}
    assert deltas == {2}  # effective 45 fps


def fps_from_infos(infos, refresh):
    span = infos[-1].presented_vsync - infos[0].presented_vsync
    return refresh * (len(infos) - 1) / span


@pytest.mark.parametrize("work_ms", [2, 5, 11, 12, 15, 23, 34])
def test_schedule_law(work_ms):
    dev = make_device()
    infos = run_frames(dev, float(work_ms), 200)
    expected = 90.0 / math.ceil(work_ms / T_MS)
    assert fps_from_infos(infos, 90.0) == expected


def test_segment_conservation():
    dev = make_device()
    run_frames(dev, 7.0, 50)
    prev = 0
    for rec in dev.timing.records:
        interval_ms = (rec.presented_vsync - prev) * T_MS
        total = rec.scene_ms + rec.other_ms + rec.compositor_ms + rec.idle_ms
        assert abs(total - interval_ms) < 1e-6
        prev = rec.presented_vsync


# -- optics --------------------------------------------------------------------


def test_projection_square_90deg():
    cfg = HmdConfig(fov_deg=90.0, eye_width_px=100, eye_height_px=100)
    m = projection_matrix(cfg, Eye.LEFT)
    assert m.at(0, 0) == pytest.approx(1.0, abs=1e-12)
    assert m.at(1, 1) == pytest.approx(1.0, abs=1e-12)


def test_projection_default_constants():
    m = projection_matrix(HmdConfig(), Eye.LEFT)
    # independently recomputed with numpy trig in this test
    import numpy as np

    tan_h = np.tan(np.deg2rad(110.0) / 2)
    tan_v = tan_h * (1200 / 1080)
    assert m.at(0, 0) == pytest.approx(1 / tan_h, abs=1e-12)
    assert m.at(1, 1) == pytest.approx(1 / tan_v, abs=1e-12)
    assert m.at(0, 0) == pytest.approx(0.70021, abs=1e-4)
    assert m.at(1, 1) == pytest.approx(0.63019, abs=1e-4)
    assert m.at(2, 2) == pytest.approx(-1.002002, abs=1e-4)
    assert m.at(2, 3) == pytest.approx(-0.2002, abs=1e-4)
    assert m.at(3, 2) == -1.0


def test_projection_frustum_edge_property():
    import numpy as np

    rng = np.random.default_rng(17)
    for _ in range(100):
        cfg = HmdConfig(
            fov_deg=float(rng.uniform(40, 150)),
            eye_width_px=int(rng.integers(64, 2000)),
            eye_height_px=int(rng.integers(64, 2000)),
            near_m=float(rng.uniform(0.01, 1.0)),
            far_m=float(rng.uniform(10.0, 500.0)),
        )
        m = projection_matrix(cfg)
        tan_h = math.tan(math.radians(cfg.fov_deg) / 2)
        z = -rng.uniform(cfg.near_m * 2, cfg.far_m / 2)
        x = tan_h * (-z)
        clip_x = m.at(0, 0) * x + m.at(0, 2) * z
        clip_w = m.at(3, 2) * z
        assert clip_x / clip_w == pytest.approx(1.0, abs=1e-9)


def test_eye_to_head_baseline():
    cfg = HmdConfig()
    left = eye_to_head(cfg, Eye.LEFT)
    right = eye_to_head(cfg, Eye.RIGHT)
    assert left.translation.x == pytest.approx(-0.032)
    assert right.translation.x == pytest.approx(0.032)
    assert (left.translation + right.translation).norm() == 0.0


def test_eye_views_differ_only_by_baseline():
    cfg = HmdConfig()
    head = RigidTransform.identity()
    views = {}
    for eye in Eye:
        eye_world = mat_mul(compose(head), compose(eye_to_head(cfg, eye)))
        views[eye] = inverse_rigid(eye_world)
    p = Vec3(0.5, 0.2, -2.0)
    pl = transform_point(views[Eye.LEFT], p)
    pr = transform_point(views[Eye.RIGHT], p)
    assert pl.x - pr.x == pytest.approx(cfg.ipd_m, abs=1e-12)
    assert pl.y == pytest.approx(pr.y) and pl.z == pytest.approx(pr.z)


# -- prediction ------------------------------------------------------------------


def test_predict_single_sample_held():
    pose = RigidTransform(QuatRotation.identity(), Vec3(1, 2, 3))
    out = predict_pose([PoseSample(0.0, pose)], 5.0)
    assert out is pose


def test_predict_linear_motion_exact():
    a = PoseSample(0.0, RigidTransform(QuatRotation.identity(), Vec3(0, 0, 0)))
    b = PoseSample(0.5, RigidTransform(QuatRotation.identity(), Vec3(1.0, -0.5, 2.0)))
    out = predict_pose([a, b], 1.25)
    assert out.translation.as_tuple() == pytest.approx((2.5, -1.25, 5.0), abs=1e-12)


def test_predict_rotation_rate():
    q0 = QuatRotation.identity()
    q1 = quat_from_axis_angle(AxisAngle(Vec3(0, 0, 1), math.radians(10)))
    a = PoseSample(0.0, RigidTransform(q0, Vec3(0, 0, 0)))
    b = PoseSample(1.0, RigidTransform(q1, Vec3(0, 0, 0)))
    out = predict_pose([a, b], 2.0)
    aa = axis_angle_from_quat(out.rotation)
    assert aa.angle == pytest.approx(math.radians(20), abs=1e-6)
    assert abs(aa.axis.z) == pytest.approx(1.0, abs=1e-9)


# -- live source -------------------------------------------------------------------


def test_inject_then_wait():
    dev = make_device(source=LiveSource())
    pose = RigidTransform(QuatRotation.identity(), Vec3(0, 1.7, 0))
    inject_live_pose(dev, PoseSample(0.0, pose))
    sample = wait_get_poses(dev)
    assert sample.valid
    assert sample.device_to_world.translation.y == pytest.approx(1.7)


def test_second_injection_wins():
    dev = make_device(source=LiveSource())
    inject_live_pose(dev, PoseSample(0.0, RigidTransform(QuatRotation.identity(), Vec3(1, 0, 0))))
    inject_live_pose(dev, PoseSample(0.001, RigidTransform(QuatRotation.identity(), Vec3(9, 0, 0))))
    sample = wait_get_poses(dev)
    assert sample.device_to_world.translation.x == pytest.approx(9.0)


def test_live_source_empty_mailbox_invalid():
    dev = make_device(source=LiveSource())
    sample = wait_get_poses(dev)
    assert not sample.valid


def test_inject_on_scripted_source_rejected():
    dev = make_device(source=ScriptedOrbit(Vec3(0, 0, 0), 1.0, 0.5))
    with pytest.raises(WrongSourceKindError):
        inject_live_pose(dev, PoseSample(0.0, RigidTransform.identity()))


def test_orbit_looks_at_center():
    orbit = ScriptedOrbit(Vec3(1, 0, -2), radius_m=3.0, angular_speed_rad_s=0.7)
    for t in (0.0, 0.9, 2.4):
        pose = orbit.pose_at(t)
        # center in device space must sit straight ahead on -Z
        view = inverse_rigid(compose(pose))
        c = transform_point(view, Vec3(1, 0, -2))
        assert c.x == pytest.approx(0.0, abs=1e-9)
        assert c.y == pytest.approx(0.0, abs=1e-9)
        assert c.z == pytest.approx(-3.0, abs=1e-9)


# -- trace csv ----------------------------------------------------------------------


def test_trace_csv_round_trip(tmp_path):
    samples = [
        PoseSample(0.0, RigidTransform(QuatRotation.identity(), Vec3(0, 0, 0))),
        PoseSample(0.1, RigidTransform(quat_from_axis_angle(AxisAngle(Vec3(0, 1, 0), 0.5)), Vec3(1, 2, 3))),
    ]
    path = tmp_path / "trace.csv"
    save_trace_csv(samples, path)
    src = load_trace_csv(path)
    assert len(src.samples) == 2
    assert src.samples[1].device_to_world.translation.x == pytest.approx(1.0)
    assert path.read_text().splitlines()[0] == "t,px,py,pz,qx,qy,qz,qw"


def test_trace_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,x\n")
    with pytest.raises(ConfigError):
        load_trace_csv(p)
