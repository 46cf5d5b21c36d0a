import hashlib
import math

import numpy as np
import pytest

from vrbridge.hmdsim import Eye, HmdConfig, eye_to_head, projection_matrix
from vrbridge.meshvol import TriangleMesh
from vrbridge.stereorender import (
    EyeRenderDesc,
    Framebuffer,
    HeightMismatchError,
    Material,
    Scene,
    SceneItem,
    apply_distortion,
    compose_side_by_side,
    distortion_source_radius,
    read_png,
    render_companion,
    render_scene_eye,
    write_png,
)
from vrbridge.xform import (
    AxisAngle,
    Mat4,
    QuatRotation,
    RigidTransform,
    Vec3,
    compose,
    inverse_rigid,
    mat_mul,
    quat_from_axis_angle,
)

SQUARE_CFG = HmdConfig(fov_deg=90.0, eye_width_px=120, eye_height_px=120)
PROJ_SQUARE = projection_matrix(SQUARE_CFG)


def quad_mesh(z=-1.0, half=1.0, split=(0, 1, 2, 0, 2, 3)):
    verts = np.array(
        [[-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]]
    )
    faces = np.array(split, dtype=np.int32).reshape(-1, 3)
    return TriangleMesh(verts, faces, normals=np.tile([0.0, 0.0, 1.0], (4, 1)))


def flat_item(mesh, color=(1.0, 1.0, 1.0, 1.0)):
    return SceneItem(mesh, Mat4.identity(), Material(base_color=color, shading="flat"))


def desc_for(w=120, h=120, view=Mat4.identity(), proj=PROJ_SQUARE):
    return EyeRenderDesc(view, proj, (w, h))


def coverage_mask(fb, background):
    bg = np.array(background, dtype=np.uint8)
    return np.any(fb.color != bg, axis=2)


def test_empty_scene_background_and_depth():
    scene = Scene(items=[], background=(0.2, 0.4, 0.6, 1.0))
    fb = render_scene_eye(scene, desc_for())
    assert np.all(fb.color == np.array([51, 102, 153, 255], dtype=np.uint8))
    assert np.all(fb.depth == 1.0)


def test_full_viewport_quad_full_coverage():
    scene = Scene(items=[flat_item(quad_mesh())], background=(0, 0, 0, 0))
    fb = render_scene_eye(scene, desc_for())
    white = np.all(fb.color == 255, axis=2)
    assert white.sum() == 120 * 120  # 100% pixel coverage


def test_fill_rule_partitions_shared_diagonal():
    # the two halves of the quad must cover every sample exactly once
    tri_a = quad_mesh(split=(0, 1, 2))
    tri_b = quad_mesh(split=(0, 2, 3))
    fb_a = render_scene_eye(Scene([flat_item(tri_a)], (0, 0, 0, 0)), desc_for())
    fb_b = render_scene_eye(Scene([flat_item(tri_b)], (0, 0, 0, 0)), desc_for())
    mask_a = coverage_mask(fb_a, (0, 0, 0, 0))
    mask_b = coverage_mask(fb_b, (0, 0, 0, 0))
    assert not np.any(mask_a & mask_b)  # no double coverage
    assert np.all(mask_a | mask_b)  # no gaps


def test_cube_silhouette_matches_analytic_projection():
    cfg = HmdConfig()
    proj = projection_matrix(cfg)
    w, h = 540, 600
    cube = unit_cube_mesh_m(center=(0.0, 0.0, -2.0))
    scene = Scene([flat_item(cube)], (0, 0, 0, 0))
    fb = render_scene_eye(scene, desc_for(w, h, proj=proj))
    covered = int(coverage_mask(fb, (0, 0, 0, 0)).sum())
    tan_h = math.tan(math.radians(cfg.fov_deg) / 2)
    tan_v = tan_h * (cfg.eye_height_px / cfg.eye_width_px)
    # silhouette = the near face (z = -1.5): ndc half-extent e maps to e*(w/2) px
    width_px = 2 * (0.5 / (1.5 * tan_h)) * (w / 2)
    height_px = 2 * (0.5 / (1.5 * tan_v)) * (h / 2)
    analytic = width_px * height_px
    assert abs(covered - analytic) / analytic < 0.01


def unit_cube_mesh_m(center=(0.0, 0.0, 0.0)):
    from tests.test_meshvol import unit_cube_mesh

    cube = unit_cube_mesh()
    verts = cube.vertices - 0.5 + np.asarray(center)
    return TriangleMesh(verts, cube.faces)


def test_depth_nearer_triangle_wins_either_order():
    near = quad_mesh(z=-1.0, half=0.5)
    far = quad_mesh(z=-2.0, half=2.0)
    red = (1.0, 0.0, 0.0, 1.0)
    blue = (0.0, 0.0, 1.0, 1.0)
    for items in ([flat_item(near, red), flat_item(far, blue)],
                  [flat_item(far, blue), flat_item(near, red)]):
        fb = render_scene_eye(Scene(items, (0, 0, 0, 0)), desc_for())
        center = fb.color[60, 60]
        assert tuple(center) == (255, 0, 0, 255)  # near quad in front
        corner = fb.color[2, 2]
        assert tuple(corner) == (0, 0, 255, 255)  # far quad fills the rest


def test_rendering_is_deterministic():
    cube = unit_cube_mesh_m(center=(0.1, -0.2, -2.0))
    scene = Scene([SceneItem(cube, Mat4.identity(), Material(shading="lambert"))], (0.1, 0.1, 0.1, 1))
    a = render_scene_eye(scene, desc_for())
    b = render_scene_eye(scene, desc_for())
    assert np.array_equal(a.color, b.color)
    assert np.array_equal(a.depth, b.depth)


def test_coverage_conserved_under_rigid_translation():
    # dyadic-rational coordinates keep all float sums exact, so moving the
    # camera and the scene by the same translation is bit-reproducible
    delta = Vec3(4.0, 8.0, -16.0)
    cam = Vec3(0.25, -0.5, 1.0)
    base = unit_cube_mesh_m(center=(0.5, 0.75, -2.0))

    def render(offset: Vec3, cam_t: Vec3):
        model = compose(RigidTransform(QuatRotation.identity(), offset))
        view = inverse_rigid(compose(RigidTransform(QuatRotation.identity(), cam_t)))
        item = SceneItem(base, model, Material(shading="lambert"))
        return render_scene_eye(Scene([item], (0, 0, 0, 1)), desc_for(view=view))

    fb0 = render(Vec3(0, 0, 0), cam)
    fb1 = render(delta, cam + delta)
    assert np.array_equal(fb0.color, fb1.color)
    assert np.array_equal(fb0.depth, fb1.depth)


def test_lambert_headlight_shading():
    # a clipping-plane-parallel quad straight ahead is lit at its center
    # and falls off toward grazing angles
    scene = Scene([SceneItem(quad_mesh(z=-1.0, half=4.0), Mat4.identity(), Material())], (0, 0, 0, 1))
    fb = render_scene_eye(scene, desc_for())
    center = fb.color[60, 60, 0]
    corner = fb.color[3, 3, 0]
    assert center > corner > 0
    assert center >= 200  # nearly face-on


def test_textured_checker_pattern():
    mesh = quad_mesh(z=-1.0, half=1.0)
    mesh = TriangleMesh(
        mesh.vertices, mesh.faces, mesh.normals,
        uvs=np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float),
    )
    item = SceneItem(
        mesh, Mat4.identity(), Material(base_color=(1, 1, 1, 1), shading="flat", textured=True)
    )
    fb = render_scene_eye(Scene([item], (0, 0, 0, 0)), desc_for())
    values = np.unique(fb.color[coverage_mask(fb, (0, 0, 0, 0))][:, 0])
    assert set(values) == {128, 255}  # checker halves the base color
    # 8x8 alternation across the quad
    row = fb.color[60, :, 0]
    transitions = np.count_nonzero(np.diff(row[row > 0].astype(int)))
    assert transitions == 7


# -- distortion ----------------------------------------------------------------


def checkerboard_fb(w=101, h=101):
    color = np.zeros((h, w, 4), dtype=np.uint8)
    yy, xx = np.mgrid[0:h, 0:w]
    mask = ((xx // 8) + (yy // 8)) % 2 == 0
    color[mask] = (255, 255, 255, 255)
    color[~mask] = (40, 40, 40, 255)
    return Framebuffer(color, np.ones((h, w)))


def test_distortion_identity_when_k_zero():
    fb = checkerboard_fb()
    out = apply_distortion(fb, 0.0, 0.0)
    assert np.array_equal(out.color, fb.color)


def test_distortion_center_pixel_unchanged():
    fb = checkerboard_fb(101, 101)  # odd size: a pixel sits exactly at center
    for k1, k2 in ((0.2, 0.0), (0.5, 0.3), (0.0, 0.7)):
        out = apply_distortion(fb, k1, k2)
        assert tuple(out.color[50, 50]) == tuple(fb.color[50, 50])


def test_distortion_radius_formula():
    assert distortion_source_radius(0.5, 0.2, 0.0) == pytest.approx(0.525)
    assert distortion_source_radius(0.0, 0.9, 0.9) == 0.0


def test_distortion_radius_monotone():
    rs = np.linspace(0, math.sqrt(2), 500)
    for k1, k2 in ((0.0, 0.0), (0.22, 0.24), (1.0, 0.0), (0.0, 1.0)):
        mapped = [distortion_source_radius(r, k1, k2) for r in rs]
        assert all(b > a for a, b in zip(mapped, mapped[1:]))


def test_distortion_pulls_in_edges():
    fb = checkerboard_fb(120, 120)
    out = apply_distortion(fb, 0.3, 0.1, background=(0, 0, 0, 0))
    # corners now sample outside the source and become background
    assert tuple(out.color[0, 0]) == (0, 0, 0, 0)
    assert tuple(out.color[-1, -1]) == (0, 0, 0, 0)


def test_distortion_samples_expected_source_pixel():
    w = h = 101
    fb = Framebuffer(np.zeros((h, w, 4), dtype=np.uint8), np.ones((h, w)))
    k1 = 0.2
    unit = min(w, h) / 2
    dst_x, dst_y = 75, 50  # a pixel on the +x axis around r ~ 0.5
    nx = (dst_x + 0.5 - w / 2) / unit
    src_nx = distortion_source_radius(nx, k1, 0.0)
    src_x = w / 2 + src_nx * unit - 0.5
    x0 = int(math.floor(src_x))
    fb.color[dst_y, x0] = (200, 0, 0, 255)
    fb.color[dst_y, x0 + 1] = (100, 0, 0, 255)
    out = apply_distortion(fb, k1, 0.0)
    t = src_x - x0
    expected = int(200 + (100 - 200) * t + 0.5)
    assert out.color[dst_y, dst_x, 0] == expected


# -- composition / companion / png ------------------------------------------------


def test_side_by_side_dimensions():
    left = Framebuffer.create(1080, 1200, (1, 0, 0, 1))
    right = Framebuffer.create(1080, 1200, (0, 1, 0, 1))
    combined = compose_side_by_side(left, right)
    assert (combined.width, combined.height) == (2160, 1200)
    assert tuple(combined.color[0, 0]) == tuple(left.color[0, 0])
    assert tuple(combined.color[0, 1080]) == tuple(right.color[0, 0])


def test_side_by_side_height_mismatch():
    with pytest.raises(HeightMismatchError):
        compose_side_by_side(Framebuffer.create(8, 8), Framebuffer.create(8, 9))


def test_companion_equals_eye_render_at_zero_baseline():
    cfg = HmdConfig(fov_deg=90.0, eye_width_px=96, eye_height_px=96, ipd_m=1e-12)
    head = RigidTransform(
        quat_from_axis_angle(AxisAngle(Vec3(0, 1, 0), 0.4)), Vec3(0.2, 1.5, 1.0)
    )
    cube = unit_cube_mesh_m(center=(0.2, 1.5, -1.0))
    scene = Scene([SceneItem(cube, Mat4.identity(), Material())], (0, 0, 0, 1))
    desc = EyeRenderDesc(Mat4.identity(), projection_matrix(cfg), (96, 96))

    companion = render_companion(scene, head, desc)
    eye_world = mat_mul(compose(head), compose(eye_to_head(cfg, Eye.LEFT)))
    # zero baseline: the eye view is numerically identical to the head view
    eye_view = inverse_rigid(compose(head))
    eye_fb = render_scene_eye(scene, EyeRenderDesc(eye_view, desc.proj, desc.viewport))
    assert np.array_equal(companion.color, eye_fb.color)


def test_png_round_trip(tmp_path):
    fb = checkerboard_fb(33, 17)
    path = tmp_path / "frame.png"
    write_png(fb, path)
    back = read_png(path)
    assert np.array_equal(back.color, fb.color)


def test_png_single_red_pixel(tmp_path):
    fb = Framebuffer(np.array([[[255, 0, 0, 255]]], dtype=np.uint8), np.ones((1, 1)))
    path = tmp_path / "px.png"
    write_png(fb, path)
    assert tuple(read_png(path).color[0, 0]) == (255, 0, 0, 255)


def test_png_bytes_stable_across_runs(tmp_path):
    fb = checkerboard_fb(64, 48)
    p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
    write_png(fb, p1)
    write_png(fb, p2)
    h1 = hashlib.sha256(p1.read_bytes()).hexdigest()
    h2 = hashlib.sha256(p2.read_bytes()).hexdigest()
    assert h1 == h2
