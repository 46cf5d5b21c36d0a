"""Deterministic software rendering of a scene per eye, the barrel-distortion
pass, side-by-side stereo composition, and the undistorted companion view.

Every operation here is a pure function of its inputs: no clocks, no
randomness, no thread-order dependence, so identical inputs yield
byte-identical framebuffers. Rasterization is perspective-correct with a
strict less-than depth test, top-left fill rule, back-face culling off, and a
single headlight at the eye for Lambert materials. Textured materials sample
a procedural 8x8 checker in UV space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import _raster
from .meshvol import TriangleMesh
from .xform import Mat4, RigidTransform, compose, inverse_rigid


class HeightMismatchError(ValueError):
    pass


@dataclass
class Framebuffer:
    """RGBA8 color plane plus a float depth plane in [0, 1] (1.0 = far)."""

    color: np.ndarray
    depth: np.ndarray

    def __post_init__(self):
        self.color = np.ascontiguousarray(self.color, dtype=np.uint8)
        self.depth = np.ascontiguousarray(self.depth, dtype=np.float64)
        if self.color.ndim != 3 or self.color.shape[2] != 4:
            raise ValueError("color plane must be (h, w, 4)")
        if self.depth.shape != self.color.shape[:2]:
            raise ValueError("depth plane must match color dimensions")

    @property
    def width(self) -> int:
        return self.color.shape[1]

    @property
    def height(self) -> int:
        return self.color.shape[0]

    @staticmethod
    def create(width: int, height: int, background=(0.0, 0.0, 0.0, 0.0)) -> "Framebuffer":
        color = np.empty((height, width, 4), dtype=np.uint8)
        color[:, :] = _rgba8(background)
        return Framebuffer(color, np.ones((height, width), dtype=np.float64))


@dataclass(frozen=True)
class Material:
    base_color: tuple = (0.8, 0.8, 0.8, 1.0)
    shading: str = "lambert"  # "flat" | "lambert"
    textured: bool = False

    def __post_init__(self):
        if self.shading not in ("flat", "lambert"):
            raise ValueError(f"unknown shading mode {self.shading!r}")
        if len(self.base_color) != 4:
            raise ValueError("base_color must be RGBA")


@dataclass
class SceneItem:
    mesh: TriangleMesh
    model_to_world: Mat4
    material: Material = field(default_factory=Material)


@dataclass
class Scene:
    items: list = field(default_factory=list)
    background: tuple = (0.0, 0.0, 0.0, 1.0)


@dataclass
class EyeRenderDesc:
    view: Mat4  # world -> eye (inverse of eye-to-world)
    proj: Mat4
    viewport: tuple  # (width, height)


def _rgba8(color4) -> np.ndarray:
    c = np.clip(np.asarray(color4, dtype=np.float64), 0.0, 1.0)
    return (c * 255.0 + 0.5).astype(np.uint8)


def _mat_np(m: Mat4) -> np.ndarray:
    return np.array(m.elements, dtype=np.float64).reshape(4, 4)


def render_scene_eye(scene: Scene, desc: EyeRenderDesc, near: float = 1e-3) -> Framebuffer:
    """Rasterize the scene into a fresh framebuffer of ``desc.viewport``.

    Triangles that touch or cross the near plane are discarded whole (no
    clipping); keep geometry in front of the camera.
    """
    width, height = desc.viewport
    fb = Framebuffer.create(width, height, scene.background)
    view = _mat_np(desc.view)
    proj = _mat_np(desc.proj)
    for item in scene.items:
        mesh = item.mesh
        if mesh.num_faces == 0:
            continue
        mv = view @ _mat_np(item.model_to_world)
        r3 = mv[:3, :3]
        # rigid-or-uniform-scale transforms: normals rotate with the scale removed
        scale = np.cbrt(abs(np.linalg.det(r3)))
        rot = r3 / scale if scale > 0 else r3

        vpos = mesh.vertices @ mv[:3, :3].T + mv[:3, 3]
        if mesh.normals is not None:
            vnrm = mesh.normals @ rot.T
        else:
            vnrm = np.zeros_like(vpos)
        clip = vpos @ proj[:3, :3].T + proj[:3, 3]
        wclip = vpos @ proj[3, :3] + proj[3, 3]

        f = mesh.faces
        keep = np.all(wclip[f] >= near, axis=1)
        if not np.any(keep):
            continue
        f = f[keep]

        inv_w = 1.0 / wclip
        ndc = clip * inv_w[:, None]
        sx = (ndc[:, 0] + 1.0) * 0.5 * width
        sy = (1.0 - ndc[:, 1]) * 0.5 * height
        depth01 = (ndc[:, 2] + 1.0) * 0.5

        sxy = np.stack([sx[f], sy[f]], axis=2)
        if mesh.uvs is not None:
            uv_over_w = mesh.uvs[f] * inv_w[f][:, :, None]
            textured = 1 if item.material.textured else 0
        else:
            uv_over_w = np.zeros((len(f), 3, 2))
            textured = 0
        _raster.fill_triangles(
            np.ascontiguousarray(sxy),
            np.ascontiguousarray(depth01[f]),
            np.ascontiguousarray(inv_w[f]),
            np.ascontiguousarray(vnrm[f] * inv_w[f][:, :, None]),
            np.ascontiguousarray(vpos[f] * inv_w[f][:, :, None]),
            np.ascontiguousarray(uv_over_w),
            np.asarray(item.material.base_color, dtype=np.float64),
            1 if item.material.shading == "lambert" else 0,
            textured,
            fb.color,
            fb.depth,
        )
    return fb


def apply_distortion(fb: Framebuffer, k1: float, k2: float, background=(0.0, 0.0, 0.0, 0.0)) -> Framebuffer:
    """Barrel-distort by inverse mapping; k1 = k2 = 0 is the exact identity."""
    out = Framebuffer.create(fb.width, fb.height, background)
    bg = _rgba8(background)
    _raster.resample_radial(fb.color, out.color, float(k1), float(k2), bg[0], bg[1], bg[2], bg[3])
    return out


def distortion_source_radius(r: float, k1: float, k2: float) -> float:
    """Radius mapping used by :func:`apply_distortion` (for tests/tools)."""
    return r * (1.0 + k1 * r * r + k2 * r ** 4)


def compose_side_by_side(left: Framebuffer, right: Framebuffer) -> Framebuffer:
    if left.height != right.height:
        raise HeightMismatchError(f"eye heights differ: {left.height} vs {right.height}")
    return Framebuffer(
        np.concatenate([left.color, right.color], axis=1),
        np.concatenate([left.depth, right.depth], axis=1),
    )


def render_companion(scene: Scene, head_pose: RigidTransform, desc: EyeRenderDesc) -> Framebuffer:
    """Single undistorted render from the head pose (centered between eyes)."""
    view = inverse_rigid(compose(head_pose))
    return render_scene_eye(scene, EyeRenderDesc(view, desc.proj, desc.viewport))


def write_png(fb: Framebuffer, path) -> None:
    Image.fromarray(fb.color, mode="RGBA").save(path, format="PNG")


def read_png(path) -> Framebuffer:
    img = Image.open(path).convert("RGBA")
    color = np.asarray(img, dtype=np.uint8)
    return Framebuffer(color, np.ones(color.shape[:2], dtype=np.float64))
