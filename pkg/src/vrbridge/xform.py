"""Rigid-transform math for the pose pipeline.

Conventions (shared by every module in this package):

* distances in meters in world/tracking space, millimeters in mesh model space;
* right-handed coordinates, Y up, -Z forward;
* ``Mat4`` is row-major and acts on column vectors, so ``transform_point(m, p)``
  computes ``m @ [p, 1]``;
* quaternions are (x, y, z, w) with w the scalar part, normalized on
  construction;
* the canonical null rotation in axis-angle form is axis (0, 0, 1), angle 0.

All values are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

RIGID_TOL = 1e-9


class NotRigidError(ValueError):
    """Matrix fails the orthonormality/determinant/affine-row test."""


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite vector component: {self}")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a near-zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class QuatRotation:
    """Unit quaternion (x, y, z, w); renormalized on construction."""

    x: float
    y: float
    z: float
    w: float

    def __post_init__(self):
        n = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w)
        if n < 1e-12 or not math.isfinite(n):
            raise ValueError("quaternion norm too small or non-finite")
        if abs(n - 1.0) > 1e-9:
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)
            object.__setattr__(self, "w", self.w / n)

    @staticmethod
    def identity() -> "QuatRotation":
        return QuatRotation(0.0, 0.0, 0.0, 1.0)

    def conjugate(self) -> "QuatRotation":
        return QuatRotation(-self.x, -self.y, -self.z, self.w)

    def dot(self, other: "QuatRotation") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z + self.w * other.w

    def multiply(self, other: "QuatRotation") -> "QuatRotation":
        ax, ay, az, aw = self.x, self.y, self.z, self.w
        bx, by, bz, bw = other.x, other.y, other.z, other.w
        return QuatRotation(
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        )

    def rotate(self, v: Vec3) -> Vec3:
        # q * (v, 0) * q^-1, expanded to avoid intermediate quaternions
        x, y, z, w = self.x, self.y, self.z, self.w
        tx = 2.0 * (y * v.z - z * v.y)
        ty = 2.0 * (z * v.x - x * v.z)
        tz = 2.0 * (x * v.y - y * v.x)
        return Vec3(
            v.x + w * tx + (y * tz - z * ty),
            v.y + w * ty + (z * tx - x * tz),
            v.z + w * tz + (x * ty - y * tx),
        )


@dataclass(frozen=True)
class AxisAngle:
    """Rotation as a unit axis plus an angle in radians.

    A zero (or numerically zero) angle canonicalizes to axis (0, 0, 1).
    """

    axis: Vec3
    angle: float

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise ValueError("non-finite rotation angle")
        if abs(self.angle) < 1e-12:
            object.__setattr__(self, "axis", Vec3(0.0, 0.0, 1.0))
            object.__setattr__(self, "angle", 0.0)
            return
        n = self.axis.norm()
        if n < 1e-12:
            raise ValueError("rotation axis must be non-zero for a non-zero angle")
        if abs(n - 1.0) > 1e-9:
            object.__setattr__(self, "axis", self.axis.normalized())


@dataclass(frozen=True)
class Mat4:
    """Row-major 4x4 matrix; index [r][c] via ``at(r, c)``."""

    elements: tuple

    def __post_init__(self):
        e = tuple(float(v) for v in self.elements)
        if len(e) != 16:
            raise ValueError(f"Mat4 needs 16 elements, got {len(e)}")
        if not all(math.isfinite(v) for v in e):
            raise ValueError("non-finite matrix element")
        object.__setattr__(self, "elements", e)

    @staticmethod
    def identity() -> "Mat4":
        return Mat4((1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1))

    @staticmethod
    def from_rows(rows) -> "Mat4":
        return Mat4(tuple(v for row in rows for v in row))

    def at(self, r: int, c: int) -> float:
        return self.elements[4 * r + c]

    def rows(self) -> tuple:
        e = self.elements
        return tuple(e[4 * r : 4 * r + 4] for r in range(4))

    def translation(self) -> Vec3:
        e = self.elements
        return Vec3(e[3], e[7], e[11])


@dataclass(frozen=True)
class RigidTransform:
    """Rotation followed by translation: p -> R(p) + t."""

    rotation: QuatRotation
    translation: Vec3

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(QuatRotation.identity(), Vec3(0.0, 0.0, 0.0))

    def apply(self, v: Vec3) -> Vec3:
        return self.rotation.rotate(v) + self.translation


def quat_from_axis_angle(a: AxisAngle) -> QuatRotation:
    half = 0.5 * a.angle
    s = math.sin(half)
    return QuatRotation(a.axis.x * s, a.axis.y * s, a.axis.z * s, math.cos(half))


def axis_angle_from_quat(q: QuatRotation) -> AxisAngle:
    """Inverse of :func:`quat_from_axis_angle`, up to quaternion sign.

    Returns an angle in [0, pi]; the identity maps to the canonical
    (0, 0, 1) axis with angle 0.
    """
    if q.w < 0.0:  # pick the representative with angle <= pi
        q = QuatRotation(-q.x, -q.y, -q.z, -q.w)
    vnorm = math.sqrt(q.x * q.x + q.y * q.y + q.z * q.z)
    angle = 2.0 * math.atan2(vnorm, q.w)
    if vnorm < 1e-12 or abs(angle) < 1e-12:
        return AxisAngle(Vec3(0.0, 0.0, 1.0), 0.0)
    return AxisAngle(Vec3(q.x / vnorm, q.y / vnorm, q.z / vnorm), angle)


def _rotation_rows(q: QuatRotation):
    x, y, z, w = q.x, q.y, q.z, q.w
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return (
        (1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)),
        (2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)),
        (2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)),
    )


def compose(r: RigidTransform) -> Mat4:
    """Rigid transform as a matrix: rotate, then translate (T . R)."""
    (r0, r1, r2) = _rotation_rows(r.rotation)
    t = r.translation
    return Mat4(
        (
            r0[0], r0[1], r0[2], t.x,
            r1[0], r1[1], r1[2], t.y,
            r2[0], r2[1], r2[2], t.z,
            0.0, 0.0, 0.0, 1.0,
        )
    )


def is_rigid(m: Mat4, tol: float = RIGID_TOL) -> bool:
    e = m.elements
    if max(abs(e[12]), abs(e[13]), abs(e[14]), abs(e[15] - 1.0)) > tol:
        return False
    r = [[e[0], e[1], e[2]], [e[4], e[5], e[6]], [e[8], e[9], e[10]]]
    # R R^T == I
    for i in range(3):
        for j in range(3):
            d = sum(r[i][k] * r[j][k] for k in range(3)) - (1.0 if i == j else 0.0)
            if abs(d) > tol:
                return False
    det = (
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
        - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    )
    return abs(det - 1.0) <= tol


def _require_rigid(m: Mat4):
    if not is_rigid(m):
        raise NotRigidError("matrix is not a rigid transform (within 1e-9)")


def _inv3(a):
    d = (
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    )
    if abs(d) < 1e-300:
        raise NotRigidError("singular rotation block")
    c = [
        [
            (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / d,
            (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / d,
            (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / d,
        ],
        [
            (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / d,
            (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / d,
            (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / d,
        ],
        [
            (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / d,
            (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / d,
            (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / d,
        ],
    ]
    return c


def _orthonormalize(r):
    """Polar decomposition by Higham iteration: X <- (X + X^-T) / 2."""
    x = [list(row) for row in r]
    for _ in range(25):
        inv_t = _inv3(x)
        nxt = [[0.5 * (x[i][j] + inv_t[j][i]) for j in range(3)] for i in range(3)]
        delta = max(abs(nxt[i][j] - x[i][j]) for i in range(3) for j in range(3))
        x = nxt
        if delta < 1e-15:
            break
    return x


def _quat_from_rotation_rows(r) -> QuatRotation:
    tr = r[0][0] + r[1][1] + r[2][2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        return QuatRotation((r[2][1] - r[1][2]) / s, (r[0][2] - r[2][0]) / s, (r[1][0] - r[0][1]) / s, 0.25 * s)
    if r[0][0] > r[1][1] and r[0][0] > r[2][2]:
        s = math.sqrt(1.0 + r[0][0] - r[1][1] - r[2][2]) * 2.0
        return QuatRotation(0.25 * s, (r[0][1] + r[1][0]) / s, (r[0][2] + r[2][0]) / s, (r[2][1] - r[1][2]) / s)
    if r[1][1] > r[2][2]:
        s = math.sqrt(1.0 + r[1][1] - r[0][0] - r[2][2]) * 2.0
        return QuatRotation((r[0][1] + r[1][0]) / s, 0.25 * s, (r[1][2] + r[2][1]) / s, (r[0][2] - r[2][0]) / s)
    s = math.sqrt(1.0 + r[2][2] - r[0][0] - r[1][1]) * 2.0
    return QuatRotation((r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s, 0.25 * s, (r[1][0] - r[0][1]) / s)


def decompose(m: Mat4) -> RigidTransform:
    """Split a rigid matrix into rotation + translation.

    Raises NotRigidError beyond the 1e-9 tolerance; inside it, the rotation
    block is re-orthonormalized (polar decomposition) so repeated
    compose/decompose cycles do not accumulate drift.
    """
    _require_rigid(m)
    e = m.elements
    r = [[e[0], e[1], e[2]], [e[4], e[5], e[6]], [e[8], e[9], e[10]]]
    r = _orthonormalize(r)
    return RigidTransform(_quat_from_rotation_rows(r), Vec3(e[3], e[7], e[11]))


def mat_mul(a: Mat4, b: Mat4) -> Mat4:
    ea, eb = a.elements, b.elements
    out = [0.0] * 16
    for i in range(4):
        for j in range(4):
            out[4 * i + j] = (
                ea[4 * i] * eb[j]
                + ea[4 * i + 1] * eb[4 + j]
                + ea[4 * i + 2] * eb[8 + j]
                + ea[4 * i + 3] * eb[12 + j]
            )
    return Mat4(tuple(out))


def inverse_rigid(m: Mat4) -> Mat4:
    """Inverse of a rigid matrix: transposed rotation, back-rotated translation."""
    _require_rigid(m)
    e = m.elements
    r = ((e[0], e[1], e[2]), (e[4], e[5], e[6]), (e[8], e[9], e[10]))
    t = (e[3], e[7], e[11])
    ti = tuple(-(r[0][i] * t[0] + r[1][i] * t[1] + r[2][i] * t[2]) for i in range(3))
    return Mat4(
        (
            r[0][0], r[1][0], r[2][0], ti[0],
            r[0][1], r[1][1], r[2][1], ti[1],
            r[0][2], r[1][2], r[2][2], ti[2],
            0.0, 0.0, 0.0, 1.0,
        )
    )


def transform_point(m: Mat4, p: Vec3) -> Vec3:
    e = m.elements
    return Vec3(
        e[0] * p.x + e[1] * p.y + e[2] * p.z + e[3],
        e[4] * p.x + e[5] * p.y + e[6] * p.z + e[7],
        e[8] * p.x + e[9] * p.y + e[10] * p.z + e[11],
    )


def transform_direction(m: Mat4, v: Vec3) -> Vec3:
    e = m.elements
    return Vec3(
        e[0] * v.x + e[1] * v.y + e[2] * v.z,
        e[4] * v.x + e[5] * v.y + e[6] * v.z,
        e[8] * v.x + e[9] * v.y + e[10] * v.z,
    )


def slerp(a: QuatRotation, b: QuatRotation, t: float) -> QuatRotation:
    """Shortest-arc spherical interpolation."""
    d = a.dot(b)
    if d < 0.0:
        b = QuatRotation(-b.x, -b.y, -b.z, -b.w)
        d = -d
    if d > 1.0 - 1e-12:
        # nearly parallel: normalized lerp is exact enough
        return QuatRotation(
            a.x + t * (b.x - a.x),
            a.y + t * (b.y - a.y),
            a.z + t * (b.z - a.z),
            a.w + t * (b.w - a.w),
        )
    theta = math.acos(min(1.0, d))
    s = math.sin(theta)
    wa = math.sin((1.0 - t) * theta) / s
    wb = math.sin(t * theta) / s
    return QuatRotation(
        wa * a.x + wb * b.x,
        wa * a.y + wb * b.y,
        wa * a.z + wb * b.z,
        wa * a.w + wb * b.w,
    )


def lerp_pose(a: RigidTransform, b: RigidTransform, t: float) -> RigidTransform:
    """Interpolate two poses: linear translation, shortest-arc rotation."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter must be in [0, 1], got {t}")
    trans = Vec3(
        a.translation.x + t * (b.translation.x - a.translation.x),
        a.translation.y + t * (b.translation.y - a.translation.y),
        a.translation.z + t * (b.translation.z - a.translation.z),
    )
    return RigidTransform(slerp(a.rotation, b.rotation, t), trans)
