"""Mesh and volume ingestion plus the geometry processing between a file on
disk and a renderable surface: STL/OFF/PLY parsing, raw int16 volumes with a
JSON sidecar header, thresholding, marching-cubes iso-surfacing, and the
parametric mesh modification exposed on the processing panel (rotation about
X, uniform scale, translations in millimeters).

Model-space coordinates are millimeters throughout this module; the renderer
applies the millimeter-to-meter model scale.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._mc_tables import EDGE_TABLE, TRI_TABLE
from .xform import Vec3

MESH_FORMATS = ("stl-binary", "stl-ascii", "off", "ply-ascii")


class ParseError(ValueError):
    """Malformed mesh file; carries the offending line or byte offset."""

    def __init__(self, reason, line=None, offset=None):
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif offset is not None:
            where = f" (byte {offset})"
        super().__init__(f"{reason}{where}")
        self.line = line
        self.offset = offset


class EmptyMeshError(ValueError):
    """Mesh has no faces (or no vertices where vertices are required)."""


class HeaderError(ValueError):
    """Volume sidecar header is missing fields or has invalid values."""


class SizeMismatchError(ValueError):
    """Raw scalar file length does not match dims * 2 bytes."""


class EmptySurfaceError(ValueError):
    """No cell in the volume crosses the requested iso value."""


@dataclass
class TriangleMesh:
    """Indexed triangle mesh; vertices in millimeters.

    ``normals`` (unit, per vertex) and ``uvs`` (in [0,1]^2, per vertex) are
    optional. Faces must index valid vertices and use three distinct indices.
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray | None = None
    uvs: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int32).reshape(-1, 3)
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("non-finite vertex coordinate")
        n = len(self.vertices)
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= n):
            raise ValueError("face index out of range")
        f = self.faces
        if len(f) and not np.all((f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 0] != f[:, 2])):
            raise ValueError("degenerate face (repeated vertex index)")
        if self.normals is not None:
            self.normals = np.ascontiguousarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(self.normals) != n:
                raise ValueError("normal count != vertex count")
            lens = np.linalg.norm(self.normals, axis=1)
            if len(lens) and np.max(np.abs(lens - 1.0)) > 1e-6:
                raise ValueError("normals must be unit length")
        if self.uvs is not None:
            self.uvs = np.ascontiguousarray(self.uvs, dtype=np.float64).reshape(-1, 2)
            if len(self.uvs) != n:
                raise ValueError("uv count != vertex count")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)


@dataclass
class Volume:
    """Scalar voxel grid: int16 samples in x-fastest order, spacing in mm."""

    dims: tuple
    spacing: tuple
    scalars: np.ndarray

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.dims) != 3 or any(d <= 0 for d in self.dims):
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be three positive reals, got {self.spacing}")
        self.scalars = np.ascontiguousarray(self.scalars, dtype=np.int16).reshape(-1)
        nx, ny, nz = self.dims
        if self.scalars.size != nx * ny * nz:
            raise ValueError(f"scalar count {self.scalars.size} != {nx}*{ny}*{nz}")

    @property
    def grid(self) -> np.ndarray:
        """Scalars viewed as [z, y, x]."""
        nx, ny, nz = self.dims
        return self.scalars.reshape(nz, ny, nx)

    def at(self, x: int, y: int, z: int) -> int:
        nx, ny, _ = self.dims
        return int(self.scalars[x + nx * (y + ny * z)])


@dataclass(frozen=True)
class ModifyParams:
    """Panel parameters of the mesh modifier.

    Rotation is about the model X axis in degrees (normalized to (-180, 180]),
    scale is uniform and must be positive, translations are millimeters.
    Application order: scale, then rotate, then translate.
    """

    x_rotation_deg: float = 0.0
    scale_factor: float = 1.0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0

    def __post_init__(self):
        if not self.scale_factor > 0:
            raise ValueError(f"scale factor must be > 0, got {self.scale_factor}")
        r = math.fmod(self.x_rotation_deg, 360.0)
        if r <= -180.0:
            r += 360.0
        elif r > 180.0:
            r -= 360.0
        object.__setattr__(self, "x_rotation_deg", r)


# ---------------------------------------------------------------------------
# mesh file formats


def _weld_exact(tri_verts: np.ndarray):
    """Merge bit-identical coordinates; returns (vertices f64, faces)."""
    flat = np.ascontiguousarray(tri_verts, dtype=np.float32).reshape(-1, 3)
    keys = flat.view([("x", "<f4"), ("y", "<f4"), ("z", "<f4")]).reshape(-1)
    uniq, inverse = np.unique(keys, return_inverse=True)
    vertices = np.column_stack([uniq["x"], uniq["y"], uniq["z"]]).astype(np.float64)
    faces = inverse.reshape(-1, 3).astype(np.int32)
    return vertices, faces


def _drop_degenerate(faces: np.ndarray) -> np.ndarray:
    f = faces
    keep = (f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 0] != f[:, 2])
    return f[keep]


def _finish_mesh(vertices, faces, normals=None, uvs=None) -> TriangleMesh:
    faces = _drop_degenerate(np.asarray(faces, dtype=np.int32).reshape(-1, 3))
    if len(faces) == 0:
        raise EmptyMeshError("mesh has no (non-degenerate) faces")
    mesh = TriangleMesh(vertices, faces, normals, uvs)
    if mesh.normals is None or not np.any(np.abs(mesh.normals).sum(axis=1) > 0):
        mesh = compute_normals(mesh)
    return mesh


_STL_RECORD = np.dtype([("normal", "<3f4"), ("verts", "<9f4"), ("attr", "<u2")])


def _load_stl_binary(data: bytes) -> TriangleMesh:
    if len(data) < 84:
        raise ParseError("binary STL shorter than 84-byte preamble", offset=len(data))
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + count * 50
    if len(data) < expected:
        raise ParseError(
            f"binary STL truncated: facet count {count} needs {expected} bytes, file has {len(data)}",
            offset=len(data),
        )
    records = np.frombuffer(data, dtype=_STL_RECORD, count=count, offset=84)
    tri_verts = records["verts"].reshape(-1, 3, 3)
    if not np.all(np.isfinite(tri_verts)):
        raise ParseError("non-finite vertex in binary STL")
    vertices, faces = _weld_exact(tri_verts)
    return _finish_mesh(vertices, faces)


def _load_stl_ascii(text: str) -> TriangleMesh:
    verts = []
    lineno = 0
    facet_open = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        key = tokens[0].lower()
        if key == "vertex":
            if len(tokens) != 4:
                raise ParseError("vertex line needs 3 coordinates", line=lineno)
            try:
                verts.append([float(t) for t in tokens[1:4]])
            except ValueError as exc:
                raise ParseError(f"bad vertex coordinate: {exc}", line=lineno) from None
        elif key == "facet":
            facet_open = True
        elif key == "endfacet":
            facet_open = False
    if facet_open:
        raise ParseError("unterminated facet", line=lineno)
    if len(verts) % 3 != 0:
        raise ParseError(f"vertex count {len(verts)} is not a multiple of 3", line=lineno)
    tri_verts = np.asarray(verts, dtype=np.float32).reshape(-1, 3, 3)
    vertices, faces = _weld_exact(tri_verts)
    return _finish_mesh(vertices, faces)


class _TokenStream:
    """Whitespace token reader that remembers line numbers for errors."""

    def __init__(self, text: str):
        self._tokens = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            body = raw.split("#", 1)[0]
            for tok in body.split():
                self._tokens.append((tok, lineno))
        self._pos = 0
        self.line = 1

    def next(self, what: str) -> str:
        if self._pos >= len(self._tokens):
            raise ParseError(f"unexpected end of file, expected {what}", line=self.line)
        tok, self.line = self._tokens[self._pos]
        self._pos += 1
        return tok

    def next_int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected integer {what}, got {tok!r}", line=self.line) from None

    def next_float(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"expected number {what}, got {tok!r}", line=self.line) from None


def _load_off(text: str) -> TriangleMesh:
    ts = _TokenStream(text)
    magic = ts.next("OFF magic")
    if magic != "OFF":
        raise ParseError(f"not an OFF file (got {magic!r})", line=ts.line)
    nv = ts.next_int("vertex count")
    nf = ts.next_int("face count")
    ts.next_int("edge count")
    verts = np.empty((nv, 3), dtype=np.float64)
    for i in range(nv):
        verts[i] = [ts.next_float("x"), ts.next_float("y"), ts.next_float("z")]
    faces = []
    for _ in range(nf):
        k = ts.next_int("face vertex count")
        if k < 3:
            raise ParseError(f"face needs at least 3 vertices, got {k}", line=ts.line)
        idx = [ts.next_int("face index") for _ in range(k)]
        if any(i < 0 or i >= nv for i in idx):
            raise ParseError("face index out of range", line=ts.line)
        for j in range(1, k - 1):  # fan triangulation
            faces.append((idx[0], idx[j], idx[j + 1]))
    return _finish_mesh(verts, faces)


def _load_ply_ascii(text: str) -> TriangleMesh:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("not a PLY file", line=1)
    elements = []  # (name, count, [property names]); list property marked '*'
    fmt_seen = False
    body_start = None
    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1] != "ascii":
                raise ParseError(f"only ascii PLY supported, got {tokens[1]}", line=lineno)
            fmt_seen = True
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno)
            if tokens[1] == "list":
                elements[-1][2].append("*" + tokens[-1])
            else:
                elements[-1][2].append(tokens[-1])
        elif tokens[0] == "end_header":
            body_start = lineno
            break
        else:
            raise ParseError(f"unknown header keyword {tokens[0]!r}", line=lineno)
    if not fmt_seen or body_start is None:
        raise ParseError("incomplete PLY header", line=len(lines))

    ts = _TokenStream("\n".join(lines[body_start:]))
    verts = normals = uvs = None
    faces = []
    for name, count, props in elements:
        if name == "vertex":
            cols = {p: np.empty(count) for p in props if not p.startswith("*")}
            for i in range(count):
                for p in props:
                    v = ts.next_float(f"vertex property {p}")
                    if not p.startswith("*"):
                        cols[p][i] = v
            try:
                verts = np.column_stack([cols["x"], cols["y"], cols["z"]])
            except KeyError as exc:
                raise ParseError(f"vertex element lacks property {exc}") from None
            if {"nx", "ny", "nz"} <= cols.keys():
                normals = np.column_stack([cols["nx"], cols["ny"], cols["nz"]])
            for u_name, v_name in (("u", "v"), ("s", "t")):
                if {u_name, v_name} <= cols.keys():
                    uvs = np.column_stack([cols[u_name], cols[v_name]])
                    break
        elif name == "face":
            for _ in range(count):
                k = ts.next_int("face list length")
                if k < 3:
                    raise ParseError(f"face needs at least 3 indices, got {k}", line=ts.line)
                idx = [ts.next_int("face index") for _ in range(k)]
                for j in range(1, k - 1):
                    faces.append((idx[0], idx[j], idx[j + 1]))
        else:
            # skip unknown elements token by token (scalar rows only)
            for _ in range(count):
                for p in props:
                    if p.startswith("*"):
                        k = ts.next_int("list length")
                        for _ in range(k):
                            ts.next("list item")
                    else:
                        ts.next("property value")
    if verts is None:
        raise ParseError("PLY file has no vertex element")
    if normals is not None:
        lens = np.linalg.norm(normals, axis=1)
        if np.any(lens < 1e-12):
            normals = None
        else:
            normals = normals / lens[:, None]
    return _finish_mesh(verts, faces, normals, uvs)


def _sniff_format(path: Path) -> str:
    ext = path.suffix.lower()
    if ext == ".off":
        return "off"
    if ext == ".ply":
        return "ply-ascii"
    head = path.open("rb").read(512)
    if head.lstrip().startswith(b"solid") and b"facet" in head:
        return "stl-ascii"
    return "stl-binary"


def load_mesh(path, format: str | None = None) -> TriangleMesh:
    """Load a triangle mesh from ``path``.

    ``format`` is one of ``stl-binary``, ``stl-ascii``, ``off``, ``ply-ascii``;
    when omitted it is inferred from the extension (and, for .stl, the file
    contents). STL facets are welded on exact coordinate equality; zero-area
    faces left over after welding are dropped; normals are recomputed when the
    file carries none (or only zeros).
    """
    p = Path(path)
    fmt = format or _sniff_format(p)
    if fmt not in MESH_FORMATS:
        raise ValueError(f"unknown mesh format {fmt!r}, expected one of {MESH_FORMATS}")
    if fmt == "stl-binary":
        return _load_stl_binary(p.read_bytes())
    text = p.read_text()
    if fmt == "stl-ascii":
        return _load_stl_ascii(text)
    if fmt == "off":
        return _load_off(text)
    return _load_ply_ascii(text)


def _face_normals(mesh: TriangleMesh) -> np.ndarray:
    v = mesh.vertices
    f = mesh.faces
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    lens = np.linalg.norm(n, axis=1)
    lens[lens < 1e-30] = 1.0
    return n / lens[:, None]


def save_mesh(mesh: TriangleMesh, path, format: str) -> None:
    """Write ``mesh`` to ``path``; raises EmptyMeshError before touching disk."""
    if mesh.num_faces == 0:
        raise EmptyMeshError("refusing to write a mesh with zero faces")
    if format not in MESH_FORMATS:
        raise ValueError(f"unknown mesh format {format!r}, expected one of {MESH_FORMATS}")
    p = Path(path)
    v, f = mesh.vertices, mesh.faces
    if format == "stl-binary":
        records = np.zeros(len(f), dtype=_STL_RECORD)
        records["normal"] = _face_normals(mesh).astype(np.float32)
        records["verts"] = v[f].reshape(-1, 9).astype(np.float32)
        with p.open("wb") as fh:
            fh.write(b"vrbridge binary stl".ljust(80, b"\0"))
            fh.write(struct.pack("<I", len(f)))
            records.tofile(fh)
        return
    if format == "stl-ascii":
        fn = _face_normals(mesh)
        out = ["solid mesh"]
        for i, face in enumerate(f):
            out.append(f"  facet normal {fn[i, 0]:.9g} {fn[i, 1]:.9g} {fn[i, 2]:.9g}")
            out.append("    outer loop")
            for vi in face:
                out.append(f"      vertex {v[vi, 0]:.9g} {v[vi, 1]:.9g} {v[vi, 2]:.9g}")
            out.append("    endloop")
            out.append("  endfacet")
        out.append("endsolid mesh")
        p.write_text("\n".join(out) + "\n")
        return
    if format == "off":
        out = ["OFF", f"{len(v)} {len(f)} 0"]
        out += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in v]
        out += [f"3 {a} {b} {c}" for a, b, c in f]
        p.write_text("\n".join(out) + "\n")
        return
    # ply-ascii
    header = ["ply", "format ascii 1.0", f"element vertex {len(v)}"]
    header += ["property float x", "property float y", "property float z"]
    cols = [v]
    if mesh.normals is not None:
        header += ["property float nx", "property float ny", "property float nz"]
        cols.append(mesh.normals)
    if mesh.uvs is not None:
        header += ["property float s", "property float t"]
        cols.append(mesh.uvs)
    header += [f"element face {len(f)}", "property list uchar int vertex_indices", "end_header"]
    data = np.hstack(cols)
    out = header
    out += [" ".join(f"{x:.17g}" for x in row) for row in data]
    out += [f"3 {a} {b} {c}" for a, b, c in f]
    p.write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# volumes


def load_volume(header_path) -> Volume:
    """Load an int16 raw volume described by a JSON sidecar header.

    Header schema: ``{"dims": [nx, ny, nz], "spacing_mm": [sx, sy, sz],
    "raw": "<path>", "scalar": "int16-le"}``; the raw path is resolved
    relative to the header file.
    """
    hp = Path(header_path)
    try:
        doc = json.loads(hp.read_text())
    except json.JSONDecodeError as exc:
        raise HeaderError(f"invalid JSON in {hp}: {exc}") from None
    if not isinstance(doc, dict):
        raise HeaderError("header must be a JSON object")
    for key in ("dims", "spacing_mm", "raw", "scalar"):
        if key not in doc:
            raise HeaderError(f"header missing field {key!r}")
    if doc["scalar"] != "int16-le":
        raise HeaderError(f"unsupported scalar type {doc['scalar']!r} (only int16-le)")
    dims = doc["dims"]
    spacing = doc["spacing_mm"]
    if not (isinstance(dims, list) and len(dims) == 3 and all(isinstance(d, int) and d > 0 for d in dims)):
        raise HeaderError(f"dims must be three positive integers, got {dims!r}")
    if not (
        isinstance(spacing, list)
        and len(spacing) == 3
        and all(isinstance(s, (int, float)) and s > 0 for s in spacing)
    ):
        raise HeaderError(f"spacing_mm must be three positive numbers, got {spacing!r}")
    raw_path = Path(doc["raw"])
    if not raw_path.is_absolute():
        raw_path = hp.parent / raw_path
    data = raw_path.read_bytes()
    nx, ny, nz = dims
    expected = nx * ny * nz * 2
    if len(data) != expected:
        raise SizeMismatchError(f"raw file is {len(data)} bytes, dims {dims} need {expected}")
    return Volume(tuple(dims), tuple(spacing), np.frombuffer(data, dtype="<i2").copy())


def threshold(volume: Volume, t: float) -> Volume:
    """Binary mask: 1 where scalar > t, else 0; dims and spacing preserved."""
    mask = (volume.scalars > t).astype(np.int16)
    return Volume(volume.dims, volume.spacing, mask)


# ---------------------------------------------------------------------------
# marching cubes

_CORNER_OFFSETS = (
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
)
_EDGE_CORNERS = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)


def isosurface(volume: Volume, iso: float) -> TriangleMesh:
    """Extract the iso-surface as a triangle mesh (marching cubes).

    Vertices land on cell edges at linear-interpolation parameters and are
    welded across cells via global edge keys, so surfaces that stay inside the
    volume are watertight 2-manifolds. Winding is outward: regions with
    scalar > iso count as inside. Iso values that exactly equal a sample put
    vertices on lattice corners and can degenerate faces; pick iso strictly
    between sample values.
    """
    nx, ny, nz = volume.dims
    if min(nx, ny, nz) < 2:
        raise ValueError(f"isosurface needs at least 2 samples per axis, got dims {volume.dims}")
    vals = volume.grid.astype(np.float64)  # [z, y, x]
    below = vals < iso

    cube_index = np.zeros((nz - 1, ny - 1, nx - 1), dtype=np.uint16)
    for bit, (dx, dy, dz) in enumerate(_CORNER_OFFSETS):
        corner = below[dz : dz + nz - 1, dy : dy + ny - 1, dx : dx + nx - 1]
        cube_index |= corner.astype(np.uint16) << bit
    active = np.argwhere((cube_index != 0) & (cube_index != 255))
    if len(active) == 0:
        raise EmptySurfaceError(f"no cell crosses iso value {iso}")

    sx, sy, sz = volume.spacing
    edge_vertex: dict = {}
    positions: list = []
    faces: list = []

    for z, y, x in active:
        case = int(cube_index[z, y, x])
        edge_bits = EDGE_TABLE[case]
        local = [-1] * 12
        for e in range(12):
            if not edge_bits >> e & 1:
                continue
            ca, cb = _EDGE_CORNERS[e]
            oa, ob = _CORNER_OFFSETS[ca], _CORNER_OFFSETS[cb]
            ax_, ay, az = x + oa[0], y + oa[1], z + oa[2]
            bx, by, bz = x + ob[0], y + ob[1], z + ob[2]
            # global key: lower lattice point along the edge + axis
            if (ax_, ay, az) <= (bx, by, bz):
                key = (ax_, ay, az, (bx - ax_, by - ay, bz - az))
            else:
                key = (bx, by, bz, (ax_ - bx, ay - by, az - bz))
            vid = edge_vertex.get(key)
            if vid is None:
                va = vals[az, ay, ax_]
                vb = vals[bz, by, bx]
                t = (iso - va) / (vb - va)
                positions.append(
                    (
                        (ax_ + t * (bx - ax_)) * sx,
                        (ay + t * (by - ay)) * sy,
                        (az + t * (bz - az)) * sz,
                    )
                )
                vid = len(positions) - 1
                edge_vertex[key] = vid
            local[e] = vid
        row = TRI_TABLE[case]
        for i in range(0, 16, 3):
            if row[i] < 0:
                break
            # table order winds outward: scalar > iso encloses positive volume
            faces.append((local[row[i]], local[row[i + 1]], local[row[i + 2]]))

    mesh = TriangleMesh(np.asarray(positions), _drop_degenerate(np.asarray(faces, dtype=np.int32)))
    return compute_normals(mesh)


# ---------------------------------------------------------------------------
# mesh processing


def modify_mesh(mesh: TriangleMesh, params: ModifyParams) -> TriangleMesh:
    """Apply panel parameters: v -> R_x(deg) (s v) + (tx, ty, tz).

    Topology is untouched; normals are re-rotated; identity parameters return
    vertex data bit-identical to the input.
    """
    rad = math.radians(params.x_rotation_deg)
    c, s = math.cos(rad), math.sin(rad)
    rot = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    t = np.array([params.tx, params.ty, params.tz])
    verts = (mesh.vertices * params.scale_factor) @ rot.T + t
    normals = mesh.normals @ rot.T if mesh.normals is not None else None
    return TriangleMesh(verts, mesh.faces.copy(), normals, None if mesh.uvs is None else mesh.uvs.copy())


def bounding_box(mesh: TriangleMesh) -> tuple[Vec3, Vec3]:
    """Axis-aligned bounds in millimeters."""
    if mesh.num_vertices == 0:
        raise EmptyMeshError("bounding box of an empty mesh")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    return Vec3(*lo), Vec3(*hi)


def compute_normals(mesh: TriangleMesh) -> TriangleMesh:
    """Area-weighted unit vertex normals (cross-product weighting)."""
    if mesh.num_vertices == 0:
        raise EmptyMeshError("normals of an empty mesh")
    v, f = mesh.vertices, mesh.faces
    fn = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])  # length = 2 * area
    acc = np.zeros_like(v)
    for col in range(3):
        np.add.at(acc, f[:, col], fn)
    lens = np.linalg.norm(acc, axis=1)
    degenerate = lens < 1e-30
    acc[degenerate] = (0.0, 0.0, 1.0)
    lens[degenerate] = 1.0
    return TriangleMesh(v, f, acc / lens[:, None], mesh.uvs)


def spherical_uvs(mesh: TriangleMesh, center=None) -> TriangleMesh:
    """Assign lat-long texture coordinates from directions around ``center``."""
    if center is None:
        lo, hi = bounding_box(mesh)
        center = np.array([(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2])
    else:
        center = np.asarray(center, dtype=np.float64)
    d = mesh.vertices - center
    lens = np.linalg.norm(d, axis=1)
    lens[lens < 1e-30] = 1.0
    d = d / lens[:, None]
    u = 0.5 + np.arctan2(d[:, 2], d[:, 0]) / (2 * math.pi)
    vv = 0.5 - np.arcsin(np.clip(d[:, 1], -1, 1)) / math.pi
    return TriangleMesh(mesh.vertices, mesh.faces, mesh.normals, np.column_stack([u, vv]))


# ---------------------------------------------------------------------------
# synthetic phantoms (an in-repo stand-in for scanned datasets)


def sphere_volume(n: int = 64, radius_vox: float = 20.0, spacing=(1.0, 1.0, 1.0)) -> Volume:
    """Spherical phantom: value falls off linearly from 1000 at the center to
    0 at twice the radius, so iso = 500 sits exactly on the sphere. The center
    is offset a quarter voxel to keep lattice samples off the iso level.
    """
    c = (n - 1) / 2 + 0.25
    zz, yy, xx = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    dist = np.sqrt((xx - c) ** 2 + (yy - c) ** 2 + (zz - c) ** 2)
    val = np.clip(1000.0 * (1.0 - dist / (2.0 * radius_vox)), 0, 1000)
    return Volume((n, n, n), spacing, np.rint(val).astype(np.int16).reshape(-1))


def uv_sphere_mesh(rows: int, cols: int, radius_mm: float = 50.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Lat-long sphere mesh with poles as fans; 2*cols*(rows-1) triangles."""
    if rows < 2 or cols < 3:
        raise ValueError("need rows >= 2 and cols >= 3")
    cx, cy, cz = center
    verts = [(cx, cy + radius_mm, cz)]
    uvs = [(0.5, 0.0)]
    for i in range(1, rows):
        theta = math.pi * i / rows
        for j in range(cols):
            phi = 2 * math.pi * j / cols
            verts.append(
                (
                    cx + radius_mm * math.sin(theta) * math.cos(phi),
                    cy + radius_mm * math.cos(theta),
                    cz + radius_mm * math.sin(theta) * math.sin(phi),
                )
            )
            uvs.append((j / cols, i / rows))
    verts.append((cx, cy - radius_mm, cz))
    uvs.append((0.5, 1.0))
    south = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * cols + (j % cols)

    faces = []
    for j in range(cols):
        faces.append((0, ring(1, j + 1), ring(1, j)))
    for i in range(1, rows - 1):
        for j in range(cols):
            a, b = ring(i, j), ring(i, j + 1)
            c2, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append((a, b, d))
            faces.append((a, d, c2))
    for j in range(cols):
        faces.append((south, ring(rows - 1, j), ring(rows - 1, j + 1)))
    mesh = TriangleMesh(np.asarray(verts), np.asarray(faces, dtype=np.int32), uvs=np.asarray(uvs))
    return compute_normals(mesh)
