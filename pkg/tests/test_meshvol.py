import math
import struct

import numpy as np
import pytest

from vrbridge.meshvol import (
    EmptyMeshError,
    HeaderError,
    ModifyParams,
    ParseError,
    SizeMismatchError,
    TriangleMesh,
    Volume,
    bounding_box,
    compute_normals,
    load_mesh,
    load_volume,
    modify_mesh,
    save_mesh,
    sphere_volume,
    threshold,
    uv_sphere_mesh,
)

CUBE_TRIS = [
    # 12 triangles of the unit cube, outward winding
    ((0, 0, 0), (0, 1, 1), (0, 1, 0)), ((0, 0, 0), (0, 0, 1), (0, 1, 1)),
    ((1, 0, 0), (1, 1, 0), (1, 1, 1)), ((1, 0, 0), (1, 1, 1), (1, 0, 1)),
    ((0, 0, 0), (1, 0, 0), (1, 0, 1)), ((0, 0, 0), (1, 0, 1), (0, 0, 1)),
    ((0, 1, 0), (1, 1, 1), (1, 1, 0)), ((0, 1, 0), (0, 1, 1), (1, 1, 1)),
    ((0, 0, 0), (1, 1, 0), (1, 0, 0)), ((0, 0, 0), (0, 1, 0), (1, 1, 0)),
    ((0, 0, 1), (1, 0, 1), (1, 1, 1)), ((0, 0, 1), (1, 1, 1), (0, 1, 1)),
]


def write_cube_stl(path):
    with open(path, "wb") as f:
        f.write(b"\0" * 80)
        f.write(struct.pack("<I", 12))
        for tri in CUBE_TRIS:
            f.write(struct.pack("<3f", 0, 0, 0))
            for v in tri:
                f.write(struct.pack("<3f", *v))
            f.write(struct.pack("<H", 0))


def unit_cube_mesh():
    verts = sorted(set(v for tri in CUBE_TRIS for v in tri))
    index = {v: i for i, v in enumerate(verts)}
    faces = [[index[v] for v in tri] for tri in CUBE_TRIS]
    return TriangleMesh(np.array(verts, float), np.array(faces))


def write_volume(tmp_path, dims, scalars, spacing=(1.0, 1.0, 1.0), name="vol"):
    raw = tmp_path / f"{name}.raw"
    raw.write_bytes(np.asarray(scalars, dtype="<i2").tobytes())
    header = tmp_path / f"{name}.json"
    header.write_text(
        '{"dims": [%d, %d, %d], "spacing_mm": [%g, %g, %g], "raw": "%s", "scalar": "int16-le"}'
        % (*dims, *spacing, raw.name)
    )
    return header


# -- loading ----------------------------------------------------------------


def test_binary_stl_cube_file_size_and_welding(tmp_path):
    p = tmp_path / "cube.stl"
    write_cube_stl(p)
    assert p.stat().st_size == 80 + 4 + 12 * 50 == 684
    mesh = load_mesh(p, "stl-binary")
    assert mesh.num_faces == 12
    assert mesh.num_vertices == 8


def test_binary_stl_truncated(tmp_path):
    p = tmp_path / "trunc.stl"
    write_cube_stl(p)
    data = p.read_bytes()[: 84 + 5 * 50]
    p.write_bytes(data)
    with pytest.raises(ParseError):
        load_mesh(p, "stl-binary")


def test_off_minimal_triangle(tmp_path):
    p = tmp_path / "tri.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    mesh = load_mesh(p, "off")
    assert mesh.num_vertices == 3
    assert mesh.num_faces == 1


def test_off_bad_magic(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFX\n3 1 0\n")
    with pytest.raises(ParseError):
        load_mesh(p, "off")


def test_ascii_stl_round_trip(tmp_path):
    cube = unit_cube_mesh()
    p = tmp_path / "cube_ascii.stl"
    save_mesh(cube, p, "stl-ascii")
    back = load_mesh(p, "stl-ascii")
    assert back.num_faces == 12
    assert back.num_vertices == 8


def test_ply_round_trip_with_normals_and_uvs(tmp_path):
    mesh = uv_sphere_mesh(8, 12, radius_mm=5.0)
    p = tmp_path / "s.ply"
    save_mesh(mesh, p, "ply-ascii")
    back = load_mesh(p, "ply-ascii")
    assert back.num_faces == mesh.num_faces
    assert back.uvs is not None and back.normals is not None
    assert np.allclose(np.sort(back.vertices, axis=0), np.sort(mesh.vertices, axis=0), atol=1e-5)


def test_format_sniffing(tmp_path):
    p = tmp_path / "cube.stl"
    write_cube_stl(p)
    assert load_mesh(p).num_faces == 12  # binary sniffed
    q = tmp_path / "cube2.stl"
    save_mesh(unit_cube_mesh(), q, "stl-ascii")
    assert load_mesh(q).num_faces == 12  # ascii sniffed


def test_save_empty_mesh_rejected(tmp_path):
    mesh = TriangleMesh(np.zeros((3, 3)), np.zeros((0, 3), dtype=np.int32))
    target = tmp_path / "never.off"
    with pytest.raises(EmptyMeshError):
        save_mesh(mesh, target, "off")
    assert not target.exists()


def test_binary_round_trip_random_mesh_bbox(tmp_path):
    rng = np.random.default_rng(21)
    verts = rng.uniform(-40, 40, size=(5000, 3))
    faces = rng.integers(0, 5000, size=(10000, 3))
    ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    mesh = TriangleMesh(verts, faces[ok])
    p = tmp_path / "rand.stl"
    save_mesh(mesh, p, "stl-binary")
    back = load_mesh(p, "stl-binary")
    assert back.num_faces == mesh.num_faces
    lo0, hi0 = bounding_box(mesh)
    lo1, hi1 = bounding_box(back)
    for a, b in zip(lo0.as_tuple() + hi0.as_tuple(), lo1.as_tuple() + hi1.as_tuple()):
        assert abs(a - b) < 1e-4


def test_round_trip_preserves_vertex_multiset(tmp_path):
    cube = unit_cube_mesh()
    for fmt in ("stl-binary", "stl-ascii", "off", "ply-ascii"):
        p = tmp_path / f"cube.{fmt}.dat"
        save_mesh(cube, p, fmt)
        back = load_mesh(p, fmt)
        assert back.num_faces == cube.num_faces
        a = np.sort(cube.vertices.round(5), axis=0)
        b = np.sort(back.vertices.round(5), axis=0)
        assert np.max(np.abs(a - b)) < 1e-6


# -- volumes ----------------------------------------------------------------


def test_load_volume_small(tmp_path):
    header = write_volume(tmp_path, (4, 4, 4), np.zeros(64))
    vol = load_volume(header)
    assert vol.dims == (4, 4, 4)
    assert vol.scalars.shape == (64,)
    assert not vol.scalars.any()


def test_load_volume_ct_shape_addressing(tmp_path):
    dims = (512, 512, 3)  # full x/y resolution, a token number of slices
    scal = np.zeros(512 * 512 * 3, dtype=np.int16)
    x, y, z = 100, 200, 2
    scal[x + 512 * (y + 512 * z)] = 77
    header = write_volume(tmp_path, dims, scal)
    vol = load_volume(header)
    assert vol.at(x, y, z) == 77
    assert vol.grid[z, y, x] == 77


def test_load_volume_size_mismatch(tmp_path):
    header = write_volume(tmp_path, (4, 4, 4), np.zeros(64))
    raw = tmp_path / "vol.raw"
    raw.write_bytes(raw.read_bytes()[:-1])
    with pytest.raises(SizeMismatchError):
        load_volume(header)


def test_load_volume_header_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{}")
    with pytest.raises(HeaderError):
        load_volume(p)
    p.write_text('{"dims": [4, 4], "spacing_mm": [1, 1, 1], "raw": "x", "scalar": "int16-le"}')
    with pytest.raises(HeaderError):
        load_volume(p)
    p.write_text('{"dims": [4, 4, 4], "spacing_mm": [1, 1, 1], "raw": "x", "scalar": "float32"}')
    with pytest.raises(HeaderError):
        load_volume(p)


def test_threshold_basics():
    vol = Volume((3, 1, 1), (1, 1, 1), np.array([0, 100, 200], dtype=np.int16))
    assert list(threshold(vol, 150).scalars) == [0, 0, 1]
    assert not threshold(vol, 500).scalars.any()


def test_threshold_counting_oracle_and_idempotence():
    rng = np.random.default_rng(3)
    scal = rng.integers(-2000, 2000, size=6 * 5 * 4, dtype=np.int16)
    vol = Volume((6, 5, 4), (1, 1, 1), scal)
    t = 123.0
    mask = threshold(vol, t)
    brute = sum(1 for v in scal if v > t)
    assert int(mask.scalars.sum()) == brute
    again = threshold(mask, 0.5)
    assert np.array_equal(again.scalars, mask.scalars)
    assert mask.dims == vol.dims and mask.spacing == vol.spacing


# -- mesh processing ---------------------------------------------------------


def test_modify_defaults_identity():
    mesh = uv_sphere_mesh(6, 8)
    out = modify_mesh(mesh, ModifyParams())
    assert np.array_equal(out.vertices, mesh.vertices)
    assert np.array_equal(out.faces, mesh.faces)


def test_modify_scale_bbox():
    cube = unit_cube_mesh()
    out = modify_mesh(cube, ModifyParams(scale_factor=2.0))
    lo, hi = bounding_box(out)
    assert lo.as_tuple() == (0, 0, 0)
    assert hi.as_tuple() == (2, 2, 2)


def test_modify_rotation_oracle():
    mesh = TriangleMesh(np.array([[0.0, 1.0, 0.0], [1, 0, 0], [0, 0, 1]]), np.array([[0, 1, 2]]))
    out = modify_mesh(mesh, ModifyParams(x_rotation_deg=90))
    assert np.max(np.abs(out.vertices[0] - np.array([0.0, 0.0, 1.0]))) < 1e-9
    # generic angle against an explicit rotation matrix
    deg = 37.0
    rad = math.radians(deg)
    oracle = np.array(
        [[1, 0, 0], [0, math.cos(rad), -math.sin(rad)], [0, math.sin(rad), math.cos(rad)]]
    )
    got = modify_mesh(mesh, ModifyParams(x_rotation_deg=deg)).vertices
    want = mesh.vertices @ oracle.T
    assert np.max(np.abs(got - want)) < 1e-12


def test_modify_order_scale_rotate_translate():
    mesh = TriangleMesh(np.array([[0.0, 1.0, 0.0], [1, 0, 0], [0, 0, 1]]), np.array([[0, 1, 2]]))
    out = modify_mesh(mesh, ModifyParams(x_rotation_deg=90, scale_factor=3, tx=10, ty=20, tz=30))
    # (0,1,0) -> scale (0,3,0) -> rotate (0,0,3) -> translate (10,20,33)
    assert np.max(np.abs(out.vertices[0] - np.array([10.0, 20.0, 33.0]))) < 1e-9


def test_modify_params_validation():
    with pytest.raises(ValueError):
        ModifyParams(scale_factor=0)
    assert ModifyParams(x_rotation_deg=270).x_rotation_deg == -90
    assert ModifyParams(x_rotation_deg=180).x_rotation_deg == 180
    assert ModifyParams(x_rotation_deg=-180).x_rotation_deg == 180


def test_bounding_box_cube_and_empty():
    cube = unit_cube_mesh()
    lo, hi = bounding_box(cube)
    assert lo.as_tuple() == (0, 0, 0) and hi.as_tuple() == (1, 1, 1)
    with pytest.raises(EmptyMeshError):
        bounding_box(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32)))


def test_normals_flat_triangle():
    mesh = TriangleMesh(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]), np.array([[0, 1, 2]]))
    out = compute_normals(mesh)
    assert np.allclose(out.normals, [[0, 0, 1]] * 3)


def test_sphere_mesh_normals_radial():
    mesh = uv_sphere_mesh(40, 60, radius_mm=10.0)
    out = compute_normals(TriangleMesh(mesh.vertices, mesh.faces))
    dirs = out.vertices / np.linalg.norm(out.vertices, axis=1)[:, None]
    cosang = np.einsum("ij,ij->i", dirs, out.normals)
    frac = np.mean(cosang > math.cos(math.radians(5)))
    assert frac >= 0.99
