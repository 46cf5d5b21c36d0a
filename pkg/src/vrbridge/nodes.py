"""Standard node catalog for the dataflow network.

Data ports: volumes travel on Image ports, meshes and generic values on Base
ports, assembled scenes on Scene ports. Tracking coordinates travel as matrix
and rotation params, so pose-driven networks are wired with param links (the
bridge node publishes HMDPoseMatrix / HMDQuaternionRot/Vec each frame).
"""

from __future__ import annotations

from pathlib import Path

from . import meshvol, stereorender
from .netgraph import (
    NodeCatalog,
    NodeKind,
    NodeType,
    ParamSpec,
    PortKind,
    PortSpec,
)
from .xform import (
    AxisAngle,
    Mat4,
    RigidTransform,
    Vec3,
    axis_angle_from_quat,
    compose,
    decompose,
    inverse_rigid,
    mat_mul,
    quat_from_axis_angle,
)


def _resolve_path(ctx, raw: str) -> Path:
    p = Path(raw)
    if not p.is_absolute() and ctx.network.base_dir is not None:
        p = Path(ctx.network.base_dir) / p
    return p


def _mesh_load(ctx, inputs, params):
    fmt = None if params["format"] == "auto" else params["format"]
    return {"mesh": meshvol.load_mesh(_resolve_path(ctx, params["path"]), fmt)}


def _volume_load(ctx, inputs, params):
    return {"volume": meshvol.load_volume(_resolve_path(ctx, params["path"]))}


def _threshold(ctx, inputs, params):
    return {"mask": meshvol.threshold(inputs["volume"], params["t"])}


def _mask_stats(ctx, inputs, params):
    mask = inputs["mask"]
    count = int((mask.scalars != 0).sum())
    return {"stats": {"count": count, "fraction": count / mask.scalars.size}}


def _iso_surface(ctx, inputs, params):
    return {"mesh": meshvol.isosurface(inputs["volume"], params["iso"])}


def _mesh_modify(ctx, inputs, params):
    mp = meshvol.ModifyParams(
        x_rotation_deg=params["X-Rotation"],
        scale_factor=params["Scalefactor"],
        tx=params["X-Translation[mm]"],
        ty=params["Y-Translation[mm]"],
        tz=params["Z-Translation[mm]"],
    )
    return {"mesh": meshvol.modify_mesh(inputs["mesh"], mp)}


def _scene_assemble(ctx, inputs, params):
    mesh = inputs["mesh"]
    if params["textured"] and mesh.uvs is None:
        mesh = meshvol.spherical_uvs(mesh)
    s = params["modelScale"]
    material = stereorender.Material(
        base_color=(params["colorR"], params["colorG"], params["colorB"], 1.0),
        shading=params["shading"],
        textured=params["textured"],
    )
    model = Mat4((s, 0, 0, 0, 0, s, 0, 0, 0, 0, s, 0, 0, 0, 0, 1))
    scene = stereorender.Scene(
        items=[stereorender.SceneItem(mesh, model, material)],
        background=(params["bgR"], params["bgG"], params["bgB"], 1.0),
    )
    return {"scene": scene}


def _hmd_bridge(ctx, inputs, params):
    scene = inputs.get("scene")
    mesh = inputs.get("mesh")
    if scene is None and mesh is None:
        raise ValueError("bridge node needs a scene or a mesh input connected")
    if scene is None:
        s = 0.001  # bare mesh input: millimeters to meters with a default material
        model = Mat4((s, 0, 0, 0, 0, s, 0, 0, 0, 0, s, 0, 0, 0, 0, 1))
        scene = stereorender.Scene(items=[stereorender.SceneItem(mesh, model)])
    return {"scene": scene}


def _hmd_bridge_trigger(ctx, name):
    # "Offline" runs without hardware, which is this artifact's only mode
    if name == "Offline":
        ctx.set_param("offlineArmed", True)


def _decompose_changed(ctx, name):
    if name != "matrix":
        return
    r = decompose(ctx.get_param("matrix"))
    ctx.set_param("rotation", axis_angle_from_quat(r.rotation))
    ctx.set_param("tx", r.translation.x)
    ctx.set_param("ty", r.translation.y)
    ctx.set_param("tz", r.translation.z)


def _compose_changed(ctx, name):
    if name not in ("rotation", "tx", "ty", "tz"):
        return
    aa = ctx.get_param("rotation")
    t = Vec3(ctx.get_param("tx"), ctx.get_param("ty"), ctx.get_param("tz"))
    ctx.set_param("matrix", compose(RigidTransform(quat_from_axis_angle(aa), t)))


def _matrix_arith_changed(ctx, name):
    if name not in ("a", "b", "op"):
        return
    op = ctx.get_param("op")
    a, b = ctx.get_param("a"), ctx.get_param("b")
    if op == "multiply":
        ctx.set_param("result", mat_mul(a, b))
    elif op == "invert":
        ctx.set_param("result", inverse_rigid(a))
    else:
        raise ValueError(f"unknown matrix op {op!r} (multiply|invert)")


_IDENTITY_ROTATION = AxisAngle(Vec3(0.0, 0.0, 1.0), 0.0)


def default_catalog() -> NodeCatalog:
    cat = NodeCatalog()
    cat.register(
        NodeType(
            "MeshLoad",
            NodeKind.PROCESSING,
            outputs=(PortSpec("mesh", PortKind.BASE),),
            params=(ParamSpec("path", "string", ""), ParamSpec("format", "string", "auto")),
            compute=_mesh_load,
        )
    )
    cat.register(
        NodeType(
            "VolumeLoad",
            NodeKind.PROCESSING,
            outputs=(PortSpec("volume", PortKind.IMAGE),),
            params=(ParamSpec("path", "string", ""),),
            compute=_volume_load,
        )
    )
    cat.register(
        NodeType(
            "Threshold",
            NodeKind.PROCESSING,
            inputs=(PortSpec("volume", PortKind.IMAGE),),
            outputs=(PortSpec("mask", PortKind.IMAGE),),
            params=(ParamSpec("t", "real", 0.0),),
            compute=_threshold,
        )
    )
    cat.register(
        NodeType(
            "MaskStats",
            NodeKind.PROCESSING,
            inputs=(PortSpec("mask", PortKind.IMAGE),),
            outputs=(PortSpec("stats", PortKind.BASE),),
            compute=_mask_stats,
        )
    )
    cat.register(
        NodeType(
            "IsoSurface",
            NodeKind.PROCESSING,
            inputs=(PortSpec("volume", PortKind.IMAGE),),
            outputs=(PortSpec("mesh", PortKind.BASE),),
            params=(ParamSpec("iso", "real", 0.5),),
            compute=_iso_surface,
        )
    )
    cat.register(
        NodeType(
            "MeshModify",
            NodeKind.PROCESSING,
            inputs=(PortSpec("mesh", PortKind.BASE),),
            outputs=(PortSpec("mesh", PortKind.BASE),),
            params=(
                ParamSpec("X-Rotation", "real", 0.0),
                ParamSpec("Scalefactor", "real", 1.0),
                ParamSpec("X-Translation[mm]", "real", 0.0),
                ParamSpec("Y-Translation[mm]", "real", 0.0),
                ParamSpec("Z-Translation[mm]", "real", 0.0),
            ),
            compute=_mesh_modify,
        )
    )
    cat.register(
        NodeType(
            "SceneAssembler",
            NodeKind.SCENE_NODE,
            inputs=(PortSpec("mesh", PortKind.BASE),),
            outputs=(PortSpec("scene", PortKind.SCENE),),
            params=(
                ParamSpec("colorR", "real", 0.9),
                ParamSpec("colorG", "real", 0.87),
                ParamSpec("colorB", "real", 0.80),
                ParamSpec("bgR", "real", 0.05),
                ParamSpec("bgG", "real", 0.06),
                ParamSpec("bgB", "real", 0.08),
                ParamSpec("shading", "string", "lambert"),
                ParamSpec("textured", "bool", False),
                ParamSpec("modelScale", "real", 0.001),
            ),
            compute=_scene_assemble,
        )
    )
    cat.register(
        NodeType(
            "HmdBridge",
            NodeKind.PROCESSING,
            inputs=(
                PortSpec("scene", PortKind.SCENE, optional=True),
                PortSpec("mesh", PortKind.BASE, optional=True),
            ),
            outputs=(PortSpec("scene", PortKind.SCENE),),
            params=(
                ParamSpec("HMDPoseMatrix", "matrix", Mat4.identity()),
                ParamSpec("HMDQuaternionRot/Vec", "rotation", _IDENTITY_ROTATION),
                ParamSpec("CompanionPoseMatrix", "matrix", Mat4.identity()),
                ParamSpec("offlineArmed", "bool", True),
                ParamSpec("Offline", "trigger"),
            ),
            compute=_hmd_bridge,
            on_trigger=_hmd_bridge_trigger,
        )
    )
    cat.register(
        NodeType(
            "DecomposeMatrix",
            NodeKind.PROCESSING,
            params=(
                ParamSpec("matrix", "matrix", Mat4.identity()),
                ParamSpec("rotation", "rotation", _IDENTITY_ROTATION),
                ParamSpec("tx", "real", 0.0),
                ParamSpec("ty", "real", 0.0),
                ParamSpec("tz", "real", 0.0),
            ),
            on_param_changed=_decompose_changed,
        )
    )
    cat.register(
        NodeType(
            "ComposeMatrix",
            NodeKind.PROCESSING,
            params=(
                ParamSpec("rotation", "rotation", _IDENTITY_ROTATION),
                ParamSpec("tx", "real", 0.0),
                ParamSpec("ty", "real", 0.0),
                ParamSpec("tz", "real", 0.0),
                ParamSpec("matrix", "matrix", Mat4.identity()),
            ),
            on_param_changed=_compose_changed,
        )
    )
    cat.register(
        NodeType(
            "MatrixArithmetic",
            NodeKind.PROCESSING,
            params=(
                ParamSpec("a", "matrix", Mat4.identity()),
                ParamSpec("b", "matrix", Mat4.identity()),
                ParamSpec("op", "string", "multiply"),
                ParamSpec("result", "matrix", Mat4.identity()),
            ),
            on_param_changed=_matrix_arith_changed,
        )
    )
    return cat
