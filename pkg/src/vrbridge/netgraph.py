"""Dataflow network of typed nodes: data connections between kind-matched
ports, directional parameter links with immediate propagation, and
demand-driven (pull) evaluation with whole-value caching.

Node behaviors live in a :class:`NodeCatalog` keyed by type name, so networks
are data and can be round-tripped through JSON. A network instance is
single-owner: all mutation and evaluation happens on one logical thread;
concurrent writers go through an external queue drained at frame boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .xform import AxisAngle, Mat4, Vec3


class NetworkError(Exception):
    pass


class DuplicateIdError(NetworkError):
    pass


class UnknownIdError(NetworkError):
    pass


class UnknownPortError(NetworkError):
    pass


class UnknownParamError(NetworkError):
    pass


class KindMismatchError(NetworkError):
    pass


class TypeMismatchError(NetworkError):
    pass


class CycleError(NetworkError):
    pass


class PortOccupiedError(NetworkError):
    pass


class MissingInputError(NetworkError):
    def __init__(self, node_id: str, port: str):
        super().__init__(f"node {node_id!r}: required input port {port!r} is not connected")
        self.node_id = node_id
        self.port = port


class NodeError(NetworkError):
    """A node's compute raised; the original exception is chained."""


class SchemaError(NetworkError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class PortKind(Enum):
    IMAGE = "Image"
    BASE = "Base"
    SCENE = "Scene"
    PARAM = "Param"


class NodeKind(Enum):
    PROCESSING = "Processing"
    SCENE_NODE = "SceneNode"
    MACRO = "Macro"


PARAM_TYPES = ("bool", "int", "real", "string", "trigger", "matrix", "rotation")


@dataclass(frozen=True)
class PortSpec:
    name: str
    kind: PortKind
    optional: bool = False


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str
    default: Any = None

    def __post_init__(self):
        if self.type not in PARAM_TYPES:
            raise ValueError(f"unknown param type {self.type!r}")


@dataclass(frozen=True)
class NodeType:
    """Catalog entry: ports, params and behavior for one node type name."""

    name: str
    kind: NodeKind
    inputs: tuple = ()
    outputs: tuple = ()
    params: tuple = ()
    compute: Optional[Callable] = None  # (ctx, inputs, params) -> {port: value}
    on_param_changed: Optional[Callable] = None  # (ctx, name) -> None
    on_trigger: Optional[Callable] = None  # (ctx, name) -> None


def _check_param_value(ptype: str, value) -> Any:
    if ptype == "bool":
        if isinstance(value, bool):
            return value
    elif ptype == "int":
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif ptype == "real":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif ptype == "string":
        if isinstance(value, str):
            return value
    elif ptype == "matrix":
        if isinstance(value, Mat4):
            return value
    elif ptype == "rotation":
        if isinstance(value, AxisAngle):
            return value
    elif ptype == "trigger":
        raise TypeMismatchError("trigger params hold no value; use fire_trigger")
    raise TypeMismatchError(f"value {value!r} does not match param type {ptype!r}")


class Node:
    """Runtime node instance; owned by exactly one :class:`Network`."""

    def __init__(self, node_id: str, node_type: NodeType, macro: "MacroBody | None" = None):
        self.id = node_id
        self.type = node_type
        self.macro = macro
        self.params: dict = {}
        for spec in node_type.params:
            if spec.type != "trigger":
                self.params[spec.name] = spec.default
        self.dirty = True
        self.cache: dict = {}
        self._param_specs = {p.name: p for p in node_type.params}
        self._inputs = {p.name: p for p in node_type.inputs}
        self._outputs = {p.name: p for p in node_type.outputs}
        # input and output namespaces are separate; names must be unique per side
        if len(self._inputs) != len(node_type.inputs) or len(self._outputs) != len(node_type.outputs):
            raise ValueError(f"node type {node_type.name!r} reuses a port name")

    @property
    def kind(self) -> NodeKind:
        return self.type.kind

    def param_spec(self, name: str) -> ParamSpec:
        try:
            return self._param_specs[name]
        except KeyError:
            raise UnknownParamError(f"node {self.id!r} has no param {name!r}") from None


class MacroBody:
    """Sub-network plus the port/param exports that form the macro's surface."""

    def __init__(self, subnetwork: "Network", exports: dict):
        self.subnetwork = subnetwork
        self.exports = exports
        self._last_injected: dict = {}

    def make_type(self, catalog: "NodeCatalog") -> NodeType:
        inputs = []
        for outer, inner in self.exports.get("inputs", {}).items():
            node, port = self.subnetwork._resolve_port(inner, "input")
            inputs.append(PortSpec(outer, node._inputs[port].kind, optional=node._inputs[port].optional))
        outputs = []
        for outer, inner in self.exports.get("outputs", {}).items():
            node, port = self.subnetwork._resolve_port(inner, "output")
            outputs.append(PortSpec(outer, node._outputs[port].kind))
        params = []
        for outer, inner in self.exports.get("params", {}).items():
            nid, pname = self.subnetwork._split_ref(inner)
            spec = self.subnetwork.node(nid).param_spec(pname)
            current = self.subnetwork.node(nid).params.get(pname, spec.default)
            params.append(ParamSpec(outer, spec.type, current))
        return NodeType("Macro", NodeKind.MACRO, tuple(inputs), tuple(outputs), tuple(params))


class NodeCatalog:
    def __init__(self):
        self._types: dict = {}

    def register(self, node_type: NodeType) -> None:
        if node_type.name in self._types:
            raise DuplicateIdError(f"node type {node_type.name!r} already registered")
        self._types[node_type.name] = node_type

    def get(self, name: str) -> NodeType:
        try:
            return self._types[name]
        except KeyError:
            raise UnknownIdError(f"unknown node type {name!r}") from None

    def has(self, name: str) -> bool:
        return name in self._types


@dataclass
class ComputeContext:
    """Handed to node behaviors; set_param routes through the owning network."""

    network: "Network"
    node: Node
    _path: set = field(default_factory=set)

    def set_param(self, name: str, value) -> None:
        self.network._set_param(self.node, name, value, self._path)

    def get_param(self, name: str):
        self.node.param_spec(name)
        return self.node.params[name]


class Network:
    def __init__(self, catalog: NodeCatalog | None = None):
        if catalog is None:
            from .nodes import default_catalog

            catalog = default_catalog()
        self.catalog = catalog
        self.nodes: dict = {}
        self._data_in: dict = {}  # (to_id, to_port) -> (from_id, from_port)
        self._param_links: list = []  # (from_id, from_param, to_id, to_param)
        self.recompute_counts: dict = {}
        self.base_dir = None  # directory of the network file, for relative paths
        self._injected: dict = {}  # (node_id, port) -> value, for macro evaluation

    # -- structure ----------------------------------------------------------

    def add_node(self, node_id: str, type_name: str, params: dict | None = None) -> Node:
        """Create and insert a catalog node; returns the instance."""
        if node_id in self.nodes:
            raise DuplicateIdError(f"node id {node_id!r} already in network")
        if "." in node_id:
            raise SchemaError(f"nodes[{node_id}]", "node ids must not contain '.'")
        node = Node(node_id, self.catalog.get(type_name))
        self.nodes[node_id] = node
        if params:
            for name, value in params.items():
                self.set_param(node_id, name, value)
        return node

    def add_macro(self, node_id: str, subnetwork: "Network", exports: dict) -> Node:
        if node_id in self.nodes:
            raise DuplicateIdError(f"node id {node_id!r} already in network")
        body = MacroBody(subnetwork, exports)
        try:
            node_type = body.make_type(self.catalog)
        except (UnknownIdError, UnknownPortError, UnknownParamError) as exc:
            raise SchemaError(f"nodes[{node_id}].exports", f"dangling export: {exc}") from exc
        node = Node(node_id, node_type, macro=body)
        self.nodes[node_id] = node
        return node

    def remove_node(self, node_id: str) -> None:
        """Drop a node along with every incident data connection and param link."""
        self.node(node_id)  # raises UnknownIdError
        for key in [k for k, v in self._data_in.items() if k[0] == node_id or v[0] == node_id]:
            to_id = key[0]
            del self._data_in[key]
            if to_id != node_id:
                self._mark_dirty(to_id)
        self._param_links = [l for l in self._param_links if l[0] != node_id and l[2] != node_id]
        del self.nodes[node_id]

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownIdError(f"no node with id {node_id!r}") from None

    def _split_ref(self, ref: str):
        if "." not in ref:
            raise UnknownPortError(f"expected 'node.port' reference, got {ref!r}")
        node_id, name = ref.split(".", 1)
        return node_id, name

    def _resolve_port(self, ref: str, direction: str):
        node_id, port = self._split_ref(ref)
        node = self.node(node_id)
        table = node._inputs if direction == "input" else node._outputs
        if port not in table:
            raise UnknownPortError(f"node {node_id!r} has no {direction} port {port!r}")
        return node, port

    def connect(self, from_ref: str, to_ref: str) -> None:
        """Add a data connection ``from node.outPort`` to ``node.inPort``."""
        from_node, from_port = self._resolve_port(from_ref, "output")
        to_node, to_port = self._resolve_port(to_ref, "input")
        out_kind = from_node._outputs[from_port].kind
        in_kind = to_node._inputs[to_port].kind
        if out_kind != in_kind:
            raise KindMismatchError(
                f"cannot connect {out_kind.value} output {from_ref!r} to {in_kind.value} input {to_ref!r}"
            )
        if (to_node.id, to_port) in self._data_in:
            raise PortOccupiedError(f"input port {to_ref!r} already has a connection")
        if from_node.id == to_node.id or self._reaches(to_node.id, from_node.id):
            raise CycleError(f"connecting {from_ref!r} -> {to_ref!r} would create a cycle")
        self._data_in[(to_node.id, to_port)] = (from_node.id, from_port)
        self._mark_dirty(to_node.id)

    def _consumers(self, node_id: str):
        return {to_id for (to_id, _), (f_id, _) in self._data_in.items() if f_id == node_id}

    def _reaches(self, start: str, goal: str) -> bool:
        stack, seen = [start], set()
        while stack:
            cur = stack.pop()
            if cur == goal:
                return True
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(self._consumers(cur))
        return False

    def connect_params(self, from_ref: str, to_ref: str) -> None:
        """Directional param link; the current source value is pushed at once."""
        from_id, from_param = self._split_ref(from_ref)
        to_id, to_param = self._split_ref(to_ref)
        src_spec = self.node(from_id).param_spec(from_param)
        dst_spec = self.node(to_id).param_spec(to_param)
        if src_spec.type != dst_spec.type:
            raise TypeMismatchError(
                f"param link {from_ref!r} ({src_spec.type}) -> {to_ref!r} ({dst_spec.type}): types differ"
            )
        if (from_id, from_param) == (to_id, to_param) or self._param_reaches(
            (to_id, to_param), (from_id, from_param)
        ):
            raise CycleError(f"param link {from_ref!r} -> {to_ref!r} would create a cycle")
        self._param_links.append((from_id, from_param, to_id, to_param))
        if src_spec.type != "trigger":
            value = self.node(from_id).params[from_param]
            if value is not None:
                self._set_param(self.node(to_id), to_param, value, set())

    def _param_reaches(self, start, goal) -> bool:
        stack, seen = [start], set()
        while stack:
            cur = stack.pop()
            if cur == goal:
                return True
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend((t_id, t_p) for f_id, f_p, t_id, t_p in self._param_links if (f_id, f_p) == cur)
        return False

    # -- params ---------------------------------------------------------------

    def set_param(self, node_id: str, name: str, value) -> None:
        """Store a param value; propagates along param links and marks the
        node and its data-downstream dirty."""
        self._set_param(self.node(node_id), name, value, set())

    def get_param(self, node_id: str, name: str):
        node = self.node(node_id)
        node.param_spec(name)
        return node.params[name]

    def _set_param(self, node: Node, name: str, value, path: set) -> None:
        # `path` tracks params on the current propagation stack: it breaks
        # cycles that run through node handlers while still allowing a param
        # to be rewritten by sibling updates within one wave.
        spec = node.param_spec(name)
        value = _check_param_value(spec.type, value)
        key = (node.id, name)
        if key in path:
            return
        path.add(key)
        try:
            node.params[name] = value
            if node.macro is not None:
                inner = node.macro.exports.get("params", {}).get(name)
                if inner is not None:
                    inner_id, inner_param = node.macro.subnetwork._split_ref(inner)
                    node.macro.subnetwork.set_param(inner_id, inner_param, value)
            self._mark_dirty(node.id)
            if node.type.on_param_changed is not None:
                node.type.on_param_changed(ComputeContext(self, node, path), name)
            for f_id, f_p, t_id, t_p in list(self._param_links):
                if (f_id, f_p) == key:
                    self._set_param(self.node(t_id), t_p, value, path)
        finally:
            path.remove(key)

    def fire_trigger(self, node_id: str, name: str) -> None:
        node = self.node(node_id)
        spec = node.param_spec(name)
        if spec.type != "trigger":
            raise TypeMismatchError(f"param {name!r} of node {node_id!r} is {spec.type}, not a trigger")
        if node.type.on_trigger is not None:
            node.type.on_trigger(ComputeContext(self, node), name)

    def _mark_dirty(self, node_id: str) -> None:
        stack = [node_id]
        first = True
        while stack:
            cur = stack.pop()
            node = self.nodes.get(cur)
            if node is None:
                continue
            if node.dirty and not first:
                continue  # consumers were dirtied when this one was marked
            node.dirty = True
            first = False
            stack.extend(self._consumers(cur))

    # -- evaluation -----------------------------------------------------------

    def set_injected(self, node_id: str, port: str, value) -> None:
        """External input override used by macro evaluation."""
        key = (node_id, port)
        if self._injected.get(key) is not value:
            self._injected[key] = value
            self._mark_dirty(node_id)

    def evaluate(self, port_ref: str):
        """Pull one output port, recomputing only dirty nodes on the path."""
        node, port = self._resolve_port(port_ref, "output")
        return self._eval_node(node, [])[port]

    def _eval_node(self, node: Node, stack: list) -> dict:
        if not node.dirty and node.cache:
            return node.cache
        if node.id in stack:
            raise CycleError(f"evaluation cycle through node {node.id!r}")
        stack.append(node.id)
        try:
            inputs: dict = {}
            for spec in node.type.inputs:
                key = (node.id, spec.name)
                if key in self._injected:
                    inputs[spec.name] = self._injected[key]
                    continue
                conn = self._data_in.get(key)
                if conn is None:
                    if spec.optional:
                        inputs[spec.name] = None
                        continue
                    raise MissingInputError(node.id, spec.name)
                upstream = self.node(conn[0])
                inputs[spec.name] = self._eval_node(upstream, stack)[conn[1]]
            if node.macro is not None:
                outputs = self._eval_macro(node, inputs)
            elif node.type.compute is not None:
                try:
                    outputs = node.type.compute(ComputeContext(self, node), inputs, dict(node.params))
                except NetworkError:
                    raise
                except Exception as exc:
                    raise NodeError(f"node {node.id!r} ({node.type.name}) failed: {exc}") from exc
            else:
                outputs = {}
            missing = {p.name for p in node.type.outputs} - outputs.keys()
            if missing:
                raise NodeError(f"node {node.id!r} compute returned no value for ports {sorted(missing)}")
            node.cache = outputs
            node.dirty = False
            self.recompute_counts[node.id] = self.recompute_counts.get(node.id, 0) + 1
            return outputs
        finally:
            stack.pop()

    def _eval_macro(self, node: Node, inputs: dict) -> dict:
        body = node.macro
        sub = body.subnetwork
        for outer, inner in body.exports.get("inputs", {}).items():
            inner_id, inner_port = sub._split_ref(inner)
            sub.set_injected(inner_id, inner_port, inputs[outer])
        outputs = {}
        for outer, inner in body.exports.get("outputs", {}).items():
            outputs[outer] = sub.evaluate(inner)
        return outputs

    def reset_counters(self) -> None:
        self.recompute_counts = {}

    # -- oracles used by tests -------------------------------------------------

    def downstream_of(self, node_id: str) -> set:
        """Transitive data consumers of a node, the node excluded."""
        result: set = set()
        stack = list(self._consumers(node_id))
        while stack:
            cur = stack.pop()
            if cur in result:
                continue
            result.add(cur)
            stack.extend(self._consumers(cur))
        return result

    def upstream_closure(self, node_id: str) -> set:
        """The node plus everything it transitively pulls from."""
        result = {node_id}
        stack = [node_id]
        while stack:
            cur = stack.pop()
            for (t_id, _), (f_id, _) in self._data_in.items():
                if t_id == cur and f_id not in result:
                    result.add(f_id)
                    stack.append(f_id)
        return result


# ---------------------------------------------------------------------------
# serialization


def _param_to_json(spec: ParamSpec, value):
    if spec.type == "matrix":
        return list(value.elements)
    if spec.type == "rotation":
        return [value.axis.x, value.axis.y, value.axis.z, value.angle]
    return value


def _param_from_json(spec: ParamSpec, raw, path: str):
    try:
        if spec.type == "matrix":
            return Mat4(tuple(raw))
        if spec.type == "rotation":
            ax, ay, az, angle = raw
            return AxisAngle(Vec3(ax, ay, az), angle)
        return raw
    except (TypeError, ValueError) as exc:
        raise SchemaError(path, f"invalid {spec.type} value: {exc}") from None


def _network_to_doc(net: Network) -> dict:
    nodes = []
    for node in net.nodes.values():
        entry: dict = {"id": node.id, "type": node.type.name}
        params = {}
        for spec in node.type.params:
            if spec.type == "trigger":
                continue
            value = node.params[spec.name]
            if value is None:
                continue
            if value != spec.default:
                params[spec.name] = _param_to_json(spec, value)
        if params:
            entry["params"] = params
        if node.macro is not None:
            entry["subnetwork"] = _network_to_doc(node.macro.subnetwork)
            entry["exports"] = node.macro.exports
        nodes.append(entry)
    by_endpoints = lambda d: (d["from"], d["to"])  # noqa: E731
    connections = sorted(
        ({"from": f"{f_id}.{f_p}", "to": f"{t_id}.{t_p}"} for (t_id, t_p), (f_id, f_p) in net._data_in.items()),
        key=by_endpoints,
    )
    param_links = sorted(
        ({"from": f"{f_id}.{f_p}", "to": f"{t_id}.{t_p}"} for f_id, f_p, t_id, t_p in net._param_links),
        key=by_endpoints,
    )
    return {"nodes": nodes, "connections": connections, "paramLinks": param_links}


def save_network(net: Network) -> str:
    """Canonical JSON form; stable under load/save round trips."""
    return json.dumps(_network_to_doc(net), indent=2, sort_keys=True) + "\n"


def _network_from_doc(doc, catalog: NodeCatalog, path: str) -> Network:
    if not isinstance(doc, dict):
        raise SchemaError(path, "document must be a JSON object")
    net = Network(catalog)
    nodes = doc.get("nodes")
    if not isinstance(nodes, list):
        raise SchemaError(f"{path}.nodes", "missing or not a list")
    for i, entry in enumerate(nodes):
        epath = f"{path}.nodes[{i}]"
        if not isinstance(entry, dict) or "id" not in entry or "type" not in entry:
            raise SchemaError(epath, "node entries need 'id' and 'type'")
        node_id, type_name = entry["id"], entry["type"]
        if not isinstance(node_id, str) or not isinstance(type_name, str):
            raise SchemaError(epath, "'id' and 'type' must be strings")
        if type_name == "Macro":
            if "subnetwork" not in entry or "exports" not in entry:
                raise SchemaError(epath, "macro nodes need 'subnetwork' and 'exports'")
            sub = _network_from_doc(entry["subnetwork"], catalog, f"{epath}.subnetwork")
            try:
                node = net.add_macro(node_id, sub, entry["exports"])
            except DuplicateIdError as exc:
                raise SchemaError(epath, str(exc)) from None
        else:
            if not catalog.has(type_name):
                raise SchemaError(f"{epath}.type", f"unknown node type {type_name!r}")
            try:
                node = net.add_node(node_id, type_name)
            except DuplicateIdError as exc:
                raise SchemaError(epath, str(exc)) from None
        raw_params = entry.get("params", {})
        if not isinstance(raw_params, dict):
            raise SchemaError(f"{epath}.params", "params must be an object")
        for name, raw in raw_params.items():
            ppath = f"{epath}.params.{name}"
            try:
                spec = node.param_spec(name)
            except UnknownParamError as exc:
                raise SchemaError(ppath, str(exc)) from None
            value = _param_from_json(spec, raw, ppath)
            try:
                net.set_param(node_id, name, value)
            except TypeMismatchError as exc:
                raise SchemaError(ppath, str(exc)) from None
    for key, cls in (("connections", "data"), ("paramLinks", "param")):
        entries = doc.get(key, [])
        if not isinstance(entries, list):
            raise SchemaError(f"{path}.{key}", "must be a list")
        for i, entry in enumerate(entries):
            epath = f"{path}.{key}[{i}]"
            if not isinstance(entry, dict) or "from" not in entry or "to" not in entry:
                raise SchemaError(epath, "connection entries need 'from' and 'to'")
            try:
                if cls == "data":
                    net.connect(entry["from"], entry["to"])
                else:
                    net.connect_params(entry["from"], entry["to"])
            except NetworkError as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(epath, str(exc)) from None
    return net


def load_network(json_text: str, catalog: NodeCatalog | None = None) -> Network:
    """Parse the network JSON schema; raises SchemaError with a JSON path."""
    if catalog is None:
        from .nodes import default_catalog

        catalog = default_catalog()
    try:
        doc = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return _network_from_doc(doc, catalog, "$")


def macro_expand(net: Network) -> Network:
    """Inline every macro (recursively); evaluation-equivalent flat network."""
    flat = Network(net.catalog)
    flat.base_dir = net.base_dir

    rename: dict = {}  # macro_id -> {inner_id: flat_id}
    for node in net.nodes.values():
        if node.macro is None:
            clone = flat.add_node(node.id, node.type.name)
            clone.params = dict(node.params)
            clone.dirty = True
            continue
        inner_flat = macro_expand(node.macro.subnetwork)
        mapping = {}
        for inner in inner_flat.nodes.values():
            flat_id = f"{node.id}/{inner.id}"
            if inner.macro is not None:  # nested macros are gone after recursion
                raise SchemaError(f"nodes[{node.id}]", "nested macro survived expansion")
            clone = flat.add_node(flat_id, inner.type.name)
            clone.params = dict(inner.params)
            mapping[inner.id] = flat_id
        for (t_id, t_p), (f_id, f_p) in inner_flat._data_in.items():
            flat.connect(f"{mapping[f_id]}.{f_p}", f"{mapping[t_id]}.{t_p}")
        for f_id, f_p, t_id, t_p in inner_flat._param_links:
            flat.connect_params(f"{mapping[f_id]}.{f_p}", f"{mapping[t_id]}.{t_p}")
        rename[node.id] = mapping

    def resolve_out(node_id: str, port: str):
        node = net.node(node_id)
        if node.macro is None:
            return node_id, port
        inner = node.macro.exports["outputs"][port]
        iid, iport = node.macro.subnetwork._split_ref(inner)
        return rename[node_id][iid], iport

    def resolve_in(node_id: str, port: str):
        node = net.node(node_id)
        if node.macro is None:
            return node_id, port
        inner = node.macro.exports["inputs"][port]
        iid, iport = node.macro.subnetwork._split_ref(inner)
        return rename[node_id][iid], iport

    def resolve_param(node_id: str, name: str):
        node = net.node(node_id)
        if node.macro is None:
            return node_id, name
        inner = node.macro.exports["params"][name]
        iid, iname = node.macro.subnetwork._split_ref(inner)
        return rename[node_id][iid], iname

    for (t_id, t_p), (f_id, f_p) in net._data_in.items():
        fi, fp = resolve_out(f_id, f_p)
        ti, tp = resolve_in(t_id, t_p)
        flat.connect(f"{fi}.{fp}", f"{ti}.{tp}")
    for f_id, f_p, t_id, t_p in net._param_links:
        fi, fp = resolve_param(f_id, f_p)
        ti, tp = resolve_param(t_id, t_p)
        flat.connect_params(f"{fi}.{fp}", f"{ti}.{tp}")
    return flat
