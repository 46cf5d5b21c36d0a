"""WebSocket protocol server and companion-UI host.

One frame-loop thread owns the device and network; WebSocket clients exchange
messages with it through two queues: an inbound control queue (param edits,
live poses) drained at frame boundaries, and per-client outbound queues where
stale frames are dropped under backpressure but timing/control messages never
are. The first connected client holds the pilot role (pose authority); the
rest observe.

Text frames are JSON messages ``{"type": "pose"|"param"|"subscribe"|"error"|
"timing"|"hello"|"role", ...}``; binary frames carry pixels per
:mod:`vrbridge.bridgecli.wire`.
"""

from __future__ import annotations

import asyncio
import json
import queue
import threading
from collections import deque
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from .. import hmdsim, netgraph
from ..xform import QuatRotation, RigidTransform, Vec3
from . import wire
from .config import RunConfig
from .loop import BridgeSession, FrameOutput, SessionError

STREAMS = ("side-by-side", "companion")
_STREAM_EYE = {"side-by-side": wire.EYE_SIDE_BY_SIDE, "companion": wire.EYE_COMPANION}


class ClientQueue:
    """Outbound queue: at most 2 pending pixel frames (oldest dropped first),
    JSON control/timing messages unbounded."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: deque = deque()
        self._ready = threading.Event()

    def put_frame(self, data: bytes) -> None:
        with self._lock:
            pending = [i for i, (kind, _) in enumerate(self._items) if kind == "frame"]
            if len(pending) >= 2:
                del self._items[pending[0]]
            self._items.append(("frame", data))
            self._ready.set()

    def put_json(self, doc: dict) -> None:
        with self._lock:
            self._items.append(("json", doc))
            self._ready.set()

    def get(self, timeout: float):
        if not self._ready.wait(timeout):
            return None
        with self._lock:
            if not self._items:
                self._ready.clear()
                return None
            item = self._items.popleft()
            if not self._items:
                self._ready.clear()
            return item


class Client:
    _next_id = 0

    def __init__(self):
        Client._next_id += 1
        self.id = Client._next_id
        self.queue = ClientQueue()
        self.stream = "side-by-side"
        self.pilot = False


class Hub:
    """Client registry plus the two bridges between asyncio and the loop thread."""

    def __init__(self, session: BridgeSession):
        self.session = session
        self.inbound: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._clients: dict = {}
        self.stop = threading.Event()

    def register(self) -> Client:
        client = Client()
        with self._lock:
            client.pilot = not any(c.pilot for c in self._clients.values())
            self._clients[client.id] = client
        return client

    def unregister(self, client: Client) -> None:
        promoted = None
        with self._lock:
            self._clients.pop(client.id, None)
            if client.pilot and self._clients:
                promoted = next(iter(self._clients.values()))
                promoted.pilot = True
        if promoted is not None:
            promoted.queue.put_json({"type": "role", "pilot": True})

    def clients(self):
        with self._lock:
            return list(self._clients.values())

    def broadcast(self, out: FrameOutput) -> None:
        encoded = {}
        clients = self.clients()
        for name in STREAMS:
            if any(c.stream == name for c in clients):
                fb = out.side_by_side if name == "side-by-side" else out.companion
                encoded[name] = wire.encode_frame(
                    wire.FrameMessage(
                        out.frame_index, _STREAM_EYE[name], fb.width, fb.height,
                        fb.color.tobytes(),
                    )
                )
        timing = self._timing_message(out)
        for c in clients:
            if c.stream in encoded:
                c.queue.put_frame(encoded[c.stream])
            c.queue.put_json(timing)

    def _timing_message(self, out: FrameOutput) -> dict:
        rec = out.record
        recent = self.session.device.timing.records[-90:]
        if len(recent) >= 2:
            span = recent[-1].presented_vsync - recent[0].presented_vsync
            fps = self.session.hmd.refresh_hz * (len(recent) - 1) / span if span else 0.0
        else:
            fps = 0.0
        pose = out.pose.device_to_world
        return {
            "type": "timing",
            "frame": rec.frame_index,
            "sceneMs": rec.scene_ms,
            "otherMs": rec.other_ms,
            "compositorMs": rec.compositor_ms,
            "idleMs": rec.idle_ms,
            "dropped": rec.dropped,
            "presentedVsync": rec.presented_vsync,
            "fps": fps,
            "pose": {
                "position": [pose.translation.x, pose.translation.y, pose.translation.z],
                "orientation": [pose.rotation.x, pose.rotation.y, pose.rotation.z, pose.rotation.w],
            },
        }

    # -- loop thread ------------------------------------------------------------

    def run_loop(self, frames: int | None) -> None:
        produced = 0
        while not self.stop.is_set() and (frames is None or produced < frames):
            self._drain_inbound()
            try:
                out = self.session.run_frame()
            except hmdsim.SourceExhaustedError:
                break
            self.broadcast(out)
            produced += 1

    def _drain_inbound(self) -> None:
        while True:
            try:
                kind, client, payload = self.inbound.get_nowait()
            except queue.Empty:
                return
            try:
                if kind == "pose":
                    hmdsim.inject_live_pose(self.session.device, payload)
                elif kind == "param":
                    node, name, value = payload
                    self.session.apply_param(node, name, value)
            except (netgraph.NetworkError, hmdsim.WrongSourceKindError, ValueError) as exc:
                if client is not None:
                    client.queue.put_json({"type": "error", "reason": str(exc)})


def _hello_message(hub: Hub, client: Client) -> dict:
    session = hub.session
    params = []
    for node in session.network.nodes.values():
        for spec in node.type.params:
            if spec.type == "trigger":
                continue
            value = node.params[spec.name]
            params.append(
                {
                    "node": node.id,
                    "name": spec.name,
                    "type": spec.type,
                    "value": None if value is None else netgraph._param_to_json(spec, value),
                }
            )
    return {
        "type": "hello",
        "role": "pilot" if client.pilot else "observer",
        "streams": list(STREAMS),
        "params": params,
        "hmd": {
            "eyeWidthPx": session.hmd.eye_width_px,
            "eyeHeightPx": session.hmd.eye_height_px,
            "refreshHz": session.hmd.refresh_hz,
        },
        "poseSource": session.cfg.pose_kind(),
    }


def _parse_pose_message(doc: dict, now_s: float) -> hmdsim.PoseSample:
    pos = doc.get("position")
    orient = doc.get("orientation")
    if not (isinstance(pos, list) and len(pos) == 3):
        raise ValueError("pose message needs position: [x, y, z]")
    if not (isinstance(orient, list) and len(orient) == 4):
        raise ValueError("pose message needs orientation: [x, y, z, w]")
    t = float(doc.get("t", now_s))
    return hmdsim.PoseSample(
        t, RigidTransform(QuatRotation(*map(float, orient)), Vec3(*map(float, pos)))
    )


async def _handle_text(hub: Hub, client: Client, text: str) -> None:
    try:
        doc = json.loads(text)
        if not isinstance(doc, dict) or "type" not in doc:
            raise ValueError("message must be an object with a 'type' field")
    except (json.JSONDecodeError, ValueError) as exc:
        client.queue.put_json({"type": "error", "reason": f"malformed message: {exc}"})
        return
    kind = doc["type"]
    if kind == "subscribe":
        stream = doc.get("stream")
        if stream not in STREAMS:
            client.queue.put_json({"type": "error", "reason": f"unknown stream {stream!r}"})
            return
        client.stream = stream
    elif kind == "pose":
        if not client.pilot:
            client.queue.put_json({"type": "error", "reason": "observer clients cannot send poses"})
            return
        try:
            sample = _parse_pose_message(doc, hub.session.device.clock.now())
        except (TypeError, ValueError) as exc:
            client.queue.put_json({"type": "error", "reason": f"bad pose: {exc}"})
            return
        hub.inbound.put(("pose", client, sample))
    elif kind == "param":
        if not all(k in doc for k in ("node", "name", "value")):
            client.queue.put_json({"type": "error", "reason": "param message needs node, name, value"})
            return
        hub.inbound.put(("param", client, (doc["node"], doc["name"], doc["value"])))
    else:
        client.queue.put_json({"type": "error", "reason": f"unknown message type {kind!r}"})


def _handle_binary(client: Client, data: bytes) -> None:
    try:
        msg = wire.decode_frame(data)
        reason = f"server does not accept pixel frames (got eye={msg.eye} seq={msg.seq})"
    except wire.WireFormatError as exc:
        reason = f"bad binary frame: {exc}"
    client.queue.put_json({"type": "error", "reason": reason})


def find_ui_dir(cfg: RunConfig) -> Path | None:
    candidates = []
    if cfg.ui_dir:
        candidates.append(Path(cfg.ui_dir))
    here = Path(__file__).resolve()
    for base in list(here.parents)[:5]:
        candidates.append(base / "frontend" / "dist")
    candidates.append(Path("frontend/dist"))
    for c in candidates:
        if (c / "index.html").exists():
            return c
    return None


_PLACEHOLDER = """<!doctype html><html><head><title>vrbridge</title></head>
<body><h1>vrbridge server</h1>
<p>The companion-ui bundle was not found. Build it with
<code>npm run build</code> in <code>frontend/</code> or pass --ui-dir.</p>
<p>The WebSocket endpoint is live at <code>/ws</code>.</p></body></html>"""


def make_app(hub: Hub, frames: int | None = None, ui_dir: Path | None = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        worker = threading.Thread(target=hub.run_loop, args=(frames,), daemon=True, name="frame-loop")
        worker.start()
        try:
            yield
        finally:
            hub.stop.set()
            worker.join(timeout=5)

    app = FastAPI(lifespan=lifespan)

    @app.websocket("/ws")
    async def ws_endpoint(sock: WebSocket):
        await sock.accept()
        client = hub.register()
        client.queue.put_json(_hello_message(hub, client))

        async def pump():
            while True:
                item = await run_in_threadpool(client.queue.get, 0.2)
                if item is None:
                    continue
                kind, payload = item
                if kind == "frame":
                    await sock.send_bytes(payload)
                else:
                    await sock.send_json(payload)

        sender = asyncio.create_task(pump())
        try:
            while True:
                msg = await sock.receive()
                if msg["type"] == "websocket.disconnect":
                    break
                if msg.get("text") is not None:
                    await _handle_text(hub, client, msg["text"])
                elif msg.get("bytes") is not None:
                    _handle_binary(client, msg["bytes"])
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            hub.unregister(client)

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:
        @app.get("/")
        async def placeholder():
            return HTMLResponse(_PLACEHOLDER)

    return app


def serve(cfg: RunConfig) -> int:
    import uvicorn

    try:
        session = BridgeSession(cfg)
    except SessionError:
        raise
    hub = Hub(session)
    app = make_app(hub, frames=cfg.frames, ui_dir=find_ui_dir(cfg))
    host, _, port_s = cfg.serve.partition(":")
    try:
        port = int(port_s) if port_s else 8777
    except ValueError:
        raise SessionError(f"invalid serve address {cfg.serve!r}") from None
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=port, log_level="warning")
    except OSError as exc:
        raise SessionError(f"cannot bind {cfg.serve}: {exc}") from exc
    return 0
