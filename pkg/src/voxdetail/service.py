"""Interactive sculpt-and-detailize sessions over HTTP and WebSocket.

A session owns one coarse occupancy grid.  Clients carve it with cubic
brushes through a per-session WebSocket and ask for the upsampled,
textured surface whenever they want a preview; meshes come back as
base64-encoded little-endian buffers (f32 vertices, u8 colors, u32
triangle indices).  Every edit is acknowledged with a digest of the
grid so clients can reconcile optimistic local state.
"""

from __future__ import annotations

import asyncio
import base64
import secrets
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .grids import OccupancyGrid
from .mesh import _color_bytes, colorize, marching_cubes
from .trainer import Pipeline

BRUSH_SIZES = (1, 3, 5, 7)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def grid_digest(occ: OccupancyGrid) -> str:
    """16-hex-char FNV-1a hash over the dims (three u32, little-endian)
    followed by one byte per voxel in C order.  Cheap enough to compute
    per edit, and reproducible from a browser with BigInt."""
    dims = np.asarray(occ.data.shape, dtype="<u4").tobytes()
    return f"{fnv1a64(dims + occ.data.tobytes()):016x}"


def apply_brush(occ: OccupancyGrid, op: str, center, brush: int) -> None:
    """Set or clear the cubic block of edge `brush` centered on `center`,
    clipped to the grid.  The center itself must be in bounds."""
    if op not in ("add", "remove"):
        raise ValueError(f"unknown edit op {op!r}")
    if brush not in BRUSH_SIZES:
        raise ValueError(f"brush size must be one of {BRUSH_SIZES}, got {brush!r}")
    try:
        c = [int(v) for v in center]
    except (TypeError, ValueError):
        raise ValueError(f"center must be three integers, got {center!r}") from None
    if len(c) != 3 or any(iv != v for iv, v in zip(c, center)):
        raise ValueError(f"center must be three integers, got {center!r}")
    dims = occ.data.shape
    if not all(0 <= c[i] < dims[i] for i in range(3)):
        raise ValueError(f"center {tuple(c)} outside grid {dims}")
    half = brush // 2
    block = tuple(slice(max(0, c[i] - half), min(dims[i], c[i] + half + 1))
                  for i in range(3))
    occ.data[block] = 1 if op == "add" else 0


@dataclass(frozen=True)
class ModelHandle:
    """A trained pipeline plus the display names of its styles."""

    pipeline: Pipeline
    style_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.style_names) != self.pipeline.n_styles:
            raise ValueError(f"{len(self.style_names)} style names for "
                             f"{self.pipeline.n_styles} styles")


@dataclass
class SessionState:
    id: str
    model: str
    coarse: OccupancyGrid
    style: int = 0
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    # (digest, style) -> mesh payload, newest last
    cache: OrderedDict = field(default_factory=OrderedDict)


def _preset_grid(template: str, k: int) -> np.ndarray:
    occ = np.zeros((k, k, k), np.uint8)
    if template == "box":
        lo, hi = k // 4, k - k // 4
        occ[lo:hi, lo:hi, lo:hi] = 1
    elif template != "empty":
        raise ValueError(f"unknown template {template!r}")
    return occ


def _mesh_payload(pipe: Pipeline, coarse: OccupancyGrid, style: int,
                  digest: str) -> dict:
    """Runs on a worker thread: one generator forward pass, surface
    extraction on the continuous density, vertex colors from the raw
    color field (defined everywhere, so vertices that round to an empty
    neighbor still pick up sensible paint)."""
    _, density, color = pipe.detailize_full(coarse, style)
    mesh = colorize(marching_cubes(density, iso=0.5, pad=True), color)
    enc = lambda buf: base64.b64encode(buf).decode("ascii")
    return {
        "type": "mesh",
        "digest": digest,
        "style": style,
        "vertex_count": int(mesh.vertices.shape[0]),
        "triangle_count": int(mesh.triangles.shape[0]),
        "vertices": enc(mesh.vertices.astype("<f4", copy=False).tobytes()),
        "colors": enc(_color_bytes(mesh.colors).tobytes()),
        "triangles": enc(mesh.triangles.astype("<u4", copy=False).tobytes()),
    }


class DetailizeService:
    """Session registry over a fixed set of immutable trained models.

    Per-session edits and generates serialize on the session's lock, so
    digests evolve in arrival order and at most one generate per session
    is ever in flight; the mesh work itself runs on a small shared
    thread pool.  Results are cached by (grid digest, style), which is
    what makes repeated generates on an unchanged grid byte-identical.
    """

    def __init__(self, models: dict[str, ModelHandle], max_workers: int = 2,
                 cache_entries: int = 16):
        if not models:
            raise ValueError("service needs at least one model")
        self.models = dict(models)
        self.sessions: dict[str, SessionState] = {}
        self.cache_entries = cache_entries
        self._pool = ThreadPoolExecutor(max_workers=max_workers)

    def close(self) -> None:
        self._pool.shutdown(wait=False)

    def create_session(self, model_id: str, template: str = "empty",
                       voxels: str | None = None, dims=None) -> SessionState:
        handle = self.models[model_id]
        k = handle.pipeline.cfg.k
        if voxels is not None:
            if dims is None:
                raise ValueError("explicit voxels need dims")
            d = tuple(int(v) for v in dims)
            if d != (k, k, k):
                raise ValueError(f"model {model_id!r} works on {k}^3 grids, "
                                 f"got dims {d}")
            raw = base64.b64decode(voxels, validate=True)
            if len(raw) != k ** 3:
                raise ValueError(f"expected {k ** 3} voxel bytes, got {len(raw)}")
            arr = np.frombuffer(raw, np.uint8).reshape(d).copy()
            if arr.max(initial=0) > 1:
                raise ValueError("voxel bytes must be 0 or 1")
        else:
            arr = _preset_grid(template, k)
        state = SessionState(id=secrets.token_hex(8), model=model_id,
                             coarse=OccupancyGrid(arr))
        self.sessions[state.id] = state
        return state

    def session(self, session_id: str) -> SessionState:
        return self.sessions[session_id]

    def list_styles(self, model_id: str) -> list[dict]:
        handle = self.models[model_id]
        return [{"index": i, "name": name}
                for i, name in enumerate(handle.style_names)]

    def set_style(self, session_id: str, style) -> int:
        sess = self.session(session_id)
        n = self.models[sess.model].pipeline.n_styles
        try:
            s = int(style)
        except (TypeError, ValueError):
            raise ValueError(f"style must be an integer, got {style!r}") from None
        if not 0 <= s < n:
            raise ValueError(f"style {s} out of range [0, {n})")
        sess.style = s
        return s

    async def edit(self, sess: SessionState, op, center, brush) -> str:
        async with sess.lock:
            apply_brush(sess.coarse, op, center, brush)
            return grid_digest(sess.coarse)

    async def generate(self, sess: SessionState) -> dict:
        async with sess.lock:
            digest = grid_digest(sess.coarse)
            key = (digest, sess.style)
            payload = sess.cache.get(key)
            if payload is not None:
                sess.cache.move_to_end(key)
                return payload
            pipe = self.models[sess.model].pipeline
            snapshot = OccupancyGrid(sess.coarse.data.copy())
            loop = asyncio.get_running_loop()
            payload = await loop.run_in_executor(
                self._pool, _mesh_payload, pipe, snapshot, sess.style, digest)
            sess.cache[key] = payload
            while len(sess.cache) > self.cache_entries:
                sess.cache.popitem(last=False)
            return payload


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


async def _dispatch(service: DetailizeService, sess: SessionState,
                    msg) -> dict:
    if not isinstance(msg, dict):
        return {"type": "error", "message": "message must be a JSON object"}
    kind = msg.get("type")
    if kind == "edit":
        try:
            digest = await service.edit(sess, msg.get("op"),
                                        msg.get("center"), msg.get("brush", 1))
        except ValueError as exc:
            return {"type": "error", "message": str(exc)}
        return {"type": "ack", "digest": digest}
    if kind == "generate":
        try:
            return await service.generate(sess)
        except Exception as exc:      # surface compute failures to the client
            return {"type": "error", "message": f"generate failed: {exc}"}
    return {"type": "error", "message": f"unknown message type {kind!r}"}


def build_app(service: DetailizeService, static_dir=None) -> FastAPI:
    """HTTP JSON for session setup, one WebSocket per session for the
    edit/generate loop.  When `static_dir` is given the browser editor
    bundle is served from it at the web root."""
    app = FastAPI(title="voxdetail")

    @app.get("/models")
    async def models():
        return {"models": sorted(service.models)}

    @app.get("/models/{model_id}/styles")
    async def styles(model_id: str):
        try:
            return {"styles": service.list_styles(model_id)}
        except KeyError:
            return _error(404, f"unknown model {model_id!r}")

    @app.post("/sessions")
    async def create(body: dict):
        model_id = body.get("model")
        if not isinstance(model_id, str):
            return _error(400, "body needs a 'model' string")
        try:
            sess = service.create_session(
                model_id, template=body.get("template", "empty"),
                voxels=body.get("voxels"), dims=body.get("dims"))
        except KeyError:
            return _error(404, f"unknown model {model_id!r}")
        except ValueError as exc:
            return _error(400, str(exc))
        return {"session": sess.id, "dims": list(sess.coarse.data.shape),
                "styles": service.models[model_id].pipeline.n_styles,
                "style": sess.style, "digest": grid_digest(sess.coarse)}

    @app.post("/sessions/{session_id}/style")
    async def set_style(session_id: str, body: dict):
        try:
            s = service.set_style(session_id, body.get("style"))
        except KeyError:
            return _error(404, f"unknown session {session_id!r}")
        except ValueError as exc:
            return _error(400, str(exc))
        return {"ok": True, "style": s}

    @app.get("/sessions/{session_id}/grid")
    async def grid(session_id: str):
        # reconnecting clients refetch the authoritative grid instead of
        # replaying edits
        try:
            sess = service.session(session_id)
        except KeyError:
            return _error(404, f"unknown session {session_id!r}")
        async with sess.lock:
            payload = base64.b64encode(sess.coarse.data.tobytes()).decode()
            digest = grid_digest(sess.coarse)
        return {"dims": list(sess.coarse.data.shape), "voxels": payload,
                "digest": digest, "style": sess.style}

    @app.websocket("/sessions/{session_id}/ws")
    async def session_ws(websocket: WebSocket, session_id: str):
        try:
            sess = service.session(session_id)
        except KeyError:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        try:
            while True:
                try:
                    msg = await websocket.receive_json()
                except ValueError:
                    await websocket.send_json(
                        {"type": "error", "message": "invalid JSON"})
                    continue
                await websocket.send_json(await _dispatch(service, sess, msg))
        except WebSocketDisconnect:
            return

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="editor")
    return app


def serve(service: DetailizeService, host: str = "127.0.0.1",
          port: int = 8000, static_dir=None) -> None:
    import uvicorn
    uvicorn.run(build_app(service, static_dir=static_dir),
                host=host, port=port, log_level="warning")
