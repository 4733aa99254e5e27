"""HTTP API over the catalog plus the service entry point.

Every non-2xx body has exactly the shape {"status", "code", "message"}.
Reads run against the in-memory store; writes serialize through a lock and
persist before the response is sent (read-your-write for a single service).
The built web client, when present, is served at /.
"""

from __future__ import annotations

import base64
import binascii
import socket
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import catalog
from .catalog import Store
from .errors import DeckfuseError, DuplicateId, PortInUse
from .geodesy import GeoBBox
from .raster import encode_bmp, load_pnm


class ApiError(Exception):
    """Carries the documented error body shape."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"status": self.status, "code": self.code, "message": self.message},
        )


def _parse_bbox(
    min_lat: Optional[float], min_lon: Optional[float], max_lat: Optional[float], max_lon: Optional[float]
) -> Optional[GeoBBox]:
    values = (min_lat, min_lon, max_lat, max_lon)
    if all(v is None for v in values):
        return None
    if any(v is None for v in values):
        raise ApiError(400, "invalid_bbox", "all four bbox parameters are required")
    try:
        return GeoBBox(min_lat=min_lat, min_lon=min_lon, max_lat=max_lat, max_lon=max_lon)
    except ValueError as exc:
        raise ApiError(400, "invalid_bbox", str(exc))


def create_app(store: Store, webui_dir: Optional[Path] = None) -> FastAPI:
    """Build the API application around an opened store."""
    app = FastAPI(title="deckfuse", docs_url=None, redoc_url=None, openapi_url=None)
    write_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_req: Request, exc: StarletteHTTPException):
        code = {404: "not_found", 405: "method_not_allowed"}.get(exc.status_code, "error")
        return ApiError(exc.status_code, code, str(exc.detail)).response()

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return ApiError(400, "invalid_request", str(exc.errors()[:1])).response()

    @app.get("/api/bridges")
    def list_bridges(
        min_lat: Optional[float] = None,
        min_lon: Optional[float] = None,
        max_lat: Optional[float] = None,
        max_lon: Optional[float] = None,
    ):
        bbox = _parse_bbox(min_lat, min_lon, max_lat, max_lon)
        if bbox is None:
            records = [b for _, b in sorted(store.bridges.items())]
        else:
            records = catalog.query_bridges(store, bbox)
        return [catalog.bridge_to_json(b) for b in records]

    @app.get("/api/bridges/{bridge_id}")
    def get_bridge(bridge_id: str):
        bridge = store.bridges.get(bridge_id)
        if bridge is None:
            raise ApiError(404, "bridge_not_found", f"no bridge {bridge_id!r}")
        body = catalog.bridge_to_json(bridge)
        body["surface_maps"] = [
            catalog.meta_to_json(store.maps[m][0])
            for m in bridge.surface_map_ids
            if m in store.maps
        ]
        return body

    @app.get("/api/maps/{map_id}")
    def get_map(map_id: str):
        if map_id not in store.maps:
            raise ApiError(404, "map_not_found", f"no surface map {map_id!r}")
        return catalog.meta_to_json(store.maps[map_id][0])

    @app.get("/api/maps/{map_id}/image")
    def get_map_image(map_id: str):
        if map_id not in store.maps:
            raise ApiError(404, "map_not_found", f"no surface map {map_id!r}")
        return Response(content=encode_bmp(store.maps[map_id][1]), media_type="image/bmp")

    @app.get("/api/defects")
    def list_defects(
        min_lat: Optional[float] = None,
        min_lon: Optional[float] = None,
        max_lat: Optional[float] = None,
        max_lon: Optional[float] = None,
    ):
        bbox = _parse_bbox(min_lat, min_lon, max_lat, max_lon)
        if bbox is None:
            records = [d for _, d in sorted(store.defects.items())]
        else:
            records = catalog.query_defects(store, bbox)
        return [catalog.defect_to_json(d) for d in records]

    @app.post("/api/defects", status_code=201)
    async def post_defect(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "invalid_body", "request body must be a JSON object")
        if not isinstance(body, dict):
            raise ApiError(400, "invalid_body", "request body must be a JSON object")

        image = None
        image_b64 = body.pop("image_base64", None)
        if image_b64 is not None:
            try:
                image = load_pnm(base64.b64decode(image_b64, validate=True))
            except (binascii.Error, DeckfuseError, TypeError) as exc:
                raise ApiError(400, "invalid_image", f"image_base64 must hold a PNM file: {exc}")
        try:
            record = catalog.defect_from_json(body)
        except DeckfuseError as exc:
            raise ApiError(400, "invalid_body", str(exc))

        with write_lock:
            try:
                stored = catalog.add_defect(store, record, image)
            except DuplicateId:
                raise ApiError(409, "duplicate_defect", f"defect {record.defect_id!r} exists")
        return catalog.defect_to_json(stored)

    @app.get("/api/defects/{defect_id}/image")
    def get_defect_image(defect_id: str):
        defect = store.defects.get(defect_id)
        if defect is None:
            raise ApiError(404, "defect_not_found", f"no defect {defect_id!r}")
        if defect.image_id is None or defect.image_id not in store.defect_images:
            raise ApiError(404, "no_image", f"defect {defect_id!r} has no image")
        return Response(
            content=encode_bmp(store.defect_images[defect.image_id]), media_type="image/bmp"
        )

    if webui_dir is not None and Path(webui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(webui_dir), html=True), name="webui")
    else:

        @app.get("/")
        def index():
            return Response(
                content="<!doctype html><title>deckfuse</title>"
                "<p>deckfuse API is running. The web client is not built; "
                "see the README for frontend build steps.</p>",
                media_type="text/html",
            )

    return app


def find_webui_dir(explicit: Optional[str] = None) -> Optional[Path]:
    """Locate built web client assets (frontend/dist) if any."""
    candidates = []
    if explicit:
        candidates.append(Path(explicit))
    candidates.append(Path.cwd() / "frontend" / "dist")
    candidates.append(Path(__file__).resolve().parents[2] / "frontend" / "dist")
    for c in candidates:
        if c.is_dir() and (c / "index.html").exists():
            return c
    return None


def serve(store_path, port: int, host: str = "127.0.0.1", webui_dir=None) -> None:
    """Open the store and run the API service until interrupted."""
    import uvicorn

    store = catalog.open_store(store_path)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise PortInUse(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    app = create_app(store, webui_dir=find_webui_dir(webui_dir))
    uvicorn.run(app, host=host, port=port, log_level="warning")
