"""HTTP front end that screens audio queries before they reach an ASR backend.

POST /v1/query                 X-Client-Id + WAV body -> verdict JSON
GET  /v1/clients/{id}          client state
POST /v1/clients/{id}/reset    forget a client
GET  /v1/admin/threshold       current delta
PUT  /v1/admin/threshold       {"delta": x}
POST /v1/admin/snapshot        binary QWST snapshot
POST /v1/admin/restore         replace state from a snapshot
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import math
import threading
from dataclasses import dataclass, field

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from starlette.concurrency import run_in_threadpool

from .audio_io import decode_wav
from .detector import Detector, DetectorConfig
from .errors import (
    ClientBlocked,
    ClipTooShort,
    CorruptSnapshot,
    MalformedWav,
    UnsupportedEncoding,
    VersionMismatch,
)

log = logging.getLogger(__name__)

MIN_REQUEST_BYTES = 10 * 16000 * 2 + 44  # one 10 s mono PCM16 clip
CLIENT_HEADERS = {"header": "x-client-id", "api-key": "x-api-key"}


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    upstream_url: str | None = None
    upstream_timeout: float = 10.0
    max_request_bytes: int = 4 * 1024 * 1024
    client_id_source: str = "header"
    admin_key: str | None = None

    def __post_init__(self):
        if self.max_request_bytes < MIN_REQUEST_BYTES:
            raise ValueError(f"max_request_bytes must hold a 10 s clip ({MIN_REQUEST_BYTES} bytes)")
        if self.client_id_source not in CLIENT_HEADERS:
            raise ValueError(f"client_id_source must be one of {sorted(CLIENT_HEADERS)}")

    @classmethod
    def from_dict(cls, d: dict) -> "GatewayConfig":
        d = dict(d)
        if "listen" in d:
            host, _, port = str(d.pop("listen")).rpartition(":")
            d["host"], d["port"] = host or "127.0.0.1", int(port)
        if isinstance(d.get("detector"), dict):
            d["detector"] = DetectorConfig.from_dict(d["detector"])
        if "upstream" in d:
            d["upstream_url"] = d.pop("upstream")
        return cls(**d)


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status)


async def _read_body(request: Request, limit: int) -> bytes | None:
    declared = request.headers.get("content-length")
    if declared is not None and declared.isdigit() and int(declared) > limit:
        return None
    chunks, size = [], 0
    async for chunk in request.stream():
        size += len(chunk)
        if size > limit:
            return None
        chunks.append(chunk)
    return b"".join(chunks)


def _wav_payload(request: Request, body: bytes) -> bytes:
    ctype = request.headers.get("content-type", "").split(";")[0].strip().lower()
    if ctype != "application/json":
        return body
    try:
        doc = json.loads(body)
        encoded = doc.get("audio_b64") or doc.get("wav_b64")
        return base64.b64decode(encoded, validate=True)
    except (ValueError, AttributeError, TypeError, binascii.Error) as exc:
        raise MalformedWav(f"bad base64 JSON payload: {exc}") from exc


def create_app(cfg: GatewayConfig = GatewayConfig(), detector: Detector | None = None,
               http_client: httpx.Client | None = None) -> FastAPI:
    det = detector or Detector(cfg.detector)
    restore_gate = threading.Lock()
    client_header = CLIENT_HEADERS[cfg.client_id_source]
    upstream = http_client
    if cfg.upstream_url and upstream is None:
        upstream = httpx.Client(timeout=cfg.upstream_timeout)

    app = FastAPI(title="querywatch gateway")
    app.state.detector = det
    app.state.config = cfg

    def admin_denied(request: Request) -> JSONResponse | None:
        if cfg.admin_key is not None and request.headers.get("x-admin-key") != cfg.admin_key:
            return _error(401, "admin key required")
        return None

    def forward(client_id: str, wav: bytes):
        resp = upstream.post(
            cfg.upstream_url, content=wav, headers={"content-type": "audio/wav", "x-client-id": client_id}
        )
        resp.raise_for_status()
        try:
            return resp.json()
        except ValueError:
            return resp.text

    @app.post("/v1/query")
    async def query(request: Request):
        client_id = request.headers.get(client_header)
        if not client_id:
            return _error(400, f"missing {client_header} header")
        body = await _read_body(request, cfg.max_request_bytes)
        if body is None:
            return _error(413, f"payload exceeds {cfg.max_request_bytes} bytes")
        try:
            wav = _wav_payload(request, body)
            clip = decode_wav(wav, clip_id=client_id)
        except (MalformedWav, UnsupportedEncoding) as exc:
            return _error(400, f"malformed audio: {exc}")
        try:
            verdict = await run_in_threadpool(det.observe, client_id, clip)
        except ClientBlocked as exc:
            retry = max(1, math.ceil(exc.retry_after))
            return JSONResponse(
                {"error": "client blocked", "retry_after": retry},
                status_code=403,
                headers={"Retry-After": str(retry)},
            )
        except ClipTooShort as exc:
            return _error(400, f"clip too short: {exc}")

        payload = {
            "client_id": client_id,
            "flagged": verdict.flagged,
            "score": verdict.score,
            "action": verdict.action,
            "sequence_no": verdict.sequence_no,
        }
        if cfg.upstream_url and not verdict.flagged:
            try:
                payload["upstream"] = await run_in_threadpool(forward, client_id, wav)
            except httpx.HTTPError as exc:
                log.warning("upstream failure for %s: %s", client_id, exc)
                return _error(502, "upstream failure", **payload)
        return payload

    @app.get("/v1/clients/{client_id}")
    def client_state(client_id: str):
        info = det.client_info(client_id)
        if info is None:
            return _error(404, "unknown client")
        return info

    @app.post("/v1/clients/{client_id}/reset")
    def reset_client(client_id: str, request: Request):
        denied = admin_denied(request)
        if denied:
            return denied
        det.reset(client_id)
        return {"client_id": client_id, "reset": True}

    @app.get("/v1/admin/threshold")
    def get_threshold():
        return {"delta": det.delta}

    @app.put("/v1/admin/threshold")
    async def put_threshold(request: Request):
        denied = admin_denied(request)
        if denied:
            return denied
        try:
            delta = float((await request.json())["delta"])
        except (ValueError, KeyError, TypeError):
            return _error(400, 'expected {"delta": <number>}')
        if not 0.0 <= delta <= 1.0:
            return _error(400, "delta must lie in [0, 1]")
        det.set_delta(delta)
        return {"delta": det.delta}

    @app.post("/v1/admin/snapshot")
    def snapshot(request: Request):
        denied = admin_denied(request)
        if denied:
            return denied
        return Response(det.snapshot(), media_type="application/octet-stream")

    @app.post("/v1/admin/restore")
    async def restore(request: Request):
        denied = admin_denied(request)
        if denied:
            return denied
        data = await request.body()
        if not restore_gate.acquire(blocking=False):
            return _error(409, "another restore is in progress")
        try:
            await run_in_threadpool(det.load_snapshot, data)
        except (CorruptSnapshot, VersionMismatch) as exc:
            return _error(400, f"bad snapshot: {exc}")
        finally:
            restore_gate.release()
        return {"restored": True, "clients": len(det.clients())}

    return app


def serve(cfg: GatewayConfig, log_level: str = "info") -> None:
    import uvicorn

    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level=log_level)
