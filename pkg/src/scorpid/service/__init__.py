"""HTTP facade: detection, classification, evaluation runs, sighting ingest.

Image endpoints take raw PNG/JPEG bytes as the request body (no multipart).
Evaluation reports returned by POST /evaluate are byte-identical to the CLI's
output for the same inputs; run ids are content-addressed, so repeating a
request is idempotent.
"""

from __future__ import annotations

import hashlib
import json
import time

from fastapi import FastAPI, HTTPException, Query, Request, Response
from fastapi.responses import JSONResponse

from ..evaluate import Detection
from ..infer import (BackendError, ClassScores, UnknownImageError,
                     build_backend)
from ..reports import EvaluationRequestError, report_bytes, run_evaluation
from .schemas import (ClassifyResponse, DetectResponse, DetectionModel,
                      EvaluateRequest, HealthResponse, SightingIn, SightingOut,
                      VerdictUpdate)
from .storage import SightingLog

DEFAULT_MAX_BODY = 16 * 1024 * 1024


def create_app(
    backend=None,
    backend_descriptor: str | None = None,
    log_path: str | None = None,
    max_body_bytes: int = DEFAULT_MAX_BODY,
) -> FastAPI:
    if backend is None:
        if backend_descriptor is None:
            raise ValueError("create_app needs a backend or a backend descriptor")
        backend = build_backend(backend_descriptor)

    app = FastAPI(title="scorpid service", version="0.1.0")
    app.state.backend = backend
    app.state.sightings = SightingLog(log_path)
    app.state.reports = {}
    app.state.max_body_bytes = max_body_bytes

    async def _read_image_body(request: Request) -> bytes:
        length = request.headers.get("content-length")
        if length and int(length) > app.state.max_body_bytes:
            raise HTTPException(413, detail="request body over size limit")
        body = await request.body()
        if len(body) > app.state.max_body_bytes:
            raise HTTPException(413, detail="request body over size limit")
        if not body:
            raise HTTPException(400, detail="empty request body")
        return body

    def _backend_detect(body: bytes) -> list[Detection]:
        try:
            return app.state.backend.detect_image(body)
        except UnknownImageError:
            raise HTTPException(404, detail="unknown fixture image") from None
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc)) from None
        except BackendError as exc:
            raise HTTPException(502, detail=str(exc)) from None

    def _backend_classify(body: bytes) -> ClassScores:
        try:
            return app.state.backend.classify_image(body)
        except UnknownImageError:
            raise HTTPException(404, detail="unknown fixture image") from None
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc)) from None
        except BackendError as exc:
            raise HTTPException(502, detail=str(exc)) from None

    @app.get("/health", response_model=HealthResponse)
    def health():
        ok, reason = app.state.backend.health()
        if not ok:
            return JSONResponse(
                status_code=503,
                content={"status": "unavailable", "backend": app.state.backend.name,
                         "reason": reason},
            )
        return {"status": "ok", "backend": app.state.backend.name}

    @app.post("/detect", response_model=DetectResponse)
    async def detect(request: Request,
                     threshold: float = Query(0.5, ge=0.0, le=1.0)):
        body = await _read_image_body(request)
        start = time.perf_counter()
        detections = _backend_detect(body)
        latency_ms = (time.perf_counter() - start) * 1000.0
        kept = [d for d in detections if d.score >= threshold]
        kept.sort(key=lambda d: (-d.score, d.box.x, d.box.y))
        return {
            "detections": [
                {"x": d.box.x, "y": d.box.y, "w": d.box.w, "h": d.box.h,
                 "score": d.score, "label": d.label}
                for d in kept
            ],
            "latency_ms": latency_ms,
        }

    @app.post("/classify", response_model=ClassifyResponse)
    async def classify(request: Request):
        body = await _read_image_body(request)
        start = time.perf_counter()
        scores = _backend_classify(body)
        latency_ms = (time.perf_counter() - start) * 1000.0
        return {
            "probs": dict(scores.probs),
            "label": scores.label,
            "dangerous": scores.dangerous,
            "low_confidence": scores.low_confidence,
            "latency_ms": latency_ms,
        }

    @app.post("/evaluate")
    def evaluate(req: EvaluateRequest):
        run_id = hashlib.sha256(
            json.dumps(req.model_dump(), sort_keys=True).encode()
        ).hexdigest()[:16]
        if run_id not in app.state.reports:
            try:
                report = run_evaluation(
                    manifest=req.manifest,
                    mode=req.mode,
                    predictions_path=req.predictions_path,
                    backend=app.state.backend if req.predictions_path is None else None,
                    iou_threshold=req.iou_threshold,
                    score_threshold=req.score_threshold,
                    split=req.split,
                )
            except EvaluationRequestError as exc:
                raise HTTPException(422, detail=str(exc)) from None
            except FileNotFoundError as exc:
                raise HTTPException(422, detail=str(exc)) from None
            except BackendError as exc:
                raise HTTPException(502, detail=str(exc)) from None
            app.state.reports[run_id] = report_bytes(report)
        return Response(
            content=app.state.reports[run_id],
            media_type="application/json",
            headers={"X-Run-Id": run_id, "X-Queued": "false"},
        )

    @app.get("/evaluate/{run_id}")
    def get_report(run_id: str):
        if run_id not in app.state.reports:
            raise HTTPException(404, detail="unknown run id")
        return Response(content=app.state.reports[run_id], media_type="application/json",
                        headers={"X-Run-Id": run_id})

    @app.post("/sightings", response_model=SightingOut, status_code=201)
    def create_sighting(body: SightingIn):
        return app.state.sightings.create(body.model_dump())

    @app.get("/sightings", response_model=list[SightingOut])
    def list_sightings(since: int | None = None, verdict: str | None = None):
        return app.state.sightings.list(since=since, verdict=verdict)

    @app.patch("/sightings/{sighting_id}", response_model=SightingOut)
    def update_sighting(sighting_id: str, body: VerdictUpdate):
        doc = app.state.sightings.update_verdict(sighting_id, body.verdict)
        if doc is None:
            raise HTTPException(404, detail="unknown sighting id")
        return doc

    return app


__all__ = ["create_app", "DEFAULT_MAX_BODY", "SightingLog", "DetectionModel"]
