"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

Verdict = Literal["confirmed", "rejected", "unsure", "unreviewed"]


class DetectionModel(BaseModel):
    x: int
    y: int
    w: int = Field(gt=0)
    h: int = Field(gt=0)
    score: float = Field(ge=0.0, le=1.0)
    label: str = "scorpion"


class DetectResponse(BaseModel):
    detections: list[DetectionModel]
    latency_ms: float


class ClassScoresModel(BaseModel):
    probs: dict[str, float]
    label: str
    dangerous: bool
    low_confidence: bool


class ClassifyResponse(ClassScoresModel):
    latency_ms: float


class HealthResponse(BaseModel):
    status: str
    backend: str


class EvaluateRequest(BaseModel):
    manifest: str
    mode: Literal["detect", "classify"]
    predictions_path: Optional[str] = None
    iou_threshold: float = Field(0.5, ge=0.0, le=1.0)
    score_threshold: float = Field(0.5, ge=0.0, le=1.0)
    split: Optional[Literal["train", "valid", "test", "unassigned"]] = "test"


class SightingIn(BaseModel):
    image_ref: str
    detections: list[DetectionModel] = []
    class_scores: Optional[ClassScoresModel] = None
    operator_note: str = ""
    operator_verdict: Verdict = "unreviewed"


class SightingOut(SightingIn):
    id: str
    timestamp: int


class VerdictUpdate(BaseModel):
    verdict: Verdict
