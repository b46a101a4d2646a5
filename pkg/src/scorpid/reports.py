"""Evaluation report documents and their canonical serializations.

The same builder backs the CLI and the HTTP service, so the two produce
byte-identical reports for identical inputs. Reports carry the confusion
tallies, the four metrics, the ROC curve, and (for detection) the
localization error count.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping

from .corpus import Corpus, Split
from .evaluate import (MatchConfig, classify_eval, localization_errors,
                       presence_eval, sweep_thresholds)
from .infer import CLASS_ORDER, ClassScores, Detection
from .metrics import RocCurve, metrics_from_binary, per_class_metrics


def detect_report(
    corpus: Corpus,
    detections: list[Detection],
    cfg: MatchConfig,
    split: Split | None = "test",
) -> dict:
    """Presence-level detection report: confusion at cfg.score_threshold,
    metrics, full threshold-sweep ROC, and localization errors."""
    confusion = presence_eval(corpus, detections, cfg, split)
    curve, _ = sweep_thresholds(corpus, detections, cfg, split)
    return {
        "mode": "detect",
        "config": {
            "iou_threshold": cfg.iou_threshold,
            "score_threshold": cfg.score_threshold,
            "split": split,
        },
        "confusion": confusion.to_json(),
        "metrics": metrics_from_binary(confusion).to_json(),
        "roc": curve.to_json(),
        "localization_errors": localization_errors(corpus, detections, cfg, split),
    }


def classify_report(
    corpus: Corpus,
    predictions: Mapping[str, ClassScores],
    split: Split | None = "test",
) -> dict:
    """Classification report: 3x3 confusion and one-vs-rest metrics per class."""
    confusion = classify_eval(corpus, predictions, split)
    return {
        "mode": "classify",
        "config": {"split": split},
        "confusion": confusion.to_json(),
        "metrics": {
            label: per_class_metrics(confusion, label).to_json() for label in CLASS_ORDER
        },
        "roc": None,
    }


def report_bytes(report: dict) -> bytes:
    """Canonical serialization: 2-space indent, stable key order, trailing
    newline. Infinities (ROC sentinels) are encoded as the strings "inf"
    and "-inf" to stay valid JSON."""
    return (json.dumps(_jsonable(report), indent=2, ensure_ascii=False) + "\n").encode()


def _jsonable(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def roc_csv(curve: RocCurve | dict) -> str:
    """ROC points as CSV with header threshold,fpr,tpr."""
    points = curve["points"] if isinstance(curve, dict) else curve.to_json()["points"]
    lines = ["threshold,fpr,tpr"]
    for fpr, tpr, thr in points:
        lines.append(f"{_fmt(thr)},{_fmt(fpr)},{_fmt(tpr)}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def roc_svg(curve: RocCurve | dict, size: int = 360, margin: int = 40) -> str:
    """Self-contained SVG plot of the ROC curve (deterministic text output)."""
    points = curve["points"] if isinstance(curve, dict) else curve.to_json()["points"]
    auc_value = curve["auc"] if isinstance(curve, dict) else curve.auc
    span = size - 2 * margin

    def sx(fpr: float) -> float:
        return margin + fpr * span

    def sy(tpr: float) -> float:
        return size - margin - tpr * span

    path = " ".join(
        f"{'M' if i == 0 else 'L'} {sx(f):.2f} {sy(t):.2f}"
        for i, (f, t, _) in enumerate(points)
    )
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="{margin}" y="{margin}" width="{span}" height="{span}" '
        'fill="white" stroke="#888"/>',
        f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(1):.2f}" y2="{sy(1):.2f}" '
        'stroke="#bbb" stroke-dasharray="4 4"/>',
        f'<path d="{path}" fill="none" stroke="#c0392b" stroke-width="2"/>',
        f'<text x="{size // 2}" y="{size - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">false positive rate</text>',
        f'<text x="12" y="{size // 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 12 {size // 2})">true positive rate</text>',
        f'<text x="{margin + 6}" y="{margin + 16}" font-family="sans-serif" '
        f'font-size="12">AUC = {auc_value:.4f}</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def write_report(report: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(report_bytes(report))


class EvaluationRequestError(ValueError):
    """An evaluation request inconsistent with its corpus or inputs."""


def run_evaluation(
    manifest: str | Path,
    mode: str,
    predictions_path: str | Path | None = None,
    backend=None,
    iou_threshold: float = 0.5,
    score_threshold: float = 0.5,
    split: Split | None = "test",
) -> dict:
    """Load a corpus, obtain predictions (from a file or a backend), evaluate.

    This one entry point backs both the CLI and POST /evaluate, which is what
    makes their reports byte-identical for identical inputs.
    """
    from .corpus import load_manifest
    from .evaluate import load_predictions
    from .infer import corpus_class_scores, corpus_detections

    manifest = Path(manifest)
    corpus = load_manifest(manifest)
    if mode == "classify" and corpus.kind != "classification":
        raise EvaluationRequestError("classification mode needs a classification corpus")
    if mode == "detect" and corpus.kind != "detection":
        raise EvaluationRequestError("detect mode needs a detection corpus")

    cfg = MatchConfig(iou_threshold=iou_threshold, score_threshold=score_threshold)
    if predictions_path is not None:
        detections, class_scores = load_predictions(predictions_path)
    elif backend is not None:
        base = manifest.parent
        if mode == "detect":
            detections = corpus_detections(backend, corpus, split=split, base_dir=base)
            class_scores = {}
        else:
            detections = []
            class_scores = corpus_class_scores(backend, corpus, split=split, base_dir=base)
    else:
        raise EvaluationRequestError("need either a predictions file or a backend")

    if mode == "detect":
        return detect_report(corpus, detections, cfg, split)
    return classify_report(corpus, class_scores, split)
