"""Turn model outputs plus ground truth into evaluation artifacts.

Detection is scored at image level (presence of a scorpion in the image),
mirroring how the binary matrices are tallied in the field protocol; box-level
IoU matching is used for localization accounting, not for the presence
decision itself. Classification is scored as a 3x3 confusion matrix (rows are
true classes, columns are predictions).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

from .corpus import BoundingBox, Corpus, ManifestError, Split
from .infer import CLASS_ORDER, ClassScores, Detection
from .metrics import BinaryConfusion, MultiConfusion, RocCurve

__all__ = [
    "Detection", "MatchConfig", "MatchResult", "iou", "match_detections",
    "presence_eval", "localization_errors", "sweep_thresholds", "classify_eval",
    "save_predictions", "load_predictions",
]


@dataclass(frozen=True)
class MatchConfig:
    iou_threshold: float = 0.5
    score_threshold: float = 0.5
    mode: Literal["presence", "per_box"] = "presence"

    def __post_init__(self):
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must be in [0, 1]")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    if inter == 0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


@dataclass(frozen=True)
class MatchResult:
    tp: tuple[tuple[Detection, BoundingBox], ...]
    fp: tuple[Detection, ...]
    fn: tuple[BoundingBox, ...]


def match_detections(
    dets: Sequence[Detection], truth: Sequence[BoundingBox], cfg: MatchConfig
) -> MatchResult:
    """Greedily match detections to truth boxes in descending score order.

    Detections below cfg.score_threshold are discarded first. Each surviving
    detection claims the unmatched truth box of highest IoU when that IoU is
    >= cfg.iou_threshold, else it is a false positive; leftover truth boxes
    are false negatives. Equal scores break ties by lower box x, then lower y,
    so the outcome is deterministic regardless of input order.
    """
    passing = [d for d in dets if d.score >= cfg.score_threshold]
    passing.sort(key=lambda d: (-d.score, d.box.x, d.box.y))
    unmatched = list(range(len(truth)))
    tp: list[tuple[Detection, BoundingBox]] = []
    fp: list[Detection] = []
    for det in passing:
        best_i, best_iou = None, 0.0
        for i in unmatched:
            v = iou(det.box, truth[i])
            if v > best_iou:
                best_i, best_iou = i, v
        if best_i is not None and best_iou >= cfg.iou_threshold:
            unmatched.remove(best_i)
            tp.append((det, truth[best_i]))
        else:
            fp.append(det)
    return MatchResult(tp=tuple(tp), fp=tuple(fp), fn=tuple(truth[i] for i in unmatched))


def _group_by_image(dets: Iterable[Detection]) -> dict[str, list[Detection]]:
    grouped: dict[str, list[Detection]] = {}
    for det in dets:
        grouped.setdefault(det.image_id, []).append(det)
    return grouped


def _eval_records(corpus: Corpus, split: Split | None):
    records = corpus.subset(split)
    if not records:
        raise ValueError(f"no records in split {split!r}")
    return records


def _check_known_images(grouped: Mapping[str, list], corpus: Corpus) -> None:
    known = {r.id for r in corpus}
    unknown = sorted(set(grouped) - known)
    if unknown:
        raise KeyError(f"detections reference unknown images: {unknown[:5]}")


def presence_eval(
    corpus: Corpus,
    all_dets: Iterable[Detection],
    cfg: MatchConfig,
    split: Split | None = "test",
) -> BinaryConfusion:
    """Per-image presence decision tallied into a binary confusion matrix.

    An image is predicted positive iff at least one of its detections passes
    the score threshold; its true label is whether it carries any ground-truth
    box. Localization quality does not change the presence decision (see
    localization_errors for that accounting).
    """
    grouped = _group_by_image(all_dets)
    _check_known_images(grouped, corpus)
    tp = tn = fp = fn = 0
    for rec in _eval_records(corpus, split):
        predicted = any(
            d.score >= cfg.score_threshold for d in grouped.get(rec.id, ())
        )
        if rec.is_positive:
            if predicted:
                tp += 1
            else:
                fn += 1
        else:
            if predicted:
                fp += 1
            else:
                tn += 1
    return BinaryConfusion(tp=tp, tn=tn, fp=fp, fn=fn)


def localization_errors(
    corpus: Corpus,
    all_dets: Iterable[Detection],
    cfg: MatchConfig,
    split: Split | None = "test",
) -> int:
    """Count score-passing detections on positive images that match no truth box."""
    grouped = _group_by_image(all_dets)
    _check_known_images(grouped, corpus)
    errors = 0
    for rec in _eval_records(corpus, split):
        if not rec.is_positive:
            continue
        result = match_detections(grouped.get(rec.id, ()), list(rec.boxes), cfg)
        errors += len(result.fp)
    return errors


def sweep_thresholds(
    corpus: Corpus,
    all_dets: Iterable[Detection],
    cfg: MatchConfig,
    split: Split | None = "test",
) -> tuple[RocCurve, list[tuple[float, BinaryConfusion]]]:
    """Run presence_eval at every distinct detection score and build the ROC.

    Candidate thresholds are the distinct scores in descending order plus a
    +inf sentinel (nothing predicted positive). If images without any
    detection exist, no finite threshold can predict them positive, so the
    curve is completed to (1,1) with a -inf sentinel whose confusion marks
    every image predicted positive.
    """
    all_dets = list(all_dets)
    records = _eval_records(corpus, split)
    positives = sum(1 for r in records if r.is_positive)
    negatives = len(records) - positives
    if positives == 0 or negatives == 0:
        raise ValueError("threshold sweep needs both positive and negative images")

    eval_ids = {r.id for r in records}
    scores = sorted({d.score for d in all_dets if d.image_id in eval_ids}, reverse=True)
    _check_known_images(_group_by_image(all_dets), corpus)
    sweep: list[tuple[float, BinaryConfusion]] = []
    # +inf sentinel: score gating that nothing passes.
    sweep.append((math.inf, BinaryConfusion(tp=0, tn=negatives, fp=0, fn=positives)))
    for t in scores:
        conf = presence_eval(
            corpus, all_dets,
            MatchConfig(iou_threshold=cfg.iou_threshold, score_threshold=t, mode=cfg.mode),
            split,
        )
        sweep.append((t, conf))
    last = sweep[-1][1]
    if last.tp != positives or last.fp != negatives:
        # Images with zero detections are unreachable by any finite threshold.
        sweep.append((-math.inf, BinaryConfusion(tp=positives, tn=0, fp=negatives, fn=0)))

    points = tuple(
        (conf.fp / negatives, conf.tp / positives, t) for t, conf in sweep
    )
    curve = RocCurve(points=points, auc=_trapezoid(points))
    return curve, sweep


def _trapezoid(points) -> float:
    area = 0.0
    for (f0, t0, _), (f1, t1, _) in zip(points, points[1:]):
        area += (f1 - f0) * (t0 + t1) / 2.0
    return area


def classify_eval(
    corpus: Corpus,
    predictions: Mapping[str, ClassScores],
    split: Split | None = "test",
) -> MultiConfusion:
    """Tally argmax predictions against true labels into a K x K matrix."""
    records = _eval_records(corpus, split)
    missing = sorted(r.id for r in records if r.id not in predictions)
    if missing:
        raise KeyError(f"missing predictions for {len(missing)} images: {missing[:10]}")
    counts = [[0] * len(CLASS_ORDER) for _ in CLASS_ORDER]
    index = {label: i for i, label in enumerate(CLASS_ORDER)}
    for rec in records:
        if rec.class_label is None:
            raise ValueError(f"record {rec.id!r} has no class label")
        counts[index[rec.class_label]][index[predictions[rec.id].label]] += 1
    return MultiConfusion(CLASS_ORDER, tuple(tuple(row) for row in counts))


# --------------------------------------------------------------------------
# Predictions manifest (line-delimited JSON)


def save_predictions(
    path: str | Path,
    detections: Iterable[Detection] = (),
    class_scores: Mapping[str, ClassScores] | None = None,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for det in detections:
            fh.write(json.dumps({
                "image_id": det.image_id,
                "x": det.box.x, "y": det.box.y, "w": det.box.w, "h": det.box.h,
                "score": det.score, "label": det.label,
            }) + "\n")
        for image_id, cs in (class_scores or {}).items():
            fh.write(json.dumps({"image_id": image_id, "probs": dict(cs.probs)}) + "\n")


def load_predictions(
    path: str | Path,
) -> tuple[list[Detection], dict[str, ClassScores]]:
    """Read a predictions manifest; detection and classification lines may mix."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"predictions file not found: {path}")
    detections: list[Detection] = []
    class_scores: dict[str, ClassScores] = {}
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON ({exc.msg})", line_no) from None
            if "image_id" not in doc:
                raise ManifestError("missing field 'image_id'", line_no)
            try:
                if "probs" in doc:
                    class_scores[doc["image_id"]] = ClassScores.from_probs(doc["probs"])
                else:
                    detections.append(Detection(
                        image_id=doc["image_id"],
                        box=BoundingBox(x=doc["x"], y=doc["y"], w=doc["w"], h=doc["h"],
                                        label=doc.get("label", "scorpion")),
                        score=doc["score"],
                        label=doc.get("label", "scorpion"),
                    ))
            except KeyError as exc:
                raise ManifestError(f"missing field {exc.args[0]!r}", line_no) from None
            except (TypeError, ValueError) as exc:
                raise ManifestError(str(exc), line_no) from None
    return detections, class_scores
