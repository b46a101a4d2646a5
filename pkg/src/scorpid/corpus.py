"""Annotated image corpora: manifest I/O, train/valid/test splitting, summary stats.

A corpus is an ordered list of image records loaded from a line-delimited JSON
manifest. Detection corpora carry bounding boxes (possibly empty, for negative
images); classification corpora carry one class label per image. Records are
immutable; every operation returns a new corpus.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Literal, Mapping

SPLITS = ("train", "valid", "test", "unassigned")
ORIGINS = ("original", "augmented")
CLASS_LABELS = ("Tityus", "Bothriurus", "None")

Split = Literal["train", "valid", "test", "unassigned"]
Origin = Literal["original", "augmented"]
Kind = Literal["detection", "classification"]

# Manifest keys emitted in this order; anything else is preserved verbatim.
_CANONICAL_KEYS = ("id", "path", "width", "height", "split", "origin",
                   "parent_id", "boxes", "class")


class ManifestError(ValueError):
    """Raised for malformed manifest content; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel space, top-left origin, (x, y, w, h) integers."""

    x: int
    y: int
    w: int
    h: int
    label: str = "scorpion"

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got w={self.w} h={self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin must be non-negative, got x={self.x} y={self.y}")

    def validate_within(self, width: int, height: int) -> None:
        if self.x + self.w > width or self.y + self.h > height:
            raise ValueError(
                f"box ({self.x},{self.y},{self.w},{self.h}) exceeds image bounds {width}x{height}"
            )

    @property
    def area(self) -> int:
        return self.w * self.h

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h, "label": self.label}


@dataclass(frozen=True)
class AnnotatedImage:
    """One manifest record: an image plus its ground truth and provenance."""

    id: str
    path: str
    width: int
    height: int
    split: Split = "unassigned"
    origin: Origin = "original"
    parent_id: str | None = None
    boxes: tuple[BoundingBox, ...] = ()
    class_label: str | None = None
    extra: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"record {self.id!r}: image dimensions must be positive")
        if self.split not in SPLITS:
            raise ValueError(f"record {self.id!r}: unknown split {self.split!r}")
        if self.origin not in ORIGINS:
            raise ValueError(f"record {self.id!r}: unknown origin {self.origin!r}")
        if self.origin == "augmented" and not self.parent_id:
            raise ValueError(f"record {self.id!r}: augmented record lacks parent_id")
        if self.class_label is not None and self.class_label not in CLASS_LABELS:
            raise ValueError(f"record {self.id!r}: unknown class {self.class_label!r}")
        for box in self.boxes:
            box.validate_within(self.width, self.height)

    @property
    def is_positive(self) -> bool:
        """Detection-sense positive: the image contains at least one box."""
        return len(self.boxes) > 0

    def to_json(self) -> dict:
        doc = {
            "id": self.id,
            "path": self.path,
            "width": self.width,
            "height": self.height,
            "split": self.split,
            "origin": self.origin,
            "parent_id": self.parent_id,
            "boxes": [b.to_json() for b in self.boxes],
            "class": self.class_label,
        }
        for key, value in self.extra.items():
            if key not in _CANONICAL_KEYS:
                doc[key] = value
        return doc


@dataclass(frozen=True)
class Corpus:
    """Ordered, immutable collection of records of one kind."""

    records: tuple[AnnotatedImage, ...]
    kind: Kind = "detection"

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValueError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
        if self.kind == "classification":
            for rec in self.records:
                if rec.class_label is None:
                    raise ValueError(
                        f"record {rec.id!r}: classification corpus requires a class label"
                    )
        parents = {rec.id for rec in self.records}
        for rec in self.records:
            if rec.origin == "augmented" and rec.parent_id not in parents:
                raise ValueError(
                    f"record {rec.id!r}: parent_id {rec.parent_id!r} not in corpus"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self, record_id: str) -> AnnotatedImage:
        try:
            return self._index[record_id]
        except AttributeError:
            object.__setattr__(self, "_index", {r.id: r for r in self.records})
            return self._index[record_id]

    def subset(self, split: Split | None) -> tuple[AnnotatedImage, ...]:
        if split is None:
            return self.records
        return tuple(r for r in self.records if r.split == split)


@dataclass(frozen=True)
class SplitRatios:
    """Train/valid/test fractions; must sum to 1 within 1e-9.

    Floats are rebuilt from their shortest decimal representation so that
    common ratios like 0.7 apportion exactly.
    """

    train: Fraction
    valid: Fraction
    test: Fraction

    @classmethod
    def of(cls, train, valid, test) -> "SplitRatios":
        return cls(_as_fraction(train), _as_fraction(valid), _as_fraction(test))

    def __post_init__(self):
        for name, value in (("train", self.train), ("valid", self.valid), ("test", self.test)):
            if not 0 <= value <= 1:
                raise ValueError(f"{name} ratio {float(value)} outside [0, 1]")
        if abs(self.train + self.valid + self.test - 1) > Fraction(1, 10**9):
            raise ValueError(
                f"ratios must sum to 1, got {float(self.train + self.valid + self.test)}"
            )

    def as_tuple(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.train, self.valid, self.test)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def largest_remainder(n: int, ratios: Iterable[Fraction]) -> list[int]:
    """Apportion n into integer parts proportional to ratios, summing to n exactly.

    Each part gets floor(n * ratio); leftover units go to the largest fractional
    remainders, ties broken by position. Every part differs from its exact quota
    by less than 1.
    """
    ratios = list(ratios)
    quotas = [n * r for r in ratios]
    parts = [int(q) for q in quotas]
    leftover = n - sum(parts)
    remainders = sorted(
        range(len(ratios)), key=lambda i: (quotas[i] - parts[i], -i), reverse=True
    )
    for i in remainders[:leftover]:
        parts[i] += 1
    return parts


def _shuffle_key(seed: int, record_id: str) -> str:
    return hashlib.sha256(f"{seed}:{record_id}".encode()).hexdigest()


def split_corpus(
    corpus: Corpus,
    ratios: SplitRatios,
    seed: int,
    *,
    allow_reassign: bool = False,
    stratify: bool = False,
) -> Corpus:
    """Assign every record a split using largest-remainder apportionment.

    Only origin=original records are apportioned; augmented records inherit
    their parent's split so variants never cross split boundaries. Assignment
    depends only on (record ids, ratios, seed): records are ordered by a
    seed-keyed hash of their id, so permuting the corpus changes nothing.

    With stratify=True, apportionment runs independently per stratum
    (class label for classification corpora, positive/negative for detection).
    """
    if len(corpus) == 0:
        raise ValueError("cannot split an empty corpus")
    originals = [r for r in corpus if r.origin == "original"]
    if not allow_reassign:
        assigned = [r.id for r in originals if r.split != "unassigned"]
        if assigned:
            raise ValueError(
                f"{len(assigned)} records already assigned (e.g. {assigned[0]!r}); "
                "pass allow_reassign=True to redo the split"
            )

    if stratify:
        strata: dict[object, list[AnnotatedImage]] = {}
        for rec in originals:
            key = rec.class_label if corpus.kind == "classification" else rec.is_positive
            strata.setdefault(key, []).append(rec)
        groups = [strata[k] for k in sorted(strata, key=repr)]
    else:
        groups = [originals]

    assignment: dict[str, Split] = {}
    for group in groups:
        ordered = sorted(group, key=lambda r: (_shuffle_key(seed, r.id), r.id))
        n_train, n_valid, _ = largest_remainder(len(ordered), ratios.as_tuple())
        for i, rec in enumerate(ordered):
            if i < n_train:
                assignment[rec.id] = "train"
            elif i < n_train + n_valid:
                assignment[rec.id] = "valid"
            else:
                assignment[rec.id] = "test"

    new_records = []
    for rec in corpus:
        if rec.origin == "original":
            new_records.append(replace(rec, split=assignment[rec.id]))
        else:
            new_records.append(replace(rec, split=assignment[rec.parent_id]))
    return Corpus(tuple(new_records), corpus.kind)


@dataclass(frozen=True)
class CorpusStats:
    total: int
    by_split: dict[str, int]
    by_class: dict[str, int]
    positives: int
    negatives: int
    originals: int
    augmented: int
    trainval_pct_of_total: float | None
    train_pct_of_trainval: float | None

    def summary(self) -> str:
        lines = [f"records: {self.total}"]
        lines.append("splits:  " + "  ".join(f"{s}={self.by_split[s]}" for s in SPLITS))
        if self.by_class:
            lines.append("classes: " + "  ".join(
                f"{c}={n}" for c, n in sorted(self.by_class.items())))
        lines.append(f"positive={self.positives}  negative={self.negatives}  "
                     f"original={self.originals}  augmented={self.augmented}")
        if self.trainval_pct_of_total is not None:
            lines.append(f"train+valid : total = {self.trainval_pct_of_total:.1f}%")
        if self.train_pct_of_trainval is not None:
            lines.append(
                f"train : valid within train+valid = "
                f"{self.train_pct_of_trainval:.1f} : {100 - self.train_pct_of_trainval:.1f}")
        return "\n".join(lines)


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Count records by split/class/polarity and derive split-ratio percentages."""
    by_split = {s: 0 for s in SPLITS}
    by_class: dict[str, int] = {}
    positives = negatives = originals = augmented = 0
    for rec in corpus:
        by_split[rec.split] += 1
        if rec.class_label is not None:
            by_class[rec.class_label] = by_class.get(rec.class_label, 0) + 1
        if rec.is_positive:
            positives += 1
        else:
            negatives += 1
        if rec.origin == "original":
            originals += 1
        else:
            augmented += 1
    total = len(corpus)
    trainval = by_split["train"] + by_split["valid"]
    return CorpusStats(
        total=total,
        by_split=by_split,
        by_class=by_class,
        positives=positives,
        negatives=negatives,
        originals=originals,
        augmented=augmented,
        trainval_pct_of_total=100.0 * trainval / total if total else None,
        train_pct_of_trainval=100.0 * by_split["train"] / trainval if trainval else None,
    )


def _parse_record(doc: dict, line: int) -> AnnotatedImage:
    def need(key, types, type_name):
        if key not in doc:
            raise ManifestError(f"missing field {key!r}", line)
        value = doc[key]
        if not isinstance(value, types) or isinstance(value, bool):
            raise ManifestError(f"field {key!r}: expected {type_name}, got {value!r}", line)
        return value

    rec_id = need("id", str, "string")
    path = need("path", str, "string")
    width = need("width", int, "int")
    height = need("height", int, "int")
    split = doc.get("split", "unassigned")
    origin = doc.get("origin", "original")
    parent_id = doc.get("parent_id")
    class_label = doc.get("class")
    raw_boxes = doc.get("boxes", [])
    if not isinstance(raw_boxes, list):
        raise ManifestError("field 'boxes': expected an array", line)
    boxes = []
    for i, rb in enumerate(raw_boxes):
        if not isinstance(rb, dict):
            raise ManifestError(f"boxes[{i}]: expected an object", line)
        try:
            box = BoundingBox(
                x=rb["x"], y=rb["y"], w=rb["w"], h=rb["h"],
                label=rb.get("label", "scorpion"),
            )
        except KeyError as exc:
            raise ManifestError(f"boxes[{i}]: missing field {exc.args[0]!r}", line) from None
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"boxes[{i}]: {exc}", line) from None
        boxes.append(box)
    extra = {k: v for k, v in doc.items() if k not in _CANONICAL_KEYS}
    try:
        return AnnotatedImage(
            id=rec_id, path=path, width=width, height=height,
            split=split, origin=origin, parent_id=parent_id,
            boxes=tuple(boxes), class_label=class_label, extra=extra,
        )
    except ValueError as exc:
        raise ManifestError(str(exc), line) from None


def load_manifest(path: str | Path, kind: Kind | None = None) -> Corpus:
    """Load a line-delimited JSON manifest into a Corpus.

    Every invalid line is rejected with its line number and field. When kind
    is not given it is inferred: classification iff every record carries a
    class label, detection otherwise.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    records = []
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON ({exc.msg})", line_no) from None
            if not isinstance(doc, dict):
                raise ManifestError("record must be a JSON object", line_no)
            records.append(_parse_record(doc, line_no))
    if kind is None:
        kind = "classification" if records and all(
            r.class_label is not None for r in records) else "detection"
    try:
        return Corpus(tuple(records), kind)
    except ValueError as exc:
        raise ManifestError(str(exc)) from None


def save_manifest(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back to manifest form; load(save(c)) == c."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in corpus:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
