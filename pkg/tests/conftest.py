"""Shared fixtures: synthetic corpora, on-disk image fixtures, helpers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from scorpid.corpus import AnnotatedImage, BoundingBox, Corpus, save_manifest


def make_image(seed: int, width: int = 64, height: int = 48) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)


def detection_corpus(n_pos: int, n_neg: int, split: str = "test",
                     width: int = 64, height: int = 48) -> Corpus:
    records = []
    for i in range(n_pos):
        records.append(AnnotatedImage(
            id=f"p{i:04d}", path=f"p{i:04d}.png", width=width, height=height,
            split=split, boxes=(BoundingBox(x=4 + i % 7, y=3 + i % 5, w=20, h=15),),
        ))
    for i in range(n_neg):
        records.append(AnnotatedImage(
            id=f"n{i:04d}", path=f"n{i:04d}.png", width=width, height=height,
            split=split,
        ))
    return Corpus(tuple(records), "detection")


def classification_corpus(counts: dict[str, int], split: str = "test") -> Corpus:
    records = []
    for label, n in counts.items():
        for i in range(n):
            records.append(AnnotatedImage(
                id=f"{label.lower()}{i:04d}", path=f"{label.lower()}{i:04d}.png",
                width=64, height=48, split=split, class_label=label,
            ))
    return Corpus(tuple(records), "classification")


def write_corpus_images(corpus: Corpus, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i, rec in enumerate(corpus):
        Image.fromarray(make_image(1000 + i, rec.width, rec.height)).save(
            directory / rec.path, format="PNG")


@pytest.fixture(scope="session")
def service_fixture_dir(tmp_path_factory) -> Path:
    """A 20-image detection corpus (12 positive / 8 negative) on disk, plus a
    9-image classification corpus, each with a manifest."""
    root = tmp_path_factory.mktemp("fixture")
    det = detection_corpus(12, 8)
    write_corpus_images(det, root)
    save_manifest(det, root / "detection.jsonl")
    cls = classification_corpus({"Tityus": 3, "Bothriurus": 3, "None": 3})
    write_corpus_images(cls, root)
    save_manifest(cls, root / "classification.jsonl")
    return root


def manifest_line(record_id: str, **overrides) -> str:
    doc = {
        "id": record_id, "path": f"{record_id}.png", "width": 100, "height": 80,
        "split": "unassigned", "origin": "original", "parent_id": None,
        "boxes": [], "class": None,
    }
    doc.update(overrides)
    return json.dumps(doc)
