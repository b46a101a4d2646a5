"""Inference backends: the detect/classify contract, a deterministic
ground-truth-derived reference backend, and an HTTP adapter for external
model runners.

The reference backend exists so the whole pipeline is testable end to end
without trained weights: it reads ground truth from a corpus and emits
detections/class scores degraded by a noise knob, fully determined by
(corpus, noise_eps, seed, image_id).
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import httpx
from PIL import Image, UnidentifiedImageError

from ._rng import keyed_rng
from .corpus import BoundingBox, Corpus, Split

CLASS_ORDER = ("Tityus", "Bothriurus", "None")
DANGEROUS_CLASS = "Tityus"
LOW_CONFIDENCE_BELOW = 0.5


class BackendError(Exception):
    """Base class for backend failures."""


class BackendTimeout(BackendError):
    """The remote backend did not answer within its deadline."""


class BackendUnavailable(BackendError):
    """The remote backend could not be reached."""


class BackendProtocolError(BackendError):
    """The remote backend answered with something other than the wire contract."""


class UnknownImageError(KeyError):
    """The reference backend was handed an image that is not in its corpus."""


@dataclass(frozen=True)
class Detection:
    """One predicted box on one image, with its confidence score."""

    image_id: str
    box: BoundingBox
    score: float
    label: str = "scorpion"

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class ClassScores:
    """Probability vector over the three classes plus the derived verdict.

    label is the argmax, ties broken by class order (Tityus, Bothriurus,
    None); dangerous is true exactly when the label is Tityus; low_confidence
    flags a winning probability below 0.5.
    """

    probs: Mapping[str, float]
    label: str
    dangerous: bool
    low_confidence: bool

    @classmethod
    def from_probs(cls, probs: Mapping[str, float]) -> "ClassScores":
        unknown = set(probs) - set(CLASS_ORDER)
        if unknown:
            raise ValueError(f"unknown classes {sorted(unknown)}")
        values = {c: float(probs.get(c, 0.0)) for c in CLASS_ORDER}
        for c, p in values.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability for {c} out of range: {p}")
        total = sum(values.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities must sum to 1, got {total}")
        label = max(CLASS_ORDER, key=lambda c: (values[c], -CLASS_ORDER.index(c)))
        return cls(
            probs=values,
            label=label,
            dangerous=label == DANGEROUS_CLASS,
            low_confidence=values[label] < LOW_CONFIDENCE_BELOW,
        )


@dataclass(frozen=True)
class BackendDescriptor:
    """Parsed --backend value: reference:<manifest>:<eps>:<seed> or a URL."""

    name: str
    kind: str
    endpoint: str | None = None
    manifest: str | None = None
    noise_eps: float = 0.0
    seed: int = 0

    @classmethod
    def parse(cls, text: str) -> "BackendDescriptor":
        if text.startswith(("http://", "https://")):
            return cls(name=text, kind="remote", endpoint=text)
        if text.startswith("reference:"):
            parts = text.split(":")
            if len(parts) != 4:
                raise ValueError(
                    "reference backend descriptor must be reference:<manifest>:<eps>:<seed>"
                )
            _, manifest, eps, seed = parts
            return cls(
                name=text, kind="reference", manifest=manifest,
                noise_eps=float(eps), seed=int(seed),
            )
        raise ValueError(f"unrecognized backend descriptor: {text!r}")


def _decode_rgb(data: bytes) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ValueError(f"cannot decode image: {exc}") from None
    return img.convert("RGB")


def _pixel_key(img: Image.Image) -> str:
    return hashlib.sha256(
        f"{img.width}x{img.height}:".encode() + img.tobytes()
    ).hexdigest()


class ReferenceBackend:
    """Deterministic fake model that degrades corpus ground truth by noise_eps.

    detect returns each truth box with score clamp(1 - eps*u, 0, 1), u drawn
    from a generator keyed by (seed, image); with probability eps/2 it adds
    one spurious box scored eps*u'. classify puts 1 - eps on the true class
    and splits eps between the other two. Every output is a pure function of
    (corpus, eps, seed, image_id).
    """

    supports_records = True

    def __init__(self, corpus: Corpus, noise_eps: float = 0.0, seed: int = 0,
                 base_dir: str | Path | None = None, name: str | None = None):
        if not 0.0 <= noise_eps <= 1.0:
            raise ValueError("noise_eps must be in [0, 1]")
        if len(corpus) == 0:
            raise ValueError("reference backend needs a corpus with ground truth")
        self.corpus = corpus
        self.noise_eps = noise_eps
        self.seed = seed
        self.base_dir = Path(base_dir) if base_dir else None
        self.name = name or f"reference(eps={noise_eps},seed={seed})"
        self._pixel_index: dict[str, str] | None = None

    # -- record-addressed inference (no pixels needed) --

    def detect_record(self, image_id: str) -> list[Detection]:
        rec = self.corpus.by_id(image_id)
        eps = self.noise_eps
        rng = keyed_rng(self.seed, "detect", image_id)
        dets = []
        for box in rec.boxes:
            u = rng.random()
            score = min(1.0, max(0.0, 1.0 - eps * u))
            dets.append(Detection(image_id=image_id, box=box, score=score, label=box.label))
        if rng.random() < eps / 2.0:
            w = int(rng.integers(1, rec.width + 1))
            h = int(rng.integers(1, rec.height + 1))
            x = int(rng.integers(0, rec.width - w + 1))
            y = int(rng.integers(0, rec.height - h + 1))
            spurious = BoundingBox(x=x, y=y, w=w, h=h, label="scorpion")
            dets.append(Detection(
                image_id=image_id, box=spurious, score=eps * rng.random(), label="scorpion",
            ))
        dets.sort(key=lambda d: (-d.score, d.box.x, d.box.y))
        return dets

    def classify_record(self, image_id: str) -> ClassScores:
        rec = self.corpus.by_id(image_id)
        if rec.class_label is None:
            raise ValueError(f"record {image_id!r} carries no class ground truth")
        eps = self.noise_eps
        probs = {c: eps / 2.0 for c in CLASS_ORDER}
        probs[rec.class_label] = 1.0 - eps
        return ClassScores.from_probs(probs)

    # -- image-addressed inference (service paths) --

    def resolve_image(self, data: bytes) -> str:
        """Map posted image bytes to a corpus record by pixel content."""
        img = _decode_rgb(data)
        if self._pixel_index is None:
            index = {}
            for rec in self.corpus:
                path = self._resolve_path(rec.path)
                with Image.open(path) as fh:
                    index[_pixel_key(fh.convert("RGB"))] = rec.id
            self._pixel_index = index
        key = _pixel_key(img)
        if key not in self._pixel_index:
            raise UnknownImageError("image does not match any corpus fixture")
        return self._pixel_index[key]

    def _resolve_path(self, path: str) -> Path:
        p = Path(path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p

    def detect_image(self, data: bytes, image_id: str | None = None) -> list[Detection]:
        return self.detect_record(image_id or self.resolve_image(data))

    def classify_image(self, data: bytes, image_id: str | None = None) -> ClassScores:
        return self.classify_record(image_id or self.resolve_image(data))

    def health(self) -> tuple[bool, str]:
        return True, "ok"


class RemoteBackend:
    """Adapter speaking the service wire contract, so any model runner that
    implements POST /detect and POST /classify can stand in for the built-in
    reference backend."""

    supports_records = False

    def __init__(self, endpoint: str, timeout: float = 10.0,
                 client: httpx.Client | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.name = self.endpoint
        self._client = client or httpx.Client(base_url=self.endpoint, timeout=timeout)

    def _post(self, path: str, data: bytes, params: dict | None = None) -> dict:
        try:
            resp = self._client.post(
                path, content=data, params=params,
                headers={"content-type": "image/png"},
            )
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"backend timed out: {exc}") from None
        except httpx.TransportError as exc:
            raise BackendUnavailable(f"backend unreachable: {exc}") from None
        if resp.status_code != 200:
            raise BackendProtocolError(f"backend returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError:
            raise BackendProtocolError("backend returned non-JSON body") from None

    def detect_image(self, data: bytes, image_id: str | None = None) -> list[Detection]:
        doc = self._post("/detect", data, params={"threshold": 0.0})
        try:
            return [
                Detection(
                    image_id=image_id or "",
                    box=BoundingBox(x=d["x"], y=d["y"], w=d["w"], h=d["h"],
                                    label=d.get("label", "scorpion")),
                    score=d["score"],
                    label=d.get("label", "scorpion"),
                )
                for d in doc["detections"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendProtocolError(f"malformed detect response: {exc}") from None

    def classify_image(self, data: bytes, image_id: str | None = None) -> ClassScores:
        doc = self._post("/classify", data)
        try:
            return ClassScores.from_probs(doc["probs"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendProtocolError(f"malformed classify response: {exc}") from None

    def health(self) -> tuple[bool, str]:
        try:
            resp = self._client.get("/health")
        except httpx.TimeoutException:
            return False, "remote backend timed out"
        except httpx.TransportError as exc:
            return False, f"remote backend unreachable: {exc}"
        if resp.status_code != 200:
            return False, f"remote backend unhealthy: {resp.status_code}"
        return True, "ok"


def build_backend(descriptor: str | BackendDescriptor, timeout: float = 10.0):
    """Construct a backend from a descriptor string (see BackendDescriptor)."""
    if isinstance(descriptor, str):
        descriptor = BackendDescriptor.parse(descriptor)
    if descriptor.kind == "remote":
        return RemoteBackend(descriptor.endpoint, timeout=timeout)
    from .corpus import load_manifest

    manifest = Path(descriptor.manifest)
    corpus = load_manifest(manifest)
    return ReferenceBackend(
        corpus, noise_eps=descriptor.noise_eps, seed=descriptor.seed,
        base_dir=manifest.parent, name=descriptor.name,
    )


def _read_record_bytes(rec, base_dir: Path | None) -> bytes:
    path = Path(rec.path)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return path.read_bytes()


def corpus_detections(
    backend, corpus: Corpus, split: Split | None = None, base_dir: Path | None = None
) -> list[Detection]:
    """Run detect over every record in the split, via ids or image bytes."""
    out: list[Detection] = []
    for rec in corpus.subset(split):
        if getattr(backend, "supports_records", False):
            out.extend(backend.detect_record(rec.id))
        else:
            out.extend(backend.detect_image(_read_record_bytes(rec, base_dir), image_id=rec.id))
    return out


def corpus_class_scores(
    backend, corpus: Corpus, split: Split | None = None, base_dir: Path | None = None
) -> dict[str, ClassScores]:
    """Run classify over every record in the split."""
    out: dict[str, ClassScores] = {}
    for rec in corpus.subset(split):
        if getattr(backend, "supports_records", False):
            out[rec.id] = backend.classify_record(rec.id)
        else:
            out[rec.id] = backend.classify_image(_read_record_bytes(rec, base_dir), image_id=rec.id)
    return out
