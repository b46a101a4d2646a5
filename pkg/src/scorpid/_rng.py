"""Keyed random generators: randomness derived from stable string keys, so
per-item draws are independent of iteration order and worker scheduling."""

from __future__ import annotations

import hashlib

import numpy as np


def keyed_rng(*parts: object) -> np.random.Generator:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "big")))
