"""Small shared helpers: seed derivation, canonical JSON, file hashing."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def derive_seed(seed: int, *parts) -> int:
    """Mix a base seed with entity labels into a fresh 64-bit seed.

    Stable across platforms and Python versions (blake2b, not `hash()`), so
    per-entity generators can run in any order and still be reproducible.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *parts))


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, no whitespace churn."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
