"""Framed tensor files: one JSON manifest line, then float64 LE payloads.

Used for checkpoints and feature files. The manifest's "tensors" entry
lists name and shape in payload order, so the file is self-describing and
byte-reproducible.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError
from .utils import canonical_json


def write_tensor_file(path, header: dict, tensors: dict[str, np.ndarray]) -> None:
    manifest = dict(header)
    manifest["tensors"] = [
        {"name": name, "shape": list(arr.shape)} for name, arr in tensors.items()
    ]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(canonical_json(manifest).encode("utf-8"))
        f.write(b"\n")
        for arr in tensors.values():
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_tensor_file(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            manifest = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: bad manifest line: {exc}") from exc
        if not isinstance(manifest, dict) or "tensors" not in manifest:
            raise FormatError(f"{path}: manifest missing 'tensors'")
        tensors = {}
        for entry in manifest["tensors"]:
            shape = tuple(int(s) for s in entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * 8)
            if len(raw) != count * 8:
                raise FormatError(f"{path}: truncated payload for {entry['name']}")
            tensors[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after last tensor")
    return manifest, tensors
