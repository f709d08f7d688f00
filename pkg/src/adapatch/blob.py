"""Flat float32 tensor blob with a JSON sidecar.

The blob is the little-endian float32 bytes of each tensor back to back;
the sidecar (same path plus ".json") lists tensor names, shapes, and byte
offsets in storage order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def write_blob(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    path = Path(path)
    entries = []
    offset = 0
    with open(path, "wb") as f:
        for name, arr in tensors.items():
            a = np.ascontiguousarray(arr, dtype="<f4")
            f.write(a.tobytes())
            entries.append({"name": name, "shape": list(a.shape), "offset": offset})
            offset += a.nbytes
    meta = {"dtype": "<f4", "tensors": entries}
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_blob(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    raw = path.read_bytes()
    out: dict[str, np.ndarray] = {}
    for entry in meta["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=entry["offset"])
        out[entry["name"]] = arr.reshape(shape).copy()
    return out
