"""On-disk exchange formats: JSON documents with inline or binary arrays.

Every artifact (dataset, reconstruction, results bundle) is one JSON
document.  Numeric arrays inside it are represented as

    {"__array__": {"shape": [...], "data": [flat float64 ...]}}   (json mode)
    {"__array__": {"shape": [...], "file": "arrays/a0007.bin"}}   (binary mode)

Binary files are little-endian float64, row major, behind a small header
(magic, version, ndim, shape).  Both modes round-trip 64-bit floats
exactly: binary trivially, JSON via repr-based shortest round-trip
serialization.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError

_MAGIC = b"QLB1"
_ARRAY_KEY = "__array__"


def write_array(path: Path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", 1, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
        fh.write(arr.tobytes())


def read_array(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValidationError(f"{path} is not an array file (magic {magic!r})")
        version, ndim = struct.unpack("<II", fh.read(8))
        if version != 1:
            raise ValidationError(f"unsupported array file version {version}")
        shape = struct.unpack(f"<{ndim}q", fh.read(8 * ndim))
        data = np.frombuffer(fh.read(), dtype="<f8")
    expected = int(np.prod(shape)) if ndim else 1
    if data.size != expected:
        raise ValidationError(f"{path}: expected {expected} values, got {data.size}")
    return data.reshape(shape).astype(float)


def _externalize(obj, fmt: str, array_dir: Path, counter: list):
    if isinstance(obj, np.ndarray):
        if fmt == "json":
            return {
                _ARRAY_KEY: {
                    "shape": list(obj.shape),
                    "data": [float(x) for x in np.asarray(obj, dtype=float).ravel()],
                }
            }
        name = f"a{counter[0]:05d}.bin"
        counter[0] += 1
        array_dir.mkdir(parents=True, exist_ok=True)
        write_array(array_dir / name, obj)
        return {_ARRAY_KEY: {"shape": list(obj.shape), "file": f"{array_dir.name}/{name}"}}
    if isinstance(obj, dict):
        return {k: _externalize(v, fmt, array_dir, counter) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_externalize(v, fmt, array_dir, counter) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _internalize(obj, base_dir: Path):
    if isinstance(obj, dict):
        if set(obj) == {_ARRAY_KEY}:
            spec = obj[_ARRAY_KEY]
            if "file" in spec:
                arr = read_array(base_dir / spec["file"])
            else:
                arr = np.asarray(spec["data"], dtype=float).reshape(spec["shape"])
            return arr
        return {k: _internalize(v, base_dir) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_internalize(v, base_dir) for v in obj]
    return obj


def save_document(doc: dict, path: str | Path, fmt: str = "binary") -> Path:
    """Write a JSON document, externalizing arrays per the chosen format."""
    if fmt not in ("binary", "json"):
        raise ValidationError(f"unknown format {fmt!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    array_dir = path.parent / (path.stem + "_arrays")
    payload = _externalize(doc, fmt, array_dir, [0])
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    return path


def load_document(path: str | Path) -> dict:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return _internalize(payload, path.parent)
