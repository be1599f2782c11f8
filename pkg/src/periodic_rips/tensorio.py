"""Named-tensor container: text manifest header plus little-endian blob.

Layout:

    HSMPW1\\n
    <header-length in bytes, ASCII decimal>\\n
    <header JSON, UTF-8, exactly that many bytes>
    <blob: concatenated row-major little-endian tensor data>

The header carries ``meta`` (model config, feature-schema version, seed,
...) and a ``tensors`` list of {name, shape, dtype, offset} with offsets
relative to the blob start. Weight files restrict dtype to f32/f64;
feature containers additionally store i64 simplex index arrays.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import WeightFormatError

CONTAINER_MAGIC = b"HSMPW1"

_DTYPES = {"f32": "<f4", "f64": "<f8", "i64": "<i8"}
_DTYPE_NAMES = {np.dtype("<f4"): "f32", np.dtype("<f8"): "f64", np.dtype("<i8"): "i64"}


def write_container(path: str | Path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    entries = []
    chunks = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype == np.float64:
            dtype = "f64"
        elif arr.dtype == np.float32:
            dtype = "f32"
        elif arr.dtype == np.int64:
            dtype = "i64"
        else:
            raise WeightFormatError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
        data = arr.astype(_DTYPES[dtype]).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": dtype, "offset": offset})
        chunks.append(data)
        offset += len(data)

    header = json.dumps({"meta": meta, "tensors": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CONTAINER_MAGIC + b"\n")
        fh.write(str(len(header)).encode("ascii") + b"\n")
        fh.write(header)
        for chunk in chunks:
            fh.write(chunk)


def read_container(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if not raw.startswith(CONTAINER_MAGIC + b"\n"):
        raise WeightFormatError(f"{path}: magic mismatch, not a tensor container")
    try:
        nl = raw.index(b"\n", len(CONTAINER_MAGIC) + 1)
        header_len = int(raw[len(CONTAINER_MAGIC) + 1 : nl])
    except ValueError as exc:
        raise WeightFormatError(f"{path}: bad header length") from exc
    header_start = nl + 1
    blob_start = header_start + header_len
    try:
        header = json.loads(raw[header_start:blob_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"{path}: malformed manifest header ({exc})") from exc

    blob = raw[blob_start:]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        name = entry["name"]
        shape = tuple(int(s) for s in entry["shape"])
        dtype = entry["dtype"]
        if dtype not in _DTYPES:
            raise WeightFormatError(f"{path}: tensor {name!r} has unsupported dtype {dtype!r}")
        np_dtype = np.dtype(_DTYPES[dtype])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = int(entry["offset"])
        end = start + count * np_dtype.itemsize
        if end > len(blob):
            raise WeightFormatError(f"{path}: tensor {name!r} overruns blob")
        arr = np.frombuffer(blob[start:end], dtype=np_dtype).reshape(shape)
        if dtype == "f32":
            arr = arr.astype(np.float32)
        elif dtype == "f64":
            arr = arr.astype(np.float64)
        else:
            arr = arr.astype(np.int64)
        arr.setflags(write=False)
        tensors[name] = arr
    return tensors, header.get("meta", {})
