"""Subprocess- and file-format-level bindings to the periodic-rips CLI.

The tensor-container layout parsed here is the documented public format:

    HSMPW1\\n
    <header length, ASCII decimal>\\n
    <UTF-8 JSON header: {"meta": ..., "tensors": [{name, shape, dtype, offset}]}>
    <blob of row-major little-endian tensor data>

Prediction CSVs are read back with full round-trip precision (the CLI
writes shortest-repr floats), so binding outputs are bit-identical to what
the tool itself reports.
"""

from __future__ import annotations

import csv
import json
import os
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CLI_ENV_VAR = "PERIODIC_RIPS_CLI"
CONTAINER_MAGIC = b"HSMPW1"

_DTYPES = {"f32": "<f4", "f64": "<f8", "i64": "<i8"}


class BindingError(RuntimeError):
    """CLI failure; carries the tool's error message verbatim."""

    def __init__(self, message: str, exit_code: int | None = None):
        super().__init__(message)
        self.exit_code = exit_code


def _cli_command() -> list[str]:
    override = os.environ.get(CLI_ENV_VAR)
    if override:
        return override.split()
    found = shutil.which("periodic-rips")
    if found:
        return [found]
    return [sys.executable, "-m", "periodic_rips.cli"]


def _run_cli(*args: str) -> None:
    proc = subprocess.run([*_cli_command(), *args], capture_output=True, text=True)
    if proc.returncode != 0:
        message = proc.stderr.strip() or proc.stdout.strip() or f"exit code {proc.returncode}"
        raise BindingError(message, exit_code=proc.returncode)


def read_tensor_container(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Independent reader for the public named-tensor container format."""
    raw = Path(path).read_bytes()
    if not raw.startswith(CONTAINER_MAGIC + b"\n"):
        raise BindingError(f"{path}: not a tensor container")
    nl = raw.index(b"\n", len(CONTAINER_MAGIC) + 1)
    header_len = int(raw[len(CONTAINER_MAGIC) + 1 : nl])
    header = json.loads(raw[nl + 1 : nl + 1 + header_len].decode("utf-8"))
    blob = raw[nl + 1 + header_len :]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        np_dtype = np.dtype(_DTYPES[entry["dtype"]])
        shape = tuple(int(s) for s in entry["shape"])
        count = 1
        for s in shape:
            count *= s
        start = int(entry["offset"])
        arr = np.frombuffer(blob, dtype=np_dtype, count=count, offset=start).reshape(shape)
        tensors[entry["name"]] = np.ascontiguousarray(arr)
    return tensors, header.get("meta", {})


@dataclass(frozen=True)
class BoundSession:
    """Loaded weight handle plus the config/schema snapshot from its manifest.

    Immutable; safe to share across threads for read-only prediction calls.
    """

    weights_path: Path
    schema_version: str
    config: dict
    seed: int | None = None


def load_session(weights_path: str | Path) -> BoundSession:
    path = Path(weights_path)
    if not path.exists():
        raise BindingError(f"{path}: no such weight file")
    _, meta = read_tensor_container(path)
    if meta.get("kind") != "model-weights":
        raise BindingError(f"{path}: container does not hold model weights")
    config = meta["config"]
    return BoundSession(
        weights_path=path,
        schema_version=str(config["schema_version"]),
        config=config,
        seed=meta.get("seed"),
    )


@dataclass(frozen=True)
class FeaturizedArrays:
    """Per-level feature matrices and simplex index arrays."""

    cutoffs: tuple[float, ...]
    schema_version: str
    mode: str
    vertex_features: tuple[np.ndarray, ...]   # each (n0, 75) float64
    edge_features: tuple[np.ndarray, ...]     # each (n1, 11) float64
    triangle_features: tuple[np.ndarray, ...] # each (n2, 5) float64
    vertex_index: tuple[np.ndarray, ...]      # each (n0,) int64
    edge_index: tuple[np.ndarray, ...]        # each (n1, 2) int64
    triangle_index: tuple[np.ndarray, ...]    # each (n2, 3) int64


def featurize_unit(document: str, non_periodic: bool = False) -> FeaturizedArrays:
    """Featurize one repeating-unit document (JSON text)."""
    with tempfile.TemporaryDirectory() as td:
        td = Path(td)
        doc_path = td / "unit.json"
        doc_path.write_text(document, encoding="utf-8")
        out_dir = td / "features"
        args = ["featurize", "--input", str(doc_path), "--out", str(out_dir)]
        if non_periodic:
            args.append("--non-periodic")
        _run_cli(*args)
        tensors, meta = read_tensor_container(out_dir / "unit.features.hsmpt")

    cutoffs = tuple(float(c) for c in meta["cutoffs"])
    levels = range(1, len(cutoffs) + 1)
    return FeaturizedArrays(
        cutoffs=cutoffs,
        schema_version=str(meta["schema_version"]),
        mode=str(meta["mode"]),
        vertex_features=tuple(tensors[f"L{i}.vertex.features"] for i in levels),
        edge_features=tuple(tensors[f"L{i}.edge.features"] for i in levels),
        triangle_features=tuple(tensors[f"L{i}.triangle.features"] for i in levels),
        vertex_index=tuple(tensors[f"L{i}.vertex.simplices"] for i in levels),
        edge_index=tuple(tensors[f"L{i}.edge.simplices"] for i in levels),
        triangle_index=tuple(tensors[f"L{i}.triangle.simplices"] for i in levels),
    )


def predict(document: str, session: BoundSession, non_periodic: bool = False) -> float:
    """Scalar prediction for one document under the loaded session."""
    return predict_many([document], session, non_periodic=non_periodic)[0]


def predict_many(documents: list[str], session: BoundSession, non_periodic: bool = False) -> list[float]:
    """Order-preserving predictions for several documents."""
    with tempfile.TemporaryDirectory() as td:
        td = Path(td)
        in_dir = td / "units"
        in_dir.mkdir()
        names = []
        for k, doc in enumerate(documents):
            name = f"unit_{k:05d}"
            (in_dir / f"{name}.json").write_text(doc, encoding="utf-8")
            names.append(name)
        out_csv = td / "predictions.csv"
        args = [
            "predict",
            "--input", str(in_dir),
            "--weights", str(session.weights_path),
            "--out", str(out_csv),
        ]
        if non_periodic:
            args.append("--non-periodic")
        _run_cli(*args)

        by_id: dict[str, float] = {}
        with open(out_csv, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                by_id[row["id"]] = float(row["fold_1"])
    out = []
    for k, name in enumerate(names):
        # ids default to the file stem unless the document carries meta.id
        try:
            meta_id = json.loads(documents[k]).get("meta", {}).get("id")
        except json.JSONDecodeError:
            meta_id = None
        key = str(meta_id) if meta_id is not None else name
        if key not in by_id:
            raise BindingError(f"prediction for document {k} missing from CLI output")
        out.append(by_id[key])
    return out
