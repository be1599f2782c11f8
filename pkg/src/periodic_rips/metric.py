"""Periodic and intra-unit interatomic distance matrices.

The periodic matrix takes, for every atom pair, the minimum Euclidean
separation across all cyclic-permutation coordinate frames, restoring the
proximity of atoms that sit at opposite ends of an arbitrarily chosen
repeating unit. With a single frame it reduces to the plain pairwise matrix.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .polymer import CoordinateFrame

MATRIX_MAGIC = b"PDM1"
MATRIX_VERSION = 1


@dataclass(frozen=True)
class PeriodicDistanceMatrix:
    n: int
    values: np.ndarray  # (N, N) float64, symmetric, zero diagonal
    mode: str  # "periodic" | "intra_unit"

    def __post_init__(self):
        if self.values.shape != (self.n, self.n):
            raise ValidationError(f"distance matrix shape {self.values.shape} != ({self.n}, {self.n})")


def _pairwise(coords: np.ndarray) -> np.ndarray:
    # explicit per-axis sum keeps scalar IEEE semantics (no fused reductions),
    # so entries equal math.sqrt(dx*dx + dy*dy + dz*dz) bit for bit
    dx = coords[:, None, 0] - coords[None, :, 0]
    dy = coords[:, None, 1] - coords[None, :, 1]
    dz = coords[:, None, 2] - coords[None, :, 2]
    return np.sqrt(dx * dx + dy * dy + dz * dz)


def _finalize(d: np.ndarray, mode: str) -> PeriodicDistanceMatrix:
    n = d.shape[0]
    # compute once for alpha < beta, mirror, and pin the diagonal
    upper = np.triu(d, k=1)
    d = upper + upper.T
    off = upper[np.triu_indices(n, k=1)]
    if off.size and (off == 0.0).any():
        warnings.warn("degenerate zero off-diagonal distance; coincident atoms produce simplices at eps=0")
    d.setflags(write=False)
    return PeriodicDistanceMatrix(n=n, values=d, mode=mode)


def periodic_distance_matrix(frames: Sequence[CoordinateFrame]) -> PeriodicDistanceMatrix:
    """Elementwise minimum of the per-frame pairwise distance matrices."""
    if len(frames) == 0:
        raise ValidationError("empty frame list")
    n = frames[0].coords.shape[0]
    for f in frames:
        if f.coords.shape != (n, 3):
            raise ValidationError(f"frame size mismatch: frame {f.permutation_id} has shape {f.coords.shape}")
        if not np.isfinite(f.coords).all():
            raise ValidationError(f"frame {f.permutation_id}: non-finite coordinate")
    stacked = np.stack([_pairwise(f.coords) for f in frames])
    return _finalize(stacked.min(axis=0), mode="periodic")


def intra_unit_distance_matrix(frame: CoordinateFrame) -> PeriodicDistanceMatrix:
    """Plain pairwise Euclidean matrix of one frame."""
    if not np.isfinite(frame.coords).all():
        raise ValidationError(f"frame {frame.permutation_id}: non-finite coordinate")
    return _finalize(_pairwise(frame.coords), mode="intra_unit")


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def write_matrix_csv(path: str | Path, matrix: PeriodicDistanceMatrix) -> None:
    lines = ["," + ",".join(str(i) for i in range(matrix.n))]
    for i in range(matrix.n):
        lines.append(str(i) + "," + ",".join(repr(float(v)) for v in matrix.values[i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_matrix_binary(path: str | Path, matrix: PeriodicDistanceMatrix) -> None:
    """16-byte header (magic, version, N) + row-major little-endian float64."""
    header = MATRIX_MAGIC + struct.pack("<IQ", MATRIX_VERSION, matrix.n)
    payload = np.ascontiguousarray(matrix.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_matrix_binary(path: str | Path, mode: str = "periodic") -> PeriodicDistanceMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MATRIX_MAGIC:
        raise ParseError("bad matrix file: magic mismatch")
    version, n = struct.unpack("<IQ", raw[4:16])
    if version != MATRIX_VERSION:
        raise ParseError(f"bad matrix file: unsupported version {version}")
    values = np.frombuffer(raw[16:], dtype="<f8")
    if values.size != n * n:
        raise ParseError("bad matrix file: truncated payload")
    values = values.reshape(n, n).astype(np.float64)
    values.setflags(write=False)
    return PeriodicDistanceMatrix(n=int(n), values=values, mode=mode)
