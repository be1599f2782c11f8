"""End-to-end featurization and prediction for repeating units.

Wires together the distance matrix, Rips filtration, curvature profiles,
feature assembly, and the encoder forward pass. Batch prediction is
order-preserving and collects per-unit failures instead of aborting.
"""

from __future__ import annotations

import concurrent.futures
import os
from dataclasses import dataclass

from .complexes import Filtration, build_filtration
from .curvature import DEFAULT_DELTA, DEFAULT_STEPS, DEFAULT_TEMPERATURE, profiles_for_complex
from .errors import VersionMismatchError
from .features import FEATURE_SCHEMA_VERSION, SimplexFeatureSet, assemble_features
from .metric import PeriodicDistanceMatrix, intra_unit_distance_matrix, periodic_distance_matrix
from .model import ForwardResult, ModelWeights, hsmp_forward
from .polymer import RepeatingUnit
from .tensorio import read_container, write_container

THREADS_ENV_VAR = "PERIODIC_RIPS_THREADS"
DEFAULT_MAX_DIM = 2


def worker_count() -> int:
    """Bounded worker pool size; PERIODIC_RIPS_THREADS overrides."""
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def distance_matrix_for_unit(unit: RepeatingUnit, non_periodic: bool = False) -> PeriodicDistanceMatrix:
    if non_periodic:
        return intra_unit_distance_matrix(unit.frames[0])
    return periodic_distance_matrix(unit.frames)


@dataclass
class FeaturizedUnit:
    unit: RepeatingUnit
    matrix: PeriodicDistanceMatrix
    filtration: Filtration
    features: list[SimplexFeatureSet]
    schema_version: str = FEATURE_SCHEMA_VERSION


def featurize_unit(
    unit: RepeatingUnit,
    cutoffs=(2.0, 3.0, 4.0),
    max_dim: int = DEFAULT_MAX_DIM,
    non_periodic: bool = False,
    delta: float = DEFAULT_DELTA,
    steps: int = DEFAULT_STEPS,
    temperature: float = DEFAULT_TEMPERATURE,
) -> FeaturizedUnit:
    matrix = distance_matrix_for_unit(unit, non_periodic=non_periodic)
    filtration = build_filtration(matrix, cutoffs, max_dim)
    profiles = [
        profiles_for_complex(matrix, complex_, delta=delta, steps=steps, temperature=temperature)
        for _, complex_ in filtration.levels
    ]
    features = assemble_features(unit, filtration, profiles)
    return FeaturizedUnit(unit=unit, matrix=matrix, filtration=filtration, features=features)


def predict_unit(unit: RepeatingUnit, weights: ModelWeights, non_periodic: bool = False) -> ForwardResult:
    config = weights.config
    if config.schema_version != FEATURE_SCHEMA_VERSION:
        raise VersionMismatchError(
            f"weights expect feature schema {config.schema_version!r}, "
            f"this build produces {FEATURE_SCHEMA_VERSION!r}"
        )
    fz = featurize_unit(unit, cutoffs=config.cutoffs, non_periodic=non_periodic)
    return hsmp_forward(fz.features, fz.filtration, weights)


def write_feature_container(path, fz: FeaturizedUnit) -> None:
    """Per-polymer tensor container: feature matrices plus simplex indices."""
    tensors = {}
    for li, fs in enumerate(fz.features, start=1):
        tensors[f"L{li}.vertex.features"] = fs.vertices
        tensors[f"L{li}.vertex.simplices"] = fs.vertex_index
        tensors[f"L{li}.edge.features"] = fs.edges
        tensors[f"L{li}.edge.simplices"] = fs.edge_index
        tensors[f"L{li}.triangle.features"] = fs.triangles
        tensors[f"L{li}.triangle.simplices"] = fs.triangle_index
    meta = {
        "kind": "feature-set",
        "schema_version": fz.schema_version,
        "cutoffs": [eps for eps, _ in fz.filtration.levels],
        "mode": fz.matrix.mode,
        "unit_meta": {k: v for k, v in fz.unit.meta.items() if isinstance(v, (str, int, float, bool))},
    }
    write_container(path, tensors, meta)


def read_feature_container(path):
    tensors, meta = read_container(path)
    if meta.get("kind") != "feature-set":
        raise VersionMismatchError(f"{path}: container does not hold a feature set")
    return tensors, meta


def write_feature_debug_csv(path, fz: FeaturizedUnit) -> None:
    """Human-readable companion to the tensor container."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["schema_version", fz.schema_version])
        writer.writerow(["epsilon", "dim", "vertex_tuple", "values"])
        for fs in fz.features:
            blocks = (
                (0, fs.vertex_index.reshape(-1, 1), fs.vertices),
                (1, fs.edge_index, fs.edges),
                (2, fs.triangle_index, fs.triangles),
            )
            for dim, index, rows in blocks:
                for simplex, row in zip(index, rows):
                    writer.writerow(
                        [
                            repr(fs.epsilon),
                            dim,
                            " ".join(str(int(v)) for v in simplex),
                            " ".join(repr(float(x)) for x in row),
                        ]
                    )


@dataclass
class BatchError:
    index: int
    message: str


def predict_batch(
    units: list[RepeatingUnit],
    weights: ModelWeights,
    non_periodic: bool = False,
    workers: int | None = None,
) -> list[float | BatchError]:
    """Order-preserving batch predict; failures become BatchError markers."""

    def run(idx: int):
        try:
            return predict_unit(units[idx], weights, non_periodic=non_periodic).prediction
        except Exception as exc:  # collected, batch continues
            return BatchError(index=idx, message=str(exc))

    workers = workers if workers is not None else worker_count()
    if workers <= 1 or len(units) <= 1:
        return [run(i) for i in range(len(units))]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(units))))
