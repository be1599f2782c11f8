"""Forman curvature on simplices, cutoff-sweep profiles, and normalization.

The combinatorial form for a p-simplex is

    #Face(sigma) + #Coface(sigma) - #Parallel(sigma)

with faces/cofaces one dimension apart and "parallel" meaning equal
dimension sharing a coface or a face but not both. A vertex counts zero
faces (the empty set is not a face here). The weighted edge formula keeps
the coface term w_e/w_f, the face term w_v/w_e, and an absolute-value
penalty per parallel edge combining shared-triangle and shared-vertex
contributions; with unit weights it collapses to the combinatorial form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .complexes import Simplex, SimplicialComplex, build_vr_complex, parallel_simplices
from .errors import ValidationError
from .metric import PeriodicDistanceMatrix

DEFAULT_DELTA = 0.25
DEFAULT_STEPS = 5
DEFAULT_TEMPERATURE = 10.0


class WeightAssignment:
    """Positive per-simplex weights; anything unassigned weighs 1."""

    def __init__(self, weights: dict[Simplex, float] | None = None, per_dim: dict[int, float] | None = None):
        self._weights = {tuple(k): float(v) for k, v in (weights or {}).items()}
        self._per_dim = {int(k): float(v) for k, v in (per_dim or {}).items()}
        for w in list(self._weights.values()) + list(self._per_dim.values()):
            if not w > 0:
                raise ValidationError(f"non-positive simplex weight {w}")

    def __getitem__(self, sigma: Simplex) -> float:
        sigma = tuple(sigma)
        if sigma in self._weights:
            return self._weights[sigma]
        return self._per_dim.get(len(sigma) - 1, 1.0)


UNIT_WEIGHTS = WeightAssignment()


@dataclass(frozen=True)
class CurvatureProfile:
    base_epsilon: float
    delta: float
    values: tuple[float, ...]  # normalized, each in (-1, 1)

    def __post_init__(self):
        if len(self.values) != DEFAULT_STEPS:
            raise ValidationError(f"profile must hold {DEFAULT_STEPS} values, got {len(self.values)}")


def forman_combinatorial(complex_: SimplicialComplex, sigma: Simplex) -> int:
    sigma = complex_.require(sigma)
    n_face = len(complex_.faces[sigma])
    n_coface = len(complex_.cofaces[sigma])
    n_parallel = len(parallel_simplices(complex_, sigma))
    return n_face + n_coface - n_parallel


def forman_edge_weighted(
    complex_: SimplicialComplex, weights: WeightAssignment, edge: Simplex
) -> float:
    edge = complex_.require(edge)
    if len(edge) != 2:
        raise ValidationError(f"weighted curvature is defined for edges, got {edge}")
    w_e = weights[edge]

    coface_term = sum(w_e / weights[f] for f in complex_.cofaces[edge])
    face_term = sum(weights[v] / w_e for v in complex_.faces[edge])

    penalty = 0.0
    for other in parallel_simplices(complex_, edge):
        w_o = weights[other]
        root = math.sqrt(w_e * w_o)
        shared_triangles = [f for f in complex_.cofaces[edge] if set(other) <= set(f)]
        shared_vertices = [v for v in complex_.faces[edge] if v[0] in other]
        tri_sum = sum(root / weights[f] for f in shared_triangles)
        vert_sum = sum(weights[v] / root for v in shared_vertices)
        penalty += abs(tri_sum - vert_sum)

    return w_e * (coface_term + face_term - penalty)


_OPEN_ONE = math.nextafter(1.0, 0.0)


def normalize_curvature(x: float, temperature: float = DEFAULT_TEMPERATURE) -> float:
    """Temperature-scaled sigmoid centered to (-1, 1): 2/(1+exp(-x/T)) - 1.

    Evaluated sign-split so the map is exactly odd; inputs so large that the
    true value is closer to +-1 than one float64 ulp are clamped to the
    nearest representable value inside the open interval.
    """
    if not math.isfinite(x):
        raise ValidationError(f"cannot normalize non-finite curvature {x}")
    y = x / temperature
    # (1 - e^-|y|) / (1 + e^-|y|) via expm1, exact for tiny |y|
    em = math.expm1(-abs(y))
    out = min(-em / (2.0 + em), _OPEN_ONE)
    return out if y >= 0 else -out


def curvature_profile(
    matrix: PeriodicDistanceMatrix,
    sigma: Simplex,
    base_epsilon: float,
    delta: float = DEFAULT_DELTA,
    steps: int = DEFAULT_STEPS,
    temperature: float = DEFAULT_TEMPERATURE,
    max_dim: int = 2,
    weights: WeightAssignment | None = None,
) -> CurvatureProfile:
    """Normalized curvature of sigma at cutoffs base, base+delta, ...

    Each sub-cutoff complex is rebuilt from scratch; by nestedness sigma is
    present in every one of them once it is present at the base cutoff.
    """
    sigma = tuple(sigma)
    values = []
    for k in range(steps):
        eps = base_epsilon + k * delta
        complex_ = build_vr_complex(matrix, eps, max_dim)
        if k == 0 and sigma not in complex_:
            raise ValidationError(f"simplex {sigma} absent at base cutoff {base_epsilon}")
        raw = _raw_curvature(complex_, sigma, weights)
        values.append(normalize_curvature(raw, temperature))
    return CurvatureProfile(base_epsilon=base_epsilon, delta=delta, values=tuple(values))


def _raw_curvature(complex_: SimplicialComplex, sigma: Simplex, weights: WeightAssignment | None) -> float:
    if weights is not None and len(sigma) == 2:
        return forman_edge_weighted(complex_, weights, sigma)
    return float(forman_combinatorial(complex_, sigma))


def profiles_for_complex(
    matrix: PeriodicDistanceMatrix,
    base_complex: SimplicialComplex,
    delta: float = DEFAULT_DELTA,
    steps: int = DEFAULT_STEPS,
    temperature: float = DEFAULT_TEMPERATURE,
    weights: WeightAssignment | None = None,
) -> dict[Simplex, np.ndarray]:
    """Profiles for every simplex of ``base_complex``, sharing the rebuilt
    sub-cutoff complexes instead of rebuilding once per simplex."""
    raws: dict[Simplex, list[float]] = {sigma: [] for sigma in base_complex.all_simplices()}
    for k in range(steps):
        eps = base_complex.epsilon + k * delta
        complex_k = build_vr_complex(matrix, eps, base_complex.max_dim)
        for sigma in raws:
            raws[sigma].append(_raw_curvature(complex_k, sigma, weights))
    return {
        sigma: np.array([normalize_curvature(v, temperature) for v in vals], dtype=np.float64)
        for sigma, vals in raws.items()
    }


def curvature_rows(
    matrix: PeriodicDistanceMatrix,
    base_complex: SimplicialComplex,
    delta: float = DEFAULT_DELTA,
    steps: int = DEFAULT_STEPS,
    temperature: float = DEFAULT_TEMPERATURE,
    weights: WeightAssignment | None = None,
) -> list[tuple[int, Simplex, float, float, float]]:
    """CSV-ready rows (dim, vertex_tuple, epsilon, raw, normalized)."""
    rows = []
    for k in range(steps):
        eps = base_complex.epsilon + k * delta
        complex_k = build_vr_complex(matrix, eps, base_complex.max_dim)
        for sigma in base_complex.all_simplices():
            raw = _raw_curvature(complex_k, sigma, weights)
            rows.append((len(sigma) - 1, sigma, eps, raw, normalize_curvature(raw, temperature)))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows
