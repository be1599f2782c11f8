"""Vietoris-Rips complexes, nested filtrations, and adjacency relations.

A simplex is a strictly increasing tuple of atom indices; the complex at
cutoff eps contains every vertex, every pair within eps, and every larger
vertex set (up to ``max_dim``) whose pairwise distances are all <= eps.
Threshold comparison is exact ``<=``: nestedness across filtration levels
must be bit-exact, so no tolerance is applied (pre-quantize the matrix if
tolerant thresholds are wanted).

Canonical simplex order is lexicographic on the vertex tuple within each
dimension; every iteration order in the package derives from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ValidationError
from .metric import PeriodicDistanceMatrix

Simplex = tuple[int, ...]

MAX_SUPPORTED_DIM = 3


@dataclass
class SimplicialComplex:
    epsilon: float
    max_dim: int
    simplices: dict[int, list[Simplex]]  # dim -> lex-sorted tuples
    ordinal: dict[Simplex, int] = field(repr=False)  # simplex -> index in its dim list
    faces: dict[Simplex, list[Simplex]] = field(repr=False)
    cofaces: dict[Simplex, list[Simplex]] = field(repr=False)

    def __contains__(self, sigma: Simplex) -> bool:
        return tuple(sigma) in self.ordinal

    def count(self, dim: int) -> int:
        return len(self.simplices.get(dim, []))

    def all_simplices(self) -> Iterable[Simplex]:
        for dim in sorted(self.simplices):
            yield from self.simplices[dim]

    def require(self, sigma: Simplex) -> Simplex:
        sigma = tuple(sigma)
        if sigma not in self.ordinal:
            raise ValidationError(f"simplex {sigma} not in complex at eps={self.epsilon}")
        return sigma


@dataclass(frozen=True)
class Filtration:
    levels: tuple[tuple[float, SimplicialComplex], ...]

    @property
    def cutoffs(self) -> tuple[float, ...]:
        return tuple(eps for eps, _ in self.levels)

    def complex_at(self, index: int) -> SimplicialComplex:
        return self.levels[index][1]


def build_vr_complex(matrix: PeriodicDistanceMatrix, epsilon: float, max_dim: int = 2) -> SimplicialComplex:
    """All cliques of the eps-threshold graph up to dimension ``max_dim``."""
    if not 0 <= max_dim <= MAX_SUPPORTED_DIM:
        raise ValidationError(f"max_dim must be in [0, {MAX_SUPPORTED_DIM}], got {max_dim}")
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    d = matrix.values
    n = matrix.n

    simplices: dict[int, list[Simplex]] = {dim: [] for dim in range(max_dim + 1)}
    simplices[0] = [(i,) for i in range(n)]
    if max_dim >= 1:
        within = d <= epsilon
        simplices[1] = [(i, j) for i in range(n) for j in range(i + 1, n) if within[i, j]]
        prev = simplices[1]
        for dim in range(2, max_dim + 1):
            cur: list[Simplex] = []
            for sigma in prev:
                last = sigma[-1]
                for v in range(last + 1, n):
                    if all(within[u, v] for u in sigma):
                        cur.append(sigma + (v,))
            simplices[dim] = cur
            prev = cur

    ordinal: dict[Simplex, int] = {}
    for dim in range(max_dim + 1):
        for k, sigma in enumerate(simplices[dim]):
            ordinal[sigma] = k

    faces: dict[Simplex, list[Simplex]] = {}
    cofaces: dict[Simplex, list[Simplex]] = {sigma: [] for sigma in ordinal}
    for dim in range(max_dim + 1):
        for sigma in simplices[dim]:
            if dim == 0:
                faces[sigma] = []  # a vertex has no proper faces in the complex
                continue
            fs = [sigma[:k] + sigma[k + 1 :] for k in range(len(sigma))]
            faces[sigma] = fs
            for tau in fs:
                cofaces[tau].append(sigma)
    # extension order already gives lex-sorted coface lists; keep it canonical
    for lst in cofaces.values():
        lst.sort()

    return SimplicialComplex(
        epsilon=epsilon, max_dim=max_dim, simplices=simplices, ordinal=ordinal, faces=faces, cofaces=cofaces
    )


def build_filtration(
    matrix: PeriodicDistanceMatrix, cutoffs: Sequence[float], max_dim: int = 2
) -> Filtration:
    cutoffs = [float(c) for c in cutoffs]
    if not cutoffs:
        raise ValidationError("at least one cutoff required")
    if any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise ValidationError(f"cutoffs must be strictly increasing, got {cutoffs}")
    levels = tuple((eps, build_vr_complex(matrix, eps, max_dim)) for eps in cutoffs)
    return Filtration(levels=levels)


def upper_adjacent(complex_: SimplicialComplex, sigma: Simplex) -> list[tuple[Simplex, Simplex]]:
    """Equal-dimension neighbors sharing a coface with sigma.

    Returns (neighbor, shared_coface) pairs, one entry per shared coface,
    in canonical order.
    """
    sigma = complex_.require(sigma)
    out = []
    for tau in complex_.cofaces[sigma]:
        for nbr in complex_.faces[tau]:
            if nbr != sigma:
                out.append((nbr, tau))
    out.sort()
    return out


def parallel_simplices(complex_: SimplicialComplex, sigma: Simplex) -> list[Simplex]:
    """Equal-dimension simplices sharing a coface or a face with sigma, not both."""
    sigma = complex_.require(sigma)
    share_coface = {nbr for nbr, _ in upper_adjacent(complex_, sigma)}
    share_face: set[Simplex] = set()
    for eta in complex_.faces[sigma]:
        for nbr in complex_.cofaces[eta]:
            if nbr != sigma:
                share_face.add(nbr)
    return sorted(share_coface.symmetric_difference(share_face))


def assert_downward_closed(complex_: SimplicialComplex) -> None:
    """Raise if some simplex has a missing face (used by tests/debug export)."""
    for sigma in complex_.all_simplices():
        if len(sigma) > 1:
            for k in range(len(sigma)):
                tau = sigma[:k] + sigma[k + 1 :]
                if tau not in complex_:
                    raise AssertionError(f"face {tau} of {sigma} missing")


def export_complex_text(complex_: SimplicialComplex) -> str:
    """Debug/test export: per dimension, one simplex per line."""
    lines = []
    for dim in range(complex_.max_dim + 1):
        simplices = complex_.simplices.get(dim, [])
        lines.append(f"# dim={dim} count={len(simplices)}")
        for sigma in simplices:
            lines.append(" ".join(str(v) for v in sigma))
    return "\n".join(lines) + "\n"
