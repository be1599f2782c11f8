"""Initial per-simplex feature vectors: chemical descriptors + curvature.

Vertex features are 70 chemical slots followed by the 5-value curvature
profile (75 total). Edge features are 6 chemical slots plus 5 curvature
values (11); a Rips edge with no covalent bond carries an all-zero chemical
part as an explicit mask. Triangles carry curvature only (5).

Chemical parts are invariant across filtration levels; curvature parts are
recomputed per level. The slot layout below is versioned and serialized
with every output so downstream weights can never silently disagree with
the features they were trained on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .complexes import Filtration, Simplex
from .errors import ValidationError
from .polymer import AtomRecord, BondRecord, RepeatingUnit

FEATURE_SCHEMA_VERSION = "fs-1"

# 43 elements common in organic polymers; anchors ("*") and anything outside
# the vocabulary zero the group (there is deliberately no catch-all slot).
ELEMENT_VOCAB = (
    "C", "N", "O", "S", "F", "Si", "P", "Cl", "Br", "Mg",
    "Na", "Ca", "Fe", "As", "Al", "I", "B", "V", "K", "Tl",
    "Yb", "Sb", "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "H",
    "Li", "Ge", "Cu", "Au", "Ni", "Cd", "In", "Mn", "Zr", "Cr",
    "Pt", "Hg", "Pb",
)

DEGREE_SLOTS = 6          # 0..5
VALENCE_SLOTS = 7         # 0..6
CHARGE_SLOTS = 5          # -2..+2
RADICAL_SLOTS = 4         # 0..3
HYBRIDIZATION_SLOTS = ("SP", "SP2", "SP3", "other")
BOND_TYPE_SLOTS = ("single", "double", "triple", "aromatic")

ATOM_FEATURE_DIM = len(ELEMENT_VOCAB) + DEGREE_SLOTS + VALENCE_SLOTS + CHARGE_SLOTS + RADICAL_SLOTS + len(HYBRIDIZATION_SLOTS) + 1
BOND_FEATURE_DIM = len(BOND_TYPE_SLOTS) + 2
CURVATURE_DIM = 5
VERTEX_FEATURE_DIM = ATOM_FEATURE_DIM + CURVATURE_DIM
EDGE_FEATURE_DIM = BOND_FEATURE_DIM + CURVATURE_DIM
TRIANGLE_FEATURE_DIM = CURVATURE_DIM

assert ATOM_FEATURE_DIM == 70 and BOND_FEATURE_DIM == 6


@dataclass(frozen=True)
class FeatureSchema:
    version: str = FEATURE_SCHEMA_VERSION
    atom_dim: int = ATOM_FEATURE_DIM
    bond_dim: int = BOND_FEATURE_DIM
    curvature_dim: int = CURVATURE_DIM


@dataclass(frozen=True)
class SimplexFeatureSet:
    epsilon: float
    vertices: np.ndarray   # (n0, 75)
    edges: np.ndarray      # (n1, 11)
    triangles: np.ndarray  # (n2, 5)
    vertex_index: np.ndarray    # (n0,) int64
    edge_index: np.ndarray      # (n1, 2) int64
    triangle_index: np.ndarray  # (n2, 3) int64
    schema_version: str = FEATURE_SCHEMA_VERSION


def _clamped(value: int, hi: int, what: str) -> int:
    if value > hi:
        warnings.warn(f"{what} {value} clamped to {hi}")
        return hi
    if value < 0:
        warnings.warn(f"{what} {value} clamped to 0")
        return 0
    return value


def atom_feature_vector(atom: AtomRecord) -> np.ndarray:
    vec = np.zeros(ATOM_FEATURE_DIM, dtype=np.float64)
    offset = 0
    if atom.element in ELEMENT_VOCAB:
        vec[offset + ELEMENT_VOCAB.index(atom.element)] = 1.0
    elif not atom.is_anchor:
        warnings.warn(f"element {atom.element!r} outside vocabulary; element slots left zero")
    offset += len(ELEMENT_VOCAB)

    vec[offset + _clamped(atom.degree, DEGREE_SLOTS - 1, "degree")] = 1.0
    offset += DEGREE_SLOTS
    vec[offset + _clamped(atom.implicit_valence, VALENCE_SLOTS - 1, "implicit valence")] = 1.0
    offset += VALENCE_SLOTS
    charge = _clamped(atom.formal_charge + 2, CHARGE_SLOTS - 1, "formal charge slot")
    vec[offset + charge] = 1.0
    offset += CHARGE_SLOTS
    vec[offset + _clamped(atom.radical_electrons, RADICAL_SLOTS - 1, "radical electrons")] = 1.0
    offset += RADICAL_SLOTS
    hyb = atom.hybridization if atom.hybridization in HYBRIDIZATION_SLOTS else "other"
    vec[offset + HYBRIDIZATION_SLOTS.index(hyb)] = 1.0
    offset += len(HYBRIDIZATION_SLOTS)
    vec[offset] = 1.0 if atom.aromatic else 0.0
    return vec


def bond_feature_vector(bond: BondRecord | None) -> np.ndarray:
    """Covalent bond descriptor; ``None`` (a non-covalent Rips edge) is the
    all-zero mask."""
    vec = np.zeros(BOND_FEATURE_DIM, dtype=np.float64)
    if bond is None:
        return vec
    vec[BOND_TYPE_SLOTS.index(bond.bond_type)] = 1.0
    vec[len(BOND_TYPE_SLOTS)] = 1.0 if bond.conjugated else 0.0
    vec[len(BOND_TYPE_SLOTS) + 1] = 1.0 if bond.in_ring else 0.0
    return vec


def assemble_features(
    unit: RepeatingUnit,
    filtration: Filtration,
    profiles_per_level: list[dict[Simplex, np.ndarray]],
) -> list[SimplexFeatureSet]:
    """Per-level feature matrices in canonical simplex order.

    ``profiles_per_level[i]`` must hold a 5-value curvature profile for
    every simplex of level i. Chemical sub-vectors are computed once and
    reused across levels, so they are bitwise identical per simplex.
    """
    if len(profiles_per_level) != len(filtration.levels):
        raise ValidationError("one profile map per filtration level required")
    n = unit.n_atoms
    if filtration.complex_at(0).count(0) != n:
        raise ValidationError(
            f"complex/unit atom-count mismatch: {filtration.complex_at(0).count(0)} vs {n}"
        )
    atom_chem = np.stack([atom_feature_vector(a) for a in unit.atoms])
    bond_by_key = unit.bond_lookup()

    out = []
    for (eps, complex_), profiles in zip(filtration.levels, profiles_per_level):
        def profile_of(sigma: Simplex) -> np.ndarray:
            try:
                p = profiles[sigma]
            except KeyError:
                raise ValidationError(f"missing curvature profile for {sigma} at eps={eps}") from None
            return np.asarray(p, dtype=np.float64)

        verts = complex_.simplices[0]
        vertex_rows = np.zeros((len(verts), VERTEX_FEATURE_DIM))
        for r, sigma in enumerate(verts):
            vertex_rows[r, :ATOM_FEATURE_DIM] = atom_chem[sigma[0]]
            vertex_rows[r, ATOM_FEATURE_DIM:] = profile_of(sigma)

        edges = complex_.simplices.get(1, [])
        edge_rows = np.zeros((len(edges), EDGE_FEATURE_DIM))
        for r, sigma in enumerate(edges):
            edge_rows[r, :BOND_FEATURE_DIM] = bond_feature_vector(bond_by_key.get(sigma))
            edge_rows[r, BOND_FEATURE_DIM:] = profile_of(sigma)

        triangles = complex_.simplices.get(2, [])
        tri_rows = np.zeros((len(triangles), TRIANGLE_FEATURE_DIM))
        for r, sigma in enumerate(triangles):
            tri_rows[r] = profile_of(sigma)

        out.append(
            SimplexFeatureSet(
                epsilon=eps,
                vertices=vertex_rows,
                edges=edge_rows,
                triangles=tri_rows,
                vertex_index=np.array([s[0] for s in verts], dtype=np.int64),
                edge_index=np.array(edges, dtype=np.int64).reshape(len(edges), 2),
                triangle_index=np.array(triangles, dtype=np.int64).reshape(len(triangles), 3),
            )
        )
    return out
