"""Repeating-unit input parsing, validation, and cyclic backbone permutations.

A linear homopolymer is described by one repeating unit: atoms (two of which
are anchor/dummy polymerization sites), covalent bonds, and one coordinate
frame per cyclic backbone permutation. The input document is UTF-8 JSON:

    {
      "meta":  {"name": ..., "psmiles": ..., ...},     # optional, opaque
      "atoms": [{"element": "C", "degree": 2, "implicit_valence": 2,
                 "formal_charge": 0, "radical_electrons": 0,
                 "hybridization": "SP3", "aromatic": false,
                 "is_anchor": false}, ...],
      "bonds": [{"i": 0, "j": 1, "bond_type": "single",
                 "conjugated": false, "in_ring": false}, ...],
      "frames": [[[x, y, z], ...N rows...], ...K frames...]
    }

Atom indices are the 0-based positions in the ``atoms`` list; an optional
``index`` field must agree with the position. The pSMILES string in ``meta``
is stored verbatim and never parsed.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .errors import ParseError, ValidationError

HYBRIDIZATIONS = ("SP", "SP2", "SP3", "other")
BOND_TYPES = ("single", "double", "triple", "aromatic")


@dataclass(frozen=True)
class AtomRecord:
    index: int
    element: str
    degree: int
    implicit_valence: int
    formal_charge: int
    radical_electrons: int
    hybridization: str
    aromatic: bool
    is_anchor: bool


@dataclass(frozen=True)
class BondRecord:
    i: int
    j: int
    bond_type: str
    conjugated: bool
    in_ring: bool

    def key(self) -> tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


@dataclass(frozen=True)
class CoordinateFrame:
    permutation_id: int
    coords: np.ndarray  # (N, 3) float64


@dataclass(frozen=True)
class RepeatingUnit:
    atoms: tuple[AtomRecord, ...]
    bonds: tuple[BondRecord, ...]
    frames: tuple[CoordinateFrame, ...]
    meta: dict = field(default_factory=dict)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def anchors(self) -> tuple[int, int]:
        idx = tuple(a.index for a in self.atoms if a.is_anchor)
        if len(idx) != 2:
            raise ValidationError(f"anchor count must be 2, found {len(idx)}")
        return idx  # type: ignore[return-value]

    def bond_lookup(self) -> dict[tuple[int, int], BondRecord]:
        return {b.key(): b for b in self.bonds}

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {a.index: [] for a in self.atoms}
        for b in self.bonds:
            adj[b.i].append(b.j)
            adj[b.j].append(b.i)
        for nbrs in adj.values():
            nbrs.sort()
        return adj


@dataclass(frozen=True)
class PermutationSpec:
    """One cyclic rotation of the backbone fragments.

    ``atom_map[alpha]`` is the position of canonical atom ``alpha`` in the
    rotated unit's layout. ``rotation`` is the number of fragment steps.
    """

    rotation: int
    fragment_order: tuple[int, ...]
    atom_map: tuple[int, ...]

    def inverse_map(self) -> tuple[int, ...]:
        inv = [0] * len(self.atom_map)
        for src, dst in enumerate(self.atom_map):
            inv[dst] = src
        return tuple(inv)


@dataclass
class DiagnosticEntry:
    severity: str  # "warning" | "error"
    message: str


@dataclass
class Diagnostics:
    entries: list[DiagnosticEntry] = field(default_factory=list)

    def warn(self, message: str) -> None:
        self.entries.append(DiagnosticEntry("warning", message))

    def error(self, message: str) -> None:
        self.entries.append(DiagnosticEntry("error", message))

    @property
    def warnings(self) -> list[str]:
        return [e.message for e in self.entries if e.severity == "warning"]

    @property
    def errors(self) -> list[str]:
        return [e.message for e in self.entries if e.severity == "error"]

    @property
    def ok(self) -> bool:
        return not self.entries


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _parse_atom(pos: int, rec: dict) -> AtomRecord:
    try:
        element = str(rec["element"])
        degree = int(rec["degree"])
        implicit_valence = int(rec["implicit_valence"])
        formal_charge = int(rec["formal_charge"])
        radical_electrons = int(rec["radical_electrons"])
        hybridization = str(rec["hybridization"])
        aromatic = bool(rec["aromatic"])
        is_anchor = bool(rec.get("is_anchor", False))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"atom {pos}: malformed record ({exc})") from exc
    if "index" in rec and int(rec["index"]) != pos:
        raise ValidationError(f"atom {pos}: explicit index {rec['index']} disagrees with position")
    if hybridization not in HYBRIDIZATIONS:
        hybridization = "other"
    _require(degree >= 0, f"atom {pos}: negative degree")
    if not -2 <= formal_charge <= 2:
        warnings.warn(f"atom {pos}: formal charge {formal_charge} clamped to [-2, 2]")
        formal_charge = max(-2, min(2, formal_charge))
    return AtomRecord(
        index=pos,
        element=element,
        degree=degree,
        implicit_valence=implicit_valence,
        formal_charge=formal_charge,
        radical_electrons=radical_electrons,
        hybridization=hybridization,
        aromatic=aromatic,
        is_anchor=is_anchor,
    )


def _parse_bond(rec: dict, n_atoms: int) -> BondRecord:
    try:
        i = int(rec["i"])
        j = int(rec["j"])
        bond_type = str(rec["bond_type"])
        conjugated = bool(rec["conjugated"])
        in_ring = bool(rec["in_ring"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed bond record ({exc})") from exc
    _require(i != j, f"bond ({i},{j}): self bond")
    _require(0 <= i < n_atoms and 0 <= j < n_atoms, f"bond ({i},{j}): endpoint out of range")
    if bond_type not in BOND_TYPES:
        raise ValidationError(f"bond ({i},{j}): unknown bond_type {bond_type!r}")
    if i > j:
        i, j = j, i
    return BondRecord(i=i, j=j, bond_type=bond_type, conjugated=conjugated, in_ring=in_ring)


def validate_unit(unit: RepeatingUnit) -> None:
    """Raise ValidationError unless every repeating-unit invariant holds."""
    n = unit.n_atoms
    _require(n > 0, "empty atom list")
    anchors = [a.index for a in unit.atoms if a.is_anchor]
    _require(len(anchors) == 2, f"anchor count must be 2, found {len(anchors)}")
    seen: set[tuple[int, int]] = set()
    for b in unit.bonds:
        k = b.key()
        _require(k not in seen, f"duplicate bond {k}")
        seen.add(k)
    # connectivity over the covalent graph
    adj = unit.adjacency()
    stack, reached = [0], {0}
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in reached:
                reached.add(v)
                stack.append(v)
    _require(len(reached) == n, "covalent graph is disconnected")
    _require(len(unit.frames) >= 1, "at least one coordinate frame required")
    for f in unit.frames:
        _require(
            f.coords.shape == (n, 3),
            f"frame size: frame {f.permutation_id} has shape {f.coords.shape}, expected ({n}, 3)",
        )
        _require(bool(np.isfinite(f.coords).all()), f"frame {f.permutation_id}: non-finite coordinate")


def parse_repeating_unit(source: str | bytes | IO) -> RepeatingUnit:
    """Parse and validate a repeating-unit document.

    ``source`` may be a JSON string, UTF-8 bytes, or a readable file object.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"malformed document: not UTF-8 ({exc})") from exc
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("malformed document: top level must be an object")
    for key in ("atoms", "bonds", "frames"):
        if key not in doc:
            raise ParseError(f"malformed document: missing {key!r} section")
        if not isinstance(doc[key], list):
            raise ParseError(f"malformed document: {key!r} must be a list")

    atoms = tuple(_parse_atom(pos, rec) for pos, rec in enumerate(doc["atoms"]))
    bonds = tuple(_parse_bond(rec, len(atoms)) for rec in doc["bonds"])
    frames = []
    for k, block in enumerate(doc["frames"]):
        try:
            coords = np.asarray(block, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"frame {k}: malformed coordinate block ({exc})") from exc
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise ValidationError(f"frame size: frame {k} must be N rows of 3 values")
        coords.setflags(write=False)
        frames.append(CoordinateFrame(permutation_id=k, coords=coords))
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise ParseError("malformed document: meta must be an object")

    unit = RepeatingUnit(atoms=atoms, bonds=bonds, frames=tuple(frames), meta=dict(meta))
    validate_unit(unit)
    return unit


# ---------------------------------------------------------------------------
# cyclic permutations
# ---------------------------------------------------------------------------


def _lex_min_shortest_path(adj: dict[int, list[int]], src: int, dst: int) -> list[int]:
    """Shortest src->dst path; ties broken by lexicographically smallest
    atom-index sequence (greedy walk against BFS distances from dst)."""
    dist = {dst: 0}
    frontier = [dst]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    if src not in dist:
        raise ValidationError("no anchor-to-anchor path")
    path = [src]
    u = src
    while u != dst:
        u = min(v for v in adj[u] if dist.get(v, -1) == dist[u] - 1)
        path.append(u)
    return path


def _backbone_fragments(unit: RepeatingUnit) -> tuple[list[list[int]], list[tuple[int, int]], list[int]]:
    """Split the unit into backbone fragments with their side chains.

    Returns (fragments, breakable_bonds, backbone) where fragments are
    ordered along the anchor-to-anchor backbone, breakable_bonds[i] is the
    non-ring backbone bond between fragments i and i+1 stored in backbone
    order (earlier atom, later atom), and backbone is the full
    anchor-to-anchor atom path. Side-chain atoms are attached to the
    fragment holding their backbone atom.
    """
    adj = unit.adjacency()
    a_left, a_right = sorted(unit.anchors)
    backbone = _lex_min_shortest_path(adj, a_left, a_right)
    inner = backbone[1:-1]  # real backbone atoms
    bond_by_key = unit.bond_lookup()

    breakable: list[tuple[int, int]] = []
    for u, v in zip(inner, inner[1:]):
        key = (u, v) if u < v else (v, u)
        bond = bond_by_key.get(key)
        if bond is None:
            raise ValidationError(f"backbone bond {key} missing from bond list")
        if not bond.in_ring:
            breakable.append((u, v))

    # components of the non-anchor graph with breakable bonds removed
    cut = {(min(u, v), max(u, v)) for u, v in breakable}
    comp_of: dict[int, int] = {}
    fragments: list[list[int]] = []
    anchors = set(unit.anchors)
    for start in inner:
        if start in comp_of:
            continue
        comp = len(fragments)
        members = []
        stack = [start]
        comp_of[start] = comp
        while stack:
            u = stack.pop()
            members.append(u)
            for v in adj[u]:
                if v in anchors or v in comp_of:
                    continue
                key = (u, v) if u < v else (v, u)
                if key in cut:
                    continue
                comp_of[v] = comp
                stack.append(v)
        fragments.append(sorted(members))
    # orphan side chains can only hang off backbone components, so every
    # non-anchor atom is reached; validate_unit guarantees connectivity.
    if not fragments:
        # unit whose backbone is just the two anchors bonded to each other
        fragments = [[a for a in range(unit.n_atoms) if a not in anchors]]
    return fragments, breakable, backbone


def _rotated_bonds(
    unit: RepeatingUnit, breakable: list[tuple[int, int]], backbone: list[int], rotation: int
) -> list[tuple[int, int, str]]:
    """Connectivity of the unit after rotating fragments by ``rotation``.

    The broken breakable bond becomes the new seam (replaced by anchor
    attachments) and the old anchor seam closes into a real bond.
    """
    a_left, a_right = backbone[0], backbone[-1]
    first_real, last_real = backbone[1], backbone[-2]
    bond_by_key = unit.bond_lookup()
    seam_type = bond_by_key[(min(a_left, first_real), max(a_left, first_real))].bond_type

    out = []
    if rotation == 0:
        return [(b.i, b.j, b.bond_type) for b in unit.bonds]
    earlier, later = breakable[rotation - 1]  # backbone order
    broken_key = (min(earlier, later), max(earlier, later))
    broken_type = bond_by_key[broken_key].bond_type
    for b in unit.bonds:
        k = b.key()
        if k == broken_key:
            continue
        if k == (min(a_left, first_real), max(a_left, first_real)):
            continue
        if k == (min(a_right, last_real), max(a_right, last_real)):
            continue
        out.append((b.i, b.j, b.bond_type))
    # close the old seam, open a new one at the broken bond: the later
    # endpoint starts the rotated unit, the earlier endpoint ends it
    out.append((last_real, first_real, seam_type))
    out.append((a_left, later, broken_type))
    out.append((a_right, earlier, broken_type))
    return out


def _refined_canonical_form(
    atoms: tuple[AtomRecord, ...], bonds: list[tuple[int, int, str]], rounds: int | None = None
) -> tuple:
    """Canonical form via iterated degree/element label refinement.

    Sound but conservative: rotations with equal forms are merged as
    duplicates; full isomorphism search is intentionally not attempted.
    """
    n = len(atoms)
    adj: dict[int, list[tuple[int, str]]] = {i: [] for i in range(n)}
    for i, j, t in bonds:
        adj[i].append((j, t))
        adj[j].append((i, t))
    colors = {
        a.index: (a.element, a.is_anchor, a.aromatic, a.formal_charge, len(adj[a.index]))
        for a in atoms
    }
    for _ in range(rounds if rounds is not None else n):
        new = {
            i: (colors[i], tuple(sorted((colors[j], t) for j, t in adj[i])))
            for i in range(n)
        }
        if len(set(new.values())) == len(set(colors.values())):
            colors = new
            break
        colors = new
    return tuple(sorted(map(repr, colors.values())))


def enumerate_cyclic_permutations(unit: RepeatingUnit) -> list[PermutationSpec]:
    """Enumerate cyclic rotations of the backbone fragments.

    The backbone is the shortest anchor-to-anchor path; viewing it as a
    cycle through the seam, every non-ring bond of that cycle is a cut
    point. F cut points yield F fragments and F rotations; rotations whose
    connectivity is identical under the canonical-form comparison are
    dropped, so the returned count matches the number of distinct frames
    the unit is expected to carry.
    """
    validate_unit(unit)
    fragments, breakable, backbone = _backbone_fragments(unit)
    a_left, a_right = backbone[0], backbone[-1]
    n = unit.n_atoms
    n_frag = len(fragments)
    if n_frag != len(breakable) + 1:  # one cut per inter-fragment bond plus the seam
        raise ValidationError(
            "backbone fragmentation inconsistent: a breakable backbone bond is "
            "closed by a side-chain cycle (check in_ring flags)"
        )

    specs: list[PermutationSpec] = []
    seen_forms: set[tuple] = set()
    for r in range(n_frag):
        order = tuple((r + i) % n_frag for i in range(n_frag))
        layout = [a_left]
        for fi in order:
            layout.extend(fragments[fi])
        layout.append(a_right)
        atom_map = [0] * n
        for pos, atom in enumerate(layout):
            atom_map[atom] = pos
        form = _refined_canonical_form(unit.atoms, _rotated_bonds(unit, breakable, backbone, r))
        if form in seen_forms:
            continue
        seen_forms.add(form)
        specs.append(PermutationSpec(rotation=r, fragment_order=order, atom_map=tuple(atom_map)))
    return specs


def validate_frames(unit: RepeatingUnit, specs: Iterable[PermutationSpec]) -> Diagnostics:
    """Diagnostic comparison of supplied frames against expected permutations.

    Never raises and never mutates; callers decide what to do with warnings.
    """
    diag = Diagnostics()
    specs = list(specs)
    k = len(unit.frames)
    if k == 1 and len(specs) > 1:
        diag.warn(f"single-frame mode: 1 frame supplied, {len(specs)} permutations expected")
    elif k != len(specs):
        diag.warn(f"frame count {k} does not match permutation count {len(specs)}")
    for f in unit.frames:
        if f.coords.shape != (unit.n_atoms, 3):
            diag.error(f"frame {f.permutation_id}: wrong shape {f.coords.shape}")
            continue
        bad = np.argwhere(~np.isfinite(f.coords))
        for atom_idx in sorted({int(i) for i, _ in bad}):
            diag.error(f"frame {f.permutation_id}: non-finite coordinate at atom {atom_idx}")
    return diag
