"""Regenerate the bundled mini-dataset under data/mini/.

Eight small synthetic repeating units: the four vinyl-family scaffolds,
each with an unsubstituted and a para-F pendant variant. Coordinate frames
are laid out per cyclic permutation (one frame per enumerated rotation),
so seam-adjacent atoms really do become close in some frame.

Deterministic; run from the repository root:

    python3 scripts/make_mini_dataset.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from periodic_rips import enumerate_cyclic_permutations, parse_repeating_unit

OUT_DIR = Path(__file__).resolve().parent.parent / "data" / "mini"

BOND_LENGTH = 1.52
SIDE_OFFSET = 1.25


def atom(element, degree, hyb="SP3", aromatic=False, anchor=False, valence=0):
    return {
        "element": element,
        "degree": degree,
        "implicit_valence": valence,
        "formal_charge": 0,
        "radical_electrons": 0,
        "hybridization": hyb,
        "aromatic": aromatic,
        "is_anchor": anchor,
    }


def bond(i, j, bond_type="single", conjugated=False, in_ring=False):
    return {"i": i, "j": j, "bond_type": bond_type, "conjugated": conjugated, "in_ring": in_ring}


def scaffold(family: str, key: str):
    """Backbone C1-C2-C3 with a family pendant on C2, optional alpha-methyl
    on C1, and an optional F on C3 for the para-F variant."""
    methyl = family in ("Ar-Et-MA", "Ar-Et-MAM")
    amide = family in ("Ar-Et-AM", "Ar-Et-MAM")
    fluoro = key == "para-F"

    atoms = [
        atom("*", 0, anchor=True),               # 0 left anchor
        atom("C", 0),                            # 1 backbone
        atom("C", 0),                            # 2 backbone, pendant carrier
        atom("C", 0),                            # 3 backbone
        atom("*", 0, anchor=True),               # 4 right anchor
        atom("C", 0, hyb="SP2"),                 # 5 pendant carbonyl carbon
        atom("O", 0, hyb="SP2"),                 # 6 carbonyl oxygen
        atom("N" if amide else "O", 0),          # 7 ester/amide heteroatom
    ]
    bonds = [
        bond(0, 1),
        bond(1, 2),
        bond(2, 3),
        bond(3, 4),
        bond(2, 5),
        bond(5, 6, "double", conjugated=True),
        bond(5, 7),
    ]
    side_parent = {5: 2, 6: 5, 7: 5}
    if methyl:
        atoms.append(atom("C", 0))
        bonds.append(bond(1, len(atoms) - 1))
        side_parent[len(atoms) - 1] = 1
    if fluoro:
        atoms.append(atom("F", 0))
        bonds.append(bond(3, len(atoms) - 1))
        side_parent[len(atoms) - 1] = 3
    # degrees follow the covalent adjacency
    for b in bonds:
        atoms[b["i"]]["degree"] += 1
        atoms[b["j"]]["degree"] += 1
    return atoms, bonds, side_parent


def build_frames(doc: dict, side_parent: dict[int, int], seed: int) -> list[list[list[float]]]:
    """One frame per cyclic permutation, laid out along the rotated backbone."""
    probe = dict(doc)
    n = len(doc["atoms"])
    probe["frames"] = [np.zeros((n, 3)).tolist()]
    unit = parse_repeating_unit(json.dumps(probe))
    specs = enumerate_cyclic_permutations(unit)
    rng = np.random.default_rng(seed)

    backbone_atoms = [a for a in range(n) if a not in side_parent]
    frames = []
    for spec in specs:
        # backbone x positions follow the rotated layout order
        order = sorted(backbone_atoms, key=lambda a: spec.atom_map[a])
        x = {a: BOND_LENGTH * i for i, a in enumerate(order)}
        coords = np.zeros((n, 3))
        for a in backbone_atoms:
            coords[a] = (x[a], 0.0, 0.0)
        for a in sorted(side_parent):
            parent = side_parent[a]
            depth = 1
            p = parent
            while p in side_parent:
                p = side_parent[p]
                depth += 1
            coords[a] = (coords[p][0] + 0.3 * depth, SIDE_OFFSET * depth, 0.0)
        coords[:, 2] = rng.normal(0.0, 0.05, size=n)
        frames.append(np.round(coords, 4).tolist())
    return frames


FAMILY_NAMES = {
    "Ar-Et-A": "acrylate-like",
    "Ar-Et-MA": "methacrylate-like",
    "Ar-Et-AM": "acrylamide-like",
    "Ar-Et-MAM": "methacrylamide-like",
}


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    seed = 1000
    for family in FAMILY_NAMES:
        for key in ("none", "para-F"):
            atoms, bonds, side_parent = scaffold(family, key)
            slug = f"{family.lower().replace('-', '_')}__{key.replace('-', '_')}"
            doc = {
                "meta": {
                    "id": slug,
                    "name": f"{FAMILY_NAMES[family]} ({key})",
                    "family": family,
                    "substitution_key": key,
                    "psmiles": "[*]CC(C(=O)X)C[*]",
                },
                "atoms": atoms,
                "bonds": bonds,
            }
            doc["frames"] = build_frames(doc, side_parent, seed)
            seed += 1
            path = OUT_DIR / f"{slug}.json"
            path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
            unit = parse_repeating_unit(path.read_text())
            specs = enumerate_cyclic_permutations(unit)
            assert len(unit.frames) == len(specs), (slug, len(unit.frames), len(specs))
            print(f"{path.name}: N={unit.n_atoms} K={len(unit.frames)}")


if __name__ == "__main__":
    main()
