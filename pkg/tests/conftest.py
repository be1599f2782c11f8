import json
from pathlib import Path

import numpy as np
import pytest

from periodic_rips import parse_repeating_unit

DATA_DIR = Path(__file__).parent / "data"


def make_atom(element="C", degree=2, implicit_valence=0, formal_charge=0,
              radical_electrons=0, hybridization="SP3", aromatic=False, is_anchor=False):
    return {
        "element": element,
        "degree": degree,
        "implicit_valence": implicit_valence,
        "formal_charge": formal_charge,
        "radical_electrons": radical_electrons,
        "hybridization": hybridization,
        "aromatic": aromatic,
        "is_anchor": is_anchor,
    }


def make_bond(i, j, bond_type="single", conjugated=False, in_ring=False):
    return {"i": i, "j": j, "bond_type": bond_type, "conjugated": conjugated, "in_ring": in_ring}


def chain_doc(elements, frames=1, meta=None, jitter=0.0, seed=0):
    """Anchor-capped chain: * - e1 - e2 - ... - en - * with simple geometry."""
    rng = np.random.default_rng(seed)
    n = len(elements) + 2
    atoms = [make_atom("*", 1, is_anchor=True)]
    for el in elements:
        atoms.append(make_atom(el, 2))
    atoms.append(make_atom("*", 1, is_anchor=True))
    bonds = [make_bond(i, i + 1) for i in range(n - 1)]
    frame_blocks = []
    for k in range(frames):
        coords = np.column_stack(
            [np.arange(n) * 1.5, np.zeros(n), np.zeros(n)]
        ) + (rng.normal(0, jitter, (n, 3)) if jitter else 0.0)
        frame_blocks.append(coords.tolist())
    doc = {"atoms": atoms, "bonds": bonds, "frames": frame_blocks}
    if meta:
        doc["meta"] = meta
    return doc


def parse_doc(doc):
    return parse_repeating_unit(json.dumps(doc))


@pytest.fixture
def simple_unit():
    return parse_doc(chain_doc(["C", "C", "O", "C"]))
