"""Acceptance criteria, one test per criterion.

Each test prints a single PASS line on success (visible with ``pytest -s``
or in the captured output section); a failure reads as the criterion name.
Tolerances are pinned here and nowhere else.
"""

import copy
import json
import math
import shutil
import subprocess
import sys
import time
from contextlib import contextmanager
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

from periodic_rips import (
    ModelConfig,
    WeightAssignment,
    build_filtration,
    build_vr_complex,
    expected_shapes,
    forman_combinatorial,
    forman_edge_weighted,
    generate_test_weights,
    holm_adjust,
    hsmp_forward,
    mann_whitney_u,
    normalize_curvature,
    parallel_simplices,
    parse_repeating_unit,
    validate_manifest,
)
from periodic_rips.errors import WeightFormatError
from periodic_rips.metric import PeriodicDistanceMatrix, periodic_distance_matrix
from periodic_rips.model import cross_scale_refine, _WeightView, _project_level
from periodic_rips.pipeline import featurize_unit, predict_batch, predict_unit
from periodic_rips.polymer import CoordinateFrame
from periodic_rips.stats import t_cdf, t_quantile

from conftest import chain_doc, parse_doc
from test_model import _relabel_unit
from test_stats import t_cdf_quadrature

ROOT = Path(__file__).parent.parent
MINI = ROOT / "data" / "mini"
GOLDEN = ROOT / "tests" / "data" / "golden"

TEST_WEIGHT_DIMS = dict(hidden_dim=24, heads=12)


@contextmanager
def criterion(name, budget_s=None):
    start = time.monotonic()
    yield
    elapsed = time.monotonic() - start
    if budget_s is not None:
        assert elapsed < budget_s, f"{name}: runtime {elapsed:.2f}s exceeds {budget_s}s"
    print(f"ACCEPTANCE PASS [{elapsed:6.2f}s] {name}")


def matrix_from(values):
    values = np.asarray(values, dtype=np.float64)
    values.setflags(write=False)
    return PeriodicDistanceMatrix(n=values.shape[0], values=values, mode="intra_unit")


def random_point_matrix(rng, n, scale=2.0):
    coords = rng.uniform(0, scale, size=(n, 2))
    diff = coords[:, None, :] - coords[None, :, :]
    return matrix_from(np.sqrt((diff**2).sum(-1)))


def test_periodic_metric_oracle():
    with criterion("periodic-metric oracle: 200 random instances vs triple loop, <5s", budget_s=5.0):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(2, 13))
            k = int(rng.integers(1, 6))
            arrays = [rng.normal(size=(n, 3)) * 3.0 for _ in range(k)]
            frames = [CoordinateFrame(i, a) for i, a in enumerate(arrays)]
            got = periodic_distance_matrix(frames).values
            for a in range(n):
                assert got[a, a] == 0.0
                for b in range(n):
                    best = math.inf
                    for coords in arrays:
                        ddx = coords[a, 0] - coords[b, 0]
                        ddy = coords[a, 1] - coords[b, 1]
                        ddz = coords[a, 2] - coords[b, 2]
                        best = min(best, math.sqrt(ddx * ddx + ddy * ddy + ddz * ddz))
                    assert got[a, b] == best
                    assert got[a, b] == got[b, a]


def test_vr_oracle():
    with criterion("VR oracle: 100 random matrices vs subset brute force; nested filtration, <10s", budget_s=10.0):
        rng = np.random.default_rng(77)
        for _ in range(100):
            n = int(rng.integers(2, 9))
            m = random_point_matrix(rng, n, scale=4.0)
            eps = float(rng.uniform(0.5, 4.0))
            complex_ = build_vr_complex(m, eps, max_dim=2)
            for dim in range(3):
                oracle = [
                    s
                    for s in combinations(range(n), dim + 1)
                    if all(m.values[a, b] <= eps for a, b in combinations(s, 2))
                ]
                assert complex_.simplices[dim] == oracle
            filtration = build_filtration(m, [2.0, 3.0, 4.0], max_dim=2)
            for (_, ka), (_, kb) in zip(filtration.levels, filtration.levels[1:]):
                for dim in range(3):
                    assert set(ka.simplices[dim]) <= set(kb.simplices[dim])
            for _, level in filtration.levels:
                for sigma in level.all_simplices():
                    for j in range(len(sigma)):
                        if len(sigma) > 1:
                            assert sigma[:j] + sigma[j + 1 :] in level


def test_curvature_identities():
    with criterion("curvature identities: weighted==combinatorial, 4-deg-deg, parallel XOR, exact"):
        rng = np.random.default_rng(4242)
        unit = WeightAssignment()
        triangle_free_checked = 0
        for _ in range(100):
            n = int(rng.integers(3, 9))
            m = random_point_matrix(rng, n, scale=3.0)
            eps = float(rng.uniform(0.5, 2.5))
            k = build_vr_complex(m, eps, max_dim=2)
            deg = {v[0]: 0 for v in k.simplices[0]}
            for a, b in k.simplices[1]:
                deg[a] += 1
                deg[b] += 1
            for edge in k.simplices[1]:
                assert forman_edge_weighted(k, unit, edge) == float(forman_combinatorial(k, edge))
                if k.count(2) == 0:
                    a, b = edge
                    assert forman_combinatorial(k, edge) == 4 - deg[a] - deg[b]
                    triangle_free_checked += 1
            # parallel XOR brute force across all dims
            for dim in (0, 1, 2):
                for sigma in k.simplices[dim]:
                    brute = []
                    for other in k.simplices[dim]:
                        if other == sigma:
                            continue
                        share_coface = any(
                            set(sigma) <= set(tau) and set(other) <= set(tau)
                            for tau in k.simplices.get(dim + 1, [])
                        )
                        share_face = dim > 0 and any(
                            set(eta) <= set(sigma) and set(eta) <= set(other)
                            for eta in k.simplices[dim - 1]
                        )
                        if share_coface != share_face:
                            brute.append(other)
                    assert parallel_simplices(k, sigma) == brute
        assert triangle_free_checked > 50


def test_normalization():
    with criterion("normalization: f(0)=0, odd to 1e-15, monotone on 1e4 grid, open range"):
        assert normalize_curvature(0.0) == 0.0
        rng = np.random.default_rng(5)
        for x in rng.uniform(-200, 200, size=500):
            assert abs(normalize_curvature(float(x)) + normalize_curvature(float(-x))) <= 1e-15
        grid = np.linspace(-300.0, 300.0, 10_000)
        values = [normalize_curvature(float(x)) for x in grid]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert all(-1.0 < v < 1.0 for v in values)
        for extreme in (1e9, -1e9, 1e300, -1e300):
            assert -1.0 < normalize_curvature(extreme) < 1.0


def test_feature_schema():
    with criterion("feature schema: widths 75/11/5, zero-masked ghost edges, level-invariant chemistry"):
        unit = parse_repeating_unit((MINI / "ar_et_ma__para_F.json").read_text())
        fz = featurize_unit(unit)
        covalent = {b.key() for b in unit.bonds}
        saw_ghost = False
        for fs in fz.features:
            assert fs.vertices.shape[1] == 75
            assert fs.edges.shape[1] == 11
            assert fs.triangles.shape[1] == 5
            for row, edge in zip(fs.edges, fs.edge_index):
                if tuple(edge) not in covalent:
                    assert not row[:6].any()
                    saw_ghost = True
        assert saw_ghost
        f1, f2, f3 = fz.features
        assert np.array_equal(f1.vertices[:, :70], f2.vertices[:, :70])
        assert np.array_equal(f1.vertices[:, :70], f3.vertices[:, :70])
        lookup = [{tuple(e): i for i, e in enumerate(fs.edge_index)} for fs in fz.features]
        for e, i1 in lookup[0].items():
            chem = f1.edges[i1, :6]
            assert np.array_equal(chem, f2.edges[lookup[1][e], :6])
            assert np.array_equal(chem, f3.edges[lookup[2][e], :6])


def test_hsmp_configuration():
    with criterion("encoder config: defaults 768/12 with 4/6-4/6-6 schedule; manifest validation"):
        cfg = ModelConfig()
        assert cfg.hidden_dim == 768 and cfg.heads == 12
        assert cfg.cutoffs == (2.0, 3.0, 4.0)
        # coarsest-to-finest: 4 edge + 6 node, 4 edge + 6 node, node-only 6
        assert (cfg.edge_layers[2], cfg.node_layers[2]) == (4, 6)
        assert (cfg.edge_layers[1], cfg.node_layers[1]) == (4, 6)
        assert (cfg.edge_layers[0], cfg.node_layers[0]) == (0, 6)
        shapes = expected_shapes(cfg)
        validate_manifest(cfg, shapes)
        for mutation in ("drop", "reshape", "extra"):
            bad = dict(shapes)
            if mutation == "drop":
                del bad["mp.L3.edge.l0.h0.w1"]
            elif mutation == "reshape":
                bad["head.w2"] = (cfg.hidden_dim, 2)
            else:
                bad["not.a.tensor"] = (1,)
            with pytest.raises(WeightFormatError):
                validate_manifest(cfg, bad)


def test_hsmp_invariants():
    with criterion("encoder invariants: 20 bitwise relabelings, CSR zero-gate, k=1/k=12, fdiff<=1e-4"):
        weights = generate_test_weights(ModelConfig(**TEST_WEIGHT_DIMS), seed=7)
        unit = parse_repeating_unit((MINI / "ar_et_am__none.json").read_text())
        base = predict_unit(unit, weights)
        rng = np.random.default_rng(11)
        for _ in range(20):
            perm = list(map(int, rng.permutation(unit.n_atoms)))
            res = predict_unit(_relabel_unit(unit, perm), weights)
            assert res.prediction == base.prediction

        # CSR zero-gate identity, exact
        zeroed = copy.deepcopy(weights)
        for name in zeroed.tensors:
            if name.startswith("csr."):
                zeroed.tensors[name] = np.zeros_like(zeroed.tensors[name])
        fz = featurize_unit(unit)
        view = _WeightView(zeroed)
        fine = _project_level(fz.features[1], view, 2, np.float64)
        coarse = _project_level(fz.features[2], view, 3, np.float64)
        refined = cross_scale_refine(
            fine, coarse, fz.filtration.complex_at(1), fz.filtration.complex_at(2), view, "csr.L3to2"
        )
        for dim in (0, 1, 2):
            assert np.array_equal(refined.values[dim], fine.values[dim])

        # k = 1 vs k = 12 shape equivalence at fixed total width
        for heads in (1, 12):
            w = generate_test_weights(ModelConfig(hidden_dim=24, heads=heads), seed=5)
            res = predict_unit(unit, w)
            assert res.polymer_embedding.shape == (24,)
            assert res.atom_embeddings.shape == (unit.n_atoms, 24)

        # finite differences on a 6-atom toy
        toy = parse_doc(chain_doc(["C", "N", "O", "C"], frames=2, jitter=0.3, seed=21))
        tiny = ModelConfig(hidden_dim=8, heads=2, edge_layers=(0, 1, 1), node_layers=(1, 1, 1))
        assert toy.n_atoms == 6
        tw = generate_test_weights(tiny, seed=31)
        fz_toy = featurize_unit(toy)
        drng = np.random.default_rng(3)
        for tensor in ("head.w1", "proj.L2.e.w", "mp.L2.node.l0.h1.w2", "csr.L3to2.v.outer.w1"):
            direction = drng.normal(size=tw.tensors[tensor].shape)
            res = hsmp_forward(fz_toy.features, fz_toy.filtration, tw, tensor, direction)
            h = 1e-6

            def shifted(sign):
                w2 = copy.deepcopy(tw)
                w2.tensors[tensor] = tw.tensors[tensor] + sign * h * direction
                return hsmp_forward(fz_toy.features, fz_toy.filtration, w2).prediction

            numeric = (shifted(+1) - shifted(-1)) / (2 * h)
            scale = max(abs(res.prediction_tangent), abs(numeric), 1e-8)
            assert abs(res.prediction_tangent - numeric) / scale <= 1e-4


def test_determinism():
    with criterion("determinism: golden three-polymer predictions byte-identical; parallel==serial"):
        runs = []
        for _ in range(2):
            out = _run_predictions_for_three()
            runs.append(out)
        assert runs[0] == runs[1]
        assert runs[0] == (GOLDEN / "predictions_three.csv").read_bytes()

        weights = generate_test_weights(ModelConfig(**TEST_WEIGHT_DIMS), seed=7)
        units = [parse_repeating_unit(p.read_text()) for p in sorted(MINI.iterdir())]
        serial = predict_batch(units, weights, workers=1)
        parallel = predict_batch(units, weights, workers=4)
        assert serial == parallel


def _run_predictions_for_three(tmp_root=None):
    import tempfile

    from periodic_rips.cli import main

    with tempfile.TemporaryDirectory(dir=tmp_root) as td:
        td = Path(td)
        w1, w2 = td / "f1.hsmpw", td / "f2.hsmpw"
        assert main(["gen-test-weights", "--out", str(w1), "--seed", "7",
                     "--hidden-dim", "24", "--heads", "12"]) == 0
        assert main(["gen-test-weights", "--out", str(w2), "--seed", "8",
                     "--hidden-dim", "24", "--heads", "12"]) == 0
        three = td / "three"
        three.mkdir()
        for f in sorted(MINI.iterdir())[:3]:
            shutil.copy(f, three / f.name)
        out = td / "pred.csv"
        assert main(["predict", "--input", str(three), "--weights", str(w1),
                     "--weights", str(w2), "--out", str(out)]) == 0
        return out.read_bytes()


def test_statistics():
    with criterion("statistics: Holm, U identity + exact oracle, t CDF 1e-10, CI coverage, <60s", budget_s=60.0):
        assert holm_adjust([0.01, 0.04]) == [0.02, 0.04]

        rng = np.random.default_rng(99)
        for _ in range(100):
            n1 = int(rng.integers(1, 21))
            n2 = int(rng.integers(1, 21))
            a = rng.normal(size=n1).tolist()
            b = rng.normal(size=n2).tolist()
            res = mann_whitney_u(a, b)
            res_rev = mann_whitney_u(b, a)
            assert res.statistic + res_rev.statistic == n1 * n2
            # O(n1*n2) pairwise oracle for the statistic
            u = sum((1.0 if x > y else 0.5 if x == y else 0.0) for x in a for y in b)
            assert res.statistic == u
            if n1 * n2 <= 400:
                assert res.method == "mw-exact"

        worst = 0.0
        for _ in range(50):
            df = int(rng.integers(1, 31))
            t = float(rng.uniform(-8, 8))
            worst = max(worst, abs(t_cdf(t, df) - t_cdf_quadrature(t, df)))
        assert worst <= 1e-10

        n, trials = 10, 100_000
        samples = rng.normal(size=(trials, n))
        means = samples.mean(axis=1)
        sds = samples.std(axis=1, ddof=1)
        half = t_quantile(0.995, n - 1) * sds / math.sqrt(n)
        coverage = float((np.abs(means) <= half).mean())
        assert abs(coverage - 0.99) <= 0.01


def test_end_to_end_pipeline(tmp_path):
    with criterion("end-to-end: rips->featurize->predict->analyze on mini-dataset, <10s, golden CSV", budget_s=10.0):
        exe = [sys.executable, "-m", "periodic_rips.cli"]

        def run(*args):
            proc = subprocess.run([*exe, *args], capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            return proc

        run("rips", "--input", str(sorted(MINI.iterdir())[0]), "--out", str(tmp_path / "rips"))
        run("featurize", "--input", str(MINI), "--out", str(tmp_path / "features"))
        w1, w2 = tmp_path / "f1.hsmpw", tmp_path / "f2.hsmpw"
        run("gen-test-weights", "--out", str(w1), "--seed", "7", "--hidden-dim", "24", "--heads", "12")
        run("gen-test-weights", "--out", str(w2), "--seed", "8", "--hidden-dim", "24", "--heads", "12")
        pred = tmp_path / "predictions.csv"
        run("predict", "--input", str(MINI), "--weights", str(w1), "--weights", str(w2), "--out", str(pred))
        analysis = tmp_path / "analysis.csv"
        run("analyze", "--predictions", str(pred), "--comparison", "all", "--out", str(analysis), "--no-figures")
        assert pred.read_bytes() == (GOLDEN / "predictions_mini.csv").read_bytes()
        assert analysis.read_bytes() == (GOLDEN / "analysis_mini.csv").read_bytes()
