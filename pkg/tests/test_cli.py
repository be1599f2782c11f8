import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from periodic_rips.cli import main
from periodic_rips.pipeline import read_feature_container

from conftest import chain_doc, parse_doc

DATA_MINI = Path(__file__).parent.parent / "data" / "mini"


@pytest.fixture
def unit_file(tmp_path):
    path = tmp_path / "unit.json"
    path.write_text(json.dumps(chain_doc(["C", "N", "O"], frames=2, jitter=0.3, seed=8)))
    return path


@pytest.fixture
def small_weights(tmp_path):
    out = tmp_path / "weights.hsmpw"
    assert main(["gen-test-weights", "--out", str(out), "--seed", "3", "--hidden-dim", "24", "--heads", "4"]) == 0
    return out


def test_rips_writes_level_files_and_manifest(unit_file, tmp_path):
    out = tmp_path / "rips"
    assert main(["rips", "--input", str(unit_file), "--out", str(out), "--export-matrix"]) == 0
    files = sorted(p.name for p in out.iterdir())
    assert "unit.L1.complex.txt" in files
    assert "unit.L2.complex.txt" in files
    assert "unit.L3.complex.txt" in files
    assert "unit.matrix.csv" in files
    assert "run_manifest.json" in files
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["subcommand"] == "rips"
    assert "timing" in manifest


def test_rips_bad_cutoff_order_exits_2(unit_file, tmp_path):
    assert main(["rips", "--input", str(unit_file), "--cutoffs", "3.0,2.0", "--out", str(tmp_path / "o")]) == 2


def test_rips_max_dim_out_of_range_exits_2(unit_file, tmp_path):
    assert main(["rips", "--input", str(unit_file), "--max-dim", "5", "--out", str(tmp_path / "o")]) == 2


def test_missing_input_exits_1(tmp_path):
    assert main(["rips", "--input", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 1


def test_malformed_input_exits_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    assert main(["rips", "--input", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_invalid_unit_exits_2(tmp_path):
    doc = chain_doc(["C", "C"])
    doc["atoms"][1]["is_anchor"] = True
    bad = tmp_path / "three_anchors.json"
    bad.write_text(json.dumps(doc))
    assert main(["rips", "--input", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_curvature_csv(unit_file, tmp_path):
    out = tmp_path / "curv"
    assert main(["curvature", "--input", str(unit_file), "--out", str(out)]) == 0
    csv_path = out / "unit.curvature.csv"
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "dim,vertex_tuple,epsilon,raw,normalized"
    assert len(lines) > 10


def test_curvature_per_dimension_weight_file(unit_file, tmp_path):
    wfile = tmp_path / "weights.json"
    wfile.write_text('{"0": 1.0, "1": 2.0, "2": 1.0}')
    out_w = tmp_path / "curv_w"
    out_u = tmp_path / "curv_u"
    assert main(["curvature", "--input", str(unit_file), "--out", str(out_w), "--simplex-weights", str(wfile)]) == 0
    assert main(["curvature", "--input", str(unit_file), "--out", str(out_u)]) == 0
    weighted = (out_w / "unit.curvature.csv").read_text()
    unweighted = (out_u / "unit.curvature.csv").read_text()
    assert weighted != unweighted  # edge rows change under non-unit weights


def test_featurize_single_file(unit_file, tmp_path):
    out = tmp_path / "feats"
    assert main(["featurize", "--input", str(unit_file), "--out", str(out)]) == 0
    container = out / "unit.features.hsmpt"
    tensors, meta = read_feature_container(container)
    assert meta["schema_version"] == "fs-1"
    assert tensors["L1.vertex.features"].shape[1] == 75
    assert tensors["L2.edge.features"].shape[1] == 11
    assert tensors["L3.triangle.features"].shape[1] == 5


def test_featurize_directory_continues_past_errors(tmp_path):
    src = tmp_path / "units"
    src.mkdir()
    for i in range(3):
        (src / f"u{i}.json").write_text(json.dumps(chain_doc(["C", "O"], frames=1, jitter=0.2, seed=i)))
    (src / "u1.json").write_text("{broken")
    out = tmp_path / "feats"
    code = main(["featurize", "--input", str(src), "--out", str(out)])
    assert code == 1  # parse failure present
    produced = sorted(p.name for p in out.iterdir() if p.suffix == ".hsmpt")
    assert produced == ["u0.features.hsmpt", "u2.features.hsmpt"]
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert any("u1.json" in w for w in manifest["warnings"])


def test_featurize_non_periodic_uses_frame_zero(unit_file, tmp_path):
    out_p = tmp_path / "p"
    out_np = tmp_path / "np"
    assert main(["featurize", "--input", str(unit_file), "--out", str(out_p)]) == 0
    assert main(["featurize", "--input", str(unit_file), "--non-periodic", "--out", str(out_np)]) == 0
    t_p, meta_p = read_feature_container(out_p / "unit.features.hsmpt")
    t_np, meta_np = read_feature_container(out_np / "unit.features.hsmpt")
    assert meta_p["mode"] == "periodic" and meta_np["mode"] == "intra_unit"

    # frame 0 alone gives the intra-unit matrix; with jittered frames the
    # periodic complexes generally differ
    from periodic_rips import intra_unit_distance_matrix, parse_repeating_unit
    from periodic_rips.pipeline import featurize_unit

    unit = parse_repeating_unit(unit_file.read_text())
    fz = featurize_unit(unit, non_periodic=True)
    assert np.array_equal(fz.features[0].vertices, t_np["L1.vertex.features"])


def test_predict_and_analyze_pipeline(tmp_path, small_weights):
    work = tmp_path / "mini"
    shutil.copytree(DATA_MINI, work)
    w2 = tmp_path / "w2.hsmpw"
    assert main(["gen-test-weights", "--out", str(w2), "--seed", "4", "--hidden-dim", "24", "--heads", "4"]) == 0

    pred_csv = tmp_path / "predictions.csv"
    code = main(
        ["predict", "--input", str(work), "--weights", str(small_weights), "--weights", str(w2), "--out", str(pred_csv)]
    )
    assert code == 0
    lines = pred_csv.read_text().splitlines()
    assert lines[0] == "id,family,substitution_key,fold_1,fold_2,mean,sd"
    assert len(lines) == 9  # 8 polymers

    out_csv = tmp_path / "analysis.csv"
    assert main(["analyze", "--predictions", str(pred_csv), "--comparison", "all", "--out", str(out_csv)]) == 0
    rows = out_csv.read_text().splitlines()
    assert rows[0].startswith("comparison,n,")
    assert len(rows) > 4
    figures = sorted((tmp_path / "analysis_figures").iterdir())
    assert figures and all(p.suffix == ".png" for p in figures)


def test_predict_rejects_schema_mismatch(unit_file, tmp_path, small_weights, monkeypatch):
    # rewrite the weight container with a foreign schema version
    from periodic_rips.model import load_weights, save_weights

    weights = load_weights(small_weights)
    hacked = tmp_path / "hacked.hsmpw"
    from dataclasses import replace

    weights2 = type(weights)(config=replace(weights.config, schema_version="fs-0"), tensors=weights.tensors)
    save_weights(hacked, weights2)
    assert main(["predict", "--input", str(unit_file), "--weights", str(hacked), "--out", str(tmp_path / "p.csv")]) == 3


def test_identical_invocations_byte_identical_outputs(unit_file, tmp_path, small_weights):
    outs = []
    for tag in ("one", "two"):
        out = tmp_path / f"pred_{tag}.csv"
        assert main(["predict", "--input", str(unit_file), "--weights", str(small_weights), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_gen_test_weights_records_seed(tmp_path):
    out = tmp_path / "w.hsmpw"
    assert main(["gen-test-weights", "--out", str(out), "--seed", "11", "--hidden-dim", "24", "--heads", "4"]) == 0
    manifest = json.loads((tmp_path / "run_manifest.json").read_text())
    assert manifest["options"]["seed"] == 11
    from periodic_rips.model import load_weights

    assert load_weights(out).seed == 11
