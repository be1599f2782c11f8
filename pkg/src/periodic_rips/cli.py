"""Command-line front end.

Subcommands: rips, curvature, featurize, predict, analyze, gen-test-weights.
Exit codes are stable: 0 success, 1 parse/read error, 2 validation error,
3 schema/weight version mismatch. Identical invocations produce
byte-identical outputs; wall-clock information lives only in the run
manifest written alongside the outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .complexes import build_filtration, export_complex_text
from .curvature import DEFAULT_DELTA, DEFAULT_STEPS, DEFAULT_TEMPERATURE, curvature_rows
from .errors import ParseError, ValidationError, VersionMismatchError, WeightFormatError
from .features import FEATURE_SCHEMA_VERSION
from .metric import write_matrix_binary, write_matrix_csv
from .model import ModelConfig, generate_test_weights, load_weights, save_weights
from .pipeline import (
    distance_matrix_for_unit,
    featurize_unit,
    predict_unit,
    worker_count,
    write_feature_container,
    write_feature_debug_csv,
)
from .polymer import enumerate_cyclic_permutations, parse_repeating_unit, validate_frames
from .stats import analyze_trends, read_predictions_csv, write_analysis_csv

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_VALIDATION = 2
EXIT_VERSION = 3


@dataclass
class RunManifest:
    subcommand: str
    inputs: list[str]
    outputs: list[str] = field(default_factory=list)
    options: dict = field(default_factory=dict)
    schema_version: str = FEATURE_SCHEMA_VERSION
    weight_info: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def write(self, directory: Path, started: float) -> None:
        self.timing = {"started_unix": started, "elapsed_s": time.time() - started}
        payload = json.dumps(self.__dict__, sort_keys=True, indent=2, default=str)
        directory.mkdir(parents=True, exist_ok=True)
        target = directory / "run_manifest.json"
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(payload + "\n", encoding="utf-8")
        os.replace(tmp, target)


def _parse_cutoffs(text: str) -> list[float]:
    try:
        cutoffs = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad cutoff list {text!r}") from exc
    if not cutoffs:
        raise ValidationError("empty cutoff list")
    return cutoffs


def _input_files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix == ".json" and p.is_file())
        if not files:
            raise ValidationError(f"{path}: no .json unit documents found")
        return files
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    return [path]


def _load_unit(path: Path):
    try:
        return parse_repeating_unit(path.read_bytes())
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _unit_id(path: Path, unit) -> str:
    return str(unit.meta.get("id", path.stem))


def _collect_warnings(unit) -> list[str]:
    specs = enumerate_cyclic_permutations(unit)
    diag = validate_frames(unit, specs)
    return [f"{e.severity}: {e.message}" for e in diag.entries]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_rips(args) -> int:
    started = time.time()
    cutoffs = _parse_cutoffs(args.cutoffs)
    out_dir = Path(args.out)
    unit_path = Path(args.input)
    unit = _load_unit(unit_path)
    matrix = distance_matrix_for_unit(unit, non_periodic=args.non_periodic)
    filtration = build_filtration(matrix, cutoffs, args.max_dim)

    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        subcommand="rips",
        inputs=[str(unit_path)],
        options={"cutoffs": cutoffs, "max_dim": args.max_dim, "non_periodic": args.non_periodic},
        warnings=_collect_warnings(unit),
    )
    stem = unit_path.stem
    for li, (eps, complex_) in enumerate(filtration.levels, start=1):
        path = out_dir / f"{stem}.L{li}.complex.txt"
        path.write_text(f"# eps={eps!r}\n" + export_complex_text(complex_), encoding="utf-8")
        manifest.outputs.append(str(path))
    if args.export_matrix:
        csv_path = out_dir / f"{stem}.matrix.csv"
        bin_path = out_dir / f"{stem}.matrix.bin"
        write_matrix_csv(csv_path, matrix)
        write_matrix_binary(bin_path, matrix)
        manifest.outputs += [str(csv_path), str(bin_path)]
    manifest.write(out_dir, started)
    return EXIT_OK


def cmd_curvature(args) -> int:
    started = time.time()
    cutoffs = _parse_cutoffs(args.cutoffs)
    out_dir = Path(args.out)
    unit_path = Path(args.input)
    unit = _load_unit(unit_path)
    matrix = distance_matrix_for_unit(unit, non_periodic=args.non_periodic)
    filtration = build_filtration(matrix, cutoffs, args.max_dim)

    weights = None
    if args.simplex_weights:
        from .curvature import WeightAssignment

        try:
            per_dim = json.loads(Path(args.simplex_weights).read_text(encoding="utf-8"))
            weights = WeightAssignment(per_dim={int(k): float(v) for k, v in per_dim.items()})
        except (json.JSONDecodeError, TypeError, AttributeError) as exc:
            raise ParseError(f"{args.simplex_weights}: bad weight file ({exc})") from exc

    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{unit_path.stem}.curvature.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dim", "vertex_tuple", "epsilon", "raw", "normalized"])
        for _, complex_ in filtration.levels:
            for dim, sigma, eps, raw, normalized in curvature_rows(
                matrix,
                complex_,
                delta=args.delta,
                steps=args.steps,
                temperature=args.temperature,
                weights=weights,
            ):
                writer.writerow([dim, " ".join(map(str, sigma)), repr(eps), repr(raw), repr(normalized)])
    manifest = RunManifest(
        subcommand="curvature",
        inputs=[str(unit_path)],
        outputs=[str(path)],
        options={
            "cutoffs": cutoffs,
            "max_dim": args.max_dim,
            "delta": args.delta,
            "steps": args.steps,
            "temperature": args.temperature,
            "non_periodic": args.non_periodic,
        },
        warnings=_collect_warnings(unit),
    )
    manifest.write(out_dir, started)
    return EXIT_OK


def _process_many(files: list[Path], worker, out_dir: Path) -> tuple[list[str], list[tuple[Path, str, int]]]:
    """Run ``worker`` over files with a bounded pool; collect failures."""
    import concurrent.futures

    outputs: list[str] = []
    failures: list[tuple[Path, str, int]] = []

    def run(path: Path):
        try:
            return path, worker(path), None
        except (ParseError, OSError) as exc:
            return path, None, (str(exc), EXIT_PARSE)
        except (ValidationError, WeightFormatError) as exc:
            return path, None, (str(exc), EXIT_VALIDATION)
        except VersionMismatchError as exc:
            return path, None, (str(exc), EXIT_VERSION)

    if len(files) == 1:
        results = [run(files[0])]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=worker_count()) as pool:
            results = list(pool.map(run, files))
    for path, produced, err in results:
        if err is None:
            outputs.extend(produced)
        else:
            failures.append((path, err[0], err[1]))
    return outputs, failures


def cmd_featurize(args) -> int:
    started = time.time()
    cutoffs = _parse_cutoffs(args.cutoffs)
    out_dir = Path(args.out)
    files = _input_files(Path(args.input))
    out_dir.mkdir(parents=True, exist_ok=True)

    def worker(path: Path) -> list[str]:
        unit = _load_unit(path)
        fz = featurize_unit(unit, cutoffs=cutoffs, max_dim=args.max_dim, non_periodic=args.non_periodic)
        target = out_dir / f"{path.stem}.features.hsmpt"
        write_feature_container(target, fz)
        produced = [str(target)]
        if args.debug_csv:
            csv_target = out_dir / f"{path.stem}.features.csv"
            write_feature_debug_csv(csv_target, fz)
            produced.append(str(csv_target))
        return produced

    outputs, failures = _process_many(files, worker, out_dir)
    manifest = RunManifest(
        subcommand="featurize",
        inputs=[str(f) for f in files],
        outputs=outputs,
        options={"cutoffs": cutoffs, "max_dim": args.max_dim, "non_periodic": args.non_periodic},
    )
    for path, message, _ in failures:
        manifest.warnings.append(f"failed: {path}: {message}")
        print(f"featurize: {path}: {message}", file=sys.stderr)
    manifest.write(out_dir, started)
    if failures:
        print(f"featurize: {len(failures)}/{len(files)} inputs failed", file=sys.stderr)
        codes = {code for _, _, code in failures}
        return EXIT_PARSE if EXIT_PARSE in codes else EXIT_VALIDATION
    return EXIT_OK


def cmd_predict(args) -> int:
    started = time.time()
    out_path = Path(args.out)
    files = _input_files(Path(args.input))
    weight_paths = [Path(w) for w in args.weights]
    folds = []
    for wp in weight_paths:
        weights = load_weights(wp)
        if weights.config.schema_version != FEATURE_SCHEMA_VERSION:
            raise VersionMismatchError(
                f"{wp}: weight schema {weights.config.schema_version!r} != {FEATURE_SCHEMA_VERSION!r}"
            )
        folds.append(weights)

    def worker(path: Path) -> dict:
        unit = _load_unit(path)
        values = [predict_unit(unit, w, non_periodic=args.non_periodic).prediction for w in folds]
        mean = math.fsum(values) / len(values)
        sd = ""
        if len(values) > 1:
            var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
            sd = repr(math.sqrt(var))
        return {
            "id": _unit_id(path, unit),
            "family": str(unit.meta.get("family", "")),
            "substitution_key": str(unit.meta.get("substitution_key", "")),
            "folds": [repr(v) for v in values],
            "mean": repr(mean),
            "sd": sd,
        }

    rows = []
    failures: list[tuple[Path, str, int]] = []

    def run(path: Path):
        try:
            return path, worker(path), None
        except (ParseError, OSError) as exc:
            return path, None, (str(exc), EXIT_PARSE)
        except (ValidationError, WeightFormatError) as exc:
            return path, None, (str(exc), EXIT_VALIDATION)

    if len(files) == 1:
        results = [run(files[0])]
    else:
        import concurrent.futures

        with concurrent.futures.ThreadPoolExecutor(max_workers=worker_count()) as pool:
            results = list(pool.map(run, files))
    for path, row, err in results:
        if err is None:
            rows.append(row)
        else:
            failures.append((path, err[0], err[1]))

    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        fold_cols = [f"fold_{k + 1}" for k in range(len(folds))]
        writer.writerow(["id", "family", "substitution_key", *fold_cols, "mean", "sd"])
        for row in rows:
            writer.writerow([row["id"], row["family"], row["substitution_key"], *row["folds"], row["mean"], row["sd"]])

    manifest = RunManifest(
        subcommand="predict",
        inputs=[str(f) for f in files],
        outputs=[str(out_path)],
        options={"non_periodic": args.non_periodic},
        weight_info=[
            {"path": str(wp), "seed": w.seed, "config": w.config.to_dict()}
            for wp, w in zip(weight_paths, folds)
        ],
    )
    for path, message, _ in failures:
        manifest.warnings.append(f"failed: {path}: {message}")
        print(f"predict: {path}: {message}", file=sys.stderr)
    manifest.write(out_path.parent, started)
    if failures:
        codes = {code for _, _, code in failures}
        return EXIT_PARSE if EXIT_PARSE in codes else EXIT_VALIDATION
    return EXIT_OK


def cmd_analyze(args) -> int:
    started = time.time()
    out_path = Path(args.out)
    records = read_predictions_csv(args.predictions)
    rows = analyze_trends(records, args.comparison)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_analysis_csv(out_path, rows)
    outputs = [str(out_path)]
    if not args.no_figures:
        from .report import render_report_figures

        figures_dir = Path(args.figures_dir) if args.figures_dir else out_path.parent / f"{out_path.stem}_figures"
        outputs += [str(p) for p in render_report_figures(rows, records, figures_dir)]
    manifest = RunManifest(
        subcommand="analyze",
        inputs=[str(args.predictions)],
        outputs=outputs,
        options={"comparison": args.comparison},
    )
    manifest.write(out_path.parent, started)
    return EXIT_OK


def cmd_gen_test_weights(args) -> int:
    started = time.time()
    out_path = Path(args.out)
    config = ModelConfig(hidden_dim=args.hidden_dim, heads=args.heads, dtype=args.dtype)
    weights = generate_test_weights(config, seed=args.seed)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_weights(out_path, weights)
    manifest = RunManifest(
        subcommand="gen-test-weights",
        inputs=[],
        outputs=[str(out_path)],
        options={"seed": args.seed, "hidden_dim": args.hidden_dim, "heads": args.heads, "dtype": args.dtype},
        weight_info=[{"path": str(out_path), "seed": args.seed, "config": config.to_dict()}],
    )
    manifest.write(out_path.parent, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="periodic-rips",
        description="Periodic Rips featurization, curvature, deterministic encoder predictions, and trend analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_cutoffs=True):
        p.add_argument("--input", required=True, help="unit document (or directory where supported)")
        if with_cutoffs:
            p.add_argument("--cutoffs", default="2.0,3.0,4.0", help="comma-separated ascending cutoffs in Angstrom")
            p.add_argument("--max-dim", type=int, default=2)
        p.add_argument("--non-periodic", action="store_true", help="use frame 0 intra-unit distances")

    p_rips = sub.add_parser("rips", help="build Rips filtration levels and export complexes")
    add_common(p_rips)
    p_rips.add_argument("--out", required=True)
    p_rips.add_argument("--export-matrix", action="store_true")
    p_rips.set_defaults(func=cmd_rips)

    p_curv = sub.add_parser("curvature", help="export curvature sweeps per filtration level")
    add_common(p_curv)
    p_curv.add_argument("--out", required=True)
    p_curv.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p_curv.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    p_curv.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p_curv.add_argument(
        "--simplex-weights", default=None, help="JSON file of per-dimension weights, e.g. {\"1\": 2.0}"
    )
    p_curv.set_defaults(func=cmd_curvature)

    p_feat = sub.add_parser("featurize", help="write per-polymer feature containers")
    add_common(p_feat)
    p_feat.add_argument("--out", required=True)
    p_feat.add_argument("--debug-csv", action="store_true", help="also write a readable CSV per unit")
    p_feat.set_defaults(func=cmd_featurize)

    p_pred = sub.add_parser("predict", help="predict with one or more weight files")
    add_common(p_pred, with_cutoffs=False)
    p_pred.add_argument("--weights", action="append", required=True, help="repeat for multiple folds")
    p_pred.add_argument("--out", required=True, help="output predictions CSV")
    p_pred.set_defaults(func=cmd_predict)

    p_an = sub.add_parser("analyze", help="matched-pair and family trend analysis")
    p_an.add_argument("--predictions", required=True)
    p_an.add_argument("--comparison", default="all")
    p_an.add_argument("--out", required=True)
    p_an.add_argument("--no-figures", action="store_true")
    p_an.add_argument("--figures-dir", default=None)
    p_an.set_defaults(func=cmd_analyze)

    p_gen = sub.add_parser("gen-test-weights", help="emit seed-generated weights for testing")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--hidden-dim", type=int, default=768)
    p_gen.add_argument("--heads", type=int, default=12)
    p_gen.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p_gen.set_defaults(func=cmd_gen_test_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValidationError, WeightFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except VersionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERSION


if __name__ == "__main__":
    sys.exit(main())
