"""Figure rendering for the analyze report path.

One PNG per comparison row, written alongside the delimited output:
matched-pair rows get a delta histogram with the mean and its confidence
band, family rows get overlaid prediction histograms.
"""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .stats import ComparisonRow, PredictionRecord


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_")


def render_pair_figure(row: ComparisonRow, out_dir: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.hist(row.deltas, bins=min(20, max(4, len(row.deltas))), color="#4878cf", alpha=0.8)
    if row.mean_delta is not None:
        ax.axvline(row.mean_delta, color="k", lw=1.2, label=f"mean = {row.mean_delta:.2f}")
    if row.ci_low is not None and row.ci_high is not None:
        ax.axvspan(row.ci_low, row.ci_high, color="k", alpha=0.12, label="99% CI")
    ax.set_xlabel("$\\Delta$ predicted value (°C)")
    ax.set_ylabel("pairs")
    ax.set_title(row.comparison, fontsize=9)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    path = out_dir / f"{_slug(row.comparison)}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_family_figure(
    row: ComparisonRow, records: list[PredictionRecord], out_dir: Path
) -> Path:
    # comparison encoded as "families:<a>-vs-<b>"
    _, spec = row.comparison.split(":", 1)
    fam_a, fam_b = spec.split("-vs-")
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    for family, color in ((fam_a, "#4878cf"), (fam_b, "#d65f5f")):
        values = [r.predicted for r in records if r.family == family]
        ax.hist(values, bins=min(20, max(4, len(values))), alpha=0.6, label=family, color=color)
    ax.set_xlabel("predicted value (°C)")
    ax.set_ylabel("polymers")
    ax.set_title(row.comparison, fontsize=9)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    path = out_dir / f"{_slug(row.comparison)}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report_figures(
    rows: list[ComparisonRow], records: list[PredictionRecord], out_dir: str | Path
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for row in rows:
        if row.comparison.startswith("families:"):
            paths.append(render_family_figure(row, records, out_dir))
        else:
            paths.append(render_pair_figure(row, out_dir))
    return paths
