"""Render an eval report to disk: JSON, CSV curves, and PNG figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import PrCurve, mean_curve


def _write_curve_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "precision", "recall"])
        for t, p, r in rows:
            # the mean curve has no single threshold per point
            writer.writerow([repr(float(t)) if t is not None else "", repr(float(p)), repr(float(r))])


def write_report(report: dict, out_dir: str | Path) -> dict:
    """Write report.json plus curve CSVs and figures; returns the cleaned
    report (private curve payloads stripped)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    figures_dir = out / "figures"
    figures_dir.mkdir(exist_ok=True)

    pixel_curve = report.pop("_pixel_curve", None)
    # the (small) retrieval curves stay in the JSON report; the pixel curve
    # can run to one point per distinct score and ships as CSV only
    retrieval_curves = report.pop("_retrieval_curves", {})
    report["retrieval_curves"] = retrieval_curves

    if pixel_curve:
        _write_curve_csv(
            out / "pixel_pr.csv",
            zip(pixel_curve["threshold"], pixel_curve["precision"], pixel_curve["recall"]),
        )
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(pixel_curve["recall"], pixel_curve["precision"], drawstyle="steps-post")
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_xlim(0, 1.02)
        ax.set_ylim(0, 1.02)
        auprc = report.get("segmentation", {}).get("auprc")
        title = "pixel anomaly PR"
        if auprc is not None:
            title += f" (AUPRC {auprc:.2f})"
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(figures_dir / "pixel_pr.png", dpi=120)
        plt.close(fig)

    if retrieval_curves:
        fig, ax = plt.subplots(figsize=(5.5, 4))
        curve_objs = {}
        for query, c in sorted(retrieval_curves.items()):
            _write_curve_csv(
                out / f"retrieval_pr_{query}.csv",
                zip(c["threshold"], c["precision"], c["recall"]),
            )
            curve_objs[query] = PrCurve(
                thresholds=c["threshold"], precision=c["precision"], recall=c["recall"], auprc=0.0
            )
            ax.plot(c["recall"], c["precision"], drawstyle="steps-post", alpha=0.5, label=query)
        grid, mean_prec = mean_curve(curve_objs)
        _write_curve_csv(
            out / "retrieval_pr_mean.csv", zip([None] * len(grid), mean_prec, grid)
        )
        ax.plot(grid, mean_prec, color="black", linewidth=2, label="mean")
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_xlim(0, 1.02)
        ax.set_ylim(0, 1.05)
        mean_ap = report.get("retrieval", {}).get("tracked", {}).get("mean_auprc")
        title = "retrieval PR per query"
        if mean_ap is not None:
            title += f" (mean AUPRC {mean_ap:.2f})"
        ax.set_title(title)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(figures_dir / "retrieval_pr.png", dpi=120)
        plt.close(fig)

    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report
