"""Report rendering for the analyze pipeline: every report is written as JSON
plus a CSV of the underlying rows, and optionally a PNG figure."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .analysis import BucketedLosses, LengthHistogram, ZipfReport

# fixed metadata keeps PNG output byte-stable across reruns
_PNG_METADATA = {"Software": "splicepack"}


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_json(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_zipf_report(report: ZipfReport, out_base: Path, figures: bool = True) -> list[Path]:
    """Write <base>.json, <base>.csv, and optionally <base>.png."""
    paths = [out_base.with_suffix(".json")]
    write_json(report.to_dict(), paths[0])
    csv_path = out_base.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["window", "zipf_coefficient"])
        for i, c in enumerate(report.coefficients):
            w.writerow([i, repr(c)])
    paths.append(csv_path)
    if figures:
        plt = _plt()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(report.coefficients, bins=min(30, max(5, report.n_windows // 2)),
                color="#4878d0", edgecolor="white")
        ax.axvline(report.mean, color="#d65f5f", linestyle="--",
                   label=f"mean {report.mean:.3f}")
        ax.set_xlabel(f"Zipf coefficient ({report.window_len}-unit windows)")
        ax.set_ylabel("windows")
        ax.legend()
        fig.tight_layout()
        png = out_base.with_suffix(".png")
        fig.savefig(png, metadata=_PNG_METADATA)
        plt.close(fig)
        paths.append(png)
    return paths


def write_bucket_report(buckets: BucketedLosses, out_base: Path,
                        figures: bool = True) -> list[Path]:
    paths = [out_base.with_suffix(".json")]
    write_json(buckets.to_dict(), paths[0])
    csv_path = out_base.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["bucket_lo", "bucket_hi", "count", "mean_loss"])
        for (lo, hi), c, m in zip(buckets.boundaries(), buckets.counts, buckets.means):
            w.writerow([lo, hi, c, "" if m is None else repr(m)])
    paths.append(csv_path)
    if figures:
        plt = _plt()
        fig, ax = plt.subplots(figsize=(6, 4))
        xs = [lo for lo, _ in buckets.boundaries()]
        ys = [m if m is not None else float("nan") for m in buckets.means]
        ax.plot(xs, ys, marker="o", color="#4878d0")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("token position bucket (lower bound)")
        ax.set_ylabel("mean loss")
        fig.tight_layout()
        png = out_base.with_suffix(".png")
        fig.savefig(png, metadata=_PNG_METADATA)
        plt.close(fig)
        paths.append(png)
    return paths


def write_histogram_report(hist: LengthHistogram, out_base: Path,
                           figures: bool = True) -> list[Path]:
    paths = [out_base.with_suffix(".json")]
    write_json(hist.to_dict(), paths[0])
    csv_path = out_base.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(hist.edges, hist.edges[1:], hist.counts):
            w.writerow([repr(lo), repr(hi), c])
    paths.append(csv_path)
    if figures:
        plt = _plt()
        fig, ax = plt.subplots(figsize=(6, 4))
        widths = [hi - lo for lo, hi in zip(hist.edges, hist.edges[1:])]
        ax.bar(hist.edges[:-1], hist.counts, width=widths, align="edge",
               color="#4878d0", edgecolor="white")
        ax.set_xlabel("length")
        ax.set_ylabel("items")
        fig.tight_layout()
        png = out_base.with_suffix(".png")
        fig.savefig(png, metadata=_PNG_METADATA)
        plt.close(fig)
        paths.append(png)
    return paths
