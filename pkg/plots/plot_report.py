#!/usr/bin/env python3
"""Turn benchmark report CSVs into condition-number / error curves.

One line per (mesh, approach) pair: x is the polynomial degree, y the chosen
metric column.  Colors identify the approach, line styles the mesh variant
(solid/dashed/dotted in sorted mesh order), and the y axis is logarithmic
when --logy is set.

Usage:
    plot_report.py --csv results/*.csv --metric cond_pinabla --out fig.png --logy
"""

from __future__ import annotations

import argparse
import csv
import glob
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


class PlotError(Exception):
    pass


class MissingColumn(PlotError):
    pass


class EmptySelection(PlotError):
    pass


#: Okabe-Ito colorblind-safe palette, keyed by approach label.
APPROACH_COLORS = {
    "mon": "#E69F00",
    "ortho": "#0072B2",
    "inrt": "#009E73",
    "inrt-b": "#D55E00",
    "inrt-f": "#CC79A7",
    "inrt-bf": "#009E73",
}
FALLBACK_COLORS = ["#56B4E9", "#F0E442", "#000000"]
LINE_STYLES = ["-", "--", ":", "-."]

DISPLAY = {"mon": "Mon", "ortho": "Ortho", "inrt": "Inrt", "inrt-b": "Inrt-B",
           "inrt-f": "Inrt-F", "inrt-bf": "Inrt-BF"}


def read_rows(paths):
    """Rows of all CSVs ('#' comment lines skipped), tagged with their file."""
    rows = []
    for path in paths:
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        for row in csv.DictReader(lines):
            row["_file"] = path
            rows.append(row)
    return rows


def collect_series(rows, metric):
    """{(mesh, approach): sorted [(k, value)]} for rows with usable data."""
    if not rows:
        raise EmptySelection("no rows in the selected CSV files")
    for required in ("mesh", "approach", "k"):
        if required not in rows[0]:
            raise MissingColumn(f"CSV lacks required column {required!r}")
    if metric not in rows[0]:
        raise MissingColumn(f"metric column {metric!r} not in CSV schema")
    series = {}
    for row in rows:
        if row.get("status", "ok") != "ok":
            continue
        value = row[metric]
        if value in ("", None):
            continue
        key = (row["mesh"], row["approach"])
        series.setdefault(key, []).append((int(row["k"]), float(value)))
    series = {k: sorted(v) for k, v in series.items() if v}
    if not series:
        raise EmptySelection(f"no usable values for metric {metric!r}")
    return series


def plot(series, metric, logy=False, title=None):
    """Render the series; returns (figure, axis)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    meshes = sorted({mesh for mesh, _ in series})
    styles = {mesh: LINE_STYLES[i % len(LINE_STYLES)] for i, mesh in enumerate(meshes)}
    fallback = iter(FALLBACK_COLORS * 8)
    for (mesh, approach) in sorted(series):
        pts = series[(mesh, approach)]
        ks = [k for k, _ in pts]
        vals = [v for _, v in pts]
        color = APPROACH_COLORS.get(approach) or next(fallback)
        label = DISPLAY.get(approach, approach)
        if len(meshes) > 1:
            label = f"{label} ({mesh})"
        ax.plot(ks, vals, linestyle=styles[mesh], color=color, marker="o",
                markersize=4, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("polynomial degree k")
    ax.set_ylabel(metric)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig, ax


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", nargs="+", required=True,
                        help="report CSV files (globs allowed)")
    parser.add_argument("--metric", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--logy", action="store_true")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)

    paths = []
    for pattern in args.csv:
        matched = sorted(glob.glob(pattern))
        paths.extend(matched if matched else [pattern])
    try:
        rows = read_rows(paths)
        series = collect_series(rows, args.metric)
        fig, _ = plot(series, args.metric, logy=args.logy, title=args.title)
    except (PlotError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    fig.savefig(args.out, dpi=100)
    print(f"wrote {args.out} ({len(series)} series)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
