#!/usr/bin/env python3
"""Render solver-experiment CSV logs into the standard figures.

Two modes over the experiment runner's documented CSV schemas:

* ``m1``      -- one ``m1,iter,mean_nmse`` file; one curve per threshold
                 sequence count, legend in ascending m1 order.
* ``compare`` -- one ``iter,mean_nmse`` file per solver; one curve each.

Both render mean NMSE against iteration on a log-scaled y axis.  Output is
SVG by default (PNG via --png) and is byte-stable across reruns: no
timestamps or salted ids are embedded.

    python plots/render.py --mode m1 --in results/nmse_vs_iter_m1.csv --out fig1.svg
    python plots/render.py --mode compare --in results/fig3_*.csv --out fig3.svg
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "onebit-feas-plots"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

M1_HEADER = ["m1", "iter", "mean_nmse"]
COMPARE_HEADER = ["iter", "mean_nmse"]


class SchemaError(Exception):
    """CSV file does not match the documented header or has no data rows."""


def _read_rows(path, header):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"cannot read {path!r}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise SchemaError(f"{path!r} is empty") from None
        if first != header:
            raise SchemaError(
                f"{path!r} has header {','.join(first)!r}, expected "
                f"{','.join(header)!r}"
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path!r} has no data rows")
    return rows


def read_m1_sweep(path):
    """Parse an m1 sweep file into {m1: (iterations, mean_nmse)}."""
    series = {}
    for row in _read_rows(path, M1_HEADER):
        try:
            m1, it, val = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path!r}: bad data row {row!r}") from exc
        series.setdefault(m1, ([], []))
        series[m1][0].append(it)
        series[m1][1].append(val)
    return series


def read_compare(path):
    iters, vals = [], []
    for row in _read_rows(path, COMPARE_HEADER):
        try:
            iters.append(int(row[0]))
            vals.append(float(row[1]))
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path!r}: bad data row {row!r}") from exc
    return iters, vals


def _style_axes(ax, title):
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean NMSE")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)


def build_m1_figure(series, title=None):
    """Figure with one NMSE curve per threshold sequence count."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for m1 in sorted(series):
        iters, vals = series[m1]
        ax.plot(iters, vals, label=f"m1={m1}")
    _style_axes(ax, title)
    fig.tight_layout()
    return fig


def build_compare_figure(named_series, title=None):
    """Figure with one NMSE curve per solver."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for label, (iters, vals) in named_series:
        ax.plot(iters, vals, label=label)
    _style_axes(ax, title)
    fig.tight_layout()
    return fig


def save_figure(fig, out_path, png=False):
    fmt = "png" if png else "svg"
    # Date: None drops the embedded timestamp so reruns overwrite bit-for-bit
    metadata = None if png else {"Date": None}
    fig.savefig(out_path, format=fmt, metadata=metadata)
    plt.close(fig)


def _solver_label(path):
    stem = os.path.splitext(os.path.basename(path))[0]
    return stem[5:] if stem.startswith("fig3_") else stem


def plot_m1_sweep(csv_path, out_path, title=None, png=False):
    """Render an m1 sweep CSV; returns the number of series drawn."""
    series = read_m1_sweep(csv_path)
    fig = build_m1_figure(series, title)
    save_figure(fig, out_path, png=png)
    return len(series)


def plot_solver_compare(csv_paths, out_path, title=None, png=False):
    """Render one curve per solver CSV; returns the number of series drawn."""
    named = [(_solver_label(p), read_compare(p)) for p in csv_paths]
    fig = build_compare_figure(named, title)
    save_figure(fig, out_path, png=png)
    return len(named)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Render experiment CSV logs to SVG/PNG figures"
    )
    parser.add_argument("--mode", choices=("m1", "compare"), required=True)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--png", action="store_true", help="write PNG instead of SVG")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)

    try:
        if args.mode == "m1":
            if len(args.inputs) != 1:
                print("error: --mode m1 takes exactly one CSV", file=sys.stderr)
                return 2
            plot_m1_sweep(args.inputs[0], args.out, title=args.title, png=args.png)
        else:
            plot_solver_compare(args.inputs, args.out, title=args.title,
                                png=args.png)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
