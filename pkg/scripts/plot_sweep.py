#!/usr/bin/env python3
"""Plot an optimized-efficiency sweep produced by ``moconv sweep``.

Reads sweep.csv (schema v1): first column is the swept variable, second
the optimized efficiency; failed points (NaN) are skipped.
"""

import argparse
import csv
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="sweep.csv written by 'moconv sweep'")
    parser.add_argument("--out", default="sweep.png", help="output image path")
    parser.add_argument("--logx", action="store_true", help="log-scale the swept axis")
    args = parser.parse_args()

    with open(args.csv) as fh:
        fh.readline()  # schema comment
        reader = csv.reader(fh)
        header = next(reader)
        variable = header[0]
        points = [
            (float(row[0]), float(row[1]))
            for row in reader
            if row and math.isfinite(float(row[1]))
        ]
    if not points:
        raise SystemExit("no finite sweep points to plot")

    xs, ys = zip(*points)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, "o-")
    if args.logx:
        ax.set_xscale("log")
    ax.set_xlabel(variable)
    ax.set_ylabel("optimized conversion efficiency")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=160)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
