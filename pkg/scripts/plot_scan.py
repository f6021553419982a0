#!/usr/bin/env python3
"""Plot an efficiency map produced by ``moconv scan``.

Reads scan.csv (schema v1) and renders the conversion efficiency over the
two atomic detunings, with the small-microwave dressed-degeneracy locus
overlaid.  Matplotlib is only needed here, not by the core package.
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="scan.csv written by 'moconv scan'")
    parser.add_argument("--out", default="scan.png", help="output image path")
    parser.add_argument("--log", action="store_true", help="log-scale the efficiency")
    args = parser.parse_args()

    data = np.genfromtxt(args.csv, delimiter=",", names=True, skip_header=1)
    dmu = np.unique(data["delta_a_mu"])
    dao = np.unique(data["delta_a_o"])
    eff = np.full((len(dmu), len(dao)), np.nan)
    locus = np.full(len(dao), np.nan)
    for row in data:
        i = np.searchsorted(dmu, row["delta_a_mu"])
        j = np.searchsorted(dao, row["delta_a_o"])
        eff[i, j] = row["efficiency"]
        locus[j] = row["dressed_locus_delta_a_mu"]

    fig, ax = plt.subplots(figsize=(7, 5))
    z = np.log10(np.clip(eff, 1e-12, None)) if args.log else eff
    mesh = ax.pcolormesh(dao / (2 * np.pi * 1e6), dmu / (2 * np.pi * 1e6), z, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="log10 efficiency" if args.log else "efficiency")
    finite = np.isfinite(locus)
    if finite.any():
        ax.plot(
            dao[finite] / (2 * np.pi * 1e6),
            locus[finite] / (2 * np.pi * 1e6),
            "w--",
            lw=1,
            label="dressed locus",
        )
        ax.legend(loc="upper right")
    ax.set_xlabel("optical detuning  $\\delta_{a,o}/2\\pi$  (MHz)")
    ax.set_ylabel("microwave detuning  $\\delta_{a,\\mu}/2\\pi$  (MHz)")
    ax.set_title("conversion efficiency")
    fig.tight_layout()
    fig.savefig(args.out, dpi=160)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
