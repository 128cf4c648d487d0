#!/usr/bin/env python3
"""Rescaled kernel shell profile with its Gaussian reference overlay."""

import sys
from collections import defaultdict

import matplotlib.pyplot as plt

from figlib import load_rows, run_script, save


def render(csv_path, out_path):
    rows = load_rows(csv_path, ["seed", "n", "r", "measured", "gaussian_ref"])
    by_key = defaultdict(list)
    for row in rows:
        by_key[(row["seed"], int(row["n"]))].append(
            (float(row["r"]), float(row["measured"]),
             float(row["gaussian_ref"])))
    fig, ax = plt.subplots()
    for (seed, n), pts in sorted(by_key.items()):
        pts.sort()
        rs = [p[0] for p in pts]
        ax.plot(rs, [p[1] for p in pts], "o",
                label=f"measured (seed {seed}, n={n})")
        ax.plot(rs, [p[2] for p in pts], "-", alpha=0.8,
                label=f"Gaussian reference (n={n})")
    ax.set_xlabel("|y - x0|")
    ax.set_ylabel("n^{d/2} kernel")
    ax.set_title("kernel profile vs Gaussian")
    ax.legend(fontsize=8)
    save(fig, out_path)


if __name__ == "__main__":
    sys.exit(run_script(render))
