#!/usr/bin/env python3
"""Measured parabolic Harnack constant across cylinder radii."""

import sys
from collections import defaultdict

import matplotlib.pyplot as plt

from figlib import load_rows, run_script, save


def render(csv_path, out_path):
    rows = load_rows(csv_path, ["seed", "R", "c_h", "theta_hat"])
    by_seed = defaultdict(list)
    for r in rows:
        by_seed[r["seed"]].append((int(r["R"]), float(r["c_h"]),
                                   float(r["theta_hat"])))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for seed, pts in sorted(by_seed.items()):
        pts.sort()
        rs = [p[0] for p in pts]
        ax1.plot(rs, [p[1] for p in pts], "o-", label=f"seed {seed}")
        ax2.plot(rs, [p[2] for p in pts], "s-", label=f"seed {seed}")
    ax1.set_xlabel("R")
    ax1.set_ylabel("measured Harnack constant")
    ax1.set_xscale("log", base=2)
    ax1.legend()
    ax2.set_xlabel("R")
    ax2.set_ylabel("Holder exponent")
    ax2.set_xscale("log", base=2)
    fig.suptitle("Harnack constant and Holder exponent vs cylinder radius")
    save(fig, out_path)


if __name__ == "__main__":
    sys.exit(run_script(render))
