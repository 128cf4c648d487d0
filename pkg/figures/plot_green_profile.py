#!/usr/bin/env python3
"""Shell profile |x|^{d-2} g(0, x) with the predicted constant, log-log."""

import sys
from collections import defaultdict

import matplotlib.pyplot as plt

from figlib import load_rows, run_script, save


def render(csv_path, out_path):
    rows = load_rows(csv_path,
                     ["seed", "shell_radius", "mean", "min", "max", "C_ref"])
    by_seed = defaultdict(list)
    for r in rows:
        by_seed[r["seed"]].append((float(r["shell_radius"]), float(r["mean"]),
                                   float(r["min"]), float(r["max"])))
    c_ref = float(rows[0]["C_ref"])
    fig, ax = plt.subplots()
    for seed, pts in sorted(by_seed.items()):
        pts.sort()
        rs = [p[0] for p in pts]
        ax.loglog(rs, [p[1] for p in pts], "o-", label=f"seed {seed}")
        ax.fill_between(rs, [p[2] for p in pts], [p[3] for p in pts],
                        alpha=0.2)
    ax.axhline(c_ref, color="k", linestyle="--",
               label=f"C reference {c_ref:.5g}")
    ax.set_xlabel("shell radius |x|")
    ax.set_ylabel("|x|^{d-2} g(0, x)")
    ax.set_title("Green's function shell profile")
    ax.legend()
    save(fig, out_path)


if __name__ == "__main__":
    sys.exit(run_script(render))
