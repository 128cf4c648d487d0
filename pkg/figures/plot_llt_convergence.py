#!/usr/bin/env python3
"""Sup-grid local-limit error against the kernel horizon, log-log."""

import sys
from collections import defaultdict

import matplotlib.pyplot as plt

from figlib import load_rows, run_script, save


def render(csv_path, out_path):
    rows = load_rows(csv_path, ["seed", "n", "abs_err"])
    sup = defaultdict(float)
    for r in rows:
        key = (r["seed"], int(r["n"]))
        sup[key] = max(sup[key], float(r["abs_err"]))
    seeds = sorted({k[0] for k in sup})
    fig, ax = plt.subplots()
    for s in seeds:
        ns = sorted(n for sd, n in sup if sd == s)
        ax.loglog(ns, [sup[(s, n)] for n in ns], "o-", label=f"seed {s}")
    ax.set_xlabel("n")
    ax.set_ylabel("sup-grid error")
    ax.set_title("local limit theorem convergence")
    ax.legend()
    save(fig, out_path)


if __name__ == "__main__":
    sys.exit(run_script(render))
