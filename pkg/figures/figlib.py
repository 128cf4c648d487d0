"""Shared plumbing for the figure scripts.

Figures consume only the experiment CSVs, never the library internals, and
rendering is a pure function of the CSV bytes plus the spec: the matplotlib
defaults below are pinned and the Agg backend writes no volatile metadata.
"""

import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update({
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.markersize": 4,
})

FIGURE_KINDS = ("llt_convergence", "kernel_overlay", "green_profile",
                "phi_scaling")


class FigureError(Exception):
    """Schema or content problem; the scripts turn this into exit 2."""


def load_rows(path, required):
    """Rows of a CSV as dicts, failing loudly on schema problems."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise FigureError(
                f"{path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise FigureError(f"{path}: no rows")
    return rows


def save(fig, out_path):
    fig.savefig(out_path, format="png")
    plt.close(fig)


def run_script(render, argv=None):
    """argparse + error-handling shell shared by every figure script."""
    import argparse

    ap = argparse.ArgumentParser()
    ap.add_argument("csv", help="input CSV produced by the phl CLI")
    ap.add_argument("--out", required=True, help="output PNG path")
    args = ap.parse_args(argv)
    try:
        render(args.csv, args.out)
    except FigureError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    return 0
