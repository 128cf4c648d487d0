#!/usr/bin/env python3
"""Driver: render every figure listed in a JSON manifest.

Manifest format: a list of specs, each {"kind": <figure kind>,
"csv": <input path>, "out": <output png>}.  Stops at the first failure so
CI sees the offending spec.
"""

import argparse
import json
import sys

from figlib import FIGURE_KINDS, FigureError

import plot_green_profile
import plot_kernel_overlay
import plot_llt_convergence
import plot_phi_scaling

_RENDERERS = {
    "llt_convergence": plot_llt_convergence.render,
    "kernel_overlay": plot_kernel_overlay.render,
    "green_profile": plot_green_profile.render,
    "phi_scaling": plot_phi_scaling.render,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("manifest", help="JSON list of figure specs")
    args = ap.parse_args(argv)
    try:
        specs = json.loads(open(args.manifest).read())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return 2
    if not isinstance(specs, list):
        print("manifest error: expected a JSON list", file=sys.stderr)
        return 2
    for i, spec in enumerate(specs):
        kind = spec.get("kind")
        if kind not in FIGURE_KINDS:
            print(f"spec {i}: unknown kind {kind!r} "
                  f"(expected one of {', '.join(FIGURE_KINDS)})",
                  file=sys.stderr)
            return 2
        if "csv" not in spec or "out" not in spec:
            print(f"spec {i}: needs 'csv' and 'out'", file=sys.stderr)
            return 2
        try:
            _RENDERERS[kind](spec["csv"], spec["out"])
        except FigureError as exc:
            print(f"spec {i} ({kind}): {exc}", file=sys.stderr)
            return 2
        print(f"rendered {kind} -> {spec['out']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
