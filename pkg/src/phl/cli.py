"""Experiment orchestration and persistence.

One subcommand per measurement family, all driven by a validated
ExperimentConfig that can come from a text config file, command-line
flags, or both (flags win).  Every output CSV is a deterministic function
of the config: floats are printed with 17 significant digits, rows are
written in seed order, and nothing else (timestamps, hostnames) leaks into
them.  Wall-clock provenance goes to run_info.txt, which is exempt from
the byte-identity contract.

Exit codes: 0 success, 1 scientific invariant violated (named on stderr),
2 configuration problem, 3 resource exhaustion.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import PhlError
from . import balayage as bal
from . import harnack as har
from . import kernel as ker
from . import lattice as lat
from . import limits as lim

SUBCOMMANDS = ("gen", "kernel", "balayage", "phi", "llt", "green", "all")


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    d: int = 2
    L: int = 64
    p: float | None = 0.7
    K: float | None = None
    kind: str = "myopic"
    seeds: tuple[int, ...] = (1,)
    tol: float = 1e-10
    out: str = "phl-out"
    n_list: tuple[int, ...] = (64, 256)
    t_grid: tuple[float, ...] = (1.0, 2.0)
    x_grid: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0)
    radius: tuple[int, ...] = (8, 16)


class ConfigKeyError(ValueError):
    pass


_INT_KEYS = {"d", "L"}
_FLOAT_KEYS = {"tol"}
_OPT_FLOAT_KEYS = {"p", "K"}
_STR_KEYS = {"subcommand", "kind", "out"}
_INT_TUPLE_KEYS = {"seeds", "n_list", "radius"}
_FLOAT_TUPLE_KEYS = {"t_grid", "x_grid"}
_ALL_KEYS = (_INT_KEYS | _FLOAT_KEYS | _OPT_FLOAT_KEYS | _STR_KEYS
             | _INT_TUPLE_KEYS | _FLOAT_TUPLE_KEYS)


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _OPT_FLOAT_KEYS:
        return None if raw.lower() == "none" else float(raw)
    if key in _STR_KEYS:
        return raw
    if key in _INT_TUPLE_KEYS:
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if key in _FLOAT_TUPLE_KEYS:
        return tuple(float(v) for v in raw.split(",") if v.strip())
    raise ConfigKeyError(f"unknown key {key!r}")


def parse_config_text(text: str) -> dict:
    """key = value lines; '#' comments; unknown keys are an error."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigKeyError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigKeyError(f"unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.subcommand not in SUBCOMMANDS:
        raise ConfigKeyError(f"unknown subcommand {cfg.subcommand!r}")
    if cfg.d not in (2, 3):
        raise ConfigKeyError(f"d out of range: {cfg.d}")
    if cfg.L < 4:
        raise ConfigKeyError(f"L out of range: {cfg.L}")
    if cfg.kind not in lat.ANT_KINDS:
        raise ConfigKeyError(f"kind out of range: {cfg.kind!r}")
    if cfg.kind == "conductance":
        if cfg.K is None or cfg.K < 1.0:
            raise ConfigKeyError(f"K out of range for conductance kind: {cfg.K}")
    else:
        if cfg.p is None or not (0.0 <= cfg.p <= 1.0):
            raise ConfigKeyError(f"p out of range: {cfg.p}")
    if cfg.tol <= 0.0:
        raise ConfigKeyError(f"tol out of range: {cfg.tol}")
    if not cfg.seeds:
        raise ConfigKeyError("seeds must be non-empty")
    if not all(n >= 1 for n in cfg.n_list):
        raise ConfigKeyError(f"n_list out of range: {cfg.n_list}")
    if not all(t > 0 for t in cfg.t_grid):
        raise ConfigKeyError(f"t_grid out of range: {cfg.t_grid}")
    if not all(r >= 3 for r in cfg.radius):
        raise ConfigKeyError(f"radius out of range: {cfg.radius}")
    return cfg


def emit_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            lines.append(f"{f.name} = {','.join(_fmt(x) for x in v)}")
        elif v is None:
            lines.append(f"{f.name} = none")
        else:
            lines.append(f"{f.name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def parse_config(path: str | None = None, overrides: dict | None = None,
                 subcommand: str | None = None) -> ExperimentConfig:
    values: dict = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    if overrides:
        for k, v in overrides.items():
            if v is not None:
                values[k] = v
    if subcommand is not None:
        values["subcommand"] = subcommand
    if "subcommand" not in values:
        raise ConfigKeyError("no subcommand given")
    return validate_config(ExperimentConfig(**values))


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


# ---------------------------------------------------------------------------
# per-seed pipelines


def _sample(cfg: ExperimentConfig, seed: int):
    if cfg.kind == "conductance":
        config = lat.gen_conductance_config(cfg.d, cfg.L, cfg.K, seed)
    else:
        config = lat.gen_bond_config(cfg.d, cfg.L, cfg.p, seed)
    cluster = lat.extract_giant_cluster(config)
    if cluster is None:
        raise PhlError(f"seed {seed}: no cluster (no open edges)")
    graph = lat.build_weighted_graph(config, cluster, cfg.kind)
    x0 = lat.closest_point(graph, graph.centre)
    return config, graph, x0


def run_gen(cfg: ExperimentConfig, seed: int, outdir: Path) -> dict:
    config, graph, x0 = _sample(cfg, seed)
    lat.write_snapshot(outdir / f"snapshot_seed{seed}.txt", config, graph)
    geo = lat.density_estimate(graph,
                               hole_radii=[graph.L // 8, graph.L // 4])
    rows = [(seed, cfg.kind, r, m, dens)
            for r, m, dens in zip(geo.radii, geo.masses, geo.densities)]
    holes = [(seed, r, h) for r, h in sorted(geo.hole_sizes.items())]
    return {"density": rows, "holes": holes,
            "summary": {"a_hat": geo.a_hat,
                        "cluster_vertices": graph.n_vertices}}


def run_kernel(cfg: ExperimentConfig, seed: int, outdir: Path) -> dict:
    _config, graph, x0 = _sample(cfg, seed)
    times = sorted({int(n) for n in cfg.n_list}
                   | {int(n) + 1 for n in cfg.n_list})
    slices = ker.kernel_slices(graph, x0, times)
    for n in cfg.n_list:
        _write_slice_csv(outdir / f"kernel_seed{seed}_t{n}.csv",
                         graph, slices[n])
    checks = ker.identity_checks(graph, x0, n_base=min(cfg.n_list),
                                 seed=seed, tol=cfg.tol)
    check_rows = [(seed, c.name, c.value, c.tol, int(c.ok)) for c in checks]

    geo = lat.density_estimate(graph)
    diff = lim.estimate_diffusion(graph, x0, max(cfg.n_list))
    profile_rows = []
    n_prof = max(cfg.n_list)
    phat = slices[n_prof].density + slices[n_prof + 1].density
    disp = graph.coords.astype(float) - graph.coords[x0]
    dist_e = np.sqrt((disp ** 2).sum(axis=1))
    interior = graph.interior_mask()
    scale = n_prof ** (graph.d / 2.0)
    for r in range(0, int(graph.L / 4.0)):
        m = interior & (dist_e >= r - 0.5) & (dist_e < r + 0.5)
        if not m.any():
            continue
        ref = 2.0 / geo.a_hat * lim.gaussian_kernel(
            graph.d, diff.d_hat, 1.0, (r / np.sqrt(n_prof),) + (0.0,) * (graph.d - 1))
        profile_rows.append((seed, cfg.kind, n_prof, float(r),
                             float(scale * phat[m].mean()), ref))
    bad = [c for c in checks if not c.ok]
    return {"kernel_checks": check_rows, "kernel_profile": profile_rows,
            "violations": [f"kernel identity {c.name} gap {c.value:.3e}"
                           for c in bad],
            "summary": {"a_hat": geo.a_hat, "d_hat": diff.d_hat}}


def run_balayage(cfg: ExperimentConfig, seed: int, outdir: Path) -> dict:
    _config, graph, x0 = _sample(cfg, seed)
    rng = np.random.default_rng(seed + 1000)
    rows = []
    violations = []
    cyl_id = 0
    radii = [r for r in cfg.radius if r >= 6] or [6, 10, 14]
    for R in radii:
        T = int(min(R * R, 64))
        T = max(T, 16)
        centre = graph.centre + rng.integers(-2, 3, size=graph.d)
        x1 = lat.closest_point(graph, centre)
        cyl = bal.make_cylinder(graph, x1, R, T)
        fam = bal.caloric_family(cyl, n_interior=2, n_mixtures=1,
                                 seed=seed + cyl_id)
        for f in fam:
            ue_dp = bal.reduite_dp(f)
            ue_form = bal.balayage_reduite(f)
            gap = float(np.abs(ue_dp - ue_form).max())
            resid = f.caloric_residual()
            charge = bal.balayage_charge(f, ue_dp)
            supp_gap = float(np.abs(charge[2:][:, ~cyl.charge_support]).max()) \
                if (~cyl.charge_support).any() else 0.0
            rows.append((cyl_id, R, T, gap, resid, supp_gap))
            if gap > cfg.tol:
                violations.append(
                    f"balayage mismatch {gap:.3e} on cylinder {cyl_id}")
            cyl_id += 1
    worst = max(r[3] for r in rows)
    return {"balayage": rows, "violations": violations,
            "summary": {"balayage_max_gap": worst}}


def run_phi(cfg: ExperimentConfig, seed: int, outdir: Path) -> dict:
    _config, graph, x0 = _sample(cfg, seed)
    rows = []
    violations = []
    summary = {}
    for R in cfg.radius:
        cyl = bal.make_cylinder(graph, x0, R)
        fam = bal.caloric_family(cyl, seed=seed)
        rep = har.phi_ratio(cyl, fam)
        try:
            windows = har.nested_windows(cyl)
        except PhlError:
            windows = None      # cylinder too small for a decay chain
        n_viol = 0 if windows else -1
        if windows:
            for f in fam:
                osc = har.oscillation_profile(f, windows, rep.c_h)
                n_viol += osc.violations
        hold = har.holder_check(fam[0], rep.c_h)
        rows.append((seed, R, cyl.T, rep.family_size, rep.c_h,
                     rep.delta_hat, rep.theta_hat, n_viol, hold.c_fit))
        summary[f"c_h_R{R}"] = rep.c_h
        summary[f"theta_R{R}"] = rep.theta_hat
        if n_viol > 0:
            violations.append(
                f"oscillation decay violated {n_viol} times at R={R}")
    s_hat = har.stabilization_radius({r[1]: r[4] for r in rows})
    if s_hat is not None:
        summary["phi_stabilization_radius"] = s_hat
    return {"phi": rows, "violations": violations, "summary": summary}


def run_llt(cfg: ExperimentConfig, seed: int, outdir: Path) -> dict:
    _config, graph, x0 = _sample(cfg, seed)
    geo = lat.density_estimate(graph)
    n_max = max(cfg.n_list)
    diff = lim.estimate_diffusion(graph, x0, n_max)
    x_grid = tuple((x,) + (0.0,) * (graph.d - 1) for x in cfg.x_grid)
    rep = lim.llt_error(graph, x0, cfg.n_list, cfg.t_grid, x_grid,
                        a_hat=geo.a_hat, d_hat=diff.d_hat)
    rows = [(seed, r.kind, r.n, r.t) + r.x + (r.measured, r.gaussian_ref,
                                              r.abs_err)
            for r in rep.rows]
    sups = {n: rep.sup_error(n) for n in rep.n_values}
    summary = {"a_hat": geo.a_hat, "d_hat": diff.d_hat,
               "llt_excluded": rep.excluded}
    for n, e in sups.items():
        summary[f"llt_sup_err_n{n}"] = e
    return {"llt": rows, "violations": [], "summary": summary}


def run_green(cfg: ExperimentConfig, seed: int, outdir: Path) -> dict:
    config, graph, x0 = _sample(cfg, seed)
    geo = lat.density_estimate(graph)
    n_diff = min(int((graph.L / 4.0) ** 2), 4 * graph.L)
    diff = lim.estimate_diffusion(graph, x0, n_diff)
    gfield = lim.green_solve(graph, x0, tol=cfg.tol)
    prof = lim.green_profile(graph, gfield, a_hat=geo.a_hat,
                             d_hat=diff.d_hat)
    rows = [(seed, sh.radius, sh.mean, sh.lo, sh.hi, prof.c_ref)
            for sh in prof.shells]
    violations = []
    summary = {"a_hat": geo.a_hat, "d_hat": diff.d_hat,
               "green_c_ref": prof.c_ref, "green_c_fit": gfield.c_fit,
               "green_residual": gfield.residual}
    if prof.onset_radius is not None:
        summary["green_onset_radius"] = prof.onset_radius
    if cfg.kind in ("myopic", "blind"):
        cluster = lat.extract_giant_cluster(config)
        other = "blind" if cfg.kind == "myopic" else "myopic"
        graph2 = lat.build_weighted_graph(config, cluster, other)
        gap = lim.green_ant_equivalence(
            graph if cfg.kind == "myopic" else graph2,
            graph2 if cfg.kind == "myopic" else graph, x0, tol=cfg.tol)
        summary["green_ant_gap"] = gap
        if gap > 10.0 * cfg.tol:
            violations.append(
                f"ant equivalence gap {gap:.3e} above 10*tol")
    return {"green": rows, "violations": violations, "summary": summary}


_RUNNERS = {"gen": run_gen, "kernel": run_kernel, "balayage": run_balayage,
            "phi": run_phi, "llt": run_llt, "green": run_green}

_SCHEMAS = {
    "density": ("seed", "kind", "radius", "window_mass", "density"),
    "holes": ("seed", "radius", "hole_size"),
    "kernel_checks": ("seed", "check", "gap", "tol", "ok"),
    "kernel_profile": ("seed", "kind", "n", "r", "measured", "gaussian_ref"),
    "balayage": ("cylinder", "R", "T", "max_gap", "max_caloric_residual",
                 "charge_support_violation"),
    "phi": ("seed", "R", "T", "family_size", "c_h", "delta_hat", "theta_hat",
            "violations", "holder_c"),
    "llt": None,   # depends on d; built on the fly
    "green": ("seed", "shell_radius", "mean", "min", "max", "C_ref"),
}


def _llt_header(d: int) -> tuple:
    return ("seed", "kind", "n", "t") + tuple(f"x{i}" for i in range(d)) + \
        ("measured", "gaussian_ref", "abs_err")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_slice_csv(path: Path, graph, sl) -> None:
    header = tuple(f"y{i}" for i in range(graph.d)) + ("density", "mass")
    mass = sl.density * graph.mu
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(graph.n_vertices):
            if sl.density[i] == 0.0:
                continue
            coords = ",".join(str(int(c)) for c in graph.coords[i])
            fh.write(f"{coords},{_fmt(float(sl.density[i]))},"
                     f"{_fmt(float(mass[i]))}\n")


def _worker(args):
    cfg, sub, seed, outdir = args
    return seed, _RUNNERS[sub](cfg, seed, Path(outdir))


@dataclass
class ExperimentReport:
    outdir: Path
    csv_paths: list[Path]
    summary: dict
    violations: list[str]


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    subs = [s for s in ("gen", "kernel", "balayage", "phi", "llt", "green")
            if cfg.subcommand in (s, "all")]
    if cfg.subcommand == "all" and cfg.d == 2 and "green" in subs:
        subs.remove("green")    # transience proxy needs d = 3

    workers = int(os.environ.get("PHL_THREADS", "1") or "1")
    tables: dict[str, list] = {}
    summary: dict = {}
    violations: list[str] = []
    for sub in subs:
        jobs = [(cfg, sub, seed, str(outdir)) for seed in cfg.seeds]
        if workers > 1 and len(jobs) > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = sorted(ex.map(_worker, jobs))
        else:
            results = [_worker(j) for j in jobs]
        for seed, res in results:
            for key, rows in res.items():
                if key == "summary":
                    for k, v in res["summary"].items():
                        summary[f"{k}_seed{seed}" if len(cfg.seeds) > 1
                                else k] = v
                elif key == "violations":
                    violations.extend(res["violations"])
                else:
                    tables.setdefault(key, []).extend(rows)

    paths = []
    for key, rows in sorted(tables.items()):
        header = _SCHEMAS[key] if _SCHEMAS.get(key) else _llt_header(cfg.d)
        path = outdir / f"{key}.csv"
        _write_csv(path, header, rows)
        paths.append(path)

    with open(outdir / "summary.txt", "w") as fh:
        for k in sorted(summary):
            fh.write(f"{k} = {_fmt(summary[k])}\n")
    with open(outdir / "run_info.txt", "w") as fh:
        fh.write(f"phl {__version__}\n")
        fh.write(f"wall_time_s = {time.time() - t_start:.3f}\n")
        fh.write("config:\n")
        fh.write(emit_config(cfg))

    return ExperimentReport(outdir=outdir, csv_paths=paths, summary=summary,
                            violations=violations)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="phl",
        description="random-walk heat kernels, Harnack constants, balayage "
                    "checks, local limit theorem and Green's function "
                    "measurements on percolation clusters")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--d", type=int, help="dimension (2 or 3)")
        p.add_argument("--L", type=int, help="box side, vertices per axis")
        p.add_argument("--p", type=float, help="bond retention probability")
        p.add_argument("--K", type=float, help="conductance bound (>= 1)")
        p.add_argument("--kind", choices=lat.ANT_KINDS)
        p.add_argument("--seeds", help="comma-separated seed list")
        p.add_argument("--tol", type=float)
        p.add_argument("--out", help="output directory")
        p.add_argument("--n-list", dest="n_list",
                       help="comma-separated kernel horizons")
        p.add_argument("--t-grid", dest="t_grid",
                       help="comma-separated rescaled times")
        p.add_argument("--x-grid", dest="x_grid",
                       help="comma-separated first-axis offsets")
        p.add_argument("--radius", help="comma-separated cylinder radii")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for key in ("d", "L", "p", "K", "kind", "tol", "out"):
        overrides[key] = getattr(args, key)
    for key in ("seeds", "n_list", "radius"):
        raw = getattr(args, key)
        overrides[key] = _parse_value(key, raw) if raw is not None else None
    for key in ("t_grid", "x_grid"):
        raw = getattr(args, key)
        overrides[key] = _parse_value(key, raw) if raw is not None else None
    try:
        cfg = parse_config(args.config, overrides, args.subcommand)
    except (ConfigKeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_experiment(cfg)
    except MemoryError:
        print("resource exhaustion", file=sys.stderr)
        return 3
    except PhlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for k in sorted(report.summary):
        print(f"{k} = {_fmt(report.summary[k])}")
    if report.violations:
        for v in report.violations:
            print(f"VIOLATION: {v}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
