"""Secondary-component tests: drive the figure scripts as subprocesses."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

FIGDIR = Path(__file__).resolve().parents[1]
FIXTURES = FIGDIR / "fixtures"

SCRIPTS = {
    "llt_convergence": ("plot_llt_convergence.py", "llt.csv", "abs_err"),
    "kernel_overlay": ("plot_kernel_overlay.py", "kernel_profile.csv",
                       "gaussian_ref"),
    "green_profile": ("plot_green_profile.py", "green.csv", "C_ref"),
    "phi_scaling": ("plot_phi_scaling.py", "phi.csv", "theta_hat"),
}

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def run(script, *argv):
    return subprocess.run([sys.executable, str(FIGDIR / script), *argv],
                          capture_output=True, text=True, cwd=FIGDIR)


@pytest.mark.parametrize("kind", sorted(SCRIPTS))
def test_renders_fixture(kind, tmp_path):
    script, fixture, _col = SCRIPTS[kind]
    out = tmp_path / f"{kind}.png"
    proc = run(script, str(FIXTURES / fixture), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    assert out.read_bytes()[:8] == PNG_MAGIC


@pytest.mark.parametrize("kind", sorted(SCRIPTS))
def test_missing_column_named(kind, tmp_path):
    script, fixture, dropped = SCRIPTS[kind]
    lines = (FIXTURES / fixture).read_text().splitlines()
    header = lines[0].split(",")
    corrupted = tmp_path / fixture
    corrupted.write_text("\n".join(
        [",".join(h + "_x" if h == dropped else h for h in header)]
        + lines[1:]) + "\n")
    out = tmp_path / "out.png"
    proc = run(script, str(corrupted), "--out", str(out))
    assert proc.returncode == 2
    assert dropped in proc.stderr
    assert not out.exists()


def test_empty_csv_reports_no_rows(tmp_path):
    script, fixture, _col = SCRIPTS["green_profile"]
    empty = tmp_path / "empty.csv"
    empty.write_text((FIXTURES / fixture).read_text().splitlines()[0] + "\n")
    proc = run(script, str(empty), "--out", str(tmp_path / "o.png"))
    assert proc.returncode == 2
    assert "no rows" in proc.stderr


def test_green_reference_line_uses_c_ref_column(tmp_path):
    # the p=1 fixture carries C_ref near 1/(4 pi); the script must read it
    # from the CSV, so doctoring the column moves the reference line and
    # changes the rendered bytes
    script, fixture, _col = SCRIPTS["green_profile"]
    base = (FIXTURES / fixture).read_text().splitlines()
    out1 = tmp_path / "a.png"
    assert run(script, str(FIXTURES / fixture), "--out",
               str(out1)).returncode == 0
    c_ref = float(base[1].split(",")[-1])
    assert abs(c_ref - 0.0795775) / 0.0795775 < 0.02

    doctored = tmp_path / "g2.csv"
    rows = [base[0]] + [",".join(r.split(",")[:-1] + ["0.05"])
                        for r in base[1:]]
    doctored.write_text("\n".join(rows) + "\n")
    out2 = tmp_path / "b.png"
    assert run(script, str(doctored), "--out", str(out2)).returncode == 0
    assert out1.read_bytes() != out2.read_bytes()


def test_rendering_is_deterministic(tmp_path):
    script, fixture, _col = SCRIPTS["llt_convergence"]
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    assert run(script, str(FIXTURES / fixture), "--out", str(a)).returncode == 0
    assert run(script, str(FIXTURES / fixture), "--out", str(b)).returncode == 0
    assert a.read_bytes() == b.read_bytes()


def test_manifest_driver_renders_all(tmp_path):
    specs = []
    for kind, (_script, fixture, _col) in sorted(SCRIPTS.items()):
        specs.append({"kind": kind, "csv": str(FIXTURES / fixture),
                      "out": str(tmp_path / f"{kind}.png")})
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps(specs))
    proc = run("render_manifest.py", str(manifest))
    assert proc.returncode == 0, proc.stderr
    for kind in SCRIPTS:
        assert (tmp_path / f"{kind}.png").read_bytes()[:8] == PNG_MAGIC


def test_manifest_rejects_unknown_kind(tmp_path):
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps([{"kind": "pie_chart", "csv": "x",
                                     "out": "y"}]))
    proc = run("render_manifest.py", str(manifest))
    assert proc.returncode == 2
    assert "pie_chart" in proc.stderr
