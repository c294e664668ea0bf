import json
import subprocess
import sys

import numpy as np

from euaf.cli import main
from euaf.network import deserialize


def run(tmp_path, *args):
    return main(["--manifest", str(tmp_path / "run.manifest.json"), *args])


def test_gadget_check(tmp_path, capsys):
    out = tmp_path / "sq.json"
    assert run(tmp_path, "gadget", "--kind", "square", "--check", "--out", str(out)) == 0
    net = deserialize(out.read_text())
    assert (net.width, net.depth) == (3, 2)
    manifest = json.loads((tmp_path / "run.manifest.json").read_text())
    assert manifest["subcommand"] == "gadget" and manifest["exit_code"] == 0


def test_pointfit_report(tmp_path):
    report = tmp_path / "fit.json"
    assert run(tmp_path, "pointfit", "--targets", "0.3,0.7", "--epsilon", "0.05", "--report", str(report)) == 0
    doc = json.loads(report.read_text())
    assert doc["satisfied"] is True


def test_fit1d_then_verify(tmp_path):
    net_path = tmp_path / "sin.json"
    assert run(tmp_path, "fit1d", "--function", "sin3", "--epsilon", "0.3", "--out", str(net_path)) == 0
    x = np.linspace(0, 1, 1000)
    assert np.max(np.abs(deserialize(net_path.read_text()).scalar(x) - np.sin(3 * x))) < 0.3
    report = tmp_path / "verify.json"
    assert run(tmp_path, "verify", str(net_path), "--function", "sin3", "--report", str(report)) == 0
    assert json.loads(report.read_text())["sup_error"] < 0.3


def test_fit1d_from_csv(tmp_path):
    csv = tmp_path / "samples.csv"
    xs = np.linspace(0, 1, 50)
    csv.write_text("\n".join(f"{a},{a * a}" for a in xs))
    assert run(tmp_path, "fit1d", "--csv", str(csv), "--epsilon", "0.3", "--out", str(tmp_path / "n.json")) == 0


def test_classify(tmp_path):
    regions = tmp_path / "regions.json"
    regions.write_text(
        json.dumps(
            {"regions": [{"intervals": [[0.0, 0.3]]}, {"intervals": [[0.5, 0.8]]}], "labels": [{"num": 1, "den": 2}, {"num": -1, "den": 3}]}
        )
    )
    out, report = tmp_path / "cls.json", tmp_path / "cls_report.json"
    assert run(tmp_path, "classify", "--regions", str(regions), "--out", str(out), "--report", str(report)) == 0
    net = deserialize(out.read_text())
    np.testing.assert_allclose(net.scalar([0.1, 0.65]), [0.5, -1 / 3], atol=1e-9)
    assert json.loads(report.read_text())["n1"] == 6


def test_uaf_eval(tmp_path, capsys):
    assert run(tmp_path, "uaf", "--variant", "smooth", "--s", "1", "--eval", "1.0") == 0
    assert "0.5" in capsys.readouterr().out


def test_train_demo_csv(tmp_path):
    out = tmp_path / "trace.csv"
    assert run(tmp_path, "train-demo", "--steps", "100", "--width", "8", "--out", str(out)) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 3 and lines[0].startswith("step")


def test_bad_input_exit_codes(tmp_path):
    assert run(tmp_path, "verify", str(tmp_path / "missing.json")) == 2
    assert run(tmp_path, "fit1d", "--function", "nope", "--epsilon", "0.3") == 2
    assert main(["fit1d", "--bogus"]) == 2


def test_budget_failure_exit_code(tmp_path):
    report = tmp_path / "r.json"
    code = run(tmp_path, "fit1d", "--function", "osc", "--epsilon", "0.01", "--budget", "1000", "--report", str(report))
    assert code == 3
    assert report.exists()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "euaf.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
