import json
import math

import pytest

from depinn import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_fd_json(capsys):
    code, doc = run(capsys, "fd", "--model", "standard_fk", "--k", "1", "--p", "0", "--q", "1",
                    "--tol", "1e-4")
    assert code == 0
    assert doc["schema"] == 1
    assert doc["config"]["model"] == {"kind": "standard_fk", "k": 1.0}
    assert doc["config"]["command"]["tol"] == 1e-4
    assert doc["result"]["F_d"] == pytest.approx(1 / (2 * math.pi), abs=1e-4)


def test_fd_limit_writes_csv(capsys, tmp_path):
    code, doc = run(capsys, "fd-limit", "--p", "0", "--q", "1", "--side", "plus", "--nmax", "4",
                    "--output-dir", str(tmp_path))
    assert code == 0
    rows = (tmp_path / "fd_limit.csv").read_text().splitlines()
    assert rows[0] == "P,Q,F_d" and len(rows) == 5
    saved = json.loads((tmp_path / "fd-limit.json").read_text())
    assert saved == doc
    assert doc["result"]["estimate"] <= doc["result"]["F_d_center"]


def test_circle_verdict_mane(capsys):
    code, doc = run(capsys, "circle-verdict", "--model", "mane")
    assert code == 0 and doc["result"]["kind"] == "MixedCircle"


def test_exit_codes(capsys):
    assert cli.main(["fd", "--bogus"]) == 2
    assert cli.main(["fd", "--set", "nope=1"]) == 2
    code, doc = run(capsys, "fd", "--model", "nope")
    assert code == 3 and doc["status"] == "error"
    code, doc = run(capsys, "fd", "--k", "-1")
    assert code == 3
    # no equilibrium above the depinning force: numerical failure with diagnostics
    code, doc = run(capsys, "equilibrium", "--F", "0.5", "--set", "phase=0.25")
    assert code == 4
    assert doc["error"]["type"] == "NewtonDivergence"
    assert "residual" in doc["error"]["diagnostics"]


def test_run_config_deterministic(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[model]\nkind = "standard_fk"\nk = 0.5\n\n[command]\nverb = "scan"\n'
                   'over = "F"\nstart = 0.0\nstop = 0.12\nstep = 0.02\n\n[output]\n'
                   f'dir = "{tmp_path / "a"}"\nformats = ["csv", "json"]\n')
    assert cli.main(["run", str(cfg)]) == 0
    first = capsys.readouterr().out
    assert cli.main(["run", str(cfg), "--output-dir", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    a = (tmp_path / "a" / "scan.csv").read_bytes()
    assert a == (tmp_path / "b" / "scan.csv").read_bytes()
    doc = json.loads(first)
    rows = doc["result"]["rows"]
    assert [r["index"] for r in rows] == list(range(7))
    vs = [r["v"] for r in rows]
    # F_d = 0.5/(2 pi) ~ 0.0796: pinned below, sliding above
    assert all(v == 0 for v, r in zip(vs, rows) if r["F"] < 0.079)
    assert all(v > 0 for v, r in zip(vs, rows) if r["F"] > 0.08)


def test_scan_rejects_empty_grid(capsys):
    code, doc = run(capsys, "scan", "--set", "values=[]")
    assert code == 3 and "empty" in doc["error"]["message"]


def test_scan_omega_bounds(capsys):
    code, doc = run(capsys, "scan", "--set", 'over="omega"', "--set", "farey_level=3",
                    "--tol", "1e-5")
    assert code == 0
    rows = doc["result"]["rows"]
    assert [r["omega"] for r in rows] == ["0", "1/3", "1/2", "2/3", "1"]
    assert all(0 <= r["F_d"] <= 1 / (2 * math.pi) + 1e-5 for r in rows)


def test_scan_parallel_matches_serial(capsys):
    args = ["scan", "--set", "values=[0.05, 0.2, 0.3]"]
    _, serial = run(capsys, *args)
    _, par = run(capsys, *args, "--jobs", "2")
    assert serial["result"] == par["result"]


def test_bad_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("x = [")
    assert cli.main(["run", str(p)]) == 2
    p.write_text('[command]\nverb = "teleport"\n')
    assert cli.main(["run", str(p)]) == 2


def test_svg_report(capsys, tmp_path):
    code, _ = run(capsys, "disc", "--output-dir", str(tmp_path), "--format", "svg,json")
    assert code == 0
    svg = (tmp_path / "disc.svg").read_text()
    assert svg.startswith("<?xml") and "<svg" in svg
    assert not (tmp_path / "disc.csv").exists()


def test_modify_h_seams(capsys):
    code, doc = run(capsys, "modify-h", "--set", "samples=2000")
    assert code == 0
    assert doc["result"]["properties"]["twist_ok"]
    for seam in doc["result"]["seams"].values():
        assert seam["h12_jump"] < 1e-6


def test_minimax_two_saddles(capsys):
    code, doc = run(capsys, "minimax", "--model", "double_well", "--k", "0.03", "--param", "b=2")
    assert code == 0
    assert doc["result"]["height_difference"] < 1e-8
    assert len(doc["result"]["saddles"]) == 2


def test_checked_in_configs_resolve():
    from pathlib import Path

    files = sorted((Path(__file__).parent.parent / "configs").glob("*.toml"))
    assert files
    for f in files:
        res = cli.load_config(f).resolved()
        assert res["command"]["verb"] in cli.VERBS
        cli.validate_model(cli.build_model(res["model"]))
