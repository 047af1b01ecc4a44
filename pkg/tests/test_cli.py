import json
import shutil
import subprocess
import sys

import pytest

from chiralweyl import checks, cli


def run(capsys, *argv):
    rc = cli.main(list(argv) + ["--format", "json"])
    out = capsys.readouterr()
    return rc, (json.loads(out.out) if out.out.strip() else None), out.err


def test_ope(capsys):
    rc, res, _ = run(capsys, "ope", "a(-1)|0>", "b(-1)|0>")
    assert rc == 0
    assert set(res) == {"backend", "value", "error_estimate", "checks"}
    assert res["value"] == {"0": "|0>"}


def test_normal_order(capsys):
    rc, res, _ = run(capsys, "normal-order", "a(-1)|0>", "b(-2)|0>")
    assert rc == 0 and res["value"] == "a(-1) b(-2) |0>"


def test_coord_change(capsys):
    rc, res, _ = run(capsys, "coord-change", "z + z^2", "--order", "3")
    assert rc == 0
    assert res["value"]["schwarzian"] == "-1 + 4*z - 12*z^2 + 32*z^3"
    rc, res, _ = run(capsys, "coord-change", "4*z", "--state", "e1(-1)|0>", "--system", "sb")
    assert rc == 0 and res["value"]["v0"] == "4" and res["value"]["R_state"] == "1/2 e1(-1) |0>"


def test_bv(capsys):
    rc, res, _ = run(capsys, "bv", "e0_1 e1_1")
    assert rc == 0 and res["value"] == "1"
    rc, res, _ = run(capsys, "bv", "e1_1 e1_2", "--op", "qme")
    assert rc == 0 and res["value"]["exp_form"] is True


def test_trace_genus0(capsys):
    rc, res, _ = run(capsys, "trace", "a(-1)|0> @z1 * b(-1)|0> @z2", "--smooth", "1,0,0,0")
    assert rc == 0 and res["value"] == "1/18" and res["backend"] == "genus0"
    rc, res, _ = run(capsys, "trace", "a(-1)|0> @z1 * b(-1)|0> @z2 / (z1-z2)", "--smooth", "2,0,0,0")
    assert res["value"] == "1/45"


def test_trace_formal(capsys):
    rc, res, _ = run(capsys, "trace", "e1(-1) e2(-1)|0>", "--backend", "formal", "--system", "sb")
    assert rc == 0 and res["checks"][0]["passed"]


def test_expect(capsys):
    rc, res, _ = run(capsys, "expect", "current", "--coeff", "2")
    assert rc == 0 and res["backend"] == "genus1" and len(res["value"]) == 2


def test_check_pass(capsys):
    rc, res, _ = run(capsys, "check", "worked-example")
    assert rc == 0 and res["value"] == "pass"


def test_check_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(checks, "run_check_suite",
                        lambda *a, **k: {"suite": "x", "passed": False, "cases": 1, "failures": [{}], "details": {}})
    rc, res, _ = run(capsys, "check", "worked-example")
    assert rc == 2 and res["value"] == "fail"


@pytest.mark.parametrize("argv", [
    ["ope", "x(-1)|0>", "a(-1)|0>"],
    ["bv", "e0_1 +"],
    ["coord-change", "1 + z"],
    ["trace", "a(-1)|0> @z1", "--backend", "genus1"],
    ["expect", "current", "--config", "/nonexistent/file"],
])
def test_errors_exit_one(capsys, argv):
    rc, res, err = run(capsys, *argv)
    assert rc == 1 and err.startswith("error:")


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# zero modes\npairing = 2\n")
    rc, res, _ = run(capsys, "bv", "e0_1 e1_1", "--config", str(cfg))
    assert rc == 0 and res["value"] == "1/2"


@pytest.mark.parametrize("src", ["a(-1) b(-2)|0>", "e0_1 e1_2 - 1/2 e0_2^2", "1/(z1-z2)^2 + z1", "z - 3/2*z^2"])
def test_expression_round_trip(src):
    kind, obj = cli.parse_expr(src)
    assert cli.parse_expr(cli.format_expr(kind, obj)) == (kind, obj)


def test_text_output(capsys):
    assert cli.main(["ope", "a(-1)|0>", "b(-1)|0>"]) == 0
    assert "backend: exact" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("chiralweyl") is None, reason="console script not installed")
def test_console_script():
    p = subprocess.run(["chiralweyl", "ope", "c(-1)|0>", "d(-1)|0>", "--format", "json"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and json.loads(p.stdout)["value"] == {"0": "|0>"}
