"""Command line behavior: exit codes, report schema, config handling."""

import filecmp
import json

import pytest

from emtkit.cli import EXIT_FAIL, EXIT_OFFSHELL, EXIT_PASS, EXIT_USAGE, main


def run_cli(args):
    return main(args)


def test_verify_passes_and_writes_report(tmp_path, capsys):
    rp = tmp_path / "report.json"
    code = run_cli(["verify", "--suite", "tilde-algebra", "--points", "4",
                    "--report", str(rp), "--quiet"])
    assert code == EXIT_PASS
    report = json.loads(rp.read_text())
    assert report["schema_version"] == 1
    assert "engine_version" in report
    assert report["summary"]["failed"] == 0
    assert report["summary"]["passed"] == len(report["checks"])
    row = report["checks"][0]
    for key in ("id", "identity", "suite", "points", "max_abs", "max_rel",
                "tolerance", "measure", "mode", "passed"):
        assert key in row, key
    assert report["config"]["suites"] == ["tilde-algebra"]


def test_verify_progress_lines(capsys):
    code = run_cli(["verify", "--suite", "tilde-algebra", "--points", "4"])
    assert code == EXIT_PASS
    out = capsys.readouterr().out
    assert "[PASS]" in out
    assert "tilde-product-rule" in out
    assert "0 failed" in out


def test_forced_failure_exit_code(tmp_path, capsys):
    rp = tmp_path / "report.json"
    code = run_cli(["verify", "--suite", "lie-calculus", "--points", "4",
                    "--tol", "1e-30", "--report", str(rp), "--quiet"])
    assert code == EXIT_FAIL
    report = json.loads(rp.read_text())
    assert report["summary"]["failed"] > 0
    failed = [c for c in report["checks"] if not c["passed"]]
    assert all(c["tolerance"] == 1e-30 for c in failed)


def test_per_check_tolerance_override(tmp_path):
    rp = tmp_path / "report.json"
    code = run_cli(["verify", "--suite", "lie-calculus", "--points", "4",
                    "--tol", "killing-metric-flow=1e-30", "--report", str(rp),
                    "--quiet"])
    assert code == EXIT_FAIL
    report = json.loads(rp.read_text())
    rows = {c["id"]: c for c in report["checks"]}
    assert not rows["killing-metric-flow"]["passed"]
    assert rows["lie-dual-forms"]["passed"]


def test_unknown_suite_is_usage_error(capsys):
    assert run_cli(["verify", "--suite", "bogus"]) == EXIT_USAGE
    assert "bogus" in capsys.readouterr().err


def test_unknown_scenario_is_usage_error(capsys):
    code = run_cli(["verify", "--suite", "tilde-algebra",
                    "--scenario", "phlogiston"])
    assert code == EXIT_USAGE


def test_bad_tolerance_is_usage_error(capsys):
    code = run_cli(["verify", "--suite", "tilde-algebra",
                    "--tol", "no-such-check=1e-9"])
    assert code == EXIT_USAGE


def test_off_shell_gate_exit_code(capsys):
    code = run_cli(["verify", "--suite", "emt-onshell",
                    "--scenario", "scalar-blob-2d", "--points", "4"])
    assert code == EXIT_OFFSHELL
    assert "on-shell" in capsys.readouterr().err


def test_reports_are_byte_identical(tmp_path):
    r1, r2 = tmp_path / "a.json", tmp_path / "b.json"
    args = ["verify", "--suite", "tilde-algebra", "--points", "6",
            "--seed", "3", "--quiet"]
    assert run_cli(args + ["--report", str(r1)]) == EXIT_PASS
    assert run_cli(args + ["--report", str(r2)]) == EXIT_PASS
    assert filecmp.cmp(r1, r2, shallow=False)
    assert r1.read_text() != ""


def test_quiet_without_report_prints_json(capsys):
    code = run_cli(["verify", "--suite", "tilde-algebra", "--points", "4",
                    "--quiet"])
    assert code == EXIT_PASS
    report = json.loads(capsys.readouterr().out)
    assert report["summary"]["failed"] == 0


def test_config_file_with_cli_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "suites": ["tilde-algebra"], "points": 3, "seed": 11,
    }))
    rp = tmp_path / "report.json"
    code = run_cli(["verify", "--config", str(cfg), "--points", "5",
                    "--report", str(rp), "--quiet"])
    assert code == EXIT_PASS
    conf = json.loads(rp.read_text())["config"]
    assert conf["points"] == 5       # flag beats file
    assert conf["seed"] == 11        # file beats default
    assert conf["suites"] == ["tilde-algebra"]


def test_config_file_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"suites": ["tilde-algebra"], "bogus": 1}))
    assert run_cli(["verify", "--config", str(cfg)]) == EXIT_USAGE
    assert "bogus" in capsys.readouterr().err


def test_config_file_missing(tmp_path):
    assert run_cli(["verify", "--config", str(tmp_path / "nope.json")]) == EXIT_USAGE


def test_list_mentions_everything(capsys):
    assert run_cli(["list"]) == EXIT_PASS
    out = capsys.readouterr().out
    for token in ("tilde-algebra", "variational", "master-identity",
                  "schwarzschild", "em-wave-4d", "scalar-blob-2d"):
        assert token in out, token


def test_explain_known_check(capsys):
    assert run_cli(["explain", "master-identity"]) == EXIT_PASS
    out = capsys.readouterr().out
    assert "master-identity" in out
    assert "emt-onshell" in out


def test_explain_unknown_check(capsys):
    assert run_cli(["explain", "flux-capacitor"]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "master-identity" in err   # lists what exists


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(["--version"])
    assert exc.value.code == 0
