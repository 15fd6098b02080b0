import json
import subprocess
import sys
import textwrap

import pytest

import oracles
from lelong_lab import acceptance, cli


def _light(cfg, **over):
    cfg = json.loads(json.dumps(cfg))
    cfg["schedule"]["radii"]["count"] = 4
    cfg["quadrature"] = {"method": "tensor", "radial": 10, "simplex": 4, "torus": 6, "base_radial": 6,
                         "base_angular": 8}
    cfg.update(over)
    return cfg


@pytest.fixture(scope="module")
def bundled():
    return cli.load_bundled("alpha_power_top")


@pytest.fixture(scope="module")
def first_run(tmp_path_factory, bundled):
    out = tmp_path_factory.mktemp("run_a")
    code = cli.main(["run", "alpha_power_top", "--out", str(out)])
    return code, out


def test_bundled_run_passes_and_matches_oracle(first_run):
    code, out = first_run
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"]
    nu1 = summary["results"]["nu_1"]
    assert abs(nu1["limit"] - oracles.nu_alpha_top(3, 1, 1, 1)) <= 0.16
    lines = (out / "results.csv").read_bytes().split(b"\r\n")
    assert lines[0] == b"task,indicator,j,param,value,error,label"
    assert (out / "plotdata").is_dir()


def test_reruns_are_byte_identical(first_run, tmp_path):
    _, out = first_run
    assert cli.main(["run", "alpha_power_top", "--out", str(tmp_path)]) == 0
    for name in ("results.csv", "summary.json"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()


def test_summary_config_round_trip(first_run, tmp_path):
    _, out = first_run
    summary = json.loads((out / "summary.json").read_text())
    cfg_path = tmp_path / "again.json"
    cfg_path.write_text(json.dumps(summary["config"]))
    assert cli.main(["run", str(cfg_path), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "results.csv").read_bytes() == (out / "results.csv").read_bytes()


def test_unknown_kind_is_schema_error(bundled, tmp_path, capsys):
    cfg = json.loads(json.dumps(bundled))
    cfg["current"]["kind"] = "bogus"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "current.kind" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_field_is_schema_error(bundled):
    cfg = json.loads(json.dumps(bundled))
    del cfg["setting"]
    assert cli.run_config(cfg, echo=lambda m: None, err=lambda m: None) == 2


def test_dry_run_writes_nothing(tmp_path, capsys):
    assert cli.main(["run", "alpha_power_top", "--dry-run", "--out", str(tmp_path / "o")]) == 0
    plan = json.loads(capsys.readouterr().out)
    assert plan["task"] == "lelong"
    assert not (tmp_path / "o").exists()


def test_failed_assertion_exits_one(bundled, tmp_path):
    cfg = _light(bundled)
    cfg["assertions"] = [{"name": "wrong", "path": "nu_1", "op": "within_error", "value": 7.0, "abs_tol": 0.01}]
    errors = []
    code = cli.run_config(cfg, tmp_path, echo=lambda m: None, err=errors.append)
    assert code == 1
    assert any("assertion failed: wrong" in e for e in errors)
    assert not json.loads((tmp_path / "summary.json").read_text())["passed"]


def test_thread_precedence(monkeypatch):
    monkeypatch.delenv("LELONG_LAB_THREADS", raising=False)
    assert cli.resolve_threads(3) == 3
    assert cli.resolve_threads(None) is None
    monkeypatch.setenv("LELONG_LAB_THREADS", "5")
    assert cli.resolve_threads(3) == 5


def test_threads_do_not_change_results(bundled, tmp_path):
    cfg = _light(bundled)
    cli.run_config(cfg, tmp_path / "one", threads=1, echo=lambda m: None)
    cli.run_config(cfg, tmp_path / "four", threads=4, echo=lambda m: None)
    assert (tmp_path / "one" / "results.csv").read_bytes() == (tmp_path / "four" / "results.csv").read_bytes()


def test_only_selects_jensen_rows():
    assert [r.number for r in acceptance.select(["jensen"])] == [8, 9]
    assert [r.number for r in acceptance.select(["3"])] == [3]


def test_verify_with_no_matching_rows(capsys):
    assert cli.main(["verify", "--only", "no-such-tag"]) == 1
    assert "no acceptance rows match" in capsys.readouterr().err


def test_dc_sign_mutation_is_caught():
    # flipping the sign of dc must break the normalisation check and the Jensen row
    script = textwrap.dedent("""
        import json
        from lelong_lab import forms
        orig = forms.Form.dc
        forms.Form.dc = lambda self: orig(self) * -1
        from lelong_lab import acceptance as A
        ok, detail = A.property_suites(trials=4)
        row = A.run_row(A.ROWS[7])
        print(json.dumps({"suite": ok, "leibniz": detail["leibniz"], "jensen": row.passed}))
    """)
    out = subprocess.run([sys.executable, "-c", script], capture_output=True, text=True, check=True)
    res = json.loads(out.stdout.strip().splitlines()[-1])
    assert res["suite"] is False
    assert res["jensen"] is False
    # the Leibniz rule alone is blind to the sign: -dc is still a derivation
    assert res["leibniz"] <= 1e-12
