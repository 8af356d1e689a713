import hashlib
import json

import numpy as np
import pytest

from chill_lab import cli, suite, toda
from chill_lab.errors import RangeViolation, TypeMismatch, UnknownKey


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def manifest(out, sub):
    return json.loads((out / sub / "manifest.json").read_text())


SHORT_SIM = ["--t-end", "200", "--N", "601", "--set", "solver.n_snapshots=100",
             "--set", "simulate.cross_time=50"]


# ---------------------------------------------------------------------------
# configuration

def test_empty_file_gives_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.ENV_OUT, raising=False)
    cfg = cli.parse_config(write_cfg(tmp_path, "# nothing\n\n"))
    for key, (_, default, _) in cli.SCHEMA.items():
        if key != "out":
            assert cfg[key] == default
    assert cfg["out"] == cli.DEFAULT_OUT
    assert cfg.tolerance("gap_slope") == suite.TOLERANCES["gap_slope"][0]


def test_out_from_environment(monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT, "/tmp/somewhere")
    assert str(cli.parse_config().out) == "/tmp/somewhere"


@pytest.mark.parametrize("text,err", [
    ("k = 0", RangeViolation),
    ("k = 1", RangeViolation),
    ("k = two", TypeMismatch),
    ("grid.N = 10", RangeViolation),
    ("ansatz.sigma = 2.0", RangeViolation),
    ("solver.nope = 1", UnknownKey),
    ("tol.no_such_check = 1", UnknownKey),
    ("t_end = 5", RangeViolation),
])
def test_invalid_values(tmp_path, text, err):
    with pytest.raises(err):
        cli.parse_config(write_cfg(tmp_path, text))


def test_k1_behind_test_flag(tmp_path):
    cfg = cli.parse_config(write_cfg(tmp_path, "k = 1\ntest.allow_k1 = yes\n"))
    assert cfg.k == 1


def test_flags_override_file(tmp_path):
    path = write_cfg(tmp_path, "t_end = 300\nk = 3\n")
    cfg = cli.parse_config(path, {"t_end": "400"})
    assert cfg["t_end"] == 400.0 and cfg.k == 3


def test_tolerance_override_and_scale(tmp_path):
    cfg = cli.parse_config(write_cfg(tmp_path, "tol.gap_slope = 0.2\ntol_scale = 0.5\n"))
    assert cfg.tolerance("gap_slope") == pytest.approx(0.1)
    assert cfg.tolerance("toda_final") == pytest.approx(0.5e-6)


def test_config_echo_is_json(tmp_path):
    cfg = cli.parse_config(None, {"ansatz.times": "100, 1000"})
    echoed = json.loads(json.dumps(cfg.echo()))
    assert echoed["ansatz.times"] == [100.0, 1000.0]


def test_bad_line_is_config_error(tmp_path):
    path = write_cfg(tmp_path, "just words\n")
    assert cli.main(["verify", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


@pytest.mark.parametrize("argv", [["verify", "--k", "0"], ["verify", "--set", "bogus=1"],
                                  ["verify", "--set", "novalue"], ["frobnicate"]])
def test_usage_errors_exit_2(tmp_path, argv):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv[0] == "verify" else argv) == 2


# ---------------------------------------------------------------------------
# verify

@pytest.fixture(scope="module")
def verify_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    code = cli.main(["verify", "--out", str(out)])
    return out, code


def test_verify_passes(verify_out, capsys):
    out, code = verify_out
    assert code == cli.EXIT_OK
    man = manifest(out, "verify")
    assert man["all_passed"]
    assert [c["name"] for c in man["checks"]] == list(suite.VERIFY_CHECKS)


def test_manifest_checksums(verify_out):
    out, _ = verify_out
    man = manifest(out, "verify")
    assert man["files"]
    for f in man["files"]:
        data = (out / "verify" / f["name"]).read_bytes()
        assert len(data) == f["size"]
        assert hashlib.sha256(data).hexdigest() == f["sha256"]
    assert man["config"]["k"] == 2
    assert man["version"] == cli.__version__


def test_verify_parallel_matches_serial(verify_out, tmp_path):
    out, _ = verify_out
    assert cli.main(["verify", "--out", str(tmp_path), "--jobs", "4"]) == 0
    a = {f["name"]: f["sha256"] for f in manifest(out, "verify")["files"]}
    b = {f["name"]: f["sha256"] for f in manifest(tmp_path, "verify")["files"]}
    assert a == b


def test_toda_coefficient_mutation_is_caught(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(toda, "TODA_COEFFICIENT", 383.0)
    code = cli.main(["verify", "--out", str(tmp_path)])
    assert code == cli.EXIT_CHECK
    failed = {c["name"] for c in manifest(tmp_path, "verify")["checks"] if not c["passed"]}
    assert "toda_residual" in failed
    assert "FAIL toda_residual" in capsys.readouterr().out


def test_tight_tolerances_fail_some_checks(tmp_path, capsys):
    code = cli.main(["verify", "--out", str(tmp_path), "--tol-scale", "0.01"])
    assert code == cli.EXIT_CHECK
    checks = manifest(tmp_path, "verify")["checks"]
    failed = [c["name"] for c in checks if not c["passed"]]
    assert 0 < len(failed) < len(checks)
    lines = capsys.readouterr().out.splitlines()
    assert sum(l.startswith("FAIL ") for l in lines) == len(failed)


# ---------------------------------------------------------------------------
# other subcommands

def test_toda_subcommand(tmp_path):
    code = cli.main(["toda", "--out", str(tmp_path), "--t-end", "1000"])
    assert code == cli.EXIT_OK
    d = tmp_path / "toda"
    ch = np.loadtxt(d / "toda_ch.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(ch[-1, 1:] - toda.explicit_solution(2, 1000.0))) <= 1e-6
    assert (d / "toda_ac.csv").exists()
    assert {c["name"] for c in manifest(tmp_path, "toda")["checks"]} == {"toda_final", "ch_ac_ratio"}


def test_runtime_error_leaves_no_partial_output(tmp_path, capsys):
    code = cli.main(["simulate", "--out", str(tmp_path), "--L", "10"])
    assert code == cli.EXIT_RUNTIME
    assert "DomainTooSmall" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_failed_run_keeps_previous_output(tmp_path):
    assert cli.main(["toda", "--out", str(tmp_path), "--t-end", "200"]) == 0
    before = (tmp_path / "toda" / "manifest.json").read_text()
    assert cli.main(["toda", "--out", str(tmp_path), "--set", "toda.n_samples=1"]) == 2
    assert (tmp_path / "toda" / "manifest.json").read_text() == before


@pytest.fixture(scope="module")
def sim_runs(tmp_path_factory):
    outs = []
    for name in ("a", "b"):
        out = tmp_path_factory.mktemp(f"sim_{name}")
        outs.append((out, cli.main(["simulate", "--out", str(out)] + SHORT_SIM)))
    return outs


def test_simulate_outputs(sim_runs):
    (out, code), _ = sim_runs
    d = out / "simulate"
    names = {c["name"]: c for c in manifest(out, "simulate")["checks"]}
    assert set(names) == {"energy_monotone", "interface_count", "gap_slope", "toda_cross"}
    assert names["energy_monotone"]["passed"] and names["interface_count"]["passed"]
    assert names["toda_cross"]["passed"]
    assert code in (cli.EXIT_OK, cli.EXIT_CHECK)
    snaps = sorted((d / "snapshots").iterdir())
    assert len(snaps) >= 100
    assert snaps[0].read_text().splitlines()[0] == "x,u"
    assert (d / "energy.csv").read_text().startswith("t,energy,dissipation")
    fit = json.loads((d / "fit.json").read_text())
    assert fit["window"] == [100.0, 200.0]
    assert len(fit["interfaces"]) == 2


def test_simulate_is_deterministic(sim_runs):
    (a, _), (b, _) = sim_runs
    fa = {f["name"]: f["sha256"] for f in manifest(a, "simulate")["files"]}
    fb = {f["name"]: f["sha256"] for f in manifest(b, "simulate")["files"]}
    assert fa == fb


def test_report_reproduces_fit(sim_runs):
    (out, _), _ = sim_runs
    cli.main(["report", "--out", str(out), "--t-end", "200"])
    assert (out / "report" / "fit.json").read_bytes() == (out / "simulate" / "fit.json").read_bytes()


def test_report_without_track_is_runtime_error(tmp_path):
    assert cli.main(["report", "--out", str(tmp_path)]) == cli.EXIT_RUNTIME
