import csv
import json

import numpy as np
import pytest

from diracnls import cli
from diracnls.cli import ConfigError, parse_config, run_scenario

SMALL = {"n": 256, "half_width": 32.0, "steps": 200, "t_end": 20.0, "width": 2.0}


def small(scenario="critical-defocusing", tmp=None, **kw):
    over = dict(SMALL, scenario=scenario, **kw)
    if tmp is not None:
        over["out"] = str(tmp)
    return parse_config("", over)


# --- parsing -------------------------------------------------------------------------

def test_defaults_from_scenario_flag():
    cfg = parse_config("", {"scenario": "critical-defocusing"})
    assert (cfg.n, cfg.half_width, cfg.t_end, cfg.steps) == (2048, 256.0, 1000.0, 2500)
    assert cfg.sign == "defocusing" and cfg.profile == "gaussian"


def test_file_values_and_flag_override():
    text = "# comment\nscenario = gp\nsteps = 100   # inline comment\n\namp = 0.02\n"
    cfg = parse_config(text, {"steps": 50})
    assert cfg.scenario == "gp" and cfg.steps == 50 and cfg.amp == 0.02


def test_subcritical_rejects_critical_alpha():
    with pytest.raises(ConfigError, match="alpha"):
        parse_config("scenario = subcritical-conformal\nalpha = 2\n")


def test_duplicate_key_reports_both_lines():
    with pytest.raises(ConfigError, match=r"line 3.*line 1"):
        parse_config("n = 64\nscenario = gp\nn = 128\n")


@pytest.mark.parametrize("text, pattern", [
    ("scenario = gp\nbogus = 1\n", "line 2: unknown key"),
    ("scenario = gp\njust words\n", "line 2: expected"),
    ("scenario = gp\nn = many\n", "line 2: cannot parse"),
    ("scenario = nowhere\n", "scenario must be one of"),
    ("scenario = gp\nn = 100\n", "power of two"),
    ("n = 64\n", "no scenario"),
    ("scenario = gp\na_mod = 2\n", "gross_pitaevskii"),
])
def test_config_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(text)


# --- runs ------------------------------------------------------------------------------

def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_zero_perturbation_run(tmp_path):
    m = run_scenario(small(tmp=tmp_path, profile="zero"))
    assert m.passed and m.exit_code == 0
    header, data = read_csv(tmp_path / "diagnostics.csv")
    assert tuple(header) == cli.diagnostics.CSV_HEADER
    assert np.all(data[:, 2:] == 0)


def test_gp_trivial_run(tmp_path):
    m = run_scenario(small("gp", tmp=tmp_path, profile="zero", t_start=0.0, t_end=1.0))
    assert m.passed and m.terminal["energy"] == 0


def test_csv_rows_satisfy_energy_identity(tmp_path):
    run_scenario(small(tmp=tmp_path, amp=0.2))
    _, data = read_csv(tmp_path / "diagnostics.csv")
    t, grad, pot, energy = data[:, 1], data[:, 3], data[:, 4], data[:, 5]
    assert np.allclose(energy, grad / 2 + pot / (4 * t), rtol=1e-12, atol=0)


def test_identical_configs_give_identical_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        run_scenario(small(tmp=out, amp=0.2, out=str(out), snapshots=4))
    for name in ("diagnostics.csv", "manifest.json"):
        assert (a / name).read_bytes().replace(b"/a", b"/b") == (b / name).read_bytes()
    assert (a / "timing.json").exists()


def test_fault_injection_trips_gradient_bound(tmp_path):
    cfg = small(tmp=tmp_path, amp=0.3, steps=400, t_end=100.0, half_width=64.0, n=512,
                inject_sign_fault=True)
    m = run_scenario(cfg)
    assert not m.passed and m.exit_code == cli.EXIT_CHECK_FAILED
    assert not m.checks["grad"]["passed"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["passed"] is False and manifest["exit_code"] == 1


def test_json_format_and_snapshots(tmp_path):
    m = run_scenario(small(tmp=tmp_path, format="json", snapshots=5))
    rows = json.loads((tmp_path / "diagnostics.json").read_text())
    assert set(rows[0]) == set(cli.diagnostics.CSV_HEADER)
    snaps = np.load(tmp_path / "snapshots.npz")
    assert snaps["values"].shape[0] <= 5 and m.passed


def test_boundary_requirement(tmp_path):
    with pytest.raises(ConfigError, match="boundary"):
        run_scenario(small(tmp=tmp_path, width=20.0))


def test_subcritical_and_direct_scenarios(tmp_path):
    m = run_scenario(small("subcritical-conformal", tmp=tmp_path / "s", alpha=1.0, t_end=64.0,
                           steps=300, half_width=64.0, n=512))
    assert m.passed and "cauchy_tail_decreasing" in m.checks
    m = run_scenario(small("subcritical-direct", tmp=tmp_path / "d", alpha=1.0, t_end=1.5, steps=200))
    assert m.passed and "mass_law" in m.checks


def test_random_profile_depends_on_seed(tmp_path):
    g = cli.SpatialGrid(256, 32.0)
    a = cli.initial_profile(small(profile="random", seed=1), g)
    b = cli.initial_profile(small(profile="random", seed=1), g)
    c = cli.initial_profile(small(profile="random", seed=2), g)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_filament_scenario(tmp_path):
    m = run_scenario(parse_config("", {"scenario": "filament-corner", "out": str(tmp_path), "c0": 0.5}))
    assert m.passed
    curves = sorted((tmp_path / "curves").glob("*.txt"))
    assert len(curves) == 3 and np.loadtxt(curves[0]).shape[1] == 3


# --- command line --------------------------------------------------------------------------

def test_main_exit_codes(tmp_path, capsys):
    base = ["--n", "128", "--half-width", "32", "--steps", "50", "--t-end", "5", "--width", "2"]
    assert cli.main(["--scenario", "critical-defocusing", "--out", str(tmp_path / "ok"), *base]) == 0
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("scenario = gp\nn = 64\nn = 64\n")
    assert cli.main(["--config", str(cfg)]) == cli.EXIT_CONFIG
    assert cli.main(["--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["--scenario", "critical-defocusing", "--out", str(blocker / "x"), *base]) == cli.EXIT_IO
    fault = tmp_path / "fault.cfg"
    fault.write_text("inject_sign_fault = yes\namp = 0.3\n")
    code = cli.main(["--config", str(fault), "--scenario", "critical-defocusing", "--out",
                     str(tmp_path / "f"), "--n", "512", "--half-width", "64", "--steps", "400",
                     "--t-end", "100", "--width", "2"])
    assert code == cli.EXIT_CHECK_FAILED


def test_blowup_exit_code(tmp_path, monkeypatch):
    real = cli.integrate

    def exploding(*args, **kwargs):
        traj = real(*args, **kwargs)
        traj.blowup = True
        return traj

    monkeypatch.setattr(cli, "integrate", exploding)
    m = run_scenario(small("gp", tmp=tmp_path, t_start=0.0, t_end=1.0))
    assert m.exit_code == cli.EXIT_BLOWUP and not m.passed


def test_sweep(tmp_path):
    args = ["--scenario", "critical-defocusing", "--out", str(tmp_path), "--n", "128", "--half-width",
            "32", "--steps", "40", "--t-end", "4", "--width", "2", "--sweep", "amp=0.0,0.1"]
    assert cli.main(args) == 0
    assert (tmp_path / "amp=0.0" / "manifest.json").exists()
    assert (tmp_path / "amp=0.1" / "manifest.json").exists()
