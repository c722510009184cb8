import json
import subprocess
import sys

import numpy as np
import pytest

from plexsim.cli import main
from plexsim.dynamics import PopulationTrace
from plexsim.mode_table import thz_to_radfs


def write_config(path, modes, mu=10.0, lossless=False, samples=2048, t_max=200.0):
    doc = {"emitter": {"omega_thz": 300.0, "mu_debye": mu},
           "modes": [{"label": [i + 1, 0], "omega_thz": w, "kappa_thz": k, "g_per_debye_thz": g}
                     for i, (w, k, g) in enumerate(modes)],
           "lossless": lossless, "time": {"t_max_fs": t_max, "samples": samples}}
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def rabi(tmp_path):
    return write_config(tmp_path / "rabi.json", [(300.0, 0.0, 2.0)], lossless=True)


@pytest.fixture
def two_mode(tmp_path):
    return write_config(tmp_path / "two.json", [(360.0, 4.0, 2.0), (210.0, 6.0, 3.0)])


def test_simulate_rabi_trace(rabi, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", str(rabi), "--path", "analytic", "--out", str(out)]) == 0
    tr = PopulationTrace.read_csv(out / "population.csv")
    g = thz_to_radfs(20.0)
    np.testing.assert_allclose(tr.values, np.cos(g * tr.times) ** 2, atol=1e-12)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert {o["file"] for o in manifest["outputs"]} == {"population.csv", "decomposition.json", "components.json"}
    assert json.loads((out / "components.json").read_text())["manifest"] == "manifest.json"


def test_simulate_verify_passes(two_mode, tmp_path):
    assert main(["simulate", str(two_mode), "--path", "lindblad", "--verify", "--out", str(tmp_path / "v")]) == 0
    manifest = json.loads((tmp_path / "v" / "manifest.json").read_text())
    assert manifest["verify"]["passed"] and manifest["verify"]["against"] == "schrodinger"


def test_analytic_on_lossy_config_fails(two_mode, tmp_path, capsys):
    assert main(["simulate", str(two_mode), "--path", "analytic", "--out", str(tmp_path / "x")]) == 1
    assert "analytic path requires lossless" in capsys.readouterr().err


def test_validate(rabi, tmp_path, capsys):
    assert main(["validate", str(rabi)]) == 0
    assert "regime: I" in capsys.readouterr().out
    bad = write_config(tmp_path / "bad.json", [(310.0, 1.0, 1.0), (310.0, 1.0, 1.0)])
    assert main(["validate", str(bad)]) == 1
    assert "degenerate detunings" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.json")]) == 1


def test_spectrum_rabi_single_peak(rabi, tmp_path):
    out = tmp_path / "spec"
    assert main(["spectrum", str(rabi), "--out", str(out), "--verify"]) == 0
    peaks = json.loads((out / "peaks_lmax1.json").read_text())["peaks"]
    assert len(peaks) == 1
    assert peaks[0]["frequency"] == pytest.approx(2 * thz_to_radfs(20.0), abs=2 * np.pi / 200)


def test_spectrum_two_mode_three_peaks(tmp_path):
    cfg = write_config(tmp_path / "c.json", [(360.0, 0.0, 2.0), (210.0, 0.0, 3.0)], lossless=True, samples=8192)
    out = tmp_path / "s"
    assert main(["spectrum", str(cfg), "--threshold", "0.01", "--l-max", "1", "2", "--out", str(out),
                 "--verify"]) == 0
    assert len(json.loads((out / "peaks_lmax2.json").read_text())["peaks"]) == 3
    assert len(json.loads((out / "peaks_lmax1.json").read_text())["peaks"]) == 1


def test_spectrum_from_trace(rabi, tmp_path):
    main(["simulate", str(rabi), "--path", "analytic", "--out", str(tmp_path / "a")])
    out = tmp_path / "b"
    assert main(["spectrum", "--trace", str(tmp_path / "a" / "population.csv"), "--out", str(out)]) == 0
    assert (out / "spectrum.csv").read_text().startswith("omega_rad_per_fs,freq_thz,magnitude\n")


def test_spectrum_needs_input(tmp_path):
    assert main(["spectrum", "--out", str(tmp_path)]) == 1


def test_sweep_outputs_and_determinism(two_mode, tmp_path):
    args = ["sweep", str(two_mode), "--mu-min", "5", "--mu-max", "40", "--mu-steps", "4", "--lossless"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    for name in ("sweep.csv", "sweep_peaks.json", "heatmap.csv", "critical.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "sweep.csv").read_text().splitlines()[0] == "mu_debye,dominant_freq_thz,regime,peak_count"
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert len(manifest["outputs"]) == 4 and manifest["solver"]["path"] == "analytic"


def test_sweep_rejects_bad_grid(two_mode, tmp_path):
    assert main(["sweep", str(two_mode), "--mu-min", "-1", "--mu-max", "4", "--mu-steps", "3",
                 "--out", str(tmp_path)]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "plexsim", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "plexsim" in res.stdout


def test_ladder_validate_and_sweeps(tmp_path, capsys):
    from plexsim.mode_table import synthetic_ladder_path

    ladder = str(synthetic_ladder_path())
    assert main(["validate", ladder]) == 0
    assert "regime: III" in capsys.readouterr().out
    crit = {}
    for tag, extra in (("lossless", ["--lossless"]), ("lossy", [])):
        out = tmp_path / tag
        assert main(["sweep", ladder, "--mu-min", "5", "--mu-max", "80", "--mu-steps", "31", "--out", str(out)]
                    + extra) == 0
        crit[tag] = json.loads((out / "critical.json").read_text())
    assert crit["lossless"]["bracket_debye"][1] == crit["lossless"]["mu_c_debye"]
    assert crit["lossy"]["mu_c_debye"] > crit["lossless"]["mu_c_debye"]


def test_ladder_simulate_verify(tmp_path):
    from plexsim.mode_table import synthetic_ladder_path

    doc = json.loads(synthetic_ladder_path().read_text())
    doc["lossless"] = True
    cfg = tmp_path / "ll.json"
    cfg.write_text(json.dumps(doc))
    assert main(["simulate", str(cfg), "--path", "analytic", "--verify", "--out", str(tmp_path / "o")]) == 0
    assert main(["spectrum", str(cfg), "--l-max", "1", "5", "9", "--verify", "--out", str(tmp_path / "s")]) == 0


def test_exit_codes_for_solver_and_verify_failures(two_mode, tmp_path, monkeypatch):
    import plexsim.cli as cli
    from plexsim.dynamics import SolverError

    real = cli.simulate

    def skewed(config, path, tol):
        tr = real(config, path, tol)
        if path == "schrodinger":
            return PopulationTrace(tr.times, tr.values * 0.999, tr.metadata)
        return tr

    monkeypatch.setattr(cli, "simulate", skewed)
    assert main(["simulate", str(two_mode), "--path", "lindblad", "--verify", "--out", str(tmp_path / "a")]) == 3

    def broken(*_args, **_kw):
        raise SolverError("step size underflow", 3.0)

    monkeypatch.setattr(cli, "simulate", broken)
    assert main(["simulate", str(two_mode), "--out", str(tmp_path / "b")]) == 2
