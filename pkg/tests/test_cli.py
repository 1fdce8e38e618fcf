import json
import subprocess
import sys

import numpy as np
import pytest

from dissipationless.cli import OUTPUT_ENV, main
from dissipationless.config import RunConfig
from dissipationless.tables import read_csv, read_json, sha256_file

FAST_DYNAMICS = ["--set", "time.stop=60.0", "--set", "time.num=241"]
COHERENT = ["--set", 'initial_state.kind="coherent"', "--set", "initial_state.amplitudes=[1.0]"]


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_modes_lower_gap(tmp_path):
    code, out = run(tmp_path, "m", "modes", "--preset", "fig2", "--set", "model.omega0=0.5")
    assert code == 0
    rep = read_json(out / "modes.json")
    assert rep["stability"]["stable"]
    lower = [m for m in rep["modes"] if m["gap"][1] <= 0.6 + 1e-12]
    assert len(lower) >= 1
    for m in rep["modes"]:
        assert 0 < m["gamma"] < 1
        assert np.trace(np.array(m["projector"])) == pytest.approx(1.0)
    assert {"critical_couplings", "perturbative", "effective_frequencies"} <= set(rep)


def test_modes_absent_at_band_center(tmp_path):
    code, out = run(tmp_path, "m", "modes", "--preset", "fig2", "--set", "model.omega0=1.0")
    assert code == 0
    rep = read_json(out / "modes.json")
    assert rep["stability"]["stable"] and rep["modes"] == []


def test_unstable_model_exit_2_with_report(tmp_path):
    code, out = run(tmp_path, "u", "modes", "--preset", "fig2",
                    "--set", "model.omega0=0.2", "--set", "model.kappa0=0.3")
    assert code == 2
    rep = read_json(out / "modes.json")
    assert not rep["stability"]["stable"]
    assert rep["stability"]["min_eigenvalue"] < 0
    assert read_json(out / "manifest.json")["exit_code"] == 2
    code, out = run(tmp_path, "d", "dynamics", "--preset", "fig2",
                    "--set", "model.omega0=0.2", "--set", "model.kappa0=0.3")
    assert code == 2 and (out / "modes.json").exists() and not (out / "green.csv").exists()


@pytest.mark.parametrize("text", ['[model]\npreset = "fig2"\nomega0 = "x"\n', "[time\n"])
def test_config_error_writes_nothing(tmp_path, capsys, text):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(text)
    code, out = run(tmp_path, "never", "modes", "--config", str(cfg))
    assert code == 1
    assert not out.exists()
    assert "config error: line" in capsys.readouterr().err


def test_sweep_rejects_explicit_model(tmp_path):
    cfg = tmp_path / "e.toml"
    cfg.write_text('[model]\nkind = "explicit"\nv_matrix = [[1.0]]\n')
    code, out = run(tmp_path, "s", "sweep", "--config", str(cfg))
    assert code == 1 and not out.exists()


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "from_env"))
    assert main(["modes", "--preset", "fig2"]) == 0
    assert (tmp_path / "from_env" / "modes.json").exists()
    assert main(["modes", "--preset", "fig2", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "modes.json").exists()
    monkeypatch.delenv(OUTPUT_ENV)
    assert main(["modes", "--preset", "fig2", "--set", 'output_dir="cfg"']) == 0
    assert (tmp_path / "cfg" / "modes.json").exists()


def test_manifest_contents_and_rerun_is_byte_identical(tmp_path):
    code, out = run(tmp_path, "a", "dynamics", "--preset", "fig2", *FAST_DYNAMICS, *COHERENT)
    assert code == 0
    man = read_json(out / "manifest.json")
    assert man["command"] == "dynamics" and man["exit_code"] == 0
    assert set(man["versions"]) == {"dissipationless", "numpy", "scipy", "python"}
    assert man["tolerances"] == {"green": 1e-10, "oracle": 1e-3}
    for name, digest in man["files"].items():
        assert sha256_file(out / name) == digest
    code, again = run(tmp_path, "b", "--config", str(out / "manifest.json"))
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted(p.name for p in again.iterdir())
    for name in names:
        assert (out / name).read_bytes() == (again / name).read_bytes(), name


def test_dynamics_outputs_parse_losslessly(tmp_path):
    code, out = run(tmp_path, "d", "dynamics", "--preset", "fig2", *FAST_DYNAMICS, *COHERENT)
    assert code == 0
    cfg = RunConfig.from_file(out / "manifest.json")
    t = cfg.time_grid()
    for name in ("green.csv", "moments.csv", "transient.csv"):
        header, data = read_csv(out / name)
        assert data.shape == (t.size, len(header))
        np.testing.assert_array_equal(data[:, 0], t)
        # the 17-digit format survives a second write unchanged
        from dissipationless.tables import write_csv

        write_csv(tmp_path / name, header, data)
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()
    header, mom = read_csv(out / "moments.csv")
    # local vacuum at t = 0: <x²> = 1/(2w) and <x> = sqrt(2/w)·Re α
    w = np.sqrt(cfg.build_model().v_matrix[0, 0])
    assert mom[0, header.index("cov_00")] == pytest.approx(0.5 / w, rel=1e-12)
    assert mom[0, header.index("x_0")] == pytest.approx(np.sqrt(2.0 / w), rel=1e-12)
    assert "cut_nodes" in read_json(out / "summary.json")


def _late_x1(tmp_path, omega0):
    code, out = run(tmp_path, f"w{omega0}", "dynamics", "--preset", "fig2",
                    "--set", f"model.omega0={omega0}", "--set", "time.stop=600.0",
                    "--set", "time.num=1201", *COHERENT)
    assert code == 0
    header, mom = read_csv(out / "moments.csv")
    x1 = mom[:, header.index("x_0")]
    return mom[:, 0], x1


def test_coherent_beating_persists_or_decays(tmp_path):
    t, x1 = _late_x1(tmp_path, 0.5)
    assert np.abs(x1[t >= 500]).max() > 0.05 * abs(x1[0])
    t, x1 = _late_x1(tmp_path, 1.0)
    assert np.abs(x1[t >= 500]).max() < 0.01 * abs(x1[0])


def test_log_grid_emits_tail_fit(tmp_path):
    code, out = run(tmp_path, "l", "dynamics", "--preset", "fig2", "--set", 'time.kind="log"',
                    "--set", "time.start=1.0", "--set", "time.stop=1e4", "--set", "time.num=300")
    assert code == 0
    fit = read_json(out / "summary.json")["tail_fit"]
    assert fit["t_min"] == pytest.approx(100.0)
    assert fit["exponent"] == pytest.approx(-1.5, abs=0.15)


def test_single_point_sweep_matches_modes(tmp_path):
    code, sweep = run(tmp_path, "s", "sweep", "--preset", "fig2",
                      "--set", "sweep.omega0={start=0.5, stop=0.5, num=1}",
                      "--set", "sweep.kappa0={start=0.05, stop=0.05, num=1}")
    assert code == 0
    code, modes = run(tmp_path, "m", "modes", "--preset", "fig2", "--set", "model.omega0=0.5",
                      "--set", "model.kappa0=0.05")
    header, rows = read_csv(sweep / "phase.csv", numeric=False)
    assert len(rows) == 1
    row = dict(zip(header, rows[0]))
    freqs = [float(f) for f in row["frequencies"].split(";")]
    rep = read_json(modes / "modes.json")
    assert freqs == sorted(m["frequency"] for m in rep["modes"])
    assert row["stable"] == "1" and row["error"] == ""
    counts = [int(row[h]) for h in header if h.startswith("modes_gap")]
    assert sum(counts) == len(rep["modes"])
    header, lines = read_csv(sweep / "critical_lines.csv")
    assert lines.shape == (1, len(header))
    assert lines[0, 1] == pytest.approx(rep["stability"]["g_unstable"], rel=1e-12)


def test_sweep_rows_sorted_and_worker_independent(tmp_path):
    grid = ["--set", "sweep.omega0={start=0.3, stop=1.5, num=4}",
            "--set", "sweep.kappa0={start=0.0, stop=0.3, num=3}"]
    code, one = run(tmp_path, "one", "sweep", "--preset", "fig2", *grid)
    code2, two = run(tmp_path, "two", "sweep", "--preset", "fig2", *grid, "--set", "sweep.workers=2")
    assert code == code2 == 0
    assert (one / "phase.csv").read_bytes() == (two / "phase.csv").read_bytes()
    _, rows = read_csv(one / "phase.csv", numeric=False)
    idx = [(int(r[0]), int(r[1])) for r in rows]
    assert idx == sorted(idx) and len(idx) == 12


def test_oracle_diff_pass_and_coarse_step_flagged(tmp_path):
    base = ["oracle-diff", "--preset", "fig2", "--set", "oracle.modes_per_band=300",
            "--set", "oracle.t_max=40.0"]
    code, out = run(tmp_path, "ok", *base)
    assert code == 0
    rep = read_json(out / "oracle_diff.json")
    assert rep["pass"] and all(rep["methods"].values())
    header, data = read_csv(out / "oracle_g11.csv")
    assert header == ["t", "contour", "volterra", "discrete"]
    code, out = run(tmp_path, "coarse", *base, "--set", "oracle.dt=0.8")
    assert code == 0
    rep = read_json(out / "oracle_diff.json")
    assert not rep["pass"]
    assert rep["methods"] == {"contour": True, "discrete": True, "volterra": False}


def test_oracle_diff_free_limit(tmp_path):
    code, out = run(tmp_path, "free", "oracle-diff", "--preset", "fig2", "--set", "model.kappa0=0.0",
                    "--set", "oracle.modes_per_band=50", "--set", "oracle.t_max=20.0",
                    "--set", "tolerances.oracle=1e-10")
    assert code == 0
    rep = read_json(out / "oracle_diff.json")
    assert rep["pass"], rep["pairs"]


def test_preset_command(tmp_path, capsys):
    assert main(["preset", "fig2"]) == 0
    text = capsys.readouterr().out
    assert RunConfig.from_text(text).data == RunConfig.from_text("", preset_name="fig2").data
    assert main(["preset", "nope"]) == 1


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "dissipationless.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("dissipationless ")
    res = subprocess.run([sys.executable, "-m", "dissipationless.cli", "modes", "--preset", "fig2",
                          "--out", str(tmp_path / "sub")], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads((tmp_path / "sub" / "modes.json").read_text())["modes"]


def test_output_path_that_is_a_file_is_rejected(tmp_path):
    target = tmp_path / "taken"
    target.write_text("x")
    assert main(["modes", "--preset", "fig2", "--out", str(target)]) == 1
    assert target.read_text() == "x"
