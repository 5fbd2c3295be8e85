import csv
import json

import numpy as np
import pytest

from licsim.cli import main
from licsim.config import CONFIG_DIR_ENV
from licsim.curves import write_curve
from licsim.kinetics import SUPP_HEURISTIC, Environment, simulate


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate(tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--t-end", "100", "--dt", "10", "-o", str(out)]) == 0
    r = rows(out)
    assert list(r[0]) == ["t_s", "volume", "N_S", "fluorescence_Mcts_s"]
    assert len(r) == 11 and float(r[-1]["t_s"]) == 100.0


def test_simulate_config_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"t_end": 50, "dt": 5}))
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", str(cfg), "--dt", "25", "-o", str(out)]) == 0
    assert [float(x["t_s"]) for x in rows(out)] == [0.0, 25.0, 50.0]


def test_params_from_config_dir(tmp_path, monkeypatch):
    (tmp_path / "fast.json").write_text(json.dumps({"base": "supp-heuristic", "k_B_prime": 0.01}))
    monkeypatch.setenv(CONFIG_DIR_ENV, str(tmp_path))
    out = tmp_path / "t.csv"
    assert main(["simulate", "--params", "fast", "--t-end", "20", "-o", str(out)]) == 0


@pytest.mark.parametrize("argv", [
    ["simulate", "--dt", "0"],
    ["simulate", "--dt", "-1"],
    ["simulate", "--p-o2", "-1"],
    ["simulate", "--params", "no-such-preset"],
    ["gillespie-check", "--tolerance", "0"],
    ["gillespie-check", "--n-s0", "20000"],
    ["sweep", "--pressures", "-1", "1"],
])
def test_validation_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_argparse_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--dt", "abc"])
    assert exc.value.code == 2


def test_sweep_default(tmp_path):
    out, js = tmp_path / "s.csv", tmp_path / "s.json"
    assert main(["sweep", "-o", str(out), "--json", str(js)]) == 0
    r = rows(out)
    assert len(r) == 26
    assert any(float(x["P_O2"]) == 4.6e-3 for x in r)
    labels = [x["regime"] for x in r]
    assert {"I", "II", "III"} <= set(labels) and labels[-1] == "III"
    assert len(json.loads(js.read_text())["points"]) == 26


def test_sweep_single_pressure(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--pressures", "4.6e-3", "-o", str(out)]) == 0
    r = rows(out)
    assert len(r) == 1 and r[0]["regime"] == ""


def _raw(dirpath, name, p, slope, t_end=13200.0, cadence=110.0):
    t = np.arange(0.0, t_end + 1, cadence)
    y = 0.5 + slope * np.maximum(0, t - 1800.0)
    with open(dirpath / f"{name}.csv", "w") as fh:
        fh.write("t_s,fluorescence_Mcts_s\n")
        for a, b in zip(t, y):
            fh.write(f"{a},{b}\n")
    (dirpath / f"{name}.json").write_text(json.dumps({"pillar_id": name, "P_O2_mbar": p, "laser_power_mW": 1.48}))


def test_analyze_directory(tmp_path):
    raw = tmp_path / "raw"
    raw.mkdir()
    for i, (p, s) in enumerate([(1e-4, 1e-4), (1e-4, 1.2e-4), (1e-3, 3e-4), (1e-2, 1e-4), (1.0, 0.0)]):
        _raw(raw, f"p{i}", p, s)
    out = tmp_path / "out"
    assert main(["analyze", str(raw), "--out-dir", str(out)]) == 0
    avg = rows(out / "averaged.csv")
    assert [int(a["n"]) for a in avg] == [2, 1, 1, 1]
    assert float(avg[0]["ci68_halfwidth_Mcts_s"]) > 0
    assert (out / "reduced" / "p0.csv").exists()
    regimes = rows(out / "regimes.csv")
    assert regimes[-1]["regime"] == "III"
    assert json.loads((out / "regimes.json").read_text())["peak_pressure"] == 1e-3


def test_analyze_empty_and_malformed(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["analyze", str(empty), "--out-dir", str(tmp_path / "o")]) == 2
    (empty / "bad.csv").write_text("t_s,fluorescence_Mcts_s\n0,1\n10,x\n")
    (empty / "bad.json").write_text(json.dumps({"P_O2_mbar": 1e-3, "laser_power_mW": 1.48}))
    assert main(["analyze", str(empty), "--out-dir", str(tmp_path / "o")]) == 3
    assert "bad.csv:3" in capsys.readouterr().err


def test_fit_round_trip(tmp_path):
    for i, p in enumerate([1e-3, 0.3]):
        tr = simulate(SUPP_HEURISTIC, Environment(P_O2=p), None, 3600.0, 10.0)
        write_curve(tmp_path / f"c{i}.csv", tr.fluorescence_curve())
        (tmp_path / f"c{i}.json").write_text(json.dumps({"P_O2_mbar": p, "laser_power_mW": 1.48}))
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"base": "supp-heuristic", "free": {"k_B_prime": [1e-4, 1e-2]},
                                "grid_points": 20}))
    out, res = tmp_path / "fit.json", tmp_path / "res.csv"
    argv = ["fit", str(tmp_path / "c0.csv"), str(tmp_path / "c1.csv"), "--spec", str(spec),
            "-o", str(out), "--residuals", str(res)]
    assert main(argv) == 0
    k = json.loads(out.read_text())["params"]["k_B_prime"]
    assert k == pytest.approx(SUPP_HEURISTIC.k_B_prime, rel=1e-6)
    assert rows(res)[0].keys() == {"curve", "P_O2", "t_s", "residual"}


def test_fit_infeasible_spec(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"free": {"K_O2": [1, 10]}, "constraints": {"rho": 100}}))
    assert main(["fit", "--spec", str(spec)]) == 2


def test_volume(tmp_path):
    dims = tmp_path / "dims.csv"
    dims.write_text("pillar_id,h_um,w_um,d_um,fluorescence_Mcts_s\n"
                    "a,1,2,2,100\nb,0.5,1,1,20\nc,0.8,1.5,1.7,55\n")
    out, cal = tmp_path / "v.csv", tmp_path / "cal.json"
    assert main(["volume", "--dims", str(dims), "-o", str(out), "--calibration-out", str(cal),
                 "--rescale-to", "1.48"]) == 0
    r = rows(out)
    assert float(r[0]["spherical_cap_um3"]) == pytest.approx(2.0943951023931953)
    doc = json.loads(cal.read_text())
    assert doc["reference_power_mW"] == 1.48 and doc["n_points"] == 3


def test_volume_singular_exit_3(tmp_path):
    dims = tmp_path / "dims.csv"
    dims.write_text("pillar_id,h_um,w_um,d_um,fluorescence_Mcts_s\na,1,2,2,100\nb,0.5,1,1,100\n")
    assert main(["volume", "--dims", str(dims), "-o", str(tmp_path / "v.csv"),
                 "--calibration-out", str(tmp_path / "c.json")]) == 3


def test_gillespie_check_pass_and_fail(capsys):
    assert main(["gillespie-check", "--runs", "300"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["gillespie-check", "--runs", "300", "--dt", "25"]) == 1
    assert "FAIL" in capsys.readouterr().out
