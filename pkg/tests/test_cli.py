import json
import logging

import numpy as np
import pytest

from adsdyn.atlas import BoundaryTriple
from adsdyn.cli import ConfigError, load_config, main, replay, write_state_csv
from adsdyn.fields import sample

FAST = ["--n", "400", "--L", "20", "--T", "0.5", "--sample-every", "5"]


def run_json(capsys, argv):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


def test_check_alpha(capsys):
    out = run_json(capsys, ["check-alpha", "--alpha=-1,1,0"])
    assert out["admissible"] is True
    assert out["branch"] == "zero_a2" and out["positivity"] == "graviton_only"


def test_spectrum_printed(capsys):
    out = run_json(capsys, ["spectrum", "--alpha=-3,0,-1", "--variant", "printed"])
    ev = sorted(out["eigenvalues"], reverse=True)
    assert out["count"] == 2
    assert ev[0] == pytest.approx(-2.51, abs=0.01) and ev[1] == pytest.approx(-403.4, abs=0.1)


def test_derive_params_round_trip(capsys):
    out = run_json(capsys, ["derive-params", "--alpha=-1,1,0"])
    assert np.allclose(out["round_trip"], [-1, 1, 0], atol=1e-8)


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["evolve", "--out", str(tmp_path / "o")] + FAST) == 2
    assert main(["evolve", "--alpha=-1,1,0", "--bogus"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["check-alpha", "--alpha=1,2"]) == 2
    assert main(["graviton", "--alpha=-3,0,-1", "--out", str(tmp_path / "g")] + FAST) == 2


def test_numeric_error_exit_3(tmp_path):
    argv = ["evolve", "--alpha=0,0.05,0", "--closure", "explicit", "--out", str(tmp_path)] + FAST
    assert main(argv) == 3


def test_load_config(tmp_path, caplog):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\ngrid.n = 2000\nalpha=-1,1,0\nm=0.5  # mass\nm=0.7\n")
    with caplog.at_level(logging.WARNING, logger="adsdyn"):
        cfg = load_config(p)
    assert cfg["n"] == 2000 and cfg["alpha"] == BoundaryTriple(-1, 1, 0) and cfg["m"] == 0.7
    assert "duplicate" in caplog.text
    p.write_text("grid.n=10\nthis is wrong\n")
    with pytest.raises(ConfigError, match=":2:"):
        load_config(p)
    p.write_text("colour=red\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(p)
    p.write_text("grid.n=ten\n")
    with pytest.raises(ConfigError, match=":1:"):
        load_config(p)


def test_flags_override_config(tmp_path):
    cfgf = tmp_path / "run.cfg"
    cfgf.write_text("alpha=-1,1,0\ngrid.n=400\nT=0.5\nm=3\n")
    out = tmp_path / "o"
    assert main(["evolve", "--config", str(cfgf), "--m", "0.25", "--sample-every", "5",
                 "--out", str(out)]) == 0
    man = json.loads((out / "run.json").read_text())
    assert man["parameters"]["m"] == 0.25 and man["parameters"]["n"] == 400


def test_evolve_outputs_and_replay(tmp_path):
    out = tmp_path / "a"
    argv = ["evolve", "--alpha=0.8,0.05,0", "--snapshot-every", "50", "--out", str(out)] + FAST
    assert main(argv) == 0
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == "t,energy,v_m1,phi0,phi1,phi2"
    snaps = sorted(out.glob("snap_*.csv"))
    assert snaps
    man = json.loads((out / "run.json").read_text())
    for key in ("command", "parameters", "variant", "tolerances", "seed", "version"):
        assert key in man
    assert replay(out / "run.json", tmp_path / "b") == 0
    for f in [out / "trace.csv"] + snaps:
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_energy_from_state_csv(tmp_path, capsys):
    f = sample(lambda z: np.where(abs(z - 3) < 1, (1 - np.clip(z - 3, -1, 1) ** 2) ** 4, 0.0),
               20.0, 2000)
    p = tmp_path / "state.csv"
    write_state_csv(p, f, f.scale(0.5))
    compact = run_json(capsys, ["energy", "--alpha=-1,1,0", "--state", str(p), "--compact"])
    full = run_json(capsys, ["energy", "--alpha=-1,1,0", "--state", str(p), "--window", "0.4,1.9"])
    assert full["total"] == pytest.approx(compact["total"], rel=1e-6)
    assert main(["energy", "--alpha=-1,1,0"]) == 2


def test_friedrichs_and_graviton_commands(tmp_path):
    assert main(["friedrichs", "--out", str(tmp_path / "f")] + FAST) == 0
    assert (tmp_path / "f" / "run.json").exists()
    assert main(["graviton", "--alpha=0.8,0.05,0", "--init", "graviton", "--out",
                 str(tmp_path / "g")] + FAST) == 0
    assert (tmp_path / "g" / "graviton.csv").exists()


def test_synth_command(tmp_path):
    spec = {"L": 20.0, "n": 400, "alpha": [0.8, 0.05, 0.0],
            "x_grid": [[0, 0, 0], [1, 0, 0]],
            "modes": [{"xi": [0.5, 0, 0], "amplitude": [1, 0.5], "f": "bump"},
                      {"xi": [-0.5, 0, 0], "amplitude": [1, -0.5], "f": "bump"}]}
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec))
    out = tmp_path / "s"
    assert main(["synth", "--spec", str(p), "--T", "0.5", "--snapshot-every", "50", "--trials",
                 "20", "--out", str(out)]) == 0
    assert (out / "run.json").exists() and (out / "mode_0.csv").exists()
    snap = sorted(out.glob("snap_*.csv"))[0]
    assert snap.read_text().splitlines()[0] == "x1,x2,x3,z,value"


def test_sel_test(capsys):
    out = run_json(capsys, ["sel-test", "--samples", "5"])
    assert out["chosen"] == "shifted"
