import json

import numpy as np
import pytest
import yaml

from conftest import SCENARIOS
from ringup import cli
from ringup import runner
from ringup.config import ConfigError, expected_max_nbar, load_config, loads
from ringup.model import DriveEnvelope
from ringup.propagate import TruncationError, read_csv

SMALL = """\
name: small
params: {f_r: 6.0, f_q: 5.0, eta: 0.2, g: 0.1, n_res: 40}
drive: {kind: constant, eps: 0.01}
tuning: {mode: resonant, k: 0}
initial: {state: bare, k: 0}
t_end: 6
dt_out: 1.0
outputs: [fidelity]
"""


def _write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_all_scenarios_validate(capsys):
    for path in sorted(SCENARIOS.glob("*.yaml")):
        assert cli.main(["validate", str(path)]) == 0
    assert "fig2.yaml: ok" in capsys.readouterr().out


def test_headroom_error(tmp_path, capsys):
    text = SMALL.replace("n_res: 40", "n_res: 50").replace("t_end: 6", "t_end: 200")
    assert cli.main(["validate", _write(tmp_path, text)]) == 1
    assert "headroom" in capsys.readouterr().err


def test_negative_eta_reported_with_line(tmp_path, capsys):
    text = SMALL.replace("params: {f_r: 6.0, f_q: 5.0, eta: 0.2, g: 0.1, n_res: 40}",
                         "params:\n  f_r: 6.0\n  f_q: 5.0\n  eta: -0.2\n  g: 0.1\n  n_res: 40")
    assert cli.main(["validate", _write(tmp_path, text)]) == 1
    err = capsys.readouterr().err
    assert "eta" in err and "cfg.yaml:5:" in err


def test_errors_are_collected(tmp_path):
    text = SMALL.replace("eta: 0.2", "eta: -0.2").replace("t_end: 6", "t_end: -1").replace("[fidelity]", "[bogus]")
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert len(info.value.messages) >= 3


def test_expected_nbar():
    assert expected_max_nbar(DriveEnvelope(eps=0.01), 200.0) == pytest.approx((2 * np.pi * 0.01 * 200) ** 2)


def test_sweep_argument_errors(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    assert cli.main(["sweep", cfg, "--axis", "eps", "--values", ""]) == 1
    assert cli.main(["sweep", cfg, "--axis", "chi", "--values", "1,2"]) == 1
    assert cli.main(["sweep", cfg]) == 1
    capsys.readouterr()


def test_run_is_deterministic(tmp_path):
    cfg = _write(tmp_path, SMALL)
    outs = []
    for sub in ("a", "b"):
        assert cli.main(["run", cfg, "--out-dir", str(tmp_path / sub)]) == 0
        outs.append((tmp_path / sub / "small_fidelity.csv").read_bytes())
    assert outs[0] == outs[1]
    manifest = json.loads((tmp_path / "a" / "small_manifest.json").read_text())
    assert {"params_hash", "version", "wall_time_s", "summary"} <= set(manifest)
    cols = read_csv(tmp_path / "a" / "small_fidelity.csv")
    assert {"t_ns", "infid_dressed", "infid_bare", "infid_c", "P_stray"} <= set(cols)


def test_manifest_hash_tracks_physics(tmp_path):
    hashes = []
    for i, text in enumerate((SMALL, SMALL.replace("name: small", "name: renamed"), SMALL.replace("g: 0.1", "g: 0.11"))):
        res = runner.run(loads(text), out_dir=str(tmp_path / str(i)))
        hashes.append(res.manifest["params_hash"])
    assert hashes[0] == hashes[1] != hashes[2]


def test_sweep_writes_rows_in_order(tmp_path):
    text = SMALL.replace("outputs: [fidelity]", "outputs: [fidelity]\nsweep: {axis: eps, values: [0.01, 0.005]}")
    cfg = _write(tmp_path, text)
    assert cli.main(["sweep", cfg, "--jobs", "2", "--out-dir", str(tmp_path)]) == 0
    cols = read_csv(tmp_path / "small_sweep_eps.csv")
    assert list(cols)[0] == "scan_param"
    assert cols["scan_param"].tolist() == [0.01, 0.005]
    serial = runner.sweep(load_config(cfg), "eps", [0.01, 0.005], jobs=1, out_dir=str(tmp_path / "serial"))
    assert serial.read_bytes() == (tmp_path / "small_sweep_eps.csv").read_bytes()


def test_cache_verbs(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    cache = tmp_path / "cache"
    assert cli.main(["--cache-dir", str(cache), "cache", "build", cfg]) == 0
    assert len(list(cache.glob("*.basis"))) == 1
    assert cli.main(["--cache-dir", str(cache), "run", cfg, "--out-dir", str(tmp_path / "o")]) == 0
    assert cli.main(["--cache-dir", str(cache), "cache", "clear"]) == 0
    assert not cache.exists()
    assert cli.main(["--cache-dir", str(cache), "cache", "build"]) == 1
    capsys.readouterr()


@pytest.mark.parametrize("exc,code", [(TruncationError("edge"), 3), (RuntimeError("boom"), 2), (ConfigError(["bad"]), 1)])
def test_exit_codes(tmp_path, monkeypatch, capsys, exc, code):
    def fail(*_a, **_k):
        raise exc

    monkeypatch.setattr(runner, "run", fail)
    assert cli.main(["run", _write(tmp_path, SMALL)]) == code
    capsys.readouterr()


def test_truncation_exit_code_end_to_end(tmp_path, capsys):
    # validation passes at the headroom bound but the top levels fill anyway
    text = SMALL.replace("n_res: 40", "n_res: 14").replace("eps: 0.01", "eps: 0.02").replace("t_end: 6", "t_end: 8")
    assert cli.main(["run", _write(tmp_path, text), "--out-dir", str(tmp_path)]) == 3
    capsys.readouterr()


def test_override_rejects_unknown_axis():
    with pytest.raises(ConfigError):
        loads(SMALL).override("chi", 1.0)


def test_scenario_files_are_plain_yaml():
    for path in SCENARIOS.glob("*.yaml"):
        data = yaml.safe_load(path.read_text())
        assert data["name"] == path.stem
