import csv
import io
import json
import os

import numpy as np
import pytest

from ccplab import errors
from ccplab.cli import main
from ccplab.errors import ConfigError
from ccplab.harness import SCENARIOS, ResultEnvelope, Table, emit, parse_config, render, run_scenario
from ccplab.harness.output import atomic_write

# small, fast variants of every scenario
QUICK = {
    "kd-dist": {"D": 4},
    "ccp": {},
    "ergodicity": {"D": 8},
    "reconstruct": {"D": 8},
    "chain-rule": {"D": 8},
    "action-phase": {"D": 8},
    "free-propagator": {"D": 512, "L": 40.0, "k0": 10, "offsets": [-1.0, 0.0, 1.0]},
    "midpoint": {"D": 512, "L": 40.0, "x_i": -2.0, "x_f": 2.0, "offsets": [-1.0, 0.0, 0.5]},
    "classical-density": {"D": 32, "L": 8.0},
    "gradient-check": {"D": 256, "L": 20.0, "n": 10},
    "coarse-grain": {"D": 256, "L": 20.0, "n": 10, "threshold": 3.0},
    "weak-sim": {"trials": 5000, "g": 0.1},
    "bias-scan": {"trials": 5000, "couplings": [0.3, 0.1]},
}


def quick(name, **extra):
    return parse_config(json.dumps({"scenario": name, "seed": 7, **QUICK[name], **extra}))


# --- parse_config ---


def test_quick_table_covers_every_scenario():
    assert set(QUICK) == set(SCENARIOS)


def test_minimal_ergodicity_config():
    cfg = parse_config('{"scenario": "ergodicity", "D": 16, "state": "random", "seed": 7}')
    assert cfg.space.D == 16 and cfg.seed == 7 and cfg.params["state"] == "random"
    assert cfg.format == "csv" and cfg.out is None


def test_dimension_one_rejected():
    with pytest.raises(ConfigError, match="D ≥ 2"):
        parse_config('{"scenario": "ergodicity", "D": 1}')


def test_zero_coupling_rejected():
    with pytest.raises(ConfigError, match="coupling must be positive"):
        parse_config('{"scenario": "weak-sim", "g": 0}')


@pytest.mark.parametrize(
    "doc,key",
    [
        ({"scenario": "ccp", "colour": 1}, "colour"),
        ({"scenario": "ccp", "n": 3}, "n"),  # valid elsewhere, not for ccp
        ({"scenario": "ccp", "D": 2.5}, "D"),
        ({"scenario": "ccp", "L": -1}, "L"),
        ({"scenario": "ccp", "seed": -1}, "seed"),
        ({"scenario": "ccp", "format": "xml"}, "format"),
        ({"scenario": "ccp", "a": [1, 0, 0]}, "a"),
        ({"scenario": "ccp", "a": [0, 0]}, "a"),
        ({"scenario": "ccp", "a": [1, "x"]}, "a"),
        ({"scenario": "reconstruct", "D": 8, "ref_index": 8}, "ref_index"),
        ({"scenario": "free-propagator", "k0": 5000}, "k0"),
        ({"scenario": "gradient-check", "branch": "up"}, "branch"),
        ({"scenario": "gradient-check", "mask_fraction": 1.5}, "mask_fraction"),
        ({"scenario": "bias-scan", "couplings": [0.1, 0.5]}, "couplings"),
        ({"scenario": "weak-sim", "trials": True}, "trials"),
        ({"scenario": "nope"}, "scenario"),
    ],
)
def test_diagnostic_names_offending_key(doc, key):
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps(doc))
    assert str(info.value).startswith(f"{key}:")


def test_parse_errors():
    for text in ("{", "[1, 2]", '"ccp"'):
        with pytest.raises(ConfigError):
            parse_config(text)
    with pytest.raises(ConfigError, match="scenario"):
        parse_config('{"scenario": "ccp"}', scenario="kd-dist")


def test_overrides_win():
    cfg = parse_config('{"scenario": "kd-dist", "D": 8, "seed": 1}', overrides={"D": 4, "seed": None})
    assert cfg.space.D == 4 and cfg.seed == 1


def test_complex_amplitude_entries():
    cfg = parse_config('{"scenario": "ccp", "m": [1, [0, 1]]}')
    assert cfg.params["m"] == [[1.0, 0.0], [0.0, 1.0]]


# --- run_scenario ---


def test_ergodicity_scenario_residual():
    env = run_scenario(parse_config('{"scenario": "ergodicity", "D": 64, "seed": 7}'))
    assert env.summary["max_residual"] < 1e-12
    assert env.table.columns == ("x", "p", "residual")
    assert len(env.table.rows) == 64 * 64


def test_free_propagator_scenario_table():
    env = run_scenario(parse_config('{"scenario": "free-propagator"}'))
    assert env.table.columns == ("x_t", "analytic_re", "analytic_im", "numeric_re", "numeric_im", "rel_error")
    assert len(env.table.rows) == 20
    assert all(row[-1] < 1e-3 for row in env.table.rows)


def test_ccp_scenario_default_qubit():
    env = run_scenario(parse_config('{"scenario": "ccp"}'))
    assert abs(env.summary["value_re"] - 0.5) < 1e-15 and abs(env.summary["value_im"] - 0.5) < 1e-15


@pytest.mark.parametrize("name", sorted(QUICK))
def test_every_scenario_runs_deterministically(name):
    a, b = run_scenario(quick(name)), run_scenario(quick(name))
    assert a.version and a.duration >= 0 and a.scenario == name
    assert a.config["scenario"] == name and a.config["seed"] == 7
    for fmt in ("csv", "json"):
        assert render(a, fmt).encode() == render(b, fmt).encode()


def test_parallel_weak_sim_is_byte_identical():
    serial = render(run_scenario(quick("weak-sim", workers=1)), "json")
    parallel = render(run_scenario(quick("weak-sim", workers=4)), "json")
    assert serial.replace('"workers": 4', '"workers": 1') == serial
    assert json.loads(serial)["table"] == json.loads(parallel)["table"]
    assert json.loads(serial)["summary"] == json.loads(parallel)["summary"]


def test_module_errors_carry_scenario_context():
    cfg = parse_config('{"scenario": "classical-density", "E": -1.0}')
    with pytest.raises(errors.ForbiddenRegion) as info:
        run_scenario(cfg)
    assert info.value.code == "forbidden_region" and info.value.scenario == "classical-density"
    assert str(info.value).startswith("classical-density:")


def test_error_codes_are_distinct():
    classes = [c for c in vars(errors).values() if isinstance(c, type) and issubclass(c, errors.CCPLabError)]
    codes = [c.code for c in classes]
    assert len(codes) == len(set(codes))


# --- emit ---


def _envelope(table):
    return ResultEnvelope("ccp", {"scenario": "ccp"}, "0", 0.0, {}, table)


def test_empty_table_is_header_only():
    text = render(_envelope(Table.from_columns(a=np.array([]), z=np.array([], dtype=complex))), "csv")
    assert text == "a,z_re,z_im\n"


def test_kd_two_by_two_csv():
    env = run_scenario(parse_config('{"scenario": "kd-dist", "D": 2, "state": [1, 0]}'))
    rows = list(csv.reader(io.StringIO(render(env, "csv"))))
    assert rows[0] == ["x", "p", "rho_re", "rho_im"]
    assert len(rows) == 5
    rho = np.array([[float(r[2]) + 1j * float(r[3]) for r in rows[1:]]]).reshape(2, 2)
    np.testing.assert_allclose(rho, [[0.5, 0.5], [0, 0]], atol=1e-15)


def test_csv_seventeen_digits_round_trip():
    values = np.array([np.pi, 1 / 3, 1e-300, -2.5e17, 0.1 + 0.2])
    text = render(_envelope(Table.from_columns(v=values)), "csv")
    parsed = [float(line) for line in text.splitlines()[1:]]
    assert parsed == values.tolist()
    assert text.splitlines()[1] == format(np.pi, ".17g")


def test_json_round_trip_is_lossless():
    env = run_scenario(quick("action-phase"))
    doc = json.loads(render(env, "json"))
    assert doc["scenario"] == "action-phase" and doc["config"] == env.config
    assert doc["summary"] == env.summary
    assert [tuple(r) for r in doc["table"]["rows"]] == env.table.rows


def test_json_nan_becomes_null():
    text = render(_envelope(Table.from_columns(v=[1.0, float("nan")])), "json")
    assert json.loads(text)["table"]["rows"] == [[1.0], [None]]


def test_atomic_write_replaces_and_cleans_up(tmp_path):
    target = tmp_path / "out.csv"
    target.write_text("old")
    atomic_write(str(target), "new\n")
    assert target.read_text() == "new\n"
    assert sorted(os.listdir(tmp_path)) == ["out.csv"]


def test_failed_write_leaves_no_partial_file(tmp_path, monkeypatch):
    target = tmp_path / "out.csv"

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        emit(run_scenario(quick("ccp")), "csv", str(target))
    assert os.listdir(tmp_path) == []


# --- command line ---


def test_cli_writes_output(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "kd-dist", "D": 8, "seed": 3}))
    out = tmp_path / "kd.json"
    assert main(["kd-dist", "--config", str(cfg), "--out", str(out), "--format", "json", "--D", "2"]) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["D"] == 2 and len(doc["table"]["rows"]) == 4
    assert capsys.readouterr().out == ""


def test_cli_stdout_and_env_directory(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("CCPLAB_OUTPUT_DIR", raising=False)
    assert main(["ccp"]) == 0
    assert capsys.readouterr().out.startswith("value_re,value_im")
    monkeypatch.setenv("CCPLAB_OUTPUT_DIR", str(tmp_path))
    assert main(["ccp", "--format", "json"]) == 0
    assert json.loads((tmp_path / "ccp.json").read_text())["scenario"] == "ccp"


def test_cli_set_overrides(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["reconstruct", "--D", "8", "--set", "ref_index=3", "--set", "state=[1,2,3,4,5,6,7,8]", "--out", str(out)]) == 0
    assert out.read_text().startswith("x,psi_re")


def _diagnostic(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"]


@pytest.mark.parametrize(
    "argv,code,diag",
    [
        (["ergodicity", "--D", "1"], 2, "config"),
        (["weak-sim", "--set", "g=0"], 2, "config"),
        (["ergodicity", "--set", "colour=red"], 2, "config"),
        (["ergodicity", "--set", "novalue"], 2, "config"),
        (["free-propagator", "--set", "k0=600"], 3, "wrap_around_guard"),
        (["classical-density", "--set", "E=-1"], 3, "forbidden_region"),
        (["classical-density", "--set", "E=1000"], 3, "open_orbit"),
        (["ccp", "--config", "/nonexistent/config.json"], 4, "io"),
        (["ccp", "--out", "/nonexistent/dir/out.csv"], 4, "io"),
    ],
)
def test_cli_exit_codes(argv, code, diag, capsys):
    assert main(argv) == code
    err = _diagnostic(capsys)
    assert err["code"] == diag and err["exit_code"] == code


def test_cli_usage_error_is_config_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["not-a-scenario"])
    assert info.value.code == 2
    assert _diagnostic(capsys)["code"] == "usage"


def test_cli_no_partial_output_on_failure(tmp_path):
    out = tmp_path / "fp.csv"
    assert main(["free-propagator", "--set", "k0=600", "--out", str(out)]) == 3
    assert not out.exists()


def test_cli_repeat_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["bias-scan", "--set", "trials=3000", "--set", "couplings=[0.4,0.2]", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
