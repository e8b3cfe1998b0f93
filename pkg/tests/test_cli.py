import json
import math
import os

import pytest

from killedwalk.cli import CSV_COLUMNS, main

BERN_SPEC = {"kind": "finite", "atoms": [[0.0, 0.5], [1.0, 0.5]]}
CONST_SPEC = {"kind": "point", "value": -math.log(0.8)}


def run_cli(tmp_path, *argv):
    cwd = os.getcwd()
    os.chdir(tmp_path)
    try:
        return main(list(argv))
    finally:
        os.chdir(cwd)


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_selftest_passes(tmp_path, capsys):
    code = run_cli(tmp_path, "selftest", "--out", "st")
    out = capsys.readouterr().out
    assert code == 0
    assert "[FAIL]" not in out
    header = (tmp_path / "st.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS["selftest"])


def test_malformed_atoms_fail_with_field_name(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "bad.json",
        {"command": "alpha", "params": {"distribution": {"kind": "finite", "atoms": [[-1.0, 1.0]]}}},
    )
    code = run_cli(tmp_path, "--config", cfg)
    err = capsys.readouterr().err
    assert code == 2
    record = json.loads(err)
    assert record["field"] == "distribution"
    assert "atom value" in record["error"]


def test_missing_distribution_fails(tmp_path, capsys):
    cfg = write_config(tmp_path, "none.json", {"command": "alpha", "params": {}})
    assert run_cli(tmp_path, "--config", cfg) == 2
    assert json.loads(capsys.readouterr().err)["field"] == "distribution"


def test_alpha_subcommand_writes_schema(tmp_path):
    cfg = write_config(
        tmp_path,
        "alpha.json",
        {
            "command": "alpha",
            "params": {"distribution": CONST_SPEC, "n_samples": 8, "tol": 1e-9},
            "seed": 3,
        },
    )
    assert run_cli(tmp_path, "--config", cfg, "--out", "a") == 0
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS["alpha"])
    value = float(lines[1].split(",")[1])
    assert value == pytest.approx(math.log(2.0), abs=1e-7)
    manifest = json.loads((tmp_path / "a.manifest.json").read_text())
    assert manifest["run_config"]["seed"] == 3
    assert manifest["killedwalk_version"]


def test_alpha_ergodic_emits_ratio_curve(tmp_path):
    cfg = write_config(
        tmp_path,
        "erg.json",
        {
            "command": "alpha",
            "params": {"distribution": BERN_SPEC, "method": "ergodic", "n": 50, "r_offset": 32},
            "seed": 4,
        },
    )
    assert run_cli(tmp_path, "--config", cfg, "--out", "e") == 0
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "k,a_over_k"
    assert len(lines) == 51
    assert int(lines[1].split(",")[0]) == 1


def test_unknown_command_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, "odd.json", {"command": "entropy-only", "params": {}})
    assert run_cli(tmp_path, "--config", cfg) == 2
    assert json.loads(capsys.readouterr().err)["field"] == "command"


def test_missing_config_file_reports_cleanly(tmp_path, capsys):
    assert run_cli(tmp_path, "alpha", "--config", str(tmp_path / "absent.json")) == 1
    record = json.loads(capsys.readouterr().err)
    assert record["exit_code"] == 1 and "absent.json" in record["error"]


def test_beta_columns_follow_contract(tmp_path):
    cfg = write_config(
        tmp_path,
        "beta.json",
        {
            "command": "beta",
            "params": {"distribution": BERN_SPEC, "n_grid": [2, 3], "r_ratio": 3.0},
        },
    )
    assert run_cli(tmp_path, "--config", cfg, "--out", "b") == 0
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "n,b_over_n,method,stat_err,trunc_err"
    assert len(lines) == 3


def test_variational_columns_follow_contract(tmp_path):
    cfg = write_config(
        tmp_path,
        "var.json",
        {
            "command": "variational",
            "params": {
                "distribution": CONST_SPEC,
                "n_samples": 4,
                "tol": 1e-9,
                "n_grid": 5,
                "max_evals": 12,
                "beta": {"n_grid": [2, 4]},
            },
        },
    )
    assert run_cli(tmp_path, "--config", cfg, "--out", "v", "--format", "json") == 0
    payload = json.loads((tmp_path / "v.json").read_text())
    assert set(payload["rows"][0]) == {"theta", "E_Q_F", "kl_per_site", "objective"}
    s = payload["summary"]
    assert s["alpha_hat"] == pytest.approx(math.log(2.0), abs=1e-7)
    assert s["beta_hat"] == pytest.approx(math.log(2.0), abs=1e-4)
    assert s["var_min_value"] == pytest.approx(math.log(2.0), abs=1e-7)


def test_tree_reduce_emits_consumable_environment(tmp_path):
    cfg = write_config(
        tmp_path,
        "tree.json",
        {
            "command": "tree-reduce",
            "params": {"distribution": BERN_SPEC, "d": 3, "n": 3, "depth_cap": 8},
            "seed": 5,
        },
    )
    assert run_cli(tmp_path, "--config", cfg, "--out", "t") == 0
    assert (tmp_path / "t.rho-env.json").exists()
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS["tree-reduce"])

    green_cfg = write_config(
        tmp_path,
        "green.json",
        {
            "command": "green",
            "params": {"environment_file": str(tmp_path / "t.rho-env.json"), "n_values": [1, 2]},
        },
    )
    assert run_cli(tmp_path, "--config", green_cfg, "--out", "g") == 0
    glines = (tmp_path / "g.csv").read_text().splitlines()
    assert glines[0] == ",".join(CSV_COLUMNS["green"])
    assert len(glines) == 3


def test_green_ratio_close_to_one_for_constant_potential(tmp_path):
    cfg = write_config(
        tmp_path,
        "green.json",
        {
            "command": "green",
            "params": {
                "distribution": CONST_SPEC,
                "window": [-100, 100],
                "n_values": [5, 10, 20],
            },
        },
    )
    assert run_cli(tmp_path, "--config", cfg, "--out", "g") == 0
    rows = (tmp_path / "g.csv").read_text().splitlines()[1:]
    ratios = [float(line.split(",")[3]) for line in rows]
    assert abs(ratios[0] - 1.0) <= 0.15
    assert abs(ratios[0] - 1.0) >= abs(ratios[1] - 1.0) >= abs(ratios[2] - 1.0)


def test_flag_overrides_beat_config(tmp_path):
    cfg = write_config(
        tmp_path,
        "alpha.json",
        {
            "command": "alpha",
            "params": {"distribution": CONST_SPEC, "n_samples": 8, "tol": 1e-9},
            "seed": 1,
            "format": "csv",
        },
    )
    assert run_cli(tmp_path, "--config", cfg, "--out", "o", "--format", "json", "-P", "n_samples=4") == 0
    payload = json.loads((tmp_path / "o.json").read_text())
    assert payload["summary"]["n_samples"] == 4


def test_manifest_rerun_is_bit_identical_and_thread_independent(tmp_path):
    cfg = write_config(
        tmp_path,
        "alpha.json",
        {
            "command": "alpha",
            "params": {"distribution": BERN_SPEC, "n_samples": 60, "tol": 1e-6},
            "seed": 9,
        },
    )
    assert run_cli(tmp_path, "--config", cfg, "--out", "one", "--threads", "1") == 0
    assert run_cli(tmp_path, "--config", str(tmp_path / "one.manifest.json"), "--out", "two", "--threads", "4") == 0
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()
