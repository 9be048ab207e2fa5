import csv
import io
import json
import math
import subprocess
import sys

import pytest

from levymv import cli
from levymv.convergence import MseRecord

FAST = ["--fine-steps", "64", "--factors", "4,8,16", "--particles", "20", "--reps", "2"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_convergence_csv_layout(tmp_path, capsys):
    code = cli.main(["convergence", "--scheme", "tanh", "--scheme", "tame", *FAST, "--out", str(tmp_path)])
    assert code == 0
    table = rows(tmp_path / "convergence_volatility32.csv")
    assert len(table) == 6
    assert list(table[0]) == ["scheme", "dt", "rmse", "diverged"]
    assert {r["scheme"] for r in table} == {"tanh", "tame"}
    assert all(r["diverged"] == "false" and float(r["rmse"]) > 0 for r in table)
    assert (tmp_path / "convergence_volatility32.svg").stat().st_size > 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("scheme=tanh slope=") and "r2=" in out[0]


def test_convergence_rerun_is_byte_identical(tmp_path):
    args = ["convergence", "--model", "double_well", "--scheme", "mix", *FAST]
    cli.main(args + ["--out", str(tmp_path / "a")])
    cli.main(args + ["--out", str(tmp_path / "b"), "--workers", "0"])
    a = (tmp_path / "a" / "convergence_double_well.csv").read_bytes()
    assert a == (tmp_path / "b" / "convergence_double_well.csv").read_bytes()
    assert b"\r" not in a


def test_csv_round_trip(tmp_path):
    recs = [MseRecord(0.25, 0.1 / 3, "tanh", "m"), MseRecord(0.5, math.nan, "plain", "m", True)]
    cli.write_convergence_csv(tmp_path / "x.csv", recs)
    back = cli.read_convergence_csv(tmp_path / "x.csv", "m")
    assert back[0] == recs[0]
    assert back[1].diverged and math.isnan(back[1].rmse)


@pytest.mark.parametrize("argv", [
    ["convergence", "--model", "nope"],
    ["convergence", "--scheme", "bogus"],
    ["convergence", "--fine-steps", "64", "--factors", "3"],
    ["convergence", "--factors", "a,b"],
    ["convergence", "--param", "a1"],
    ["convergence", "--param", "zeta=1", "--fine-steps", "8", "--factors", "2"],
    ["convergence", "--particles", "0"],
    ["poc", "--n-list", "50"],
    ["poc", "--n-list", "100,50", "--fine-steps", "8"],
    ["verify", "--model", "custom", "--param", "drift=0", "--param", "diffusion=0"],
    ["paths", "--model", "custom", "--param", "drift=y+", "--param", "diffusion=0"],
])
def test_configuration_errors_exit_2(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2


def test_bad_config_file_exits_2(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"particles": 5, "colour": "red"}))
    assert cli.main(["convergence", "--config", str(bad)]) == 2
    bad.write_text("{not json")
    assert cli.main(["convergence", "--config", str(bad)]) == 2


def test_all_diverged_exits_3(tmp_path):
    code = cli.main(["convergence", "--model", "double_well", "--scheme", "plain", "--fine-steps", "64",
                     "--factors", "2,4", "--particles", "50", "--reps", "1", "--out", str(tmp_path)])
    assert code == 3
    assert all(r["diverged"] == "true" and r["rmse"] == "nan"
               for r in rows(tmp_path / "convergence_double_well.csv"))


def test_verify_passes_for_builtin_defaults(tmp_path, capsys):
    for model in ("volatility32", "double_well"):
        assert cli.main(["verify", "--model", model, "--samples", "20000", "--out", str(tmp_path)]) == 0
        text = (tmp_path / f"verify_{model}.txt").read_text()
        assert "FAIL" not in text and text.count("PASS") == 13


def test_verify_flags_broken_parameters(tmp_path, capsys):
    code = cli.main(["verify", "--model", "double_well", "--param", "d2=1.9", "--samples", "20000",
                     "--out", str(tmp_path)])
    assert code == 4
    assert "FAIL" in (tmp_path / "verify_double_well.txt").read_text()


def test_verify_custom_with_declared_constants(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "custom", "samples": 5000, "model_params": {
        "drift": "-y", "diffusion": "0.5 * y", "declared": {
            "growth_gamma": 1, "growth_C": 2, "mono_eta": 1.5, "mono_C": 1}}}))
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == 0


def test_paths_zero_dynamics(tmp_path, capsys):
    code = cli.main(["paths", "--model", "custom", "--scheme", "tame", "--param", "drift=0", "--param", "diffusion=0",
                     "--param", "x0=0.3", "--param", "lam=2", "--param", "jump=0",
                     "--particles", "3", "--fine-steps", "2", "--out", str(tmp_path)])
    assert code == 0
    table = rows(tmp_path / "paths_custom.csv")
    assert len(table) == 9
    assert all(float(r["y"]) == 0.3 for r in table)
    assert [float(r["t"]) for r in table[:3]] == [0.0, 0.5, 1.0]


def test_paths_volatility32_stays_moderate(tmp_path, capsys):
    assert cli.main(["paths", "--scheme", "tanh", "--particles", "50", "--max-paths", "10",
                     "--fine-steps", "128", "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "paths_volatility32.csv")
    assert len({r["particle"] for r in table}) == 10
    assert max(abs(float(r["y"])) for r in table) < 10
    assert (tmp_path / "paths_volatility32.png").exists()


def test_poc_writes_table(tmp_path, capsys):
    assert cli.main(["poc", "--scheme", "tanh", "--n-list", "10,20,40", "--fine-steps", "32",
                     "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "poc_volatility32.csv")
    assert [int(r["N"]) for r in table] == [10, 20]
    assert all(float(r["w2_to_largest"]) >= 0 for r in table)
    assert capsys.readouterr().out.startswith("trend")


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"particles": 7, "seed": 3, "model_params": {"a1": 5}}))
    c = cli.config_from_args(["convergence", "--config", str(cfg), "--seed", "9", "--param", "lam=1"])
    assert (c.particles, c.seed) == (7, 9)
    assert c.model_params == {"a1": 5, "lam": 1}
    assert c.fine_steps == 2 ** 12 and c.coarse_factors == [16, 32, 64, 128, 256]
    assert c.schemes == ["tanh", "tame", "sine", "mix"]


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.config_from_args(["poc"]).output_dir == str(tmp_path / "env")
    assert cli.config_from_args(["poc", "--out", "x"]).output_dir == "x"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "levymv", "poc", "--n-list", "4,8", "--fine-steps", "8",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "levymv", "convergence", "--factors", "5"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "configuration error" in proc.stderr
