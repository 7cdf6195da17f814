import json

import pytest

from mpmix.cli import run_cli


@pytest.fixture
def sim_dir(tmp_path):
    out = tmp_path / "sim"
    assert run_cli(["simulate", "--scenario", "easy", "--n", "80", "--seed", "4", "--out", str(out)]) == 0
    return out


def test_simulate_writes_files(sim_dir):
    for name in ("data.csv", "schema.json", "truth.json", "partitions.csv"):
        assert (sim_dir / name).exists()
    truth = json.loads((sim_dir / "truth.json").read_text())
    assert truth["spec"] == {"B": 3, "G": [2, 2, 1], "omega": [1, 1, 2, 2, 3, 3]}


def test_fit_outputs_and_determinism(sim_dir, tmp_path, capsys):
    args = ["fit", "--data", str(sim_dir / "data.csv"), "--schema", str(sim_dir / "schema.json"),
            "--criterion", "bic", "--bmax", "2", "--gmax", "2", "--restarts", "3", "--seed", "7"]
    assert run_cli(args + ["--out", str(tmp_path / "a")]) == 0
    assert run_cli(args + ["--out", str(tmp_path / "b")]) == 0
    printed = capsys.readouterr().out
    assert "BIC" in printed.splitlines()[0]
    a = (tmp_path / "a" / "ranked.json").read_bytes()
    assert a == (tmp_path / "b" / "ranked.json").read_bytes()
    ranked = json.loads(a)
    assert ranked["criterion"] == "bic" and ranked["models"][0]["rank"] == 1
    assert (tmp_path / "a" / "table.txt").exists() and (tmp_path / "a" / "partitions.csv").exists()


def test_fit_micl_with_config(sim_dir, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"criterion": "micl", "data": str(sim_dir / "data.csv"), "bmax": 1, "gmax": 2,
                               "restarts": 2, "schema": str(sim_dir / "schema.json")}))
    out = tmp_path / "m"
    # the flag overrides the config's bmax
    assert run_cli(["fit", "--config", str(cfg), "--bmax", "2", "--out", str(out)]) == 0
    ranked = json.loads((out / "ranked.json").read_text())
    assert ranked["criterion"] == "micl"
    assert max(m["spec"]["B"] for m in ranked["models"]) == 2


def test_fit_without_data_is_usage_error(capsys):
    assert run_cli(["fit"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert run_cli(["fit", "--bogus"]) == 1
    assert "unrecognized" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"bmx": 3}')
    assert run_cli(["fit", "--config", str(cfg), "--data", "x.csv"]) == 1


def test_bad_data_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n3\n")
    assert run_cli(["fit", "--data", str(path)]) == 2
    assert "row 2" in capsys.readouterr().err
    assert run_cli(["fit", "--data", str(tmp_path / "absent.csv")]) == 2


def test_ari_identical_files(sim_dir, capsys):
    path = str(sim_dir / "partitions.csv")
    assert run_cli(["ari", path, path, "--header"]) == 0
    assert capsys.readouterr().out.strip() == "1.0"


def test_ari_columns(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("1\n1\n2\n2\n")
    b.write_text("x,1\ny,2\nz,1\nw,2\n")
    assert run_cli(["ari", str(a), str(b), "--column", "1"]) == 0
    assert run_cli(["ari", str(a), str(b), "--column", "3"]) == 2
    capsys.readouterr()
    b.write_text("1\n2\n1\n2\n")
    assert run_cli(["ari", str(a), str(b)]) == 0
    assert capsys.readouterr().out.strip() == "-0.5"


def test_benchmark_command(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"scenarios": [{"difficulty": "easy", "n": 40, "replicates": 1}],
                               "criteria": ["micl"], "micl_restarts": 2}))
    out = tmp_path / "table.csv"
    assert run_cli(["benchmark", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("easy,4.5,0.0,40,micl,1,")


@pytest.mark.parametrize("sub", ["fit", "simulate", "benchmark", "ari"])
def test_help_lists_flags(sub, capsys):
    assert run_cli([sub, "--help"]) == 0
    text = capsys.readouterr().out
    assert "usage" in text
    if sub == "fit":
        for flag in ("--data", "--schema", "--criterion", "--bmax", "--gmax", "--restarts", "--seed", "--threads", "--priors", "--out"):
            assert flag in text
