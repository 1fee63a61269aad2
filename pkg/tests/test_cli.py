import csv
import json
from pathlib import Path

import pyarrow.parquet as pq
import pytest
from src.cli import Cli

test_data = Path(__file__).resolve().parent / "test_data"

SMALL = ["--topology", "complete:4", "--tau", "0.1", "--eps", "0.05"]


def read_tsv(path: Path):
    with open(path) as fh:
        return list(csv.DictReader(fh, dialect="excel-tab"))


def test_analyze_prints_markdown(capsys):
    assert Cli(["analyze", *SMALL, "--obs", "deviation:1"]).run() == 0
    printed = capsys.readouterr().out
    assert "## analyze" in printed
    assert "m1" in printed


def test_analyze_writes_table_and_joint_document(tmp_path):
    out = tmp_path / "risk.tsv"
    cli = Cli(
        ["analyze", *SMALL, "--obs", "centering", "--joint", "--samples", "2000", "--out", str(out)]
    )
    assert cli.run() == 0
    rows = read_tsv(out)
    assert {row["observable"] for row in rows} == {"m1", "m2", "m3", "m4"}
    assert {row["measure"] for row in rows} == {"sigma", "var", "quad"}
    joint = json.loads((tmp_path / "risk.joint.json").read_text())
    assert joint
    assert cli.files == 2


def test_example_one_with_config_override(tmp_path):
    out = tmp_path / "example1.csv"
    assert Cli(["--example", "1", "--times", "1.0", "--out", str(out)]).run() == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    transient = [row for row in rows if row["t"]]
    assert {row["t"] for row in transient} == {"1.0"}
    # five observables, mean/variance/var/quad per checkpoint
    assert len(transient) == 5 * 4


def test_config_file(tmp_path):
    out = tmp_path / "run.json"
    assert Cli(["--config", str(test_data / "run.yaml"), "--out", str(out)]).run() == 0
    rows = json.loads(out.read_text())
    assert rows[0]["observable"] == "m1"
    assert rows[0]["measure"] == "sigma"


def test_sweep(tmp_path):
    out = tmp_path / "sweep.tsv"
    argv = ["sweep", "--topology", "ring:6", "--tau-grid", "0.05:0.35:0.05", "--eps", "0.5",
            "--measure", "quad", "--obs", "centering", "--out", str(out)]
    assert Cli(argv).run() == 0
    rows = read_tsv(out)
    assert len(rows) == 7
    for row in rows:
        assert int(row["safe"]) + int(row["marginal"]) + int(row["unsafe"]) == 6


def test_tradeoff_writes_curves(tmp_path):
    out = tmp_path / "tradeoff.csv"
    argv = ["tradeoff", "--nodes", "5", "--count", "20", "--tau", "0.2", "--eps", "0.05",
            "--seed", "3", "--out", str(out)]
    cli = Cli(argv)
    assert cli.run() == 0
    assert out.exists()
    assert (tmp_path / "tradeoff.curves.csv").exists()
    assert cli.rows > 20


def test_table(capsys):
    assert Cli(["table", "--topology", "star:5", "--tau", "0.1", "--eps", "0.05"]).run() == 0
    printed = capsys.readouterr().out
    assert "## table" in printed
    assert "ordering:" in printed


def test_limits_writes_vector_document(tmp_path):
    out = tmp_path / "limits.tsv"
    argv = ["limits", *SMALL, "--obs", "deviation:1", "--obs", "pairwise:1,2", "--out", str(out)]
    assert Cli(argv).run() == 0
    rows = read_tsv(out)
    assert [row["passes"] for row in rows] == ["True", "True"]
    vector = json.loads((tmp_path / "limits.vector.json").read_text())
    assert vector["labels"] == ["m1", "x1-x2"]


def test_simulate_with_sample_dump(tmp_path):
    out = tmp_path / "sim.parquet"
    samples = tmp_path / "samples.csv"
    argv = ["simulate", "--topology", "complete:3", "--tau", "0.1", "--obs", "deviation:1",
            "--trajectories", "50", "--times", "0.5", "1.0", "--out", str(out),
            "--dump-samples", str(samples)]
    assert Cli(argv).run() == 0
    table = pq.read_table(out)
    assert table.num_rows == 2
    with open(samples) as fh:
        assert len(list(csv.DictReader(fh))) == 2 * 50


@pytest.mark.parametrize(
    "argv,code",
    [
        (["analyze", "--topology", "complete:4", "--tau", "0.5"], 3),
        (["sweep", "--topology", "ring:6"], 2),
        (["analyze", "--topology", "ring:6", "--obs", "diagonal:1"], 2),
        (["--config", str(test_data / "bad_keys.yaml")], 2),
        (["--config", str(test_data / "missing.yaml")], 2),
        (["analyze", "--graph", str(test_data / "malformed.txt")], 2),
        (["limits", "--topology", "complete:4", "--tau", "0.1", "--eps", "2"], 2),
    ],
)
def test_exit_codes(argv, code):
    assert Cli(argv).run() == code


@pytest.mark.parametrize("name", ["risk.csv", "risk.parquet", "risk.json"])
def test_unwritable_output_is_a_config_error(tmp_path, name):
    out = tmp_path / "missing" / name
    assert Cli(["analyze", *SMALL, "--obs", "deviation:1", "--out", str(out)]).run() == 2
    assert not out.exists()
