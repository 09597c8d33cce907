import csv
import json

import pytest

from llrquant.cli import main, parse_range
from llrquant.errors import ConfigError


def test_parse_range():
    assert parse_range("2..6") == [2, 3, 4, 5, 6]
    assert parse_range("12..20:4") == [12, 16, 20]
    assert parse_range("3,5") == [3, 5]
    with pytest.raises(ConfigError):
        parse_range("a..b")


def test_memory_preset(tmp_path, capsys):
    assert main(["memory", "--preset", "table6", "--out", str(tmp_path)]) == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["outputs"] == ["memory.csv"] and len(m["config_sha256"]) == 64
    assert "16.5%" in capsys.readouterr().out


def test_design_small(tmp_path, capsys):
    args = ["design", "--m", "16", "--cn", "12", "--w-max", "4", "--alloc", "--W", "4..8:2",
            "--verify-exhaustive", "--out", str(tmp_path), "--cache", str(tmp_path / "c")]
    (tmp_path / "c").mkdir()
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "greedy == exhaustive for all W: True" in out
    with open(tmp_path / "allocation.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["W"]) for r in rows] == [4, 6, 8]
    assert all(sum(int(r[f"w{k}"]) for k in range(1, 5)) == int(r["W"]) for r in rows)
    assert (tmp_path / "bank_W6.json").exists()
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["report"]["greedy_equals_exhaustive"] is True


def test_simulate_is_deterministic(tmp_path):
    outs = []
    for d in ("a", "b"):
        args = ["simulate", "--m", "16", "--cn", "12", "--w-max", "4", "--W", "10", "--nbar", "8",
                "--trials", "20000", "--seed", "5", "--out", str(tmp_path / d),
                "--cache", str(tmp_path)]
        assert main(args) == 0
        outs.append((tmp_path / d / "sim_report.csv").read_text())
    assert outs[0] == outs[1]
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["gmi"] == mb["gmi"]


def test_compress_stats(tmp_path):
    args = ["compress-stats", "--m", "16", "--cn", "12", "--w-max", "4", "--W", "12", "--nbar", "8",
            "--trials", "10000", "--out", str(tmp_path), "--cache", str(tmp_path)]
    assert main(args) == 0
    for name in ("ccdf.csv", "codebook.json", "loss_tables.json", "substitutions.csv"):
        assert (tmp_path / name).exists()


@pytest.mark.parametrize("args,code", [
    (["design", "--m", "5"], 2),
    (["simulate", "--m", "16", "--w-max", "2", "--W", "30"], 3),
    (["simulate", "--m", "16", "--trials", "10"], 2),
    (["simulate", "--m", "16", "--rows", "4"], 2),
])
def test_exit_codes(tmp_path, args, code, capsys):
    assert main(args + ["--out", str(tmp_path), "--cache", str(tmp_path), "--cn", "12"]) == code
    assert "error:" in capsys.readouterr().err
