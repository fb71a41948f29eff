import json
import subprocess
import sys

import numpy as np
import pytest

from sparsefs.cli import main
from sparsefs.datamodel import load_csv


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--n", "120", "--d", "12", "--relevant", "3", "--duplicates", "1",
                 "--seed", "1", "--out-dir", str(out)]) == 0
    return out


def run(*argv):
    return subprocess.run([sys.executable, "-m", "sparsefs", *argv], capture_output=True, text=True)


def test_synth_default_shape_and_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--out-dir", str(a)]) == 0
    truth = json.loads(capsys.readouterr().out)
    assert main(["synth", "--out-dir", str(b)]) == 0
    raw = (a / "data.csv").read_bytes()
    assert raw == (b / "data.csv").read_bytes()
    rows = raw.decode().strip().splitlines()
    assert len(rows) == 500 and all(len(r.split(",")) == 101 for r in rows)
    assert json.loads((a / "truth.json").read_text()) == truth
    assert len(truth["relevant"]) == 5


def test_synth_impossible_layout_exits_1(tmp_path):
    assert main(["synth", "--relevant", "200", "--d", "100", "--out-dir", str(tmp_path)]) == 1


def test_mask_writes_na_cells(synth_dir, tmp_path):
    assert main(["mask", "--input", str(synth_dir / "data.csv"), "--zeta", "0.2", "--out-dir", str(tmp_path)]) == 0
    table, labels, _ = load_csv(tmp_path / "masked.csv")
    assert int(np.isnan(table).sum()) == int(0.2 * 120 * 12)
    assert (~np.isnan(table)).any(axis=0).all()


def test_select_outputs(synth_dir, tmp_path, capsys):
    assert main(["select", "--input", str(synth_dir / "data.csv"), "--out-dir", str(tmp_path)]) == 0
    printed = json.loads(capsys.readouterr().out)
    sel = json.loads((tmp_path / "selection.json").read_text())
    assert sel["schema_version"] == 1 and sel["selected"] == printed["selected"]
    assert sel["n_features"] == 12 and sel["completed_entries"] == int(0.1 * 120 * 12)
    steps = [json.loads(line) for line in (tmp_path / "steps.jsonl").read_text().splitlines()]
    assert [s["feature"] for s in steps[:12]] == list(range(12))
    resolved = json.loads((tmp_path / "config.resolved.json").read_text())
    assert resolved["selector"]["mu"] == 0.05 and resolved["zeta"] == 0.1


def test_select_zero_zeta_imputes_nothing(synth_dir, tmp_path):
    assert main(["select", "--input", str(synth_dir / "data.csv"), "--zeta", "0", "--out-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "selection.json").read_text())["completed_entries"] == 0


def test_select_is_byte_deterministic(synth_dir, tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert main(["select", "--input", str(synth_dir / "data.csv"), "--seed", "3", "--out-dir", str(d)]) == 0
        outs.append([(d / f).read_bytes() for f in ("selection.json", "steps.jsonl", "config.resolved.json")])
    assert outs[0] == outs[1]


def test_config_file_and_flag_precedence(synth_dir, tmp_path):
    base = tmp_path / "base"
    assert main(["select", "--input", str(synth_dir / "data.csv"), "--mu", "0.01", "--out-dir", str(base)]) == 0
    again = tmp_path / "again"
    cfg = str(base / "config.resolved.json")
    assert main(["select", "--input", str(synth_dir / "data.csv"), "--config", cfg, "--out-dir", str(again)]) == 0
    assert (base / "selection.json").read_bytes() == (again / "selection.json").read_bytes()
    over = tmp_path / "over"
    assert main(["select", "--input", str(synth_dir / "data.csv"), "--config", cfg, "--mu", "0.2",
                 "--out-dir", str(over)]) == 0
    assert json.loads((over / "config.resolved.json").read_text())["selector"]["mu"] == 0.2


def test_degenerate_costs_exit_1(synth_dir, tmp_path):
    code = main(["select", "--input", str(synth_dir / "data.csv"), "--costs", "0,1,2,2,1,0", "--out-dir", str(tmp_path)])
    assert code == 1


def test_missing_input_exit_2(tmp_path):
    assert main(["select", "--input", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)]) == 2


def test_malformed_csv_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,0\n3,x,1\n")
    proc = run("select", "--input", str(bad), "--out-dir", str(tmp_path))
    assert proc.returncode == 2 and "row" in proc.stderr


def test_usage_errors_exit_1():
    assert run("select").returncode == 1
    assert run("select", "--input", "x.csv", "--mu", "abc").returncode == 1


def test_help_lists_defaults():
    proc = run("select", "--help")
    assert proc.returncode == 0
    for text in ("--mu", "0.05", "--zeta", "--lambda", "0.01", "--costs", "0,1,10,10,1,0", "--seed"):
        assert text in proc.stdout


def test_eval_report(synth_dir, tmp_path):
    assert main(["eval", "--input", str(synth_dir / "data.csv"), "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert len(rep["per_fold"]) == 50
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == "dataset,method,mean_acc,std_acc,mean_selected,runtime_s,seed"
    assert lines[1].startswith("data,three_way,")


def test_eval_ablation_writes_both(synth_dir, tmp_path):
    assert main(["eval", "--input", str(synth_dir / "data.csv"), "--repeats", "1", "--ablation",
                 "--dataset", "toy", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "report_three_way.json").exists() and (tmp_path / "report_two_way.json").exists()
    rows = (tmp_path / "report.csv").read_text().splitlines()
    assert [r.split(",")[1] for r in rows[1:]] == ["three_way", "two_way"]


def test_eval_rejects_missing_cells(synth_dir, tmp_path):
    main(["mask", "--input", str(synth_dir / "data.csv"), "--out-dir", str(tmp_path)])
    assert main(["eval", "--input", str(tmp_path / "masked.csv"), "--out-dir", str(tmp_path)]) == 2
