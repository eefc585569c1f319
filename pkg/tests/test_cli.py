import csv
import json
import subprocess
import sys

import pytest

from snns.cli import load_config, main


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


BELL = {"target": "bell:phi+", "learners": ["free", "1|2"], "trials": 2, "seed": 0}


def test_count_table(capsys):
    assert main(["count", "4"]) == 0
    out = capsys.readouterr().out
    rows = {line.split()[0]: line.split()[1] for line in out.splitlines() if line.strip()[:1].isdigit() and len(line.split()) == 2}
    assert rows["2"] == "7" and rows["3"] == "6" and rows["4"] == "1"
    assert "B_4 = 15" in out
    assert "1,2|3,4" in out


@pytest.mark.parametrize("n,bell", [(1, 1), (3, 5)])
def test_count_bell(capsys, n, bell):
    assert main(["count", str(n)]) == 0
    assert f"B_{n} = {bell}" in capsys.readouterr().out


def test_count_out_of_range(capsys):
    assert main(["count", "0"]) == 2
    assert main(["count", "40"]) == 2
    assert main(["count", "4", "--k", "9"]) == 2


def test_learn_writes_traces_and_summary(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["learn", "--config", write(tmp_path, BELL), "--out", str(out)]) == 0
    traces = sorted(p.name for p in (out / "traces").iterdir())
    assert traces == ["1-2_trial0.csv", "1-2_trial1.csv", "free_trial0.csv", "free_trial1.csv"]
    summary = json.loads((out / "summary.json").read_text())
    split = summary["learners"][1]
    assert split["spec"] == "1|2"
    assert split["mean"] == pytest.approx(0.7071, abs=0.02)
    with open(out / "traces" / "free_trial0.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "fidelity", "std_error"]
    assert float(rows[-1][1]) >= 0.99
    assert not list(out.rglob("*.tmp"))


def test_learn_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, BELL)
    main(["learn", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["learn", "--config", cfg, "--out", str(tmp_path / "b")])
    for f in (tmp_path / "a" / "traces").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / "traces" / f.name).read_bytes()


def test_flags_override_config(tmp_path):
    import argparse

    ns = argparse.Namespace(seed=7, trials=3, out="x", backend="mcmc")
    cfg = load_config(BELL, ns)
    assert (cfg.seed, cfg.trials, cfg.out, cfg.sampler.backend) == (7, 3, "x", "mcmc")
    assert cfg.sampler.seed == 7


@pytest.mark.parametrize(
    "doc",
    [
        {**BELL, "learners": []},
        {**BELL, "learners": ["1,2,3"]},
        {**BELL, "target": "nope"},
        {**BELL, "bogus": 1},
        {**BELL, "learning": {"optimizer": "adam"}},
        {**BELL, "trials": 1},
        {"learners": ["free"]},
    ],
)
def test_learn_config_errors_exit_2(tmp_path, doc, capsys):
    assert main(["learn", "--config", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_unreadable_config_exit_2(tmp_path):
    assert main(["learn", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["classify", "--config", str(bad)]) == 2


def test_learning_failure_exit_1(tmp_path, monkeypatch):
    from snns import classify as cl
    from snns.learning import LearningError

    def fail(*a, **k):
        raise LearningError("zero overlap persisted")

    monkeypatch.setattr(cl, "train", fail)
    assert main(["learn", "--config", write(tmp_path, BELL), "--out", str(tmp_path / "o")]) == 1


def test_classify_report(tmp_path, capsys):
    doc = {"target": "bell:phi+@1,3 * plus@2", "learners": ["1,2|3", "1,3|2", "1|2,3"], "trials": 2}
    assert main(["classify", "--config", write(tmp_path, doc), "--out", str(tmp_path / "r")]) == 0
    out = capsys.readouterr().out
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    verdicts = {row["spec"]: row["verdict"] for row in report["learners"]}
    assert verdicts == {
        "free": "witnessed-separable",
        "1,2|3": "entangled-across-partition",
        "1,3|2": "witnessed-separable",
        "1|2,3": "entangled-across-partition",
    }
    assert "witnessed-separable" in out


def test_classify_free_only(tmp_path):
    doc = {"target": "ghz:3", "learners": ["free"], "trials": 2}
    assert main(["classify", "--config", write(tmp_path, doc), "--out", str(tmp_path / "r")]) == 0
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert [r["verdict"] for r in report["learners"]] == ["witnessed-separable"]


def test_measure_single_point(tmp_path):
    doc = {"sweep": {"family": "variable_bell", "grid": [0.5]}, "learners": ["1|2"], "trials": 2}
    assert main(["measure", "--config", write(tmp_path, doc), "--out", str(tmp_path / "m")]) == 0
    with open(tmp_path / "m" / "measure.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    row = rows[0]
    R, E = float(row["R"]), float(row["E"])
    assert E == pytest.approx(1 - R * R, abs=1e-15)
    assert float(row["alpha_oracle"]) == pytest.approx(2**-0.5)


@pytest.mark.parametrize(
    "sweep,learners",
    [
        ({"family": "ghz", "grid": [0.1]}, ["1|2"]),
        ({"family": "variable_bell"}, ["1|2"]),
        ({"family": "variable_bell", "grid": [2.0]}, ["1|2"]),
        ({"family": "variable_bell", "grid": [0.1]}, ["free"]),
    ],
)
def test_measure_config_errors(tmp_path, sweep, learners):
    doc = {"sweep": sweep, "learners": learners, "trials": 2}
    assert main(["measure", "--config", write(tmp_path, doc), "--out", str(tmp_path / "m")]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "snns", "count", "3"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "B_3 = 5" in proc.stdout


def test_shipped_configs_parse():
    from pathlib import Path

    from snns.cli import ExperimentConfig

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.json"))
    assert files
    for f in files:
        cfg = load_config(json.loads(f.read_text()))
        assert isinstance(cfg, ExperimentConfig)
        if cfg.target:
            cfg.specs(cfg.named_target().n)
