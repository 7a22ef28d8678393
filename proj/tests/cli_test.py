import csv
import json
import os
import subprocess
from pathlib import Path

import pytest

CLI = os.environ["CGAN_CLI"]


def run(*args, ok=True):
    p = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    if ok:
        assert p.returncode == 0, p.stderr
    return p


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    run("simulate", "--out", d, "--seed", 5, "--d", 2, "--n-sub", 40)
    return d


@pytest.fixture(scope="module")
def trained(study, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    run("train", "--cohort", study / "arm1.csv", "--cohort", study / "arm2.csv", "--out", out,
        "--iterations", 40, "--batch-size", 16, "--seed", 3)
    return out


def test_simulate_is_deterministic(study, tmp_path):
    run("simulate", "--out", tmp_path, "--seed", 5, "--d", 2, "--n-sub", 40)
    for name in ("arm1.csv", "arm2.csv", "meta.json"):
        assert (tmp_path / name).read_bytes() == (study / name).read_bytes()
    header = (study / "arm1.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["unit_id", "f_0", "f_1"]
    assert len(rows(study / "arm1.csv")) == 80
    meta = json.loads((study / "meta.json").read_text())
    assert meta["target_ate_mixture"] == 50 and meta["target_ate_overlap"] == 70


def test_train_outputs(trained):
    for name in ("checkpoint.cgan", "trace.csv", "weights_arm0.csv", "weights_arm1.csv", "config.json"):
        assert (trained / name).exists()
    trace = rows(trained / "trace.csv")
    assert len(trace) == 40 and trace[0]["iteration"] == "0"
    w = rows(trained / "weights_arm0.csv")
    assert sum(float(r["weight"]) for r in w) == pytest.approx(1.0)
    assert json.loads((trained / "config.json").read_text())["train"]["seed"] == 3


def test_weigh_reproduces_training_weights(study, trained, tmp_path):
    run("weigh", "--checkpoint", trained / "checkpoint.cgan", "--cohort", study / "arm1.csv",
        "--cohort", study / "arm2.csv", "--out", tmp_path)
    for k in (0, 1):
        name = f"weights_arm{k}.csv"
        assert (tmp_path / name).read_bytes() == (trained / name).read_bytes()


def test_evaluate(study, trained, tmp_path):
    run("evaluate", "--cohort", study / "arm1.csv", "--cohort", study / "arm2.csv",
        "--method", "unweighted", "--method", "ipw", "--method", "clipped-ipw", "--method", "cgan",
        "--checkpoint", trained / "checkpoint.cgan", "--out", tmp_path)
    effects = rows(tmp_path / "effect.csv")
    assert [r["method"] for r in effects] == ["unweighted", "ipw", "clipped-ipw", "cgan"]
    assert float(effects[0]["ess_total"]) == pytest.approx(160.0)
    assert len(rows(tmp_path / "balance.csv")) > 0
    assert "cgan" in (tmp_path / "report.txt").read_text()


def test_usage_errors_exit_2(study, tmp_path):
    assert run(ok=False).returncode == 2
    assert run("oracle", "--suite", "nope", ok=False).returncode == 2
    p = run("evaluate", "--cohort", study / "arm1.csv", "--out", tmp_path, "--method", "unweighted", ok=False)
    assert p.returncode == 2


def test_data_errors_exit_3(study, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    p = run("train", "--cohort", empty, "--cohort", study / "arm2.csv", "--out", tmp_path / "o", ok=False)
    assert p.returncode == 3

    bad = tmp_path / "bad.csv"
    bad.write_text("unit_id,f_0,f_1\nu1,0.5,abc\n")
    p = run("train", "--cohort", bad, "--cohort", study / "arm2.csv", "--out", tmp_path / "o", ok=False)
    assert p.returncode == 3 and "abc" in p.stderr

    other = tmp_path / "other.csv"
    other.write_text("unit_id,f_0,z1\nu1,0.5,1.0\nu2,0.1,0.2\n")
    p = run("train", "--cohort", other, "--cohort", study / "arm2.csv", "--out", tmp_path / "o", ok=False)
    assert p.returncode == 3 and "z1" in p.stderr


def test_degenerate_weights_exit_4(study, tmp_path):
    files = []
    for k, name in enumerate(("arm1.csv", "arm2.csv")):
        ids = [r["unit_id"] for r in rows(study / name)]
        path = tmp_path / f"w{k}.csv"
        path.write_text("unit_id,arm,raw_ratio,weight\n" + "".join(f"{u},{k},0,0\n" for u in ids))
        files.append(path)
    p = run("evaluate", "--cohort", study / "arm1.csv", "--cohort", study / "arm2.csv",
            "--weights", files[0], "--weights", files[1], "--out", tmp_path / "o", ok=False)
    assert p.returncode == 4
