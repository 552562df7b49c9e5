import json
import math
import os
import statistics
import subprocess
import sys

import numpy as np
import pytest

from nkesn import EchoNetwork, NkLandscape, generalization_test, ensemble_weights, solve
from nkesn.cli import main, render_table, summarize

SMALL = """
[network]
n_outputs = 6
k = 2

[experiment]
runs = 2
top_m = 3
"""


def run_cli(*args):
    env = {**os.environ, "NUMBA_NUM_THREADS": "4"}
    return subprocess.run([sys.executable, "-m", "nkesn", *args], capture_output=True, text=True,
                          env=env)


@pytest.fixture(scope="module")
def batch(tmp_path_factory):
    root = tmp_path_factory.mktemp("batch")
    (root / "small.ini").write_text(SMALL)
    out = root / "out"
    assert main(["run", str(root / "small.ini"), "--output-dir", str(out), "--save-artifacts"]) == 0
    return out


def test_run_writes_records_artifacts_and_summary(batch):
    names = sorted(p.name for p in batch.iterdir())
    assert names == ["landscape_0000.json", "landscape_0001.json", "network_0000.json",
                     "network_0001.json", "run_0000.json", "run_0001.json", "summary.tsv"]
    for r in range(2):
        rec = json.loads((batch / f"run_{r:04d}.json").read_text())
        assert rec["evaluation_count"] == 48
        assert rec["run_seed"] == r and rec["config"]["base_seed"] == 0
        assert len(rec["config_hash"]) == 64
        assert len(rec["ensemble"]["per_state"]) == 625
        for kind in ("network", "landscape"):
            doc = json.loads((batch / f"{kind}_{r:04d}.json").read_text())
            assert doc["provenance"] == {"config_hash": rec["config_hash"], "base_seed": 0,
                                         "run_seed": r}


def test_rerun_is_byte_identical_regardless_of_jobs(tmp_path, batch):
    (tmp_path / "small.ini").write_text(SMALL)
    for jobs in ("1", "4"):
        res = run_cli("run", str(tmp_path / "small.ini"), "--output-dir", str(tmp_path / jobs),
                      "--jobs", jobs)
        assert res.returncode == 0, res.stderr
    for name in ("run_0000.json", "run_0001.json", "summary.tsv"):
        first = (batch / name).read_bytes()
        assert (tmp_path / "1" / name).read_bytes() == first
        assert (tmp_path / "4" / name).read_bytes() == first


def test_mismatched_solver_is_rejected_before_running(tmp_path):
    (tmp_path / "bad.ini").write_text("[network]\nneighborhood = random\n[experiment]\nsolver = dp\n")
    res = run_cli("run", str(tmp_path / "bad.ini"), "--output-dir", str(tmp_path / "out"))
    assert res.returncode == 1
    assert "neighborhood" in res.stderr
    assert not (tmp_path / "out").exists()


def test_output_dir_environment_default(tmp_path, monkeypatch):
    (tmp_path / "one.ini").write_text("[network]\nn_outputs = 4\nk = 1\n[experiment]\nruns = 1\n")
    monkeypatch.setenv("NKESN_OUTPUT_DIR", str(tmp_path / "env_out"))
    assert main(["run", str(tmp_path / "one.ini")]) == 0
    assert (tmp_path / "env_out" / "run_0000.json").exists()


def _record(gen, ens, f=0.01, k=3, top=None):
    rec = {"format": "nkesn.result/1", "neighborhood": "adjacent", "n": 20, "k": k,
           "evaluation_count": 320,
           "best_single_output": {"f": f, "generalization": gen},
           "ensemble": {"generalization": ens}, "top_m": None}
    if top is not None:
        rec["top_m"] = {"m": 5, "generalization": top}
    return rec


def test_table_statistics_use_sample_std():
    rows = summarize([_record(200, 10), _record(400, 30)])
    assert len(rows) == 1
    row = rows[0]
    assert row["best_gen_mean"] == 300.0
    assert row["best_gen_std"] == pytest.approx(math.sqrt(20000.0), abs=1e-12)
    assert row["best_gen_best"] == 400
    assert row["ens_gen_mean"] == 20.0 and row["ens_gen_best"] == 30


def test_single_run_reports_zero_std():
    row = summarize([_record(250, 300, top=310)])[0]
    assert row["best_gen_std"] == 0.0 and row["ens_gen_std"] == 0.0 and row["top_gen_std"] == 0.0
    assert row["top_m"] == 5


def test_rendered_table_matches_independent_recomputation(batch):
    records = [json.loads(p.read_text()) for p in sorted(batch.glob("run_*.json"))]
    text = (batch / "summary.tsv").read_text()
    assert text == render_table(records)
    header, line = text.strip().split("\n")
    row = dict(zip(header.split("\t"), line.split("\t")))
    evals = [r["best_single_output"]["f"] for r in records]
    ens = [r["ensemble"]["generalization"] for r in records]
    assert abs(float(row["eval_mean"]) - sum(evals) / len(evals)) < 1e-9
    assert abs(float(row["eval_std"]) - statistics.stdev(evals)) < 1e-9
    assert abs(float(row["ens_gen_mean"]) - sum(ens) / len(ens)) < 1e-9
    assert int(row["ens_gen_best"]) == max(ens)
    assert row["evaluations"] == "48"


def test_table_command_and_empty_dir(tmp_path, batch, capsys):
    assert main(["table", str(batch)]) == 0
    assert capsys.readouterr().out == (batch / "summary.tsv").read_text()
    assert main(["table", str(tmp_path)]) == 1
    assert "no result records" in capsys.readouterr().err


def _replay(capsys, *args):
    assert main(["replay", *args]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    return lines[1:-1], lines[-1]


def test_replay_all_off_has_zero_force(batch, capsys):
    rows, _ = _replay(capsys, str(batch / "network_0000.json"), "000000",
                      "--landscape", str(batch / "landscape_0000.json"), "--state", "0,0,0,0,0,0")
    assert len(rows) == 1000
    assert all(float(r.split("\t")[5]) == 0.0 for r in rows)


def test_replay_of_best_controller_matches_record(batch, capsys):
    rec = json.loads((batch / "run_0000.json").read_text())
    rows, footer = _replay(capsys, str(batch / "network_0000.json"), str(batch / "run_0000.json"),
                           "--controller", "best")
    steps = rec["best_single_output"]["steps"]
    assert f"steps_survived={steps}\t" in footer
    assert len(rows) == min(steps + 1, 1000)
    again, _ = _replay(capsys, str(batch / "network_0000.json"), str(batch / "run_0000.json"),
                       "--controller", "best")
    assert again == rows


def test_replay_of_ensemble_from_record_equals_landscape_weights(batch, capsys):
    rec = json.loads((batch / "run_0001.json").read_text())
    net = str(batch / "network_0001.json")
    a = _replay(capsys, net, str(batch / "run_0001.json"))
    b = _replay(capsys, net, rec["x_star"]["x"], "--landscape", str(batch / "landscape_0001.json"))
    assert a == b


def test_replay_rejects_bad_inputs(tmp_path, batch, capsys):
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["replay", str(tmp_path / "junk.json"), "000000"]) == 1
    assert main(["replay", str(batch / "network_0000.json"), "0101"]) == 1
    assert main(["replay", str(batch / "network_0000.json"), "010101"]) == 1
    assert main(["replay", str(batch / "network_0000.json"), "010101", "--state", "1,2"]) == 1
    capsys.readouterr()


def test_saved_artifacts_reproduce_solution_and_generalization(batch):
    rec = json.loads((batch / "run_0000.json").read_text())
    net = EchoNetwork.load(batch / "network_0000.json")
    land = NkLandscape.load(batch / "landscape_0000.json")
    sol = solve(land, rec["x_star"]["solver"])
    assert sol.bitstring() == rec["x_star"]["x"]
    weights = ensemble_weights(land, sol.x)
    assert list(weights.a) == rec["ensemble"]["weights"]
    report = generalization_test(net, np.array(sol.x), weights)
    assert report.bitstring() == rec["ensemble"]["per_state"]
