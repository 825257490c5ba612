import csv
import json
import statistics
import subprocess
import sys

import pytest

from codeswitch_st.cli import aggregate_sweep, main

SYNTH_KEYS = """\
synth_n_source = 400
synth_n_target = 300
synth_vocab_size_per_lang = 200
feature_dims = 16384
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "small.cfg").write_text(SYNTH_KEYS + "source = data/source.tsv\ntarget = data/target.tsv\n"
                                    "lexicon = data/lexicon.txt\n")
    assert main(["synth", "--config", str(root / "small.cfg"), "--out", str(root / "data")]) == 0
    return root


def cfg(ws):
    return ["--config", str(ws / "small.cfg")]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_outputs(workspace, capsys):
    data = workspace / "data"
    doc = json.loads((data / "synth.json").read_text())
    assert doc["config"]["n_source"] == 400
    assert sorted(doc["files"]) == ["lexicon", "source", "target"]
    assert len((data / "target.tsv").read_text().splitlines()) == 301


def test_synth_is_deterministic(workspace, tmp_path, capsys):
    capsys.readouterr()
    assert main(["synth", *cfg(workspace), "--out", str(tmp_path)]) == 0
    digest = capsys.readouterr().out.strip()
    assert digest == json.loads((workspace / "data" / "synth.json").read_text())["digest"]
    assert (tmp_path / "target.tsv").read_bytes() == (workspace / "data" / "target.tsv").read_bytes()


def test_bucket_stats_two_spikes_golden(data_dir, tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["synth", "--out", str(data)]) == 0
    assert main(["bucket-stats", "--target", str(data / "target.tsv"), "--lexicon", str(data / "lexicon.txt"),
                 "--out", str(tmp_path / "stats")]) == 0
    text = (tmp_path / "stats" / "histogram.txt").read_text()
    assert text == (data_dir / "histogram_golden.txt").read_text()
    counts = [r["count"] for r in json.loads((tmp_path / "stats" / "bucket_stats.json").read_text())["histogram"]]
    peaks = [i for i in range(len(counts)) if counts[i] > 0
             and counts[i] >= max(counts[max(i - 1, 0):i + 2])]
    assert len(peaks) == 2 and peaks[0] < 3 < 5 < peaks[1]


def test_run_writes_report_and_metrics(workspace):
    out = workspace / "run"
    assert main(["run", *cfg(workspace), "--out", str(out), "--method", "progressive"]) == 0
    report = json.loads((out / "report.json").read_text())
    metrics = json.loads((out / "metrics.json").read_text())
    assert report["schema_version"] == 1 and len(report["final_predictions"]) == 300
    assert report["config"]["detector"].startswith("lexicon:")
    assert set(metrics["per_bucket"]) == {"1", "2"}
    assert 0.5 < metrics["global"]["macro_f1"] <= 1.0


def test_flags_override_config(workspace):
    out = workspace / "run_k3"
    assert main(["run", *cfg(workspace), "--out", str(out), "--k", "3", "--delta", "0.3", "--seed", "4"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["k"] == 3 and report["config"]["delta"] == 0.3 and report["config"]["seed"] == 4
    assert len(report["buckets"]) == 3


def test_eval_matches_run(workspace):
    out = workspace / "run"
    if not (out / "report.json").exists():
        main(["run", *cfg(workspace), "--out", str(out)])
    ev = workspace / "eval"
    assert main(["eval", *cfg(workspace), "--out", str(ev), "--report", str(out / "report.json"),
                 "--method", "progressive"]) == 0
    assert json.loads((ev / "metrics.json").read_text()) == json.loads((out / "metrics.json").read_text())


def test_eval_golden(data_dir, tmp_path):
    assert main(["eval", "--target", str(data_dir / "golden_gold.tsv"), "--out", str(tmp_path),
                 "--report", str(data_dir / "golden_report.json")]) == 0
    m = json.loads((tmp_path / "metrics.json").read_text())
    # global: tp_pos=1 fp_pos=2 fn_pos=0; tp_neg=2 fp_neg=0 fn_neg=2
    assert m["global"]["per_class_f1"]["positive"] == pytest.approx(0.5)
    assert m["global"]["per_class_f1"]["negative"] == pytest.approx(2 / 3)
    assert m["global"]["accuracy"] == pytest.approx(0.6)
    assert m["per_bucket"]["1"]["macro_f1"] == pytest.approx(2 / 3)
    assert m["per_bucket"]["2"]["macro_f1"] == pytest.approx(1 / 3)


def test_bucket_stats(workspace, capsys):
    out = workspace / "stats"
    assert main(["bucket-stats", *cfg(workspace), "--out", str(out)]) == 0
    doc = json.loads((out / "bucket_stats.json").read_text())
    b1, b2 = doc["buckets"]
    assert b1["f_eng_min"] >= b2["f_eng_max"]
    assert sum(r["count"] for r in doc["histogram"]) == 300
    assert (out / "histogram.txt").read_text() == capsys.readouterr().out


def test_probe_ood(workspace):
    out = workspace / "ood"
    assert main(["probe-ood", *cfg(workspace), "--out", str(out), "--alphas", "0.05,0.1"]) == 0
    doc = json.loads((out / "ood.json").read_text())
    assert [r["alpha"] for r in doc["reports"]] == [0.05, 0.1]
    rows = read_csv(out / "ood.csv")
    assert {(r["model"], r["bucket"]) for r in rows} == {("m_pt", "1"), ("m_pt", "2"), ("m_1", "2")}


def test_pretrain(workspace):
    out = workspace / "pt"
    assert main(["pretrain", *cfg(workspace), "--out", str(out)]) == 0
    doc = json.loads((out / "pretrain.json").read_text())
    assert doc["provenance"] == "pretrained" and (out / "model.npz").exists()


def test_sweep_single_cell_equals_run(workspace):
    out = workspace / "sweep"
    assert main(["sweep", *cfg(workspace), "--out", str(out), "--ks", "3", "--deltas", "0.4", "--seeds", "2"]) == 0
    runs = read_csv(out / "sweep_runs.csv")
    agg = read_csv(out / "sweep.csv")
    assert len(runs) == 1 and len(agg) == 1
    assert float(agg[0]["macro_f1_mean"]) == float(runs[0]["macro_f1"])
    assert float(agg[0]["macro_f1_std"]) == 0.0
    run_out = workspace / "run_cell"
    assert main(["run", *cfg(workspace), "--out", str(run_out), "--k", "3", "--delta", "0.4", "--seed", "2"]) == 0
    m = json.loads((run_out / "metrics.json").read_text())
    assert float(runs[0]["macro_f1"]) == m["global"]["macro_f1"]


def test_sweep_cell_count(workspace):
    out = workspace / "sweep_grid"
    assert main(["sweep", *cfg(workspace), "--out", str(out), "--ks", "1,2", "--deltas", "0.3,0.5,0.7",
                 "--seeds", "0,1", "--jobs", "2"]) == 0
    runs = read_csv(out / "sweep_runs.csv")
    agg = read_csv(out / "sweep.csv")
    assert len(runs) == 2 * 3 * 2 and len(agg) == 2 * 3
    assert all(int(r["n_seeds"]) == 2 for r in agg)


def test_aggregate_by_hand():
    rows = [{"k": 2, "delta": 0.5, "seed": s, "macro_f1": v, "micro_f1": v, "weighted_f1": v, "error": ""}
            for s, v in enumerate([0.70, 0.74, 0.78])]
    rows.append({"k": 2, "delta": 0.5, "seed": 3, "error": "boom"})
    [cell] = aggregate_sweep(rows)
    assert cell["n_seeds"] == 3 and cell["n_failed"] == 1
    assert cell["macro_f1_mean"] == pytest.approx(0.74)
    # sample standard deviation: sqrt((0.04^2 + 0 + 0.04^2) / 2) = 0.04
    assert cell["macro_f1_std"] == pytest.approx(0.04)
    assert cell["macro_f1_std"] == pytest.approx(statistics.stdev([0.70, 0.74, 0.78]))


def test_sweep_failed_cell_exit_code(workspace, tmp_path):
    # k larger than the target corpus fails that cell only
    out = tmp_path / "sw"
    code = main(["sweep", *cfg(workspace), "--out", str(out), "--ks", "2,301", "--seeds", "0"])
    assert code == 1
    rows = read_csv(out / "sweep_runs.csv")
    assert [bool(r["error"]) for r in rows] == [False, True]


def test_unknown_method_is_usage_error(workspace, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", *cfg(workspace), "--out", "x", "--method", "bogus"])
    assert exc.value.code == 2


def test_unknown_method_in_config(tmp_path, capsys):
    (tmp_path / "c.cfg").write_text("method = bogus\n")
    assert main(["run", "--config", str(tmp_path / "c.cfg"), "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["type"] == "UsageError" and "bogus" in err["error"]


def test_unknown_config_key(tmp_path, capsys):
    (tmp_path / "c.cfg").write_text("learnign_rate = 0.1\n")
    assert main(["run", "--config", str(tmp_path / "c.cfg"), "--out", str(tmp_path)]) == 2
    assert "learnign_rate" in capsys.readouterr().err


def test_missing_input_is_runtime_error(tmp_path, capsys):
    code = main(["run", "--source", str(tmp_path / "nope.tsv"), "--target", str(tmp_path / "nope.tsv"),
                 "--out", str(tmp_path)])
    assert code == 1
    assert json.loads(capsys.readouterr().err.strip())["command"] == "run"


def test_both_detectors_rejected(workspace, tmp_path):
    code = main(["bucket-stats", *cfg(workspace), "--script-detector", "latin", "--out", str(tmp_path)])
    assert code == 2


def test_module_entry_point(workspace, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "codeswitch_st", "bucket-stats", *cfg(workspace),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "histogram.txt").exists()
