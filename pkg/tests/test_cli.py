import csv

import numpy as np
import pytest

from motionsig.cli import main
from motionsig.index import load_index
from motionsig.model import load_params
from motionsig.motion_data import read_manifest

TINY = ["--hidden-size", "8", "--layers", "1", "--embedding-dim", "4", "--batch-size", "16", "--quiet"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "raw"), "--per-class", "3", "--max-length", "30", "--seed", "1",
                 "--test-performers", "p2"]) == 0
    assert main(["ingest", str(root / "raw/manifest.tsv"), "--topology", str(root / "raw/topology.txt"),
                 "--out", str(root / "data"), "--normalize"]) == 0
    d = root / "data"
    assert main(["train", str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"), "--regime", "self",
                 "--epochs", "2", "--out", str(root / "run/model.prm"), *TINY]) == 0
    assert main(["index", str(root / "run/model.prm"), str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"),
                 "--out", str(root / "run/all.idx")]) == 0
    return root


def args(ws, *rest):
    return [str(x) for x in rest]


def test_pipeline_outputs(workspace):
    d = workspace / "data"
    assert (d / "errors.txt").read_text() == ""
    assert (d / "canonical_lengths.txt").exists()
    assert len(read_manifest(d / "manifest.tsv").entries) == 24
    lock = (workspace / "run/run.lock").read_text()
    assert "command=index" in lock
    assert (workspace / "run/model.prm.log.csv").read_text().count("\n") == 3
    assert len(load_index(workspace / "run/all.idx")) == 24


def test_ingest_is_idempotent(workspace, tmp_path):
    raw = workspace / "raw"
    assert main(["ingest", str(raw / "manifest.tsv"), "--topology", str(raw / "topology.txt"),
                 "--out", str(tmp_path), "--normalize"]) == 0
    for name in ("manifest.tsv", "canonical_lengths.txt", "sequences/c0_s000.skel"):
        assert (tmp_path / name).read_bytes() == (workspace / "data" / name).read_bytes()


def test_ingest_reports_bad_files(workspace, tmp_path):
    raw = workspace / "raw"
    bad = raw / "sequences" / "broken.skel"
    bad.write_text("#skeleton v1 joints=16\n1 2 3\n")
    man = raw / "with_bad.tsv"
    man.write_text((raw / "manifest.tsv").read_text() + "sequences/broken.skel\tbroken\t0\tp0\ttrain\n")
    try:
        code = main(["ingest", str(man), "--topology", str(raw / "topology.txt"), "--out", str(tmp_path / "o")])
    finally:
        bad.unlink()
        man.unlink()
    assert code == 1
    assert (tmp_path / "o/errors.txt").read_text().startswith("broken\t")
    assert len(read_manifest(tmp_path / "o/manifest.tsv").entries) == 24


def test_missing_topology_is_usage_error(workspace, tmp_path, capsys):
    code = main(["ingest", str(workspace / "raw/manifest.tsv"), "--topology", str(tmp_path / "nope.txt"),
                 "--out", str(tmp_path / "o")])
    assert code == 1
    assert capsys.readouterr().err.startswith("ERROR:")


def test_augment_counts_and_provenance(workspace, tmp_path):
    d = workspace / "data"
    assert main(["augment", str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"),
                 "--out", str(tmp_path / "a")]) == 0
    m = read_manifest(tmp_path / "a/manifest.tsv")
    assert len(m.entries) == 3 * 24
    provs = {e.id: e.provenance for e in m.entries}
    assert provs["c0_s000"] == "original"
    assert provs["c0_s000_fast"] == "speed_double:c0_s000"
    assert provs["c0_s000_slow"] == "speed_half:c0_s000"
    assert main(["augment", str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"), "--no-speeds",
                 "--dropout", "0.2", "--seed", "3", "--out", str(tmp_path / "b")]) == 0
    assert main(["augment", str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"), "--no-speeds",
                 "--dropout", "0.2", "--seed", "3", "--out", str(tmp_path / "c")]) == 0
    m = read_manifest(tmp_path / "b/manifest.tsv")
    assert len(m.entries) == 48
    noisy = m.load(__import__("motionsig").read_topology(d / "topology.txt"))[1]
    assert noisy.id.endswith("_noisy") and noisy.missing_mask[0].sum() == 3  # round(0.2 * 16)
    assert (tmp_path / "b/manifest.tsv").read_bytes() == (tmp_path / "c/manifest.tsv").read_bytes()
    assert (tmp_path / "b/sequences/c0_s000_noisy.skel").read_bytes() == (
        tmp_path / "c/sequences/c0_s000_noisy.skel").read_bytes()


def test_train_refuses_overwrite_and_unlabeled_supervised(workspace, tmp_path):
    d = workspace / "data"
    base = [str(d / "manifest.tsv"), "--topology", str(d / "topology.txt")]
    assert main(["train", *base, "--epochs", "0", "--out", str(workspace / "run/model.prm"), *TINY]) == 1
    unl = tmp_path / "unlabeled.tsv"
    rows = [r.split("\t") for r in (d / "manifest.tsv").read_text().splitlines()]
    unl.write_text("".join("\t".join([str(d / r[0]), r[1], "-", r[3], r[4]]) + "\n" for r in rows))
    for line in (d / "sequences/c0_s000.skel").read_text().splitlines()[:1]:
        assert "label=" in line  # the file itself still carries a label
    stripped = tmp_path / "seqs"
    stripped.mkdir()
    lines = []
    for r in rows:
        text = (d / r[0]).read_text().split("\n", 1)
        head = " ".join(t for t in text[0].split() if not t.startswith("label="))
        (stripped / f"{r[1]}.skel").write_text(head + "\n" + text[1])
        lines.append("\t".join([str(stripped / f"{r[1]}.skel"), r[1], "-", r[3], r[4]]))
    unl.write_text("\n".join(lines) + "\n")
    base = [str(unl), "--topology", str(d / "topology.txt")]
    assert main(["train", *base, "--regime", "supervised", "--epochs", "1", "--out", str(tmp_path / "s.prm"), *TINY]) == 1
    assert main(["train", *base, "--regime", "self", "--epochs", "1", "--out", str(tmp_path / "u.prm"), *TINY]) == 0


def test_config_file_and_flag_precedence(workspace, tmp_path, monkeypatch):
    d = workspace / "data"
    cfg = tmp_path / "train.cfg"
    cfg.write_text("# toy\nhidden_size=8\nnum_recurrent_layers=1\nembedding_dim=6\nmax_epochs=0\nbatch_size=4\n")
    monkeypatch.setenv("DEEPHUMS_SEED", "17")
    assert main(["train", str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"), "--config", str(cfg),
                 "--embedding-dim", "5", "--out", str(tmp_path / "m.prm"), "--quiet"]) == 0
    model = load_params(tmp_path / "m.prm")
    assert model.config.embedding_dim == 5 and model.config.hidden_size == 8
    lock = (tmp_path / "run.lock").read_text().splitlines()
    assert "seed=17" in lock and "embedding_dim=5" in lock and "batch_size=4" in lock
    cfg.write_text("bogus=1\n")
    assert main(["train", str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"), "--config", str(cfg),
                 "--out", str(tmp_path / "n.prm")]) == 1


def test_training_is_reproducible(workspace, tmp_path):
    d = workspace / "data"
    for name in ("a", "b"):
        assert main(["train", str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"), "--epochs", "2",
                     "--seed", "4", "--out", str(tmp_path / name / "m.prm"), *TINY]) == 0
    assert (tmp_path / "a/m.prm").read_bytes() == (tmp_path / "b/m.prm").read_bytes()


def test_query_self_hit_and_default_k(workspace, tmp_path, capsys):
    d = workspace / "data"
    out = tmp_path / "q.csv"
    assert main(["query", str(workspace / "run/all.idx"), str(workspace / "run/model.prm"),
                 str(d / "sequences/c3_s001.skel"), "--topology", str(d / "topology.txt"), "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["rank", "id", "distance", "class_label"]
    assert len(rows) == 11
    assert rows[1][1] == "c3_s001" and float(rows[1][2]) == 0.0
    assert capsys.readouterr().out.splitlines()[0].startswith("1\tc3_s001\t0")


def test_query_malformed_file(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.skel"
    bad.write_text("not a skeleton\n")
    d = workspace / "data"
    code = main(["query", str(workspace / "run/all.idx"), str(workspace / "run/model.prm"), str(bad),
                 "--topology", str(d / "topology.txt"), "--out", str(tmp_path / "q.csv")])
    assert code == 1
    assert "ERROR:" in capsys.readouterr().err


def test_index_dim_mismatch(workspace, tmp_path):
    d = workspace / "data"
    assert main(["train", str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"), "--epochs", "0",
                 "--hidden-size", "8", "--layers", "1", "--embedding-dim", "3", "--quiet",
                 "--out", str(tmp_path / "m3.prm")]) == 0
    assert main(["query", str(workspace / "run/all.idx"), str(tmp_path / "m3.prm"), str(d / "sequences/c0_s000.skel"),
                 "--topology", str(d / "topology.txt"), "--out", str(tmp_path / "q.csv")]) == 1


def test_evaluate_outputs_and_determinism(workspace, tmp_path):
    d = workspace / "data"
    base = [str(workspace / "run/all.idx"), str(workspace / "run/model.prm"), str(d / "manifest.tsv"),
            "--topology", str(d / "topology.txt"), "--repository", str(d / "manifest.tsv")]
    assert main(["evaluate", *base, "--out", str(tmp_path / "e1")]) == 0
    assert main(["evaluate", *base, "--out", str(tmp_path / "e2")]) == 0
    for name in ("report.csv", "pr_curve.csv", "summary.txt"):
        assert (tmp_path / "e1" / name).read_bytes() == (tmp_path / "e2" / name).read_bytes()
    summary = (tmp_path / "e1/summary.txt").read_text()
    assert "top1\t" in summary and "top10\t" in summary and "mean_dtw_mm\t" in summary
    lat = (tmp_path / "e1/latency.txt").read_text()
    assert "mean_ms" in lat and "index_size\t24" in lat


def test_evaluate_empty_split_writes_headers(workspace, tmp_path):
    d = workspace / "data"
    only_train = tmp_path / "m.tsv"
    only_train.write_text("".join(l + "\n" for l in (d / "manifest.tsv").read_text().splitlines() if l.endswith("train")))
    rebased = tmp_path / "m2.tsv"
    rebased.write_text("".join(str(d) + "/" + l + "\n" for l in only_train.read_text().splitlines()))
    assert main(["evaluate", str(workspace / "run/all.idx"), str(workspace / "run/model.prm"), str(rebased),
                 "--topology", str(d / "topology.txt"), "--out", str(tmp_path / "e")]) == 0
    assert (tmp_path / "e/report.csv").read_text().count("\n") == 1
    assert "queries\t0" in (tmp_path / "e/summary.txt").read_text()


def test_submotion_train_and_query(workspace, tmp_path):
    d = workspace / "data"
    full = workspace / "run/model.prm"
    before = full.read_bytes()
    assert main(["submotion", "train", str(full), str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"),
                 "--epochs", "1", "--out", str(tmp_path / "sub.prm")]) == 0
    assert full.read_bytes() == before
    assert load_params(tmp_path / "sub.prm").submotion
    assert main(["submotion", "query", str(tmp_path / "sub.prm"), str(workspace / "run/all.idx"),
                 str(d / "sequences/c1_s000.skel"), "--topology", str(d / "topology.txt"), "-k", "5",
                 "--out", str(tmp_path / "h.csv")]) == 0
    assert len(list(csv.reader((tmp_path / "h.csv").open()))) == 6
    # a full-sequence parameter file is refused as a submotion model
    assert main(["submotion", "query", str(full), str(workspace / "run/all.idx"), str(d / "sequences/c1_s000.skel"),
                 "--topology", str(d / "topology.txt"), "--out", str(tmp_path / "h2.csv")]) == 1


def test_submotion_missing_full_params(workspace, tmp_path):
    d = workspace / "data"
    assert main(["submotion", "train", str(tmp_path / "none.prm"), str(d / "manifest.tsv"), "--topology",
                 str(d / "topology.txt"), "--out", str(tmp_path / "sub.prm")]) == 1


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 1
    assert "ERROR:" in capsys.readouterr().err


def test_divergence_exits_two(workspace, tmp_path):
    d = workspace / "data"
    assert main(["train", str(d / "manifest.tsv"), "--topology", str(d / "topology.txt"), "--epochs", "3",
                 "--lr", "1e30", "--margin", "1e30", "--out", str(tmp_path / "m.prm"), *TINY]) == 2
