import csv
import json

import pytest

from vulngraph.cli import main
from vulngraph.config import config_keys
from vulngraph.synthetic import STRCPY_EXAMPLE

SMALL = {
    "version": 1,
    "embedding": {"semantic_dim": 16, "structural_dim": 16, "semantic_epochs": 5, "structural_epochs": 3,
                  "window": 3, "negatives": 5},
    "walk": {"length": 8, "walks_per_node": 2},
    "model": {"hidden_dim": 16, "edge_dim": 8, "mlp_hidden": 8},
    "train": {"max_epochs": 5},
    "protocol": {"n_runs": 2},
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.json"
    cfg.write_text(json.dumps(SMALL))
    data = root / "syn.jsonl"
    assert main(["synth", "-o", str(data), "--config", str(cfg)]) == 0
    assert main(["embed", str(data), "-o", str(root / "emb"), "--config", str(cfg)]) == 0
    return root, cfg, data


def test_help_lists_every_config_key(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for key in config_keys():
        assert key in out


def test_build_cpg_continues_past_a_bad_file(tmp_path, capsys):
    good = tmp_path / "copy.c"
    good.write_text(STRCPY_EXAMPLE)
    bad = tmp_path / "bad.c"
    bad.write_text("int f( {")
    out = tmp_path / "g.jsonl"
    assert main(["build-cpg", str(bad), str(good), "-o", str(out), "--label", "1"]) == 1
    assert "bad.c" in capsys.readouterr().err
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 1 and records[0]["function"] == "copy_input" and records[0]["label"] == 1
    assert main(["ingest-validate", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["kept"] == 1 and summary["violations"] == 0


def test_ingest_validate_reports_bad_records(tmp_path, capsys):
    path = tmp_path / "x.jsonl"
    path.write_text("{oops\n")
    assert main(["ingest-validate", str(path)]) == 1
    assert json.loads(capsys.readouterr().out.strip())["record_errors"] == 1


def test_walk_file_written(workspace, tmp_path):
    _, cfg, data = workspace
    out = tmp_path / "w.txt"
    assert main(["walk", str(data), "-o", str(out), "--config", str(cfg)]) == 0
    assert out.read_text().startswith("#walks v1 L=8 R=2 seed=0")


def test_train_echoes_hyperparameters_then_predict_and_explain(workspace, tmp_path, capsys):
    root, cfg, data = workspace
    model = tmp_path / "model"
    common = ["--config", str(cfg)]
    assert main(["train", str(data), "--embeddings", str(root / "emb"), "-o", str(model), *common]) == 0
    out = capsys.readouterr().out
    assert "lr=0.001 batch=32 patience=6" in out
    assert (model / "checkpoint.bin").exists() and (model / "history.csv").exists()

    preds = tmp_path / "p.csv"
    assert main(["predict", str(data), "--model", str(model), "--embeddings", str(root / "emb"),
                 "-o", str(preds), *common]) == 0
    rows = list(csv.DictReader(preds.open()))
    assert len(rows) == 20 and all(r["predicted"] in ("0", "1") for r in rows)

    expl = tmp_path / "expl"
    assert main(["explain", str(data), "--model", str(model), "--embeddings", str(root / "emb"),
                 "-o", str(expl), "-k", "4", "--dot", *common]) == 0
    files = sorted(expl.glob("*.expl.json"))
    assert len(files) == 20
    doc = json.loads(files[0].read_text())
    assert len(doc["nodes"]) == 4 and len(doc["edges"]) == 4
    assert len(doc["provenance"]["checkpoint_sha256"]) == 64
    assert len(list(expl.glob("*.dot"))) == 20


def test_missing_artifact_names_the_producing_command(workspace, tmp_path, capsys):
    _, cfg, data = workspace
    code = main(["train", str(data), "--embeddings", str(tmp_path / "nowhere"), "--config", str(cfg)])
    assert code == 1
    assert "vulngraph embed" in capsys.readouterr().err


def test_unknown_config_key_is_an_error(workspace, capsys):
    _, _, data = workspace
    assert main(["walk", str(data), "-o", "/dev/null", "--set", "walk.speed=3"]) == 1
    assert "walk.speed" in capsys.readouterr().err


def test_evaluate_single_run(workspace, tmp_path):
    _, cfg, data = workspace
    out = tmp_path / "ev"
    assert main(["evaluate", str(data), "--runs", "1", "-o", str(out), "--config", str(cfg)]) == 0
    rows = list(csv.DictReader((out / "runs.csv").open()))
    assert len(rows) == 1
    for name in ("accuracy", "precision", "recall", "f1"):
        assert 0.0 <= float(rows[0][name]) <= 1.0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_runs"] == 1 and summary["config"]["train"]["lr"] == 0.001


@pytest.mark.parametrize("before", [True, False])
def test_shared_options_work_on_either_side_of_the_subcommand(workspace, tmp_path, before):
    _, cfg, data = workspace
    out = tmp_path / "w.txt"
    shared = ["--config", str(cfg), "--seed", "5", "--set", "walk.walks_per_node=3"]
    argv = [*shared, "walk", str(data), "-o", str(out)] if before else ["walk", str(data), "-o", str(out), *shared]
    assert main(argv) == 0
    assert out.read_text().startswith("#walks v1 L=8 R=3 seed=5")


def test_overrides_from_both_positions_combine(workspace, tmp_path):
    _, cfg, data = workspace
    out = tmp_path / "w.txt"
    assert main(["--set", "walk.length=6", "walk", str(data), "-o", str(out),
                 "--config", str(cfg), "--set", "walk.walks_per_node=1"]) == 0
    assert out.read_text().startswith("#walks v1 L=6 R=1 seed=0")
