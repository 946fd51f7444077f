import json

import pytest

from vulngraph.config import PipelineConfig, SEED_ENV, config_keys, load_config


def test_defaults():
    cfg = PipelineConfig()
    assert cfg.model.in_dim == 1024
    assert (cfg.walk.length, cfg.walk.walks_per_node) == (20, 10)
    assert (cfg.embedding.semantic_epochs, cfg.embedding.structural_epochs) == (80, 120)
    assert (cfg.train.lr, cfg.train.batch_size, cfg.train.early_stop_patience) == (0.001, 32, 6)
    assert cfg.model.edge_dim == 32 and cfg.explain.k == 5 and cfg.filter.max_nodes == 500


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown"):
        PipelineConfig.from_dict({"modle": {}})
    with pytest.raises(ValueError, match="hiden_dim"):
        PipelineConfig.from_dict({"model": {"hiden_dim": 3}})
    with pytest.raises(ValueError, match="unknown config key"):
        PipelineConfig().with_overrides({"train.speed": 1})
    with pytest.raises(ValueError, match="version"):
        PipelineConfig.from_dict({"version": 2})


def test_in_dim_follows_embedding_dims_and_is_validated():
    cfg = PipelineConfig().with_overrides({"embedding.semantic_dim": 8, "embedding.structural_dim": 4})
    assert cfg.model.in_dim == 12
    with pytest.raises(ValueError, match="in_dim"):
        PipelineConfig.from_dict({"model": {"in_dim": 10}})


def test_load_with_file_overrides_and_env_seed(tmp_path, monkeypatch):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"version": 1, "train": {"lr": 0.01}, "protocol": {"n_runs": 3}}))
    monkeypatch.setenv(SEED_ENV, "42")
    cfg = load_config(path, {"train.batch_size": 8})
    assert cfg.train.lr == 0.01 and cfg.train.batch_size == 8
    assert cfg.protocol.n_runs == 3 and cfg.protocol.base_seed == 42
    assert load_config(path, {"protocol.base_seed": 7}).protocol.base_seed == 7
    path.write_text("[1]")
    with pytest.raises(ValueError):
        load_config(path)


def test_roundtrip_through_dict():
    cfg = PipelineConfig().with_overrides({"walk.edge_set": "metapath"})
    assert PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_config_keys_cover_every_section():
    keys = config_keys()
    assert "train.lr=0.001" in keys
    assert {k.split(".")[0] for k in keys[1:]} == {
        "model", "train", "walk", "embedding", "filter", "protocol", "explain", "paths"}


@pytest.mark.parametrize("over", [{"walk.length": 1}, {"explain.k": 0}, {"walk.edge_set": "odd"},
                                  {"protocol.n_runs": 0}, {"filter.max_nodes": 0}])
def test_section_validation(over):
    with pytest.raises(ValueError):
        PipelineConfig().with_overrides(over)
