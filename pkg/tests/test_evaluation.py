import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vulngraph.evaluation import ABLATIONS, RunResult, run_protocol, runs_csv, split, summarize, summary_json
from vulngraph.metrics import METRIC_NAMES, RunMetrics
from vulngraph.pipeline import featurize, fit_feature_model, mask_modality
from vulngraph.embedding import NodeFeatures


def test_split_sizes_and_stratification():
    labels = [1] * 13 + [0] * 90
    tr, va, te = split(labels, seed=0)
    assert (len(tr), len(va), len(te)) == (83, 10, 10)
    assert set(tr) | set(va) | set(te) == set(range(103))
    y = np.asarray(labels)
    assert y[va].sum() == 1 and y[te].sum() == 1


@settings(max_examples=100, deadline=None)
@given(st.integers(10, 200), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_split_is_a_seeded_partition(n, frac, seed):
    labels = (np.arange(n) < max(2, int(frac * n))).astype(int)
    tr, va, te = split(labels, seed)
    assert len(va) == len(te) == n // 10
    assert sorted(np.concatenate([tr, va, te]).tolist()) == list(range(n))
    assert set(labels[tr]) == {0, 1}
    again = split(labels, seed)
    assert all(np.array_equal(a, b) for a, b in zip((tr, va, te), again))


def test_split_rejects_tiny_sets():
    with pytest.raises(ValueError):
        split([0, 1] * 4, 0)


def test_summary_uses_population_std():
    runs = [RunMetrics(0.5, 0.2, 0.4, 0.3, 0.6), RunMetrics(0.7, 0.4, 0.6, 0.5, 0.8),
            RunMetrics(0.9, 0.3, 0.5, 0.4, 0.7)]
    s = summarize(runs)
    assert s.n_runs == 3
    assert s.mean["accuracy"] == pytest.approx(0.7)
    assert s.std["accuracy"] == pytest.approx((0.08 / 3) ** 0.5)
    assert s.mean["f1"] == pytest.approx(0.4)
    assert s.best["auc"] == pytest.approx(0.8)
    assert '"std_kind": "population"' in summary_json(s, {"x": 1})
    with pytest.raises(ValueError):
        summarize([])


def test_six_ablation_configurations():
    assert len(ABLATIONS) == 6
    assert {(m, e) for _, m, e in ABLATIONS} == {(m, e) for m in ("both", "semantic", "structural")
                                                 for e in (True, False)}


def test_runs_csv_format():
    text = runs_csv([RunResult(0, 5, RunMetrics(1.0, 0.5, 0.25, 1 / 3, 0.75))])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["run", "seed", *METRIC_NAMES]
    assert rows[1] == ["0", "5", "1.0000000000", "0.5000000000", "0.2500000000", "0.3333333333", "0.7500000000"]


def test_modality_mask_keeps_width():
    feats = NodeFeatures(np.ones((2, 3)), 2 * np.ones((2, 4)))
    assert not mask_modality(feats, "structural")[:, :3].any()
    assert not mask_modality(feats, "semantic")[:, 3:].any()
    assert mask_modality(feats, "both").shape == (2, 7)
    with pytest.raises(ValueError):
        mask_modality(feats, "neither")


def test_features_have_configured_width(synthetic_graphs, small_config):
    fm = fit_feature_model(synthetic_graphs[:4], small_config.walk, small_config.embedding, 0)
    inputs = featurize(synthetic_graphs[:4], fm, 0)
    assert all(gi.x.shape[1] == small_config.model.in_dim for gi in inputs)


def test_protocol_runs_are_seeded_and_bounded(synthetic_graphs, small_config):
    cfg = small_config.with_overrides({"train.max_epochs": 3, "embedding.semantic_epochs": 2,
                                       "embedding.structural_epochs": 1})
    summary, results = run_protocol(synthetic_graphs, cfg, n_runs=2, base_seed=4)
    assert [r.seed for r in results] == [4, 5]
    for r in results:
        for name in ("accuracy", "precision", "recall", "f1"):
            assert 0.0 <= getattr(r.metrics, name) <= 1.0
    _, again = run_protocol(synthetic_graphs, cfg, n_runs=2, base_seed=4)
    assert runs_csv(results) == runs_csv(again)
