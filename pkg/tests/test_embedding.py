import numpy as np
import pytest

from vulngraph.cpg import CpgNode
from vulngraph.embedding import (
    EmbeddingTable, NodeFeatures, SgnsConfig, build_features, build_vocab, context_pairs, load_embeddings,
    load_feature_cache, save_embeddings, save_feature_cache, semantic_tokens, sgns_pair_grads, sgns_pair_loss,
    train_sgns,
)
from vulngraph.frontend import build_cpg
from vulngraph.synthetic import STRCPY_EXAMPLE
from vulngraph.walks import generate_walks

import oracles


def test_number_literal_becomes_num():
    assert semantic_tokens(CpgNode(0, "NumberLiteral", "42")) == ["NumberLiteral", "NUM"]
    assert semantic_tokens(CpgNode(0, "NumberLiteral", "0x1Fu")) == ["NumberLiteral", "NUM"]


def test_call_tokens():
    toks = semantic_tokens(CpgNode(0, "CallExpression", "strcpy(buffer, input)"))
    assert toks == ["CallExpression", "strcpy", "(", "buffer", ",", "input", ")"]


def test_identifier_digits_are_kept():
    assert semantic_tokens(CpgNode(0, "Identifier", "buf2")) == ["Identifier", "buf2"]


def test_vocab_order_and_min_count():
    vocab = build_vocab([["b", "a", "b"], ["c", "a", "b"]], min_count=2)
    assert vocab.itos == ["b", "a"]
    assert "c" not in vocab
    with pytest.raises(ValueError):
        build_vocab([])


def test_context_pairs_window():
    pairs = context_pairs([[0, 1, 2]], window=1)
    assert sorted(map(tuple, pairs)) == [(0, 1), (1, 0), (1, 2), (2, 1)]


def test_sgns_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    v, u, neg = rng.standard_normal(6), rng.standard_normal(6), rng.standard_normal((4, 6))
    gv, gu, gn = sgns_pair_grads(v, u, neg)
    for arr, analytic in ((v, gv), (u, gu), (neg, gn)):
        numeric = oracles.central_difference(lambda: sgns_pair_loss(v, u, neg), arr)
        assert oracles.rel_err(analytic, numeric).max() < 1e-6


def test_clusters_separate():
    rng = np.random.default_rng(1)
    corpus = []
    for _ in range(300):
        corpus.append(list(rng.permutation(["a", "b", "a2", "b2"])))
        corpus.append(list(rng.permutation(["x", "y", "x2", "y2"])))
    table = train_sgns(corpus, SgnsConfig(dim=16, window=3, epochs=15, negatives=5, seed=0))

    def cos(p, q):
        a, b = table.lookup(p), table.lookup(q)
        return a @ b / (np.linalg.norm(a) * np.linalg.norm(b))

    assert cos("a", "b") > cos("a", "x")
    assert cos("x", "y") > cos("x", "b")
    assert table.loss_history[-1] < table.loss_history[0]


def test_training_is_deterministic_and_dim_honoured():
    corpus = [["p", "q", "r", "s"]] * 20
    a = train_sgns(corpus, SgnsConfig(dim=512, epochs=2, seed=4))
    b = train_sgns(corpus, SgnsConfig(dim=512, epochs=2, seed=4))
    assert a.dim == 512
    assert np.array_equal(a.input_vectors, b.input_vectors)


def test_unknown_token_is_zero_vector():
    table = train_sgns([["a", "b"]], SgnsConfig(dim=4, epochs=1))
    assert np.array_equal(table.lookup("zzz"), np.zeros(4))


def test_fused_dimension_and_order():
    g = build_cpg(STRCPY_EXAMPLE)
    walks = generate_walks(g, L=5, R=2, rng=0)
    sem = train_sgns([semantic_tokens(n) for n in g.nodes], SgnsConfig(dim=6, epochs=2))
    strc = train_sgns([[t.render() for t in w.tokens] for w in walks], SgnsConfig(dim=4, epochs=2))
    feats = build_features(g, walks, sem, strc)
    assert feats.fused.shape == (g.num_nodes, 10)
    assert np.array_equal(feats.fused[:, :6], feats.semantic)
    with pytest.raises(ValueError, match="in_dim"):
        build_features(g, walks, sem, strc, expected_dim=12)
    assert NodeFeatures(np.zeros((1, 512)), np.zeros((1, 512))).fused.shape == (1, 1024)


def test_structural_tokens_attributed_to_step_source():
    g = build_cpg(STRCPY_EXAMPLE)
    walks = generate_walks(g, L=5, R=2, rng=0)
    strc = train_sgns([[t.render() for t in w.tokens] for w in walks], SgnsConfig(dim=4, epochs=1))
    sem = train_sgns([semantic_tokens(n) for n in g.nodes], SgnsConfig(dim=4, epochs=1))
    untouched = {n.id for n in g.nodes} - {s for w in walks for s in w.step_sources}
    feats = build_features(g, walks, sem, strc)
    row = g.index()
    for nid in untouched:
        assert not feats.structural[row[nid]].any()


def test_embedding_file_roundtrip(tmp_path):
    table = train_sgns([["a", "b", "c"]] * 3, SgnsConfig(dim=5, epochs=2))
    save_embeddings(tmp_path / "e.vec", table)
    first = (tmp_path / "e.vec").read_text().splitlines()[0]
    assert first == "3 5"
    loaded = load_embeddings(tmp_path / "e.vec")
    assert loaded.vocab.itos == table.vocab.itos
    assert np.array_equal(loaded.input_vectors, table.input_vectors)


def test_feature_cache_roundtrip(tmp_path):
    feats = {"0:f": np.arange(6, dtype=np.float64).reshape(2, 3), "1:g": np.ones((1, 3))}
    save_feature_cache(tmp_path / "c.bin", feats)
    back = load_feature_cache(tmp_path / "c.bin")
    assert list(back) == list(feats)
    for k in feats:
        assert np.array_equal(back[k], feats[k])
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_feature_cache(tmp_path / "bad.bin")


def test_empty_pairs_returns_initial_table():
    table = train_sgns([["solo"]], SgnsConfig(dim=3, epochs=3))
    assert isinstance(table, EmbeddingTable) and table.loss_history == []
