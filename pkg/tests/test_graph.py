import random

import numpy as np
import pytest

from kgdial.data import build_vocab
from kgdial.embeddings import WordEmbeddings
from kgdial.graph import (empty_gate, feature_similarity, graph_encode,
                          project_gate, relation_link, relation_link_baseline)
from kgdial.kg import k_hop_subgraph

from conftest import build_kg
from fixture_data import make_linking_fixture


def _random_subgraph(rng, n_nodes=8, n_edges=12, n_rels=4):
    triples = [(f"n{rng.randrange(n_nodes)}", f"r{rng.randrange(n_rels)}",
                f"n{rng.randrange(n_nodes)}") for _ in range(n_edges)]
    kg = build_kg(triples)
    return kg, k_hop_subgraph(kg, rng.randrange(kg.num_entities), rng.randint(1, 3))


def test_uniform_fixed_point():
    rng = random.Random(5)
    for _ in range(100):
        _, sub = _random_subgraph(rng)
        ones = np.ones(sub.index_size)
        assert np.array_equal(graph_encode(sub, ones), ones)


def test_linearity():
    rng = random.Random(6)
    npr = np.random.default_rng(6)
    for _ in range(50):
        _, sub = _random_subgraph(rng)
        f = npr.normal(size=sub.index_size)
        g = npr.normal(size=sub.index_size)
        a, b = npr.normal(), npr.normal()
        lhs = graph_encode(sub, a * f + b * g)
        rhs = a * graph_encode(sub, f) + b * graph_encode(sub, g)
        assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_graph_encode_star_matrix_oracle():
    # star: center e, edges r1->o1, r2->o2; index = [e, o1, o2, r1, r2]
    kg = build_kg([("e", "r1", "o1"), ("e", "r2", "o2")])
    sub = k_hop_subgraph(kg, kg.entity_id("e"), 1)
    assert sub.node_ids == sorted([kg.entity_id("e"), kg.entity_id("o1"), kg.entity_id("o2")])
    f = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    a = sub.adjacency()
    a_tilde = a + np.eye(5)
    d_inv = np.diag(1.0 / a_tilde.sum(axis=1))
    expected = d_inv @ a_tilde @ f
    assert np.allclose(graph_encode(sub, f), expected)


def test_graph_encode_dimension_mismatch():
    kg = build_kg([("e", "r", "o")])
    sub = k_hop_subgraph(kg, kg.entity_id("e"), 1)
    with pytest.raises(ValueError):
        graph_encode(sub, np.ones(sub.index_size + 1))


def test_feature_similarity_self_label():
    kg = build_kg([("director film", "directed_by", "someone")])
    # single node at k=0 whose label tokens are exactly the query
    sub = k_hop_subgraph(kg, kg.entity_id("director film"), 0)
    emb = WordEmbeddings({"director": np.array([1.0, 2.0, 0.5]),
                          "film": np.array([-1.0, 0.3, 2.0])})
    f = feature_similarity(["director", "film"], sub, kg, emb)
    assert abs(f[0] - 1.0) < 1e-6


def test_feature_similarity_oov_is_zero():
    kg = build_kg([("e", "r", "o")])
    sub = k_hop_subgraph(kg, kg.entity_id("e"), 1)
    emb = WordEmbeddings({"unrelated": np.array([1.0, 0.0])})
    f = feature_similarity(["unrelated"], sub, kg, emb)
    assert np.array_equal(f, np.zeros(sub.index_size))


def test_feature_similarity_hand_computed():
    emb = WordEmbeddings({
        "director": np.array([1.0, 0.0, 0.0]),
        "film": np.array([0.0, 1.0, 0.0]),
        "directed": np.array([0.8, 0.1, 0.0]),
        "by": np.array([0.2, 0.2, 0.2]),
        "rating": np.array([0.0, 0.0, 1.0]),
    })
    kg = build_kg([("movie", "directed_by", "x"), ("movie", "rating", "y")])
    sub = k_hop_subgraph(kg, kg.entity_id("movie"), 1)
    query = ["director", "film"]
    f = feature_similarity(query, sub, kg, emb)
    q = (emb.vectors["director"] + emb.vectors["film"]) / 2
    db = (emb.vectors["directed"] + emb.vectors["by"]) / 2
    n = len(sub.node_ids)
    exp_db = float(q @ db / (np.linalg.norm(q) * np.linalg.norm(db)))
    exp_rating = float(q @ emb.vectors["rating"] /
                       (np.linalg.norm(q) * np.linalg.norm(emb.vectors["rating"])))
    idx = {r: j for j, r in enumerate(sub.edge_ids)}
    assert abs(f[n + idx[kg.relation_id("directed_by")]] - exp_db) < 1e-12
    assert abs(f[n + idx[kg.relation_id("rating")]] - exp_rating) < 1e-12


def _avatar_fixture():
    kg = build_kg([
        ("avatar", "directed_by", "james_cameron"),
        ("avatar", "rating", "8.0"),
        ("avatar", "release_year", "2009"),
        ("avatar", "starring", "sam_worthington"),
    ])
    emb = WordEmbeddings({
        "director": np.array([1.0, 0.1, 0.0, 0.0]),
        "directed": np.array([0.9, 0.1, 0.0, 0.1]),
        "by": np.array([0.3, 0.3, 0.3, 0.3]),
        "rated": np.array([0.0, 1.0, 0.1, 0.0]),
        "rating": np.array([0.1, 0.9, 0.0, 0.0]),
        "release": np.array([0.0, 0.0, 1.0, 0.0]),
        "year": np.array([0.0, 0.1, 0.9, 0.0]),
        "starring": np.array([0.0, 0.0, 0.0, 1.0]),
        "who": np.array([0.2, 0.0, 0.0, 0.1]),
        "how": np.array([0.0, 0.2, 0.0, 0.0]),
        "was": np.array([0.1, 0.1, 0.1, 0.1]),
        "it": np.array([0.1, 0.1, 0.1, 0.1]),
        "the": np.array([0.1, 0.1, 0.1, 0.1]),
        "is": np.array([0.1, 0.1, 0.1, 0.1]),
        "of": np.array([0.1, 0.1, 0.1, 0.1]),
        "and": np.array([0.1, 0.1, 0.1, 0.1]),
    })
    query = "who is the director of avatar and how was it rated".split()
    return kg, emb, query


def test_movie_question_scores_relevant_relations_higher():
    kg, emb, query = _avatar_fixture()
    ranked = relation_link(query, kg, kg.entity_id("avatar"), 2, emb)
    top2 = {kg.relation_label(r) for r, _ in ranked[:2]}
    assert top2 == {"directed_by", "rating"}
    scores = dict(ranked)
    floor = max(scores[kg.relation_id("release_year")], scores[kg.relation_id("starring")])
    assert scores[kg.relation_id("directed_by")] > floor
    assert scores[kg.relation_id("rating")] > floor


def test_relation_link_single_relation():
    kg = build_kg([("e", "only_rel", "o")])
    emb = WordEmbeddings({"anything": np.array([1.0, 0.0])})
    ranked = relation_link(["anything"], kg, kg.entity_id("e"), 2, emb)
    assert [r for r, _ in ranked] == [kg.relation_id("only_rel")]


def test_relation_link_scale_invariant():
    kg, emb, query = _avatar_fixture()
    ranked = relation_link(query, kg, kg.entity_id("avatar"), 2, emb)
    scaled = WordEmbeddings({k: 3.7 * v for k, v in emb.vectors.items()})
    ranked2 = relation_link(query, kg, kg.entity_id("avatar"), 2, scaled)
    assert [r for r, _ in ranked] == [r for r, _ in ranked2]


def test_linking_beats_no_propagation_baseline():
    kg, emb, rows = make_linking_fixture(n_questions=200)
    from kgdial.evaluation import relation_link_accuracy
    lap = relation_link_accuracy(lambda q, g, e: relation_link(q, g, e, 1, emb), kg, rows)
    base = relation_link_accuracy(lambda q, g, e: relation_link_baseline(q, g, e, 1, emb), kg, rows)
    assert lap > base


def _tiny_vocab(kg, dialogues=()):
    return build_vocab(list(dialogues), kg)


def test_project_gate_masking_contract():
    kg = build_kg([("movie", "directed_by", "x"), ("movie", "rating", "y"),
                   ("team", "coach", "z")])
    vocab = _tiny_vocab(kg)
    sub = k_hop_subgraph(kg, kg.entity_id("x"), 1)  # only directed_by nearby
    g = np.ones(sub.index_size)
    gate = project_gate(g, sub, vocab)
    assert gate[vocab.token_id("r:rating")] == 0.0
    assert gate[vocab.token_id("r:coach")] == 0.0
    assert gate[vocab.token_id("r:directed_by")] > 0.0
    assert np.array_equal(gate[:vocab.v_o], np.ones(vocab.v_o))


def test_empty_gate():
    kg = build_kg([("a", "r1", "b")])
    vocab = _tiny_vocab(kg)
    gate = empty_gate(vocab)
    assert np.array_equal(gate[:vocab.v_o], np.ones(vocab.v_o))
    assert np.array_equal(gate[vocab.v_o:], np.zeros(vocab.v_kg))


def test_gate_nonzero_positions_match_subgraph_relations():
    rng = random.Random(9)
    for _ in range(10):
        triples = [(f"n{rng.randrange(12)}", f"r{rng.randrange(10)}", f"n{rng.randrange(12)}")
                   for _ in range(20)]
        kg = build_kg(triples)
        vocab = _tiny_vocab(kg)
        sub = k_hop_subgraph(kg, rng.randrange(kg.num_entities), 2)
        gate = project_gate(np.ones(sub.index_size), sub, vocab)
        nonzero = {r for r in range(kg.num_relations)
                   if gate[vocab.relation_token_position(r)] > 0}
        assert nonzero == sub.relation_set()


def test_gate_negative_scores_clamped():
    kg = build_kg([("e", "r1", "o")])
    vocab = _tiny_vocab(kg)
    sub = k_hop_subgraph(kg, kg.entity_id("e"), 1)
    gate = project_gate(-np.ones(sub.index_size), sub, vocab)
    assert gate[vocab.token_id("r:r1")] == 0.0
