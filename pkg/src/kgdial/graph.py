"""Laplacian sub-graph encoding, vocabulary gating, and relation linking.

One propagation step over the sub-graph's combined node+edge index:
G = D^-1 (A + I) f, with A the bipartite incidence adjacency, f the
query/label cosine-similarity feature vector, and D the degree matrix of
A + I. Relation rows of G gate the relation segment of the decoder's
output vocabulary; word positions stay at 1 so non-KG decoding is
untouched.
"""

import numpy as np

from .data import Vocabulary
from .embeddings import WordEmbeddings, cosine
from .kg import KnowledgeGraph, SubGraph, k_hop_subgraph


def feature_similarity(query_tokens: list[str], sub: SubGraph, kg: KnowledgeGraph,
                       embeddings: WordEmbeddings) -> np.ndarray:
    """Cosine similarity between the averaged query embedding and each
    sub-graph element's averaged label embedding; 0 where either side is
    fully out of vocabulary."""
    q = embeddings.mean_vector(query_tokens)
    values = np.zeros(sub.index_size, dtype=np.float64)
    if q is None:
        return values
    for i, label in enumerate(sub.element_labels(kg)):
        v = embeddings.label_vector(label)
        if v is not None:
            values[i] = cosine(q, v)
    return values


def graph_encode(sub: SubGraph, f: np.ndarray) -> np.ndarray:
    """One-step propagation D^-1 (A + I) f over the combined index."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (sub.index_size,):
        raise ValueError(f"feature vector length {f.shape} != index size {sub.index_size}")
    a_tilde = sub.adjacency() + np.eye(sub.index_size)
    degrees = a_tilde.sum(axis=1)
    return (a_tilde @ f) / degrees


def project_gate(g: np.ndarray, sub: SubGraph, vocab: Vocabulary) -> np.ndarray:
    """Vocabulary-length gate: 1 at word positions, the relation's maximum
    propagated score (clamped nonnegative) at in-sub-graph relation
    positions, exactly 0 elsewhere in the relation segment."""
    gate = np.zeros(vocab.size, dtype=np.float64)
    gate[:vocab.v_o] = 1.0
    if g is None:
        scores = {r: 1.0 for r in sub.relation_set()}
    else:
        scores = sub.relation_scores(np.asarray(g, dtype=np.float64))
    for r, s in scores.items():
        gate[vocab.relation_token_position(r)] = max(s, 0.0)
    return gate


def empty_gate(vocab: Vocabulary) -> np.ndarray:
    """Gate for an empty sub-graph: every relation position masked out."""
    gate = np.zeros(vocab.size, dtype=np.float64)
    gate[:vocab.v_o] = 1.0
    return gate


def score_subgraph(query_tokens: list[str], sub: SubGraph, kg: KnowledgeGraph,
                   embeddings: WordEmbeddings | None) -> np.ndarray:
    """Full scoring path: similarity features then propagation. Without an
    embedding table the features default to all-ones (pure masking)."""
    if embeddings is None:
        f = np.ones(sub.index_size, dtype=np.float64)
    else:
        f = feature_similarity(query_tokens, sub, kg, embeddings)
    return graph_encode(sub, f)


def relation_link(query_tokens: list[str], kg: KnowledgeGraph, e: int, k: int,
                  embeddings: WordEmbeddings) -> list[tuple[int, float]]:
    """Rank the k-hop sub-graph's relations by propagated score, descending;
    ties broken by ascending relation id."""
    sub = k_hop_subgraph(kg, e, k)
    g = score_subgraph(query_tokens, sub, kg, embeddings)
    scores = sub.relation_scores(g)
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def relation_link_baseline(query_tokens: list[str], kg: KnowledgeGraph, e: int, k: int,
                           embeddings: WordEmbeddings) -> list[tuple[int, float]]:
    """No-propagation baseline: rank by raw query/label embedding similarity."""
    sub = k_hop_subgraph(kg, e, k)
    f = feature_similarity(query_tokens, sub, kg, embeddings)
    scores = sub.relation_scores(f)
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
