"""Knowledge graph store: loading, indexing, k-hop sub-graphs, lookups.

The graph is a labelled undirected multi-graph. Facts are (subject,
relation, object) triples; literal objects ("7.8", "friday") are interned
as entity nodes so neighborhood queries and lookups treat them uniformly.
Entity and relation identifiers are dense integers in separate id spaces,
assigned in first-appearance order while loading.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class KgError(Exception):
    pass


class KgParseError(KgError):
    pass


class NotFoundError(KgError):
    pass


def normalize_label(label: str) -> str:
    """Canonical label form: lowercased, inner whitespace collapsed to underscores."""
    return "_".join(label.strip().lower().split())


def label_tokens(label: str) -> list[str]:
    """Split a canonical label into surface tokens (underscores separate words)."""
    return [t for t in label.replace("_", " ").split() if t]


@dataclass(frozen=True)
class Triple:
    subject: int
    relation: int
    object: int


@dataclass
class KnowledgeGraph:
    entity_labels: list[str] = field(default_factory=list)
    relation_labels: list[str] = field(default_factory=list)
    triples: list[Triple] = field(default_factory=list)
    # label -> id, the inverse of the label lists
    entity_ids: dict[str, int] = field(default_factory=dict)
    relation_ids: dict[str, int] = field(default_factory=dict)
    # entity id -> list of (triple index); undirected, so both endpoints index a triple
    _incidence: dict[int, list[int]] = field(default_factory=dict)
    # (subject, relation) -> sorted object ids
    _sp_index: dict[tuple[int, int], list[int]] = field(default_factory=dict)

    @property
    def num_entities(self) -> int:
        return len(self.entity_labels)

    @property
    def num_relations(self) -> int:
        return len(self.relation_labels)

    def entity_label(self, e: int) -> str:
        if not 0 <= e < len(self.entity_labels):
            raise NotFoundError(f"unknown entity id {e}")
        return self.entity_labels[e]

    def relation_label(self, r: int) -> str:
        if not 0 <= r < len(self.relation_labels):
            raise NotFoundError(f"unknown relation id {r}")
        return self.relation_labels[r]

    def entity_id(self, label: str) -> int:
        key = normalize_label(label)
        if key not in self.entity_ids:
            raise NotFoundError(f"unknown entity label {label!r}")
        return self.entity_ids[key]

    def relation_id(self, label: str) -> int:
        key = normalize_label(label)
        if key not in self.relation_ids:
            raise NotFoundError(f"unknown relation label {label!r}")
        return self.relation_ids[key]

    def _intern_entity(self, label: str) -> int:
        eid = self.entity_ids.get(label)
        if eid is None:
            eid = len(self.entity_labels)
            self.entity_ids[label] = eid
            self.entity_labels.append(label)
            self._incidence[eid] = []
        return eid

    def _intern_relation(self, label: str) -> int:
        rid = self.relation_ids.get(label)
        if rid is None:
            rid = len(self.relation_labels)
            self.relation_ids[label] = rid
            self.relation_labels.append(label)
        return rid

    def add_triple(self, subject: str, relation: str, obj: str) -> None:
        s = self._intern_entity(normalize_label(subject))
        r = self._intern_relation(normalize_label(relation))
        o = self._intern_entity(normalize_label(obj))
        t = Triple(s, r, o)
        key = (s, r)
        if key in self._sp_index and o in self._sp_index[key]:
            return  # duplicate fact
        idx = len(self.triples)
        self.triples.append(t)
        self._incidence[s].append(idx)
        if o != s:
            self._incidence[o].append(idx)
        self._sp_index.setdefault(key, []).append(o)
        self._sp_index[key].sort()

    def neighbors(self, e: int) -> set[int]:
        """Entity ids one hop from e (undirected)."""
        if e not in self._incidence:
            raise NotFoundError(f"unknown entity id {e}")
        out = set()
        for idx in self._incidence[e]:
            t = self.triples[idx]
            out.add(t.object if t.subject == e else t.subject)
        out.discard(e)
        return out

    def lookup(self, e: int, r: int) -> set[str]:
        """Labels of all objects o with (e, r, o) stored; empty set if none."""
        return {self.entity_labels[o] for o in self._sp_index.get((e, r), [])}

    def objects_of(self, e: int) -> set[str]:
        """All object labels of triples with subject e."""
        out = set()
        for idx in self._incidence.get(e, []):
            t = self.triples[idx]
            if t.subject == e:
                out.add(self.entity_labels[t.object])
        return out


@dataclass
class SubGraph:
    """k-hop neighborhood of a center entity.

    The combined index places node rows first (ascending entity id), then
    one row per edge instance (triples with both endpoints inside the node
    set, sorted by (relation, subject, object)). Adjacency is the bipartite
    incidence expansion: an edge row is adjacent to its two endpoint node
    rows; node rows are not directly adjacent to each other.
    """

    center: int
    radius: int
    node_ids: list[int]
    edges: list[Triple]

    @property
    def edge_ids(self) -> list[int]:
        return [t.relation for t in self.edges]

    @property
    def index_size(self) -> int:
        return len(self.node_ids) + len(self.edges)

    def relation_set(self) -> set[int]:
        return {t.relation for t in self.edges}

    def adjacency(self) -> np.ndarray:
        n = len(self.node_ids)
        size = self.index_size
        node_row = {e: i for i, e in enumerate(self.node_ids)}
        a = np.zeros((size, size), dtype=np.float64)
        for j, t in enumerate(self.edges):
            row = n + j
            for endpoint in (t.subject, t.object):
                i = node_row[endpoint]
                a[row, i] = 1.0
                a[i, row] = 1.0
        return a

    def element_labels(self, kg: KnowledgeGraph) -> list[str]:
        """Label per combined-index row: node labels then edge labels."""
        return [kg.entity_label(e) for e in self.node_ids] + [
            kg.relation_label(t.relation) for t in self.edges
        ]

    def relation_scores(self, scores: np.ndarray) -> dict[int, float]:
        """Max score per relation id over its edge rows, from a combined-index vector."""
        n = len(self.node_ids)
        out: dict[int, float] = {}
        for j, t in enumerate(self.edges):
            s = float(scores[n + j])
            if t.relation not in out or s > out[t.relation]:
                out[t.relation] = s
        return out

    def dump(self) -> str:
        """Adjacency-list text dump for debugging."""
        lines = [f"center={self.center} k={self.radius} nodes={len(self.node_ids)} edges={len(self.edges)}"]
        for t in self.edges:
            lines.append(f"{t.subject}\t{t.relation}\t{t.object}")
        return "\n".join(lines)


def load_kg(path) -> KnowledgeGraph:
    """Load a UTF-8, tab-separated triple file (one subject\\trelation\\tobject per line).

    Labels are normalized (lowercased, underscores preserved); duplicate
    triples are deduplicated silently; blank lines are skipped.
    """
    kg = KnowledgeGraph()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or any(not p.strip() for p in parts):
                raise KgParseError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            kg.add_triple(*parts)
    return kg


def k_hop_subgraph(kg: KnowledgeGraph, e: int, k: int) -> SubGraph:
    """Nodes within distance k of e, plus all edges among them.

    Node and edge orderings are deterministic (ascending ids) so the
    Laplacian matrices are reproducible across runs.
    """
    if not 0 <= e < kg.num_entities:
        raise NotFoundError(f"unknown entity id {e}")
    if k < 0:
        raise ValueError("k must be >= 0")
    frontier = {e}
    seen = {e}
    for _ in range(k):
        nxt = set()
        for node in frontier:
            nxt |= kg.neighbors(node) - seen
        seen |= nxt
        frontier = nxt
        if not frontier:
            break
    nodes = sorted(seen)
    node_set = set(nodes)
    edges = sorted(
        {t for t in kg.triples if t.subject in node_set and t.object in node_set},
        key=lambda t: (t.relation, t.subject, t.object),
    )
    return SubGraph(center=e, radius=k, node_ids=nodes, edges=edges)
