"""Metrics (corpus BLEU, exact-match METEOR, KG-node Entity F1) and reports."""

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .data import Dialogue
from .kg import KnowledgeGraph, NotFoundError, SubGraph, k_hop_subgraph, label_tokens

logger = logging.getLogger(__name__)


# -- BLEU -------------------------------------------------------------------

def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates: list[list[str]], references: list[list[str]], max_n: int = 4) -> float:
    """Corpus BLEU: geometric mean of modified n-gram precisions (n=1..4)
    times the brevity penalty, on a 0-100 scale."""
    if len(candidates) != len(references):
        raise ValueError("candidate/reference lists must align")
    clipped = [0] * max_n
    totals = [0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            cg = _ngrams(cand, n)
            rg = _ngrams(ref, n)
            totals[n - 1] += sum(cg.values())
            clipped[n - 1] += sum(min(c, rg[g]) for g, c in cg.items())
    if cand_len == 0:
        return 0.0
    precisions = []
    for c, t in zip(clipped, totals):
        if t == 0 or c == 0:
            return 0.0
        precisions.append(c / t)
    log_avg = sum(math.log(p) for p in precisions) / max_n
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_avg)


# -- METEOR (exact-match stage only) ---------------------------------------

def _align(cand: list[str], ref: list[str]) -> tuple[int, int]:
    """Exact unigram alignment; returns (matches, chunks).

    Candidate tokens match unused reference occurrences, preferring the
    position right after the previous match to keep the chunk count low.
    """
    used = [False] * len(ref)
    matches = 0
    chunks = 0
    prev_ref = -2
    for tok in cand:
        choice = -1
        for j, r in enumerate(ref):
            if used[j] or r != tok:
                continue
            if j == prev_ref + 1:
                choice = j
                break
            if choice < 0:
                choice = j
        if choice < 0:
            prev_ref = -2
            continue
        used[choice] = True
        matches += 1
        if choice != prev_ref + 1:
            chunks += 1
        prev_ref = choice
    return matches, chunks


def meteor_sentence(cand: list[str], ref: list[str]) -> float:
    m, chunks = _align(cand, ref)
    if m == 0:
        return 0.0
    p = m / len(cand)
    r = m / len(ref)
    f_mean = 10 * p * r / (r + 9 * p)
    # a single contiguous chunk is unfragmented: no penalty
    penalty = 0.0 if chunks <= 1 else 0.5 * (chunks / m) ** 3
    return f_mean * (1.0 - penalty)


def meteor(candidates: list[list[str]], references: list[list[str]]) -> float:
    if len(candidates) != len(references):
        raise ValueError("candidate/reference lists must align")
    if not candidates:
        return 0.0
    return 100.0 * sum(meteor_sentence(c, r) for c, r in zip(candidates, references)) / len(candidates)


# -- Entity F1 --------------------------------------------------------------

def entity_f1(predicted: set[str], gold: set[str]) -> float:
    """Set F1 between predicted and gold KG-node answers for one question.

    Both empty counts as a perfect (vacuous) answer; such questions are
    normally excluded from the corpus mean upstream.
    """
    if not gold and not predicted:
        return 1.0
    if not gold or not predicted:
        return 0.0
    tp = len(predicted & gold)
    if tp == 0:
        return 0.0
    p = tp / len(predicted)
    r = tp / len(gold)
    return 2 * p * r / (p + r)


def extract_objects(surface: list[str], sub: SubGraph, kg: KnowledgeGraph) -> set[str]:
    """Longest-match scan of the response against the sub-graph's node labels.

    Restricting candidates to the predicted entity's sub-graph keeps
    incidental word overlaps from counting as KG answers.
    """
    spans: dict[tuple[str, ...], str] = {}
    for e in sub.node_ids:
        label = kg.entity_label(e)
        spans[tuple(label_tokens(label))] = label
        spans[(label,)] = label
    ordered = sorted(spans.items(), key=lambda x: (-len(x[0]), x[0]))
    found: set[str] = set()
    i = 0
    while i < len(surface):
        for span, label in ordered:
            n = len(span)
            if n and tuple(surface[i:i + n]) == span:
                found.add(label)
                i += n
                break
        else:
            i += 1
    return found


def gold_objects(kg: KnowledgeGraph, entity: int | None, relations: set[int]) -> set[str]:
    if entity is None:
        return set()
    out: set[str] = set()
    for r in relations:
        out |= kg.lookup(entity, r)
    return out


# -- model evaluation -------------------------------------------------------

@dataclass
class ExampleRecord:
    dialogue_id: str
    query: str
    reference: str
    predicted: str
    intermediate: str
    gold_entity: str | None
    predicted_entity: str
    gold_objects: list[str]
    predicted_objects: list[str]
    f1: float | None


@dataclass
class EvalReport:
    bleu: float
    entity_f1: float
    meteor: float
    entity_accuracy: float | None
    num_examples: int
    num_kg_grounded: int
    records: list[ExampleRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "bleu": self.bleu, "entity_f1": self.entity_f1, "meteor": self.meteor,
            "entity_accuracy": self.entity_accuracy,
            "num_examples": self.num_examples, "num_kg_grounded": self.num_kg_grounded,
            "records": [asdict(r) for r in self.records],
        }


def iter_examples(dialogues: list[Dialogue]):
    """(dialogue, history texts, query, system turn) for every answerable turn."""
    for d in dialogues:
        history: list[list[str]] = []
        for prev, turn in zip(d.turns, d.turns[1:]):
            if prev.speaker == "user" and turn.speaker == "system":
                yield d, list(history), prev.text, turn
            history.append(prev.text)


def evaluate_model(model, dialogues: list[Dialogue], beam_width: int | None = None) -> EvalReport:
    kg: KnowledgeGraph = model.kg
    cands, refs = [], []
    f1s = []
    ent_hits, ent_total = 0, 0
    records = []
    for d, history, query, turn in iter_examples(dialogues):
        result = model.generate_response(history, query, beam_width=beam_width)
        cands.append(result.surface)
        refs.append(turn.text)
        grounded = bool(turn.gold_relations) and turn.gold_entity is not None
        f1 = None
        gold = set()
        predicted = set()
        if grounded:
            # gold objects come from the reference surface by the same
            # longest-match scan used for predictions, so reproducing the
            # reference exactly scores 1.0
            gold_sub = k_hop_subgraph(kg, turn.gold_entity, model.config.k)
            gold = extract_objects(turn.text, gold_sub, kg)
            sub = k_hop_subgraph(kg, result.entity, model.config.k)
            predicted = extract_objects(result.surface, sub, kg)
            f1 = entity_f1(predicted, gold)
            f1s.append(f1)
        if turn.gold_entity is not None:
            ent_total += 1
            ent_hits += int(result.entity == turn.gold_entity)
        records.append(ExampleRecord(
            dialogue_id=d.id, query=" ".join(query), reference=" ".join(turn.text),
            predicted=" ".join(result.surface), intermediate=" ".join(result.intermediate),
            gold_entity=kg.entity_label(turn.gold_entity) if turn.gold_entity is not None else None,
            predicted_entity=result.entity_label,
            gold_objects=sorted(gold), predicted_objects=sorted(predicted), f1=f1))
    return EvalReport(
        bleu=bleu(cands, refs) if cands else 0.0,
        entity_f1=100.0 * sum(f1s) / len(f1s) if f1s else 0.0,
        meteor=meteor(cands, refs) if cands else 0.0,
        entity_accuracy=(100.0 * ent_hits / ent_total) if ent_total else None,
        num_examples=len(cands), num_kg_grounded=len(f1s), records=records)


def write_report(report: EvalReport, outdir, figures: bool = True) -> Path:
    """report.json plus a tab-delimited per-example dump and summary figures."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(json.dumps(report.to_json(), indent=2))
    with open(outdir / "examples.tsv", "w", encoding="utf-8") as fh:
        fh.write("dialogue_id\tquery\treference\tpredicted\tintermediate\t"
                 "gold_entity\tpredicted_entity\tgold_objects\tpredicted_objects\tf1\n")
        for r in report.records:
            fh.write("\t".join([
                r.dialogue_id, r.query, r.reference, r.predicted, r.intermediate,
                r.gold_entity or "", r.predicted_entity,
                ",".join(r.gold_objects), ",".join(r.predicted_objects),
                "" if r.f1 is None else f"{r.f1:.4f}"]) + "\n")
    if figures:
        from .plotting import plot_eval_report
        plot_eval_report(report, outdir)
    return outdir / "report.json"


# -- relation linking accuracy ---------------------------------------------

def load_linking_tsv(path) -> list[tuple[str, str, str]]:
    """Rows of (query, entity label, gold relation label)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            rows.append(tuple(parts))
    return rows


def relation_link_accuracy(linker, kg: KnowledgeGraph,
                           rows: list[tuple[str, str, str]]) -> float:
    """Top-1 accuracy of a linker(query_tokens, kg, entity_id) -> ranked
    [(relation_id, score)]. Rows with unknown entities count as incorrect."""
    if not rows:
        return 0.0
    hits = 0
    for query, entity_label, gold_relation in rows:
        try:
            e = kg.entity_id(entity_label)
            gold = kg.relation_id(gold_relation)
        except NotFoundError:
            logger.warning("linking row skipped as incorrect: %r / %r", entity_label, gold_relation)
            continue
        ranked = linker(query.split(), kg, e)
        if ranked and ranked[0][0] == gold:
            hits += 1
    return hits / len(rows)
