"""Dialogue corpora, the two-segment vocabulary, and (de/re)lexicalization.

Corpus interchange format: JSON Lines, one document per dialogue:

    {"id": "...", "domain": "in-car", "turns": [
        {"speaker": "user", "text": "who directed titanic", "entity": null, "relations": []},
        {"speaker": "system", "text": "james cameron is the director",
         "entity": "titanic", "relations": ["directed_by"]}]}

Entities and relations are referenced by canonical label. Delexicalization
replaces object-label spans in system responses with a single relation
placeholder token ("r:" + relation label); relexicalization expands the
placeholder back via KG lookup.
"""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field

from .kg import KnowledgeGraph, NotFoundError, label_tokens

logger = logging.getLogger(__name__)

PAD = "<PAD>"
SOS = "<SOS>"
EOS = "<EOS>"
EOU = "<EOU>"
UNK = "<UNK>"
SPECIALS = [PAD, SOS, EOS, EOU, UNK]

RELATION_PREFIX = "r:"


class CorpusError(Exception):
    pass


@dataclass
class Turn:
    speaker: str  # "user" | "system"
    text: list[str]
    gold_entity: int | None = None
    gold_relations: set[int] = field(default_factory=set)


@dataclass
class Dialogue:
    id: str
    domain: str
    turns: list[Turn]

    def is_kg_grounded(self) -> bool:
        return any(t.gold_relations for t in self.turns if t.speaker == "system")


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def relation_token(kg: KnowledgeGraph, r: int) -> str:
    return RELATION_PREFIX + kg.relation_label(r)


def is_relation_token(token: str) -> bool:
    return token.startswith(RELATION_PREFIX)


def load_corpus(path, domain: str | None = None, kg: KnowledgeGraph | None = None,
                drop_ungrounded: bool = False) -> list[Dialogue]:
    """Load dialogues from the JSONL interchange format.

    With a KG, entity/relation annotations are resolved to ids; unresolvable
    annotations raise a CorpusError naming the dialogue. drop_ungrounded
    removes dialogues whose every system turn lacks gold relations (used for
    the in-car train/eval splits, which exclude scheduling-only chatter).
    """
    dialogues = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON") from exc
            did = doc.get("id", f"line-{lineno}")
            try:
                dlg = _parse_dialogue(doc, kg)
            except (KeyError, TypeError, ValueError, NotFoundError) as exc:
                raise CorpusError(f"dialogue {did}: {exc}") from exc
            if domain is not None and dlg.domain != domain:
                continue
            dialogues.append(dlg)
    if drop_ungrounded:
        dialogues = [d for d in dialogues if d.is_kg_grounded()]
    return dialogues


def _parse_dialogue(doc: dict, kg: KnowledgeGraph | None) -> Dialogue:
    turns = []
    raw_turns = doc["turns"]
    if not raw_turns:
        raise ValueError("dialogue has no turns")
    for raw in raw_turns:
        speaker = raw["speaker"]
        if speaker not in ("user", "system"):
            raise ValueError(f"bad speaker {speaker!r}")
        entity = raw.get("entity")
        relations = raw.get("relations") or []
        if kg is not None:
            entity = kg.entity_id(entity) if entity is not None else None
            relations = {kg.relation_id(r) for r in relations}
        else:
            entity = None
            relations = set()
        turns.append(Turn(speaker=speaker, text=tokenize(raw["text"]),
                          gold_entity=entity, gold_relations=relations))
    for prev, cur in zip(turns, turns[1:]):
        if prev.speaker == cur.speaker:
            raise ValueError("speakers must alternate")
    return Dialogue(id=str(doc["id"]), domain=doc.get("domain", "in-car"), turns=turns)


def corpus_stats(dialogues: list[Dialogue]) -> dict:
    return {
        "dialogues": len(dialogues),
        "utterances": sum(len(d.turns) for d in dialogues),
        "kg_grounded_pct": 100.0 * sum(d.is_kg_grounded() for d in dialogues) / max(len(dialogues), 1),
    }


def _object_spans(kg: KnowledgeGraph, e: int) -> list[tuple[tuple[str, ...], list[int]]]:
    """(token span, candidate relation ids) for every object label of entity e.

    Both the underscore-split form ("james", "cameron") and the raw
    single-token form ("james_cameron") of each label are matchable.
    Sorted longest-first so maximal spans win.
    """
    by_span: dict[tuple[str, ...], set[int]] = {}
    for idx in kg._incidence.get(e, []):
        t = kg.triples[idx]
        if t.subject != e:
            continue
        label = kg.entity_label(t.object)
        for span in ((tuple(label_tokens(label))), (label,)):
            if span:
                by_span.setdefault(tuple(span), set()).add(t.relation)
    spans = [(span, sorted(rels)) for span, rels in by_span.items()]
    spans.sort(key=lambda x: (-len(x[0]), x[0]))
    return spans


def delexicalize(response: list[str], e: int, kg: KnowledgeGraph,
                 gold_relations: set[int] | None = None) -> list[str]:
    """Replace maximal object-label spans with single relation placeholder tokens.

    Ambiguous spans (two relations sharing the object label) resolve to a
    gold relation when given, otherwise the lowest relation id.
    """
    spans = _object_spans(kg, e)
    out: list[str] = []
    i = 0
    while i < len(response):
        matched = False
        for span, rels in spans:
            n = len(span)
            if tuple(response[i:i + n]) == span:
                if len(rels) > 1:
                    preferred = sorted(set(rels) & (gold_relations or set()))
                    r = preferred[0] if preferred else rels[0]
                    logger.debug("ambiguous span %s -> relation %d", span, r)
                else:
                    r = rels[0]
                out.append(relation_token(kg, r))
                i += n
                matched = True
                break
        if not matched:
            out.append(response[i])
            i += 1
    return out


def relexicalize(response: list[str], e: int, kg: KnowledgeGraph) -> list[str]:
    """Expand relation placeholder tokens via KG lookup under entity e.

    Multiple objects for one (e, r) are sorted alphabetically and joined
    with ", ". An empty lookup leaves the placeholder verbatim (logged), the
    observable failure mode when the detected entity lacks the edge.
    """
    out: list[str] = []
    for token in response:
        if not is_relation_token(token):
            out.append(token)
            continue
        try:
            r = kg.relation_id(token[len(RELATION_PREFIX):])
        except NotFoundError:
            out.append(token)
            continue
        labels = sorted(kg.lookup(e, r))
        if not labels:
            logger.warning("unresolved relation token %s for entity %d", token, e)
            out.append(token)
            continue
        for j, label in enumerate(labels):
            toks = label_tokens(label)
            if j > 0 and out and toks:
                out[-1] = out[-1] + ","
            out.extend(toks)
    return out


@dataclass
class Vocabulary:
    """Two-segment token inventory: word tokens (incl. specials) then relation tokens."""

    word_tokens: list[str]
    relation_tokens: list[str]

    def __post_init__(self):
        self._index = {t: i for i, t in enumerate(self.word_tokens + self.relation_tokens)}
        if len(self._index) != self.size:
            raise ValueError("vocabulary segments overlap")

    @property
    def v_o(self) -> int:
        return len(self.word_tokens)

    @property
    def v_kg(self) -> int:
        return len(self.relation_tokens)

    @property
    def size(self) -> int:
        return self.v_o + self.v_kg

    @property
    def pad_id(self) -> int:
        return self._index[PAD]

    @property
    def sos_id(self) -> int:
        return self._index[SOS]

    @property
    def eos_id(self) -> int:
        return self._index[EOS]

    @property
    def unk_id(self) -> int:
        return self._index[UNK]

    def token_id(self, token: str) -> int:
        return self._index.get(token, self._index[UNK])

    def token(self, i: int) -> str:
        if i < self.v_o:
            return self.word_tokens[i]
        return self.relation_tokens[i - self.v_o]

    def is_relation_id(self, i: int) -> bool:
        return i >= self.v_o

    def relation_token_position(self, relation_index: int) -> int:
        """Vocabulary position of the placeholder for the given relation id."""
        return self.v_o + relation_index

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.token_id(t) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.token(i) for i in ids]

    def to_json(self) -> dict:
        return {"word_tokens": self.word_tokens, "relation_tokens": self.relation_tokens}

    @classmethod
    def from_json(cls, doc: dict) -> "Vocabulary":
        return cls(word_tokens=list(doc["word_tokens"]),
                   relation_tokens=list(doc["relation_tokens"]))


def build_vocab(dialogues: list[Dialogue], kg: KnowledgeGraph, min_freq: int = 1) -> Vocabulary:
    """Word segment from delexicalized system responses and user queries;
    relation segment covers every KG relation, seen in training or not."""
    counts: Counter = Counter()
    for d in dialogues:
        for turn in d.turns:
            text = turn.text
            if turn.speaker == "system" and turn.gold_entity is not None:
                text = delexicalize(text, turn.gold_entity, kg, turn.gold_relations)
            for tok in text:
                if not is_relation_token(tok):
                    counts[tok] += 1
    words = list(SPECIALS) + sorted(t for t, c in counts.items() if c >= min_freq and t not in SPECIALS)
    relations = [RELATION_PREFIX + kg.relation_label(r) for r in range(kg.num_relations)]
    return Vocabulary(word_tokens=words, relation_tokens=relations)


def build_context(history: list[list[str]], query: list[str], max_len: int = 100) -> list[str]:
    """Previous utterances joined with <EOU>, query last, left-truncated to max_len."""
    out: list[str] = []
    for utt in history:
        out.extend(utt)
        out.append(EOU)
    out.extend(query)
    if len(out) > max_len:
        out = out[-max_len:]
    return out


def convert_kvret(path, out_path, domain: str = "in-car",
                  kb_out_path=None) -> int:
    """Convert an in-car assistant corpus in the kvret JSON layout to JSONL.

    Each source dialogue carries driver/assistant turns plus a local KB
    snippet; gold entities/relations are taken from the slot annotations
    when present. Returns the number of dialogues written.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    n = 0
    kb_lines: set[str] = set()
    with open(out_path, "w", encoding="utf-8") as out:
        for i, item in enumerate(raw):
            turns = []
            for t in item.get("dialogue", []):
                speaker = "user" if t.get("turn") == "driver" else "system"
                data = t.get("data", {})
                turns.append({
                    "speaker": speaker,
                    "text": data.get("utterance", ""),
                    "entity": data.get("entity"),
                    "relations": data.get("requested", {}) and
                                 [k for k, v in data.get("requested", {}).items() if v] or [],
                })
            if not turns:
                continue
            doc = {"id": item.get("scenario", {}).get("uuid", f"dlg-{i}"),
                   "domain": domain, "turns": turns}
            out.write(json.dumps(doc) + "\n")
            n += 1
            kb = item.get("scenario", {}).get("kb", {}) or {}
            items = kb.get("items") or []
            for row in items:
                subject = None
                for key in ("poi", "event", "location"):
                    if row.get(key):
                        subject = row[key]
                        break
                if subject is None:
                    continue
                for key, value in row.items():
                    if key in ("poi", "event", "location") or value is None:
                        continue
                    from .kg import normalize_label
                    kb_lines.add("\t".join(normalize_label(x) for x in (subject, key, str(value))))
    if kb_out_path is not None:
        with open(kb_out_path, "w", encoding="utf-8") as kb_out:
            for line in sorted(kb_lines):
                kb_out.write(line + "\n")
    return n
