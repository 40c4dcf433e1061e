"""Full dialogue model: encoder stack + gated decoder + (de/re)lexicalization."""

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from . import data as D
from . import graph as G
from .data import Vocabulary
from .decoder import AttnDecoder, beam_search
from .embeddings import WordEmbeddings
from .encoder import (detect_entity, make_contextual_encoder, make_entity_head,
                      RecurrentEncoder)
from .kg import KnowledgeGraph, k_hop_subgraph


@dataclass
class ModelConfig:
    encoder_kind: str = "tiny-transformer"  # tiny-transformer | static | pretrained-transformer
    entity_head: str = "cnn"                # cnn | linear
    ctx_dim: int = 32
    h_dim: int = 256
    max_len: int = 100
    k: int = 2
    beam_width: int = 5
    max_decode_len: int = 30
    subgraph_gate: bool = True
    use_intermediate: bool = True  # off reproduces a plain seq2seq over surface tokens
    cnn_filters: int = 300
    cnn_hidden: int = 500
    cnn_dropout: float = 0.1
    entity_confidence_threshold: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in doc.items() if k in known})


@dataclass
class GenerationResult:
    surface: list[str]
    intermediate: list[str]
    entity: int
    entity_label: str
    relations: list[str]
    objects: list[str]
    low_confidence: bool
    finished: bool


class DialogueModel(nn.Module):
    """Bundles the sub-modules and runs the full generation pipeline."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary, kg: KnowledgeGraph,
                 gate_embeddings: WordEmbeddings | None = None):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.kg = kg
        self.gate_embeddings = gate_embeddings
        self.ctx_encoder = make_contextual_encoder(
            config.encoder_kind, dim=config.ctx_dim, max_len=config.max_len)
        head_kwargs = {}
        if config.entity_head == "cnn":
            head_kwargs = dict(filters=config.cnn_filters, hidden=config.cnn_hidden,
                               dropout=config.cnn_dropout)
        self.entity_head = make_entity_head(
            config.entity_head, self.ctx_encoder.dim, kg.num_entities, **head_kwargs)
        self.seq_encoder = RecurrentEncoder(self.ctx_encoder.dim, config.h_dim)
        self.decoder = AttnDecoder(vocab.size, hidden_dim=config.h_dim)

    def encode(self, context_tokens: list[str]):
        token_states, aggregate = self.ctx_encoder(context_tokens)
        enc_states, final_state = self.seq_encoder(token_states)
        return token_states, aggregate, enc_states, final_state

    def entity_distribution(self, token_states, aggregate) -> torch.Tensor:
        return detect_entity(self.entity_head, token_states, aggregate)

    def compute_gate(self, query_tokens: list[str], entity: int) -> np.ndarray:
        sub = k_hop_subgraph(self.kg, entity, self.config.k)
        if len(sub.edges) == 0:
            return G.empty_gate(self.vocab)
        g = G.score_subgraph(query_tokens, sub, self.kg, self.gate_embeddings)
        return G.project_gate(g, sub, self.vocab)

    @torch.no_grad()
    def generate_response(self, history: list[list[str]], query: list[str],
                          beam_width: int | None = None) -> GenerationResult:
        """Encode, detect the entity, gate with its k-hop sub-graph, beam-decode
        the intermediate response, and relexicalize."""
        self.eval()
        context = D.build_context(history, query, self.config.max_len)
        token_states, aggregate, enc_states, final_state = self.encode(context)
        probs = self.entity_distribution(token_states, aggregate)
        entity = int(torch.argmax(probs).item())
        confidence = float(probs[entity].item())
        low_confidence = confidence < self.config.entity_confidence_threshold

        gate = self.compute_gate(query, entity) if self.config.subgraph_gate else None
        hyp = beam_search(
            self.decoder, enc_states, self.decoder.initial_state(final_state),
            sos_id=self.vocab.sos_id, eos_id=self.vocab.eos_id, gate=gate,
            beam_width=beam_width or self.config.beam_width,
            max_len=self.config.max_decode_len)
        ids = [i for i in hyp.token_ids if i != self.vocab.eos_id]
        intermediate = self.vocab.decode(ids)
        surface = D.relexicalize(intermediate, entity, self.kg)
        relations = sorted({t for t in intermediate if D.is_relation_token(t)})
        objects = sorted({o for t in relations
                          for o in self._resolve_objects(entity, t)})
        return GenerationResult(
            surface=surface, intermediate=intermediate, entity=entity,
            entity_label=self.kg.entity_label(entity), relations=relations,
            objects=objects, low_confidence=low_confidence, finished=hyp.finished)

    def _resolve_objects(self, entity: int, rel_token: str) -> set[str]:
        try:
            r = self.kg.relation_id(rel_token[len(D.RELATION_PREFIX):])
        except Exception:
            return set()
        return self.kg.lookup(entity, r)

    # -- checkpointing ------------------------------------------------------

    def save(self, directory, extra: dict | None = None) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "config.json").write_text(json.dumps(
            {"model": self.config.to_json(), **(extra or {})}, indent=2))
        (directory / "vocab.json").write_text(json.dumps(self.vocab.to_json()))
        torch.save(self.state_dict(), directory / "weights.pt")

    @classmethod
    def load(cls, directory, kg: KnowledgeGraph,
             gate_embeddings: WordEmbeddings | None = None) -> "DialogueModel":
        directory = Path(directory)
        doc = json.loads((directory / "config.json").read_text())
        config = ModelConfig.from_json(doc["model"])
        vocab = Vocabulary.from_json(json.loads((directory / "vocab.json").read_text()))
        model = cls(config, vocab, kg, gate_embeddings)
        model.load_state_dict(torch.load(directory / "weights.pt", weights_only=True))
        model.eval()
        return model
