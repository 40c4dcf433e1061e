"""Query encoding: pluggable contextual encoder, LSTM input encoder, entity heads.

Three contextual encoders share one interface: a pretrained bidirectional
transformer (full scale), a static word-embedding table (the no-pretraining
ablation), and a tiny randomly initialized transformer for desk-scale
tests. All map a token list to per-token states plus an aggregate vector.
"""

import zlib

import torch
import torch.nn as nn
import torch.nn.functional as F


def _bucket(token: str, n: int) -> int:
    # crc32 instead of hash(): stable across interpreter runs
    return zlib.crc32(token.encode("utf-8")) % n


class ContextualEncoder(nn.Module):
    """Interface: forward(tokens) -> (token_states [n, dim], aggregate [dim])."""

    dim: int

    def forward(self, tokens: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        raise NotImplementedError


class TinyTransformerEncoder(ContextualEncoder):
    """Small randomly initialized transformer over hashed token buckets.

    Start and end marker embeddings bracket the sequence; the aggregate is
    the start-position state. Deterministic for fixed weights in eval mode.
    """

    def __init__(self, dim: int = 32, buckets: int = 512, layers: int = 1,
                 heads: int = 4, max_len: int = 128, dropout: float = 0.0):
        super().__init__()
        self.dim = dim
        self.buckets = buckets
        self.max_len = max_len
        self.tok_emb = nn.Embedding(buckets + 2, dim)  # +2: start/end markers
        self.pos_emb = nn.Embedding(max_len + 2, dim)
        layer = nn.TransformerEncoderLayer(
            d_model=dim, nhead=heads, dim_feedforward=2 * dim,
            dropout=dropout, batch_first=True)
        self.encoder = nn.TransformerEncoder(layer, num_layers=layers)

    def forward(self, tokens):
        tokens = tokens[-self.max_len:]
        ids = [self.buckets] + [_bucket(t, self.buckets) for t in tokens] + [self.buckets + 1]
        idx = torch.tensor(ids, dtype=torch.long)
        pos = torch.arange(len(ids), dtype=torch.long)
        x = self.tok_emb(idx) + self.pos_emb(pos)
        out = self.encoder(x.unsqueeze(0)).squeeze(0)
        return out[1:-1], out[0]


class StaticWordEncoder(ContextualEncoder):
    """Trainable static embedding table over hashed buckets (no context mixing).

    The aggregate is the mean token embedding; there is no start-token state
    to aggregate from without contextualization.
    """

    def __init__(self, dim: int = 32, buckets: int = 2048, max_len: int = 128):
        super().__init__()
        self.dim = dim
        self.buckets = buckets
        self.max_len = max_len
        self.emb = nn.Embedding(buckets, dim)

    def forward(self, tokens):
        tokens = tokens[-self.max_len:]
        idx = torch.tensor([_bucket(t, self.buckets) for t in tokens], dtype=torch.long)
        states = self.emb(idx)
        return states, states.mean(dim=0)


class PretrainedTransformerEncoder(ContextualEncoder):
    """Wrapper over a pretrained bidirectional transformer (full-scale runs).

    Word pieces of one original token are mean-pooled back to a single
    state; the aggregate is the sequence-start state.
    """

    def __init__(self, model_name: str = "bert-base-uncased", max_len: int = 512):
        super().__init__()
        from transformers import AutoModel, AutoTokenizer  # heavyweight, lazy
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.dim = self.model.config.hidden_size
        self.max_len = max_len

    def forward(self, tokens):
        # left-truncate in original-token space before sub-tokenizing
        while tokens:
            pieces = [self.tokenizer.tokenize(t) or [self.tokenizer.unk_token] for t in tokens]
            total = sum(len(p) for p in pieces) + 2
            if total <= self.max_len:
                break
            tokens = tokens[1:]
        ids = [self.tokenizer.cls_token_id]
        spans = []
        for p in pieces:
            start = len(ids)
            ids.extend(self.tokenizer.convert_tokens_to_ids(p))
            spans.append((start, len(ids)))
        ids.append(self.tokenizer.sep_token_id)
        out = self.model(torch.tensor([ids])).last_hidden_state.squeeze(0)
        states = torch.stack([out[a:b].mean(dim=0) for a, b in spans])
        return states, out[0]


def make_contextual_encoder(kind: str, dim: int = 32, max_len: int = 128,
                            **kwargs) -> ContextualEncoder:
    if kind == "tiny-transformer":
        return TinyTransformerEncoder(dim=dim, max_len=max_len, **kwargs)
    if kind == "static":
        return StaticWordEncoder(dim=dim, max_len=max_len, **kwargs)
    if kind == "pretrained-transformer":
        return PretrainedTransformerEncoder(max_len=max_len, **kwargs)
    raise ValueError(f"unknown encoder kind {kind!r}")


class RecurrentEncoder(nn.Module):
    """LSTM over contextual token states; exposes per-token states and the
    final (hidden, cell) pair used to seed the decoder."""

    def __init__(self, input_dim: int, hidden_dim: int = 256):
        super().__init__()
        self.hidden_dim = hidden_dim
        self.lstm = nn.LSTM(input_dim, hidden_dim, batch_first=True)

    def forward(self, token_states: torch.Tensor):
        out, (h, c) = self.lstm(token_states.unsqueeze(0))
        return out.squeeze(0), (h.squeeze(0).squeeze(0), c.squeeze(0).squeeze(0))


class LinearEntityHead(nn.Module):
    """Single fully connected layer over the aggregate state."""

    def __init__(self, input_dim: int, num_entities: int):
        super().__init__()
        self.fc = nn.Linear(input_dim, num_entities)

    def forward(self, token_states, aggregate):
        return self.fc(aggregate)


class ConvEntityHead(nn.Module):
    """Multi-width convolutions over token states, max-pooled, then a
    fully connected classifier (ReLU, dropout)."""

    def __init__(self, input_dim: int, num_entities: int, filters: int = 300,
                 kernel_sizes: tuple[int, ...] = (3, 4, 5), hidden: int = 500,
                 dropout: float = 0.1):
        super().__init__()
        self.kernel_sizes = kernel_sizes
        self.convs = nn.ModuleList(
            nn.Conv1d(input_dim, filters, k) for k in kernel_sizes)
        self.fc1 = nn.Linear(filters * len(kernel_sizes), hidden)
        self.dropout = nn.Dropout(dropout)
        self.fc2 = nn.Linear(hidden, num_entities)

    def forward(self, token_states, aggregate):
        x = token_states.t().unsqueeze(0)  # [1, dim, n]
        need = max(self.kernel_sizes) - x.size(2)
        if need > 0:
            x = F.pad(x, (0, need))
        pooled = [conv(x).max(dim=2).values for conv in self.convs]
        h = F.relu(self.fc1(torch.cat(pooled, dim=1)))
        return self.fc2(self.dropout(h)).squeeze(0)


def make_entity_head(kind: str, input_dim: int, num_entities: int, **kwargs) -> nn.Module:
    if kind == "linear":
        return LinearEntityHead(input_dim, num_entities)
    if kind == "cnn":
        return ConvEntityHead(input_dim, num_entities, **kwargs)
    raise ValueError(f"unknown entity head kind {kind!r}")


def detect_entity(head: nn.Module, token_states: torch.Tensor,
                  aggregate: torch.Tensor) -> torch.Tensor:
    """Probability distribution over the entity inventory."""
    return F.softmax(head(token_states, aggregate), dim=-1)
