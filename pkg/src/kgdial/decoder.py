"""Attention decoder over the extended vocabulary, gating fusion, beam search.

The decoder LSTM is seeded from the input encoder's final states and fed
the embedding of the previously emitted token, starting from <SOS>.
Attention is multiplicative over all encoder states; the output projection
covers the full word+relation vocabulary and is softmax-normalized so the
Hadamard gate and the cross-entropy loss both see a distribution.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

logger = logging.getLogger(__name__)


class AttnDecoder(nn.Module):
    def __init__(self, vocab_size: int, hidden_dim: int = 256, emb_dim: int | None = None):
        super().__init__()
        emb_dim = emb_dim or hidden_dim
        self.hidden_dim = hidden_dim
        self.vocab_size = vocab_size
        self.emb = nn.Embedding(vocab_size, emb_dim)
        self.cell = nn.LSTMCell(emb_dim, hidden_dim)
        self.attn_proj = nn.Linear(2 * hidden_dim, hidden_dim)  # W_c over [H_e; h_t]
        self.attn_score = nn.Linear(hidden_dim, 1, bias=False)  # W_s
        self.out_proj = nn.Linear(2 * hidden_dim, vocab_size)   # W_o over [h_t; h~_t]

    def initial_state(self, final_state):
        h, c = final_state
        return h, c

    def attend(self, enc_states: torch.Tensor, h_t: torch.Tensor):
        """Attention weights over encoder states and the weighted context."""
        n = enc_states.size(0)
        joined = torch.cat([enc_states, h_t.unsqueeze(0).expand(n, -1)], dim=1)
        scores = self.attn_score(torch.tanh(self.attn_proj(joined))).squeeze(1)
        weights = F.softmax(scores, dim=0)
        context = weights @ enc_states
        return weights, context

    def step(self, prev_token: int, state, enc_states: torch.Tensor):
        """One decode step: returns the softmax distribution over the
        extended vocabulary and the new LSTM state."""
        h, c = state
        x = self.emb(torch.tensor(prev_token))
        h, c = self.cell(x.unsqueeze(0), (h.unsqueeze(0), c.unsqueeze(0)))
        h, c = h.squeeze(0), c.squeeze(0)
        _, context = self.attend(enc_states, h)
        logits = self.out_proj(torch.cat([h, context]))
        return F.softmax(logits, dim=-1), (h, c)

    def step_logits(self, prev_token: int, state, enc_states: torch.Tensor):
        """Like step() but returning raw logits, for the training loss."""
        h, c = state
        x = self.emb(torch.tensor(prev_token))
        h, c = self.cell(x.unsqueeze(0), (h.unsqueeze(0), c.unsqueeze(0)))
        h, c = h.squeeze(0), c.squeeze(0)
        _, context = self.attend(enc_states, h)
        return self.out_proj(torch.cat([h, context])), (h, c)


def fuse(o_dec: np.ndarray, gate: np.ndarray) -> np.ndarray:
    """Hadamard product of the decoder distribution and the vocabulary gate,
    renormalized back to a distribution.

    Degenerate all-zero products fall back to the decoder distribution with
    relation positions zeroed (the gate's word positions are 1, so this only
    happens when all probability mass sat on masked relations).
    """
    if o_dec.shape != gate.shape:
        raise ValueError(f"length mismatch: {o_dec.shape} vs {gate.shape}")
    prod = o_dec * gate
    total = prod.sum()
    if total > 0:
        return prod / total
    logger.warning("degenerate gate: all fused mass zero, masking relations only")
    support = gate > 0
    fallback = o_dec * support
    s = fallback.sum()
    if s > 0:
        return fallback / s
    if support.any():
        return support.astype(o_dec.dtype) / support.sum()
    return np.full_like(o_dec, 1.0 / len(o_dec))


@dataclass
class Hypothesis:
    token_ids: list[int] = field(default_factory=list)
    log_prob: float = 0.0
    state: tuple = None
    finished: bool = False

    def sort_key(self):
        # higher log-prob first; ties broken by lexicographically lower ids
        return (-self.log_prob, self.token_ids)


def beam_search(decoder: AttnDecoder, enc_states: torch.Tensor, init_state,
                sos_id: int, eos_id: int, gate: np.ndarray | None = None,
                beam_width: int = 5, max_len: int = 30) -> Hypothesis:
    """Breadth-limited best-first decoding.

    Finished hypotheses (ending in <EOS>) are collected aside and never
    pruned; the best finished one wins. If nothing finishes within max_len
    the best unfinished hypothesis is returned with finished=False.
    Deterministic under fixed weights: ties break toward the
    lexicographically lower token-id sequence.
    """
    if beam_width < 1 or max_len < 1:
        raise ValueError("beam_width and max_len must be >= 1")
    start = Hypothesis(token_ids=[], log_prob=0.0, state=init_state)
    active = [start]
    finished: list[Hypothesis] = []
    with torch.no_grad():
        for _ in range(max_len):
            candidates: list[Hypothesis] = []
            for hyp in active:
                prev = hyp.token_ids[-1] if hyp.token_ids else sos_id
                probs, new_state = decoder.step(prev, hyp.state, enc_states)
                dist = probs.double().numpy()
                if gate is not None:
                    dist = fuse(dist, gate)
                logp = np.log(np.maximum(dist, 1e-300))
                for tok in range(len(dist)):
                    if gate is not None and dist[tok] == 0.0:
                        continue
                    candidates.append(Hypothesis(
                        token_ids=hyp.token_ids + [tok],
                        log_prob=hyp.log_prob + float(logp[tok]),
                        state=new_state,
                        finished=(tok == eos_id)))
            candidates.sort(key=Hypothesis.sort_key)
            finished.extend(h for h in candidates if h.finished)
            active = [h for h in candidates if not h.finished][:beam_width]
            if not active:
                break
    if finished:
        return min(finished, key=Hypothesis.sort_key)
    best = min(active, key=Hypothesis.sort_key) if active else start
    logger.warning("beam search reached max_len=%d without <EOS>", max_len)
    return best


def greedy_decode(decoder: AttnDecoder, enc_states: torch.Tensor, init_state,
                  sos_id: int, eos_id: int, gate: np.ndarray | None = None,
                  max_len: int = 30) -> Hypothesis:
    """Argmax decoding; by construction identical to beam_search(width=1)."""
    return beam_search(decoder, enc_states, init_state, sos_id, eos_id,
                       gate=gate, beam_width=1, max_len=max_len)
