"""Joint training of entity detection and gated sequence generation.

The loss is the unweighted sum of the per-step vocabulary cross-entropy
(teacher forcing over the delexicalized target) and the entity-detection
cross-entropy. Two Adam parameter groups realize the separate encoder
(1e-4) and decoder (1e-3) learning rates. The checkpoint with the best
validation Entity F1 wins.
"""

import csv
import json
import logging
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .data import Dialogue, delexicalize
from .evaluation import evaluate_model, iter_examples
from .kg import KnowledgeGraph
from .model import DialogueModel, ModelConfig

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 20
    lr_encoder: float = 1e-4
    lr_decoder: float = 1e-3
    epochs: int = 50
    max_steps: int | None = None
    grad_clip: float = 5.0
    patience: int = 10
    eval_every: int = 1  # validate every N epochs (generation is the slow part)
    seed: int = 13
    model: ModelConfig = field(default_factory=ModelConfig)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        model = ModelConfig.from_json(doc.pop("model", {}))
        known = {f for f in cls.__dataclass_fields__} - {"model"}
        return cls(model=model, **{k: v for k, v in doc.items() if k in known})


PRESETS = {
    # full model: pretrained-style contextual encoder, intermediate targets, gate
    "full": {},
    # ablation: no sub-graph gating at decode time
    "no_subgraph": {"subgraph_gate": False},
    # ablation: static word embeddings instead of the pretrained encoder
    "no_pretrained": {"encoder_kind": "static"},
    # plain seq2seq over surface tokens, no KG structure at all
    "seq2seq": {"encoder_kind": "static", "use_intermediate": False, "subgraph_gate": False},
    "seq2seq_pretrained": {"use_intermediate": False, "subgraph_gate": False},
}


def apply_preset(config: ModelConfig, preset: str) -> ModelConfig:
    doc = config.to_json()
    doc.update(PRESETS[preset])
    return ModelConfig.from_json(doc)


@dataclass
class TrainExample:
    history: list[list[str]]
    query: list[str]
    entity: int | None
    target: list[str]


def build_examples(dialogues: list[Dialogue], kg: KnowledgeGraph,
                   use_intermediate: bool = True) -> list[TrainExample]:
    examples = []
    for _, history, query, turn in iter_examples(dialogues):
        target = turn.text
        if use_intermediate and turn.gold_entity is not None:
            target = delexicalize(target, turn.gold_entity, kg, turn.gold_relations)
        examples.append(TrainExample(history=history, query=query,
                                     entity=turn.gold_entity, target=target))
    return examples


def example_loss(model: DialogueModel, ex: TrainExample) -> torch.Tensor:
    """Sum of token cross-entropies (teacher forcing) plus entity cross-entropy."""
    from .data import build_context
    context = build_context(ex.history, ex.query, model.config.max_len)
    token_states, aggregate, enc_states, final_state = model.encode(context)
    target_ids = model.vocab.encode(ex.target) + [model.vocab.eos_id]
    state = model.decoder.initial_state(final_state)
    prev = model.vocab.sos_id
    loss = torch.zeros(())
    for tid in target_ids:
        logits, state = model.decoder.step_logits(prev, state, enc_states)
        loss = loss + F.cross_entropy(logits.unsqueeze(0), torch.tensor([tid]))
        prev = tid
    if ex.entity is not None:
        ent_logits = model.entity_head(token_states, aggregate)
        loss = loss + F.cross_entropy(ent_logits.unsqueeze(0), torch.tensor([ex.entity]))
    return loss


def batch_loss(model: DialogueModel, batch: list[TrainExample]) -> torch.Tensor:
    return sum(example_loss(model, ex) for ex in batch) / len(batch)


def make_optimizer(model: DialogueModel, config: TrainConfig) -> torch.optim.Adam:
    encoder_params = (list(model.ctx_encoder.parameters())
                      + list(model.seq_encoder.parameters())
                      + list(model.entity_head.parameters()))
    return torch.optim.Adam([
        {"params": encoder_params, "lr": config.lr_encoder},
        {"params": model.decoder.parameters(), "lr": config.lr_decoder},
    ])


def set_seed(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def train(config: TrainConfig, train_dialogues: list[Dialogue],
          valid_dialogues: list[Dialogue], kg: KnowledgeGraph, outdir,
          gate_embeddings=None, figures: bool = True) -> Path:
    """Run the training loop; returns the best checkpoint directory."""
    set_seed(config.seed)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    model = DialogueModel(config.model, _shared_vocab(train_dialogues, kg, config),
                          kg, gate_embeddings)
    optimizer = make_optimizer(model, config)
    examples = build_examples(train_dialogues, kg, config.model.use_intermediate)
    if not examples:
        raise ValueError("no trainable examples in the corpus")

    rng = random.Random(config.seed)
    metrics: list[dict] = []
    best_f1 = -1.0
    best_dir = outdir / "best"
    steps = 0
    bad_epochs = 0
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = list(range(len(examples)))
        rng.shuffle(order)
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[start:start + config.batch_size]]
            optimizer.zero_grad()
            loss = batch_loss(model, batch)
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite loss {loss.item()} at step {steps}")
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            optimizer.step()
            losses.append(float(loss.item()))
            steps += 1
            if config.max_steps is not None and steps >= config.max_steps:
                break
        done = (config.max_steps is not None and steps >= config.max_steps) or epoch == config.epochs
        do_eval = valid_dialogues and (epoch % config.eval_every == 0 or done)
        report = evaluate_model(model, valid_dialogues, beam_width=1) if do_eval else None
        valid_f1 = report.entity_f1 / 100.0 if report else (metrics[-1]["valid_entity_f1"] if metrics else 0.0)
        row = {"epoch": epoch, "step": steps,
               "train_loss": sum(losses) / len(losses),
               "valid_entity_f1": valid_f1,
               "valid_bleu": report.bleu if report else 0.0}
        metrics.append(row)
        logger.info("epoch %d: loss=%.4f valid_f1=%.4f", epoch, row["train_loss"], valid_f1)
        if valid_f1 > best_f1 or not best_dir.exists():
            best_f1 = valid_f1
            model.save(best_dir, extra={"train": config.to_json(),
                                        "valid_entity_f1": valid_f1})
            bad_epochs = 0
        else:
            bad_epochs += 1
        _write_metrics(metrics, outdir / "metrics.csv")
        if config.max_steps is not None and steps >= config.max_steps:
            break
        if bad_epochs >= config.patience:
            logger.info("early stop after %d stale epochs", bad_epochs)
            break
    if figures and metrics:
        from .plotting import plot_training_curves
        plot_training_curves(metrics, outdir)
    (outdir / "train_config.json").write_text(json.dumps(config.to_json(), indent=2))
    return best_dir


def _shared_vocab(dialogues, kg, config: TrainConfig):
    from .data import build_vocab
    return build_vocab(dialogues, kg, min_freq=1)


def _write_metrics(metrics: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(metrics[0].keys()))
        writer.writeheader()
        writer.writerows(metrics)
