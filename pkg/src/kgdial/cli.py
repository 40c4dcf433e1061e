"""Command-line entry point.

Subcommands: convert-corpus, train, eval, relation-link, chat, serve.
All paths resolve against --workdir; all randomness sits behind --seed.
"""

import json
import logging
import sys
from pathlib import Path

import click

from .data import load_corpus, tokenize
from .embeddings import WordEmbeddings
from .graph import relation_link
from .kg import load_kg

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
logger = logging.getLogger("kgdial")


@click.group()
@click.option("--workdir", type=click.Path(file_okay=False), default=".",
              help="Base directory for relative paths.")
@click.option("--seed", type=int, default=13, show_default=True)
@click.pass_context
def cli(ctx, workdir, seed):
    ctx.obj = {"workdir": Path(workdir), "seed": seed}


def _resolve(ctx, path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else ctx.obj["workdir"] / p


@cli.command("convert-corpus")
@click.option("--source", required=True, help="Raw corpus file (kvret JSON layout).")
@click.option("--out", required=True, help="Output JSONL corpus path.")
@click.option("--kb-out", default=None, help="Optional KG triple-file output from KB snippets.")
@click.option("--domain", default="in-car", show_default=True)
@click.pass_context
def convert_corpus(ctx, source, out, kb_out, domain):
    """Convert a source corpus layout to the JSONL interchange format."""
    from .data import convert_kvret
    n = convert_kvret(_resolve(ctx, source), _resolve(ctx, out), domain=domain,
                      kb_out_path=_resolve(ctx, kb_out) if kb_out else None)
    click.echo(f"wrote {n} dialogues to {out}")


@cli.command("train")
@click.option("--config", "config_path", required=True, help="TrainConfig JSON.")
@click.option("--kg", "kg_path", required=True)
@click.option("--train-corpus", required=True)
@click.option("--valid-corpus", required=True)
@click.option("--out", required=True, help="Output directory for checkpoints and metrics.")
@click.option("--preset", default=None,
              type=click.Choice(["full", "no_subgraph", "no_pretrained",
                                 "seq2seq", "seq2seq_pretrained"]))
@click.option("--embeddings", "emb_path", default=None, help="Gate embedding table.")
@click.option("--drop-ungrounded", is_flag=True, default=False,
              help="Drop dialogues with no KG-grounded system turn (in-car filtering).")
@click.pass_context
def train_cmd(ctx, config_path, kg_path, train_corpus, valid_corpus, out,
              preset, emb_path, drop_ungrounded):
    """Train a model and keep the checkpoint with the best validation Entity F1."""
    from .training import TrainConfig, apply_preset, train
    config_path = _resolve(ctx, config_path)
    if not config_path.exists():
        raise click.ClickException(f"config file not found: {config_path}")
    config = TrainConfig.from_json(json.loads(config_path.read_text()))
    config.seed = ctx.obj["seed"]
    if preset:
        config.model = apply_preset(config.model, preset)
    kg = load_kg(_resolve(ctx, kg_path))
    train_dlg = load_corpus(_resolve(ctx, train_corpus), kg=kg, drop_ungrounded=drop_ungrounded)
    valid_dlg = load_corpus(_resolve(ctx, valid_corpus), kg=kg, drop_ungrounded=drop_ungrounded)
    embeddings = WordEmbeddings.load(_resolve(ctx, emb_path)) if emb_path else None
    best = train(config, train_dlg, valid_dlg, kg, _resolve(ctx, out),
                 gate_embeddings=embeddings)
    click.echo(f"best checkpoint: {best}")


@cli.command("eval")
@click.option("--checkpoint", required=True)
@click.option("--kg", "kg_path", required=True)
@click.option("--corpus", required=True, help="Corpus split to evaluate (JSONL).")
@click.option("--report", "report_dir", required=True, help="Output report directory.")
@click.option("--embeddings", "emb_path", default=None)
@click.option("--beam-width", type=int, default=None)
@click.pass_context
def eval_cmd(ctx, checkpoint, kg_path, corpus, report_dir, emb_path, beam_width):
    """Evaluate a checkpoint: BLEU, Entity F1, METEOR, plus figures."""
    from .evaluation import evaluate_model, write_report
    from .model import DialogueModel
    kg = load_kg(_resolve(ctx, kg_path))
    embeddings = WordEmbeddings.load(_resolve(ctx, emb_path)) if emb_path else None
    model = DialogueModel.load(_resolve(ctx, checkpoint), kg, embeddings)
    dialogues = load_corpus(_resolve(ctx, corpus), kg=kg)
    report = evaluate_model(model, dialogues, beam_width=beam_width)
    path = write_report(report, _resolve(ctx, report_dir))
    click.echo(f"BLEU {report.bleu:.2f}  Entity F1 {report.entity_f1:.2f}  "
               f"METEOR {report.meteor:.2f}  -> {path}")


@cli.command("relation-link")
@click.option("--kg", "kg_path", required=True)
@click.option("--embeddings", "emb_path", required=True)
@click.option("--entity", required=True)
@click.option("--query", required=True)
@click.option("-k", "hops", type=int, default=2, show_default=True)
@click.option("--figure", default=None, help="Optional output directory for a score chart.")
@click.pass_context
def relation_link_cmd(ctx, kg_path, emb_path, entity, query, hops, figure):
    """Rank the entity's k-hop relations against the query (unsupervised)."""
    kg = load_kg(_resolve(ctx, kg_path))
    embeddings = WordEmbeddings.load(_resolve(ctx, emb_path))
    try:
        e = kg.entity_id(entity)
    except Exception as exc:
        raise click.ClickException(str(exc))
    ranked = relation_link(tokenize(query), kg, e, hops, embeddings)
    for r, score in ranked:
        click.echo(f"{kg.relation_label(r)}\t{score:.4f}")
    if figure:
        from .plotting import plot_relation_scores
        p = plot_relation_scores([kg.relation_label(r) for r, _ in ranked],
                                 [s for _, s in ranked], _resolve(ctx, figure))
        click.echo(f"figure: {p}")


@cli.command("chat")
@click.option("--checkpoint", required=True)
@click.option("--kg", "kg_path", required=True)
@click.option("--embeddings", "emb_path", default=None)
@click.pass_context
def chat_cmd(ctx, checkpoint, kg_path, emb_path):
    """Terminal REPL over a local checkpoint."""
    from .model import DialogueModel
    kg = load_kg(_resolve(ctx, kg_path))
    embeddings = WordEmbeddings.load(_resolve(ctx, emb_path)) if emb_path else None
    model = DialogueModel.load(_resolve(ctx, checkpoint), kg, embeddings)
    history: list[list[str]] = []
    click.echo("type a message (empty line to quit)")
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            break
        if not line:
            break
        query = tokenize(line)
        result = model.generate_response(history, query)
        click.echo(" ".join(result.surface))
        click.echo(f"  [entity={result.entity_label} relations={result.relations}"
                   f"{' low-confidence' if result.low_confidence else ''}]")
        history.append(query)
        history.append(result.surface)


@cli.command("serve")
@click.option("--checkpoint", required=True)
@click.option("--kg", "kg_path", required=True)
@click.option("--embeddings", "emb_path", default=None)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--beam-width", type=int, default=None)
@click.option("--ttl", type=float, default=3600.0, show_default=True)
@click.pass_context
def serve_cmd(ctx, checkpoint, kg_path, emb_path, port, beam_width, ttl):
    """Serve the chat API over a loaded checkpoint."""
    import uvicorn

    from .model import DialogueModel
    from .service import create_app
    kg = load_kg(_resolve(ctx, kg_path))
    embeddings = WordEmbeddings.load(_resolve(ctx, emb_path)) if emb_path else None
    model = DialogueModel.load(_resolve(ctx, checkpoint), kg, embeddings)
    app = create_app(model, ttl_seconds=ttl, beam_width=beam_width)
    uvicorn.run(app, host="0.0.0.0", port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        click.echo(f"error: {exc.format_message()}", err=True)
        return 2
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.exceptions.Abort:
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
