"""Matplotlib figure rendering for evaluation reports and training curves."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update({
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def plot_eval_report(report, outdir) -> list[Path]:
    outdir = Path(outdir)
    paths = []

    fig, ax = plt.subplots(figsize=(4, 3))
    names = ["BLEU", "Entity F1", "METEOR"]
    values = [report.bleu, report.entity_f1, report.meteor]
    ax.bar(names, values, color=["#4878d0", "#ee854a", "#6acc64"])
    for i, v in enumerate(values):
        ax.text(i, v, f"{v:.2f}", ha="center", va="bottom")
    ax.set_ylabel("score")
    ax.set_title(f"{report.num_examples} examples ({report.num_kg_grounded} KG-grounded)")
    fig.tight_layout()
    p = outdir / "metrics.png"
    fig.savefig(p)
    plt.close(fig)
    paths.append(p)

    f1s = [r.f1 for r in report.records if r.f1 is not None]
    if f1s:
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.hist(f1s, bins=10, range=(0, 1), color="#4878d0", edgecolor="black")
        ax.set_xlabel("per-question Entity F1")
        ax.set_ylabel("questions")
        fig.tight_layout()
        p = outdir / "entity_f1_hist.png"
        fig.savefig(p)
        plt.close(fig)
        paths.append(p)
    return paths


def plot_training_curves(metrics: list[dict], outdir) -> Path:
    """Loss and validation Entity F1 per epoch from the metrics records."""
    outdir = Path(outdir)
    epochs = [m["epoch"] for m in metrics]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7, 3))
    ax1.plot(epochs, [m["train_loss"] for m in metrics], marker="o")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss")
    ax2.plot(epochs, [m.get("valid_entity_f1", 0.0) for m in metrics],
             marker="o", color="#ee854a")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("valid Entity F1")
    fig.tight_layout()
    p = outdir / "curves.png"
    fig.savefig(p)
    plt.close(fig)
    return p


def plot_relation_scores(labels: list[str], scores: list[float], outdir,
                         name: str = "relation_scores.png") -> Path:
    """Horizontal bar chart of ranked relation-linking scores."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(4, 0.4 * max(len(labels), 4) + 1))
    ax.barh(range(len(labels))[::-1], scores, color="#4878d0")
    ax.set_yticks(range(len(labels))[::-1])
    ax.set_yticklabels(labels)
    ax.set_xlabel("propagated score")
    fig.tight_layout()
    p = outdir / name
    fig.savefig(p)
    plt.close(fig)
    return p
