import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixture_data import (FIXTURE_DIALOGUES, FIXTURE_TRIPLES, MOVIE_TRIPLES,
                          write_corpus_file, write_kg_file)

from kgdial.data import load_corpus
from kgdial.kg import KnowledgeGraph, load_kg


def build_kg(triples) -> KnowledgeGraph:
    kg = KnowledgeGraph()
    for s, r, o in triples:
        kg.add_triple(s, r, o)
    return kg


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture")
    kg_path = write_kg_file(root / "kg.tsv")
    corpus_path = write_corpus_file(root / "train.jsonl")
    return {"root": root, "kg": kg_path, "corpus": corpus_path}


@pytest.fixture(scope="session")
def fixture_kg(fixture_paths):
    return load_kg(fixture_paths["kg"])


@pytest.fixture(scope="session")
def fixture_dialogues(fixture_paths, fixture_kg):
    return load_corpus(fixture_paths["corpus"], kg=fixture_kg)


@pytest.fixture(scope="session")
def movie_kg():
    return build_kg(MOVIE_TRIPLES)


@pytest.fixture(scope="session")
def overfit_run(fixture_paths, fixture_kg, fixture_dialogues, tmp_path_factory):
    """Train the static-embedding preset on the 20-dialogue fixture for 300 steps.

    Shared by the training tests, the acceptance overfit criterion, and the
    service conversation test.
    """
    from kgdial.model import DialogueModel, ModelConfig
    from kgdial.training import TrainConfig, train

    outdir = tmp_path_factory.mktemp("overfit")
    config = TrainConfig(
        epochs=1000, max_steps=300, eval_every=75, patience=10**6, seed=7,
        lr_decoder=2e-3,
        model=ModelConfig(encoder_kind="static", ctx_dim=64, h_dim=128,
                          cnn_filters=64, cnn_hidden=64, cnn_dropout=0.1,
                          max_decode_len=20))
    best = train(config, fixture_dialogues, fixture_dialogues, fixture_kg, outdir)
    model = DialogueModel.load(best, fixture_kg)
    return {"model": model, "outdir": outdir, "best": best, "config": config}
