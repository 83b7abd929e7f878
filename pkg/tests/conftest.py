"""Session fixtures: the desk-scale corpus, trained model, dev samples.

Set UD_TRAIN_CONLLU / UD_DEV_CONLLU to point the treebank-scale checks
at a real CoNLL-U train/dev split instead of the bundled synthetic
corpus (the train side is capped at 5000 sentences).
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import pytest

from depsampler.conllu import ParseTree, Sentence, read_conllu
from depsampler.inference import SampleSet, draw_samples, greedy_parse
from depsampler.model import ActionModel, TrainConfig, train

from .corpus import make_treebank

N_TRAIN = 1200
N_DEV = 250
DEV_SAMPLES = 100
SAMPLE_SEED = 314159


@dataclass
class DeskRun:
    train_pairs: list[tuple[Sentence, ParseTree]]
    dev_pairs: list[tuple[Sentence, ParseTree]]
    model: ActionModel
    train_seconds: float
    epoch_accuracy: list[float]
    las_floor: float
    greedy_trees: list[ParseTree]
    dev_samples: list[SampleSet]


def _load_corpus():
    train_path = os.environ.get("UD_TRAIN_CONLLU")
    dev_path = os.environ.get("UD_DEV_CONLLU")
    if train_path and dev_path:
        train_pairs = [
            (s, t) for s, t in read_conllu(train_path) if t is not None
        ]
        dev_pairs = [(s, t) for s, t in read_conllu(dev_path) if t is not None]
        capped = len(train_pairs) > 5000
        if capped:
            train_pairs = train_pairs[:5000]
        return train_pairs, dev_pairs, (0.65 if capped else 0.70)
    train_pairs, dev_pairs = make_treebank(N_TRAIN, N_DEV)
    return train_pairs, dev_pairs, 0.70


@pytest.fixture(scope="session")
def desk_run() -> DeskRun:
    train_pairs, dev_pairs, floor = _load_corpus()
    t0 = time.perf_counter()
    result = train(train_pairs, TrainConfig(epochs=10, seed=7))
    train_seconds = time.perf_counter() - t0
    model = result.model
    greedy_trees = [greedy_parse(model, s) for s, _ in dev_pairs]
    dev_samples = [
        draw_samples(model, s, DEV_SAMPLES, SAMPLE_SEED) for s, _ in dev_pairs
    ]
    return DeskRun(
        train_pairs=train_pairs,
        dev_pairs=dev_pairs,
        model=model,
        train_seconds=train_seconds,
        epoch_accuracy=result.epoch_accuracy,
        las_floor=floor,
        greedy_trees=greedy_trees,
        dev_samples=dev_samples,
    )


@pytest.fixture(scope="session")
def tiny_model() -> ActionModel:
    """Sharp model trained on a small slice of the synthetic grammar."""
    train_pairs, _ = make_treebank(200, 0, seed=99)
    return train(train_pairs, TrainConfig(epochs=5, seed=5)).model
