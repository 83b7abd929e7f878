"""Scikit-learn style estimator wrapping the trainable parser.

``TransitionParser`` exposes the usual ``fit`` / ``predict`` /
``get_params`` surface over sequences of :class:`Sentence` (X) and
:class:`ParseTree` (y), so it composes with tooling that understands
estimators (cloning, parameter search with a custom scorer, pipelines
that pass opaque objects through).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .analysis import las
from .conllu import ParseTree, Sentence
from .inference import SampleSet, draw_samples, greedy_parse, mbr_parse, mc_map
from .model import TrainConfig, load_model, save_model, train

__all__ = ["TransitionParser"]


def _validate_sentences(X) -> list[Sentence]:
    X = list(X)
    if not X:
        raise ValueError("X must contain at least one sentence")
    for item in X:
        if not isinstance(item, Sentence):
            raise TypeError(f"expected Sentence, got {type(item).__name__}")
    return X


def _validate_trees(y, X: Sequence[Sentence]) -> list[ParseTree]:
    y = list(y)
    if len(y) != len(X):
        raise ValueError(f"X has {len(X)} sentences but y has {len(y)} trees")
    for sent, tree in zip(X, y):
        if not isinstance(tree, ParseTree):
            raise TypeError(f"expected ParseTree, got {type(tree).__name__}")
        if tree.n_tokens != len(sent):
            raise ValueError(
                f"tree for {sent.sent_id!r} covers {tree.n_tokens} tokens, "
                f"sentence has {len(sent)}"
            )
    return y


class TransitionParser(BaseEstimator):
    """Probabilistic arc-standard dependency parser.

    Parameters mirror :class:`TrainConfig`.  After ``fit`` the trained
    weights live in ``model_``; ``predict`` runs greedy decoding, and
    ``sample`` draws exact posterior samples that feed the marginal
    inference utilities.

    Example
    -------
    >>> parser = TransitionParser(epochs=5, seed=1).fit(sentences, trees)
    >>> parser.predict(sentences[:1])
    [ParseTree(...)]
    """

    def __init__(
        self,
        epochs: int = 10,
        l2: float = 1e-6,
        learning_rate: float = 0.05,
        seed: int = 0,
        holdout_fraction: float = 0.1,
    ):
        self.epochs = epochs
        self.l2 = l2
        self.learning_rate = learning_rate
        self.seed = seed
        self.holdout_fraction = holdout_fraction

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            l2=self.l2,
            learning_rate=self.learning_rate,
            seed=self.seed,
            holdout_fraction=self.holdout_fraction,
        )

    def fit(self, X, y) -> "TransitionParser":
        """Train on parallel sequences of sentences and gold trees."""
        X = _validate_sentences(X)
        y = _validate_trees(y, X)
        result = train(zip(X, y), self._config())
        self.model_ = result.model
        self.epoch_accuracy_ = result.epoch_accuracy
        self.n_trained_ = result.n_trained
        self.n_skipped_ = result.n_skipped
        return self

    def predict(self, X) -> list[ParseTree]:
        """Greedy one-best trees."""
        check_is_fitted(self, "model_")
        return [greedy_parse(self.model_, s) for s in _validate_sentences(X)]

    def sample(self, X, n_samples: int = 100, seed: int = 0) -> list[SampleSet]:
        """Exact posterior samples for each sentence, deduplicated."""
        check_is_fitted(self, "model_")
        return [
            draw_samples(self.model_, s, n_samples, seed)
            for s in _validate_sentences(X)
        ]

    def predict_mcmap(
        self, X, n_samples: int = 100, seed: int = 0
    ) -> list[ParseTree]:
        """Most frequent sampled tree per sentence."""
        return [mc_map(s) for s in self.sample(X, n_samples, seed)]

    def predict_mbr(
        self, X, n_samples: int = 100, seed: int = 0
    ) -> list[tuple[dict[int, tuple[str, int]], bool]]:
        """Per-token marginal argmax assignments with tree-ness flags."""
        return [mbr_parse(s) for s in self.sample(X, n_samples, seed)]

    def score(self, X, y) -> float:
        """Mean labeled attachment score of greedy parses."""
        X = _validate_sentences(X)
        y = _validate_trees(y, X)
        trees = self.predict(X)
        return sum(las(p, g) for p, g in zip(trees, y)) / len(y)

    def save(self, path: Union[str, Path]) -> None:
        check_is_fitted(self, "model_")
        save_model(self.model_, path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TransitionParser":
        """Fitted parser from a model file (training params not
        recorded in the file; the instance gets defaults)."""
        parser = cls()
        parser.model_ = load_model(path)
        return parser
