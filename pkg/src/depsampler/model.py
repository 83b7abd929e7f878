"""Sparse log-linear action model: scoring, softmax, and training.

The probability of the next transition given the current state is a
softmax over the *legal* actions only, with scores that are sums of
per-(feature, action) weights.  Training is L2-regularized multiclass
logistic regression on oracle-derived (state, action) pairs, optimized
with per-coordinate adaptive (AdaGrad-style) stochastic gradient steps
over shuffled instances.  Everything is deterministic given the config
seed.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

from .conllu import ParseTree, Sentence
from .features import TEMPLATE_VERSION, extract_features
from .transition import (
    LEFT_ARC,
    RIGHT_ARC,
    ROOT_LABEL,
    SHIFT,
    Action,
    NonProjectiveError,
    OracleError,
    legal_actions,
    oracle_actions,
)

__all__ = [
    "ActionModel",
    "TrainConfig",
    "TrainResult",
    "ModelFormatError",
    "build_actions",
    "action_distribution",
    "train",
    "save_model",
    "load_model",
]

FORMAT_VERSION = "1"


class ModelFormatError(ValueError):
    """Model file is truncated, malformed, or from another version."""


def build_actions(labels: Sequence[str]) -> tuple[Action, ...]:
    """Dense action list: SHIFT, then left arcs, then right arcs.

    The position in this tuple is the action id used for tie-breaking
    and inverse-CDF sampling order.
    """
    out = [Action(SHIFT)]
    out.extend(Action(LEFT_ARC, r) for r in labels)
    out.extend(Action(RIGHT_ARC, r) for r in labels)
    return tuple(out)


@dataclass
class ActionModel:
    """Trained parameters: labels, feature vocabulary, weight matrix.

    ``weights`` has shape (n_features, n_actions), float64.  Feature
    keys unseen at training time score zero.  Immutable by convention
    after training.
    """

    labels: tuple[str, ...]
    feature_index: dict[str, int]
    weights: np.ndarray
    template_version: str = TEMPLATE_VERSION
    actions: tuple[Action, ...] = field(init=False, repr=False)
    action_ids: dict[Action, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.actions = build_actions(self.labels)
        self.action_ids = {a: i for i, a in enumerate(self.actions)}
        if self.weights.shape != (len(self.feature_index), len(self.actions)):
            raise ValueError(
                f"weight matrix shape {self.weights.shape} does not match "
                f"{len(self.feature_index)} features x {len(self.actions)} actions"
            )

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def feature_ids(self, keys: Iterable[str]) -> np.ndarray:
        """Ids of the known feature keys (unknown keys drop out)."""
        idx = self.feature_index
        return np.array(
            [idx[k] for k in keys if k in idx], dtype=np.int64
        )

    def scores(self, feat_ids: np.ndarray, action_ids: np.ndarray) -> np.ndarray:
        """Raw scores for the given action ids under the active features."""
        if feat_ids.size == 0:
            return np.zeros(len(action_ids), dtype=np.float64)
        return self.weights[feat_ids][:, action_ids].sum(axis=0)


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max()
    e = np.exp(z)
    return e / e.sum()


def action_distribution(
    model: ActionModel,
    features: Iterable[str],
    legal: Iterable[Action],
) -> dict[Action, float]:
    """Softmax over the legal actions only, computed stably.

    Probabilities sum to 1 (within 1e-9); adding a constant to every
    score leaves the result unchanged thanks to max-subtraction.
    """
    legal = list(legal)
    if not legal:
        raise ValueError("legal action set must be nonempty")
    try:
        ids = np.array([model.action_ids[a] for a in legal], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"action {exc.args[0]} not in model label set") from None
    order = np.argsort(ids, kind="stable")
    ids = ids[order]
    legal = [legal[i] for i in order]
    probs = _softmax(model.scores(model.feature_ids(features), ids))
    return {a: float(p) for a, p in zip(legal, probs)}


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults are the committed standard run."""

    epochs: int = 10
    l2: float = 1e-6
    learning_rate: float = 0.05
    seed: int = 0
    holdout_fraction: float = 0.1


@dataclass
class TrainResult:
    model: ActionModel
    epoch_accuracy: list[float]
    n_trained: int
    n_skipped: int


@dataclass
class _Instance:
    feat_ids: np.ndarray
    legal_ids: np.ndarray
    gold_pos: int


def instance_log_likelihood(
    weights: np.ndarray,
    feat_ids: np.ndarray,
    legal_ids: np.ndarray,
    gold_pos: int,
) -> float:
    """log p(gold action | state) under the given weight matrix."""
    scores = weights[feat_ids][:, legal_ids].sum(axis=0)
    z = scores - scores.max()
    return float(z[gold_pos] - np.log(np.exp(z).sum()))


def instance_gradient(
    weights: np.ndarray,
    feat_ids: np.ndarray,
    legal_ids: np.ndarray,
    gold_pos: int,
) -> np.ndarray:
    """d log-likelihood / d weights[f, a] for active f and legal a.

    Returns an array of shape (len(feat_ids), len(legal_ids)); every
    active feature shares the same per-action row (probs minus one-hot,
    negated).
    """
    scores = weights[feat_ids][:, legal_ids].sum(axis=0)
    probs = _softmax(scores)
    row = -probs
    row[gold_pos] += 1.0
    return np.tile(row, (len(feat_ids), 1))


def _collect_instances(
    pairs: Sequence[tuple[Sentence, ParseTree]],
    labels: Sequence[str],
    feature_index: dict[str, int],
    grow: bool = True,
) -> list[_Instance]:
    """Oracle (state, action) pairs as id arrays.

    With ``grow=True`` the feature vocabulary is extended in first-seen
    order; otherwise unknown keys drop out (held-out data).
    """
    actions = build_actions(labels)
    action_ids = {a: i for i, a in enumerate(actions)}
    legal_cache: dict[tuple[bool, bool, bool], np.ndarray] = {}
    instances: list[_Instance] = []
    for sentence, gold in pairs:
        for state, action in oracle_actions(sentence, gold):
            situation = (
                bool(state.buffer),
                len(state.stack) >= 2,
                len(state.stack) >= 2 and state.stack[-2] == 0,
            )
            legal_ids = legal_cache.get(situation)
            if legal_ids is None:
                legal_ids = np.array(
                    sorted(action_ids[a] for a in legal_actions(state, labels)),
                    dtype=np.int64,
                )
                legal_cache[situation] = legal_ids
            keys = extract_features(sentence, state)
            ids = []
            for k in keys:
                fid = feature_index.get(k)
                if fid is None:
                    if not grow:
                        continue
                    fid = len(feature_index)
                    feature_index[k] = fid
                ids.append(fid)
            gold_id = action_ids[action]
            gold_pos = int(np.searchsorted(legal_ids, gold_id))
            if gold_pos >= len(legal_ids) or legal_ids[gold_pos] != gold_id:
                raise OracleError(f"oracle action {action} not legal")
            instances.append(
                _Instance(np.array(ids, dtype=np.int64), legal_ids, gold_pos)
            )
    return instances


def _holdout_accuracy(weights: np.ndarray, instances: Sequence[_Instance]) -> float:
    if not instances:
        return float("nan")
    correct = 0
    for inst in instances:
        scores = weights[inst.feat_ids][:, inst.legal_ids].sum(axis=0)
        if int(np.argmax(scores)) == inst.gold_pos:
            correct += 1
    return correct / len(instances)


def train(
    treebank: Iterable[tuple[Sentence, ParseTree]],
    config: Optional[TrainConfig] = None,
) -> TrainResult:
    """Fit the action model on oracle derivations of a gold treebank.

    Non-projective sentences (and any whose ROOT edge does not carry the
    designated root label) are skipped and counted.  The last
    ``holdout_fraction`` of a seeded shuffle is held out; its
    oracle-action accuracy is logged after each epoch.  Two runs with
    the same data and seed produce bitwise-identical weights.
    """
    if config is None:
        config = TrainConfig()
    usable: list[tuple[Sentence, ParseTree]] = []
    n_skipped = 0
    for sentence, gold in treebank:
        try:
            oracle_actions(sentence, gold)
        except (NonProjectiveError, OracleError):
            n_skipped += 1
            continue
        usable.append((sentence, gold))
    if not usable:
        raise ValueError("no projective training sentences")

    label_set = {rel for _, gold in usable for rel, _, _ in gold.edges}
    labels = tuple(sorted(label_set | {ROOT_LABEL}))

    rng = np.random.Generator(np.random.Philox(key=config.seed))
    order = rng.permutation(len(usable))
    n_holdout = 0
    if config.holdout_fraction > 0 and len(usable) >= 2:
        n_holdout = max(1, int(round(config.holdout_fraction * len(usable))))
        n_holdout = min(n_holdout, len(usable) - 1)
    holdout_pairs = [usable[i] for i in order[:n_holdout]]
    train_pairs = [usable[i] for i in order[n_holdout:]]

    feature_index: dict[str, int] = {}
    instances = _collect_instances(train_pairs, labels, feature_index)
    holdout = _collect_instances(holdout_pairs, labels, feature_index, grow=False)

    n_actions = len(build_actions(labels))
    weights = np.zeros((len(feature_index), n_actions), dtype=np.float64)
    grad_sq = np.zeros_like(weights)

    lr, l2 = config.learning_rate, config.l2
    epoch_accuracy: list[float] = []
    for _ in range(config.epochs):
        for idx in rng.permutation(len(instances)):
            inst = instances[idx]
            ix = np.ix_(inst.feat_ids, inst.legal_ids)
            rows = weights[ix]
            scores = rows.sum(axis=0)
            probs = _softmax(scores)
            probs[inst.gold_pos] -= 1.0
            g = probs[None, :] + l2 * rows
            grad_sq[ix] += g * g
            denom = np.sqrt(grad_sq[ix])
            step = np.divide(g, denom, out=np.zeros_like(g), where=g != 0.0)
            weights[ix] = rows - lr * step
        epoch_accuracy.append(_holdout_accuracy(weights, holdout))

    model = ActionModel(labels=labels, feature_index=feature_index, weights=weights)
    return TrainResult(
        model=model,
        epoch_accuracy=epoch_accuracy,
        n_trained=len(usable),
        n_skipped=n_skipped,
    )


# --------------------------------------------------------------------
# Model files: versioned plain text, optionally gzip-compressed.


def _open_maybe_gzip(target, mode: str):
    if isinstance(target, (str, Path)):
        path = Path(target)
        if path.suffix == ".gz":
            return gzip.open(path, mode + "t", encoding="utf-8"), True
        return open(path, mode, encoding="utf-8"), True
    return target, False


def save_model(model: ActionModel, sink: Union[str, Path, IO[str]]) -> None:
    """Write the model as tab-separated text with full float precision.

    Weights serialize via ``repr`` so that loading reproduces every
    score bit-for-bit.  Zero entries are omitted; a trailing ``end``
    line guards against truncation.
    """
    fobj, owned = _open_maybe_gzip(sink, "w")
    try:
        fobj.write(f"depsampler-model {FORMAT_VERSION}\n")
        fobj.write(f"templates {model.template_version}\n")
        fobj.write("labels\t" + "\t".join(model.labels) + "\n")
        fobj.write("actions\t" + "\t".join(str(a) for a in model.actions) + "\n")
        keys_by_id = sorted(model.feature_index, key=model.feature_index.get)
        # The full key list pins feature ids, so reloaded score sums run
        # over identical arrays (all-zero rows included).
        fobj.write(f"features {len(keys_by_id)}\n")
        for key in keys_by_id:
            fobj.write(key + "\n")
        fobj.write("weights\n")
        for key in keys_by_id:
            row = model.weights[model.feature_index[key]]
            for aid in np.nonzero(row)[0]:
                fobj.write(f"{key}\t{aid}\t{float(row[aid])!r}\n")
        fobj.write("end\n")
    finally:
        if owned:
            fobj.close()


def load_model(source: Union[str, Path, IO[str]]) -> ActionModel:
    """Read a model file; raises ModelFormatError on any mismatch."""
    fobj, owned = _open_maybe_gzip(source, "r")
    try:
        lines = iter(fobj)

        def next_line(what: str) -> str:
            try:
                return next(lines).rstrip("\n")
            except StopIteration:
                raise ModelFormatError(f"truncated model file: missing {what}") from None

        header = next_line("header").split(" ")
        if header[:1] != ["depsampler-model"] or len(header) != 2:
            raise ModelFormatError("not a depsampler model file")
        if header[1] != FORMAT_VERSION:
            raise ModelFormatError(
                f"unsupported model format version {header[1]!r}"
            )
        tmpl = next_line("template version").split(" ")
        if tmpl[:1] != ["templates"] or len(tmpl) != 2:
            raise ModelFormatError("missing template version line")
        if tmpl[1] != TEMPLATE_VERSION:
            raise ModelFormatError(
                f"model built with feature templates {tmpl[1]!r}, "
                f"this build uses {TEMPLATE_VERSION!r}"
            )
        label_line = next_line("labels").split("\t")
        if label_line[0] != "labels" or len(label_line) < 2:
            raise ModelFormatError("missing labels line")
        labels = tuple(label_line[1:])
        action_line = next_line("actions").split("\t")
        expected = [str(a) for a in build_actions(labels)]
        if action_line[0] != "actions" or action_line[1:] != expected:
            raise ModelFormatError("action index does not match label list")
        feat_header = next_line("features header").split(" ")
        if feat_header[:1] != ["features"] or len(feat_header) != 2:
            raise ModelFormatError("missing features section")
        try:
            n_features = int(feat_header[1])
        except ValueError:
            raise ModelFormatError("bad feature count") from None
        feature_index: dict[str, int] = {}
        for i in range(n_features):
            feature_index[next_line(f"feature {i}")] = i
        if len(feature_index) != n_features:
            raise ModelFormatError("duplicate feature keys")
        if next_line("weights header") != "weights":
            raise ModelFormatError("missing weights section")

        n_actions = len(expected)
        weights = np.zeros((n_features, n_actions), dtype=np.float64)
        terminated = False
        for raw in lines:
            line = raw.rstrip("\n")
            if line == "end":
                terminated = True
                break
            parts = line.split("\t")
            if len(parts) != 3:
                raise ModelFormatError(f"bad weight row: {line!r}")
            key, aid_s, w_s = parts
            try:
                aid, w = int(aid_s), float(w_s)
            except ValueError:
                raise ModelFormatError(f"bad weight row: {line!r}") from None
            if not 0 <= aid < n_actions:
                raise ModelFormatError(f"action id {aid} out of range")
            if key not in feature_index:
                raise ModelFormatError(f"weight row for unlisted feature {key!r}")
            weights[feature_index[key], aid] = w
        if not terminated:
            raise ModelFormatError("truncated model file: missing end marker")
        return ActionModel(
            labels=labels, feature_index=feature_index, weights=weights
        )
    finally:
        if owned:
            fobj.close()
