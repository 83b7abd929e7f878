"""Evaluation and diagnostics.

Labeled attachment score, micro-averaged precision/recall over
dependency-path predictions with thresholding, adaptive equal-mass
calibration binning, and sentence-length-versus-entropy reporting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .conllu import ParseTree
from .inference import SampleSet
from .marginals import DepPath, enumerate_paths, tree_entropy

__all__ = [
    "PRPoint",
    "PRCurve",
    "CalibrationBin",
    "CalibrationReport",
    "EntropyRow",
    "EntropyReport",
    "las",
    "corpus_las",
    "path_pr_curve",
    "greedy_path_pr",
    "calibration_pairs",
    "calibration_table",
    "entropy_report",
]


@dataclass(frozen=True)
class PRPoint:
    """Precision/recall at one confidence threshold (None for a
    single-tree prediction with no threshold)."""

    threshold: Optional[float]
    precision: float
    recall: float
    f1: float
    n_predicted: int
    n_gold: int


@dataclass
class PRCurve:
    points: list[PRPoint]
    best: PRPoint


def _pr_point(
    threshold: Optional[float], n_hit: int, n_pred: int, n_gold: int
) -> PRPoint:
    # Empty prediction sets count as fully precise, keeping curves total.
    precision = n_hit / n_pred if n_pred else 1.0
    recall = n_hit / n_gold if n_gold else 1.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return PRPoint(threshold, precision, recall, f1, n_pred, n_gold)


def las(
    predicted: Union[ParseTree, Mapping[int, tuple[str, int]]],
    gold: ParseTree,
) -> float:
    """Fraction of tokens with both governor and relation correct.

    All tokens count, punctuation included.  The prediction may be a
    tree or a bare child -> (relation, governor) assignment, so
    minimum-risk output is scored even when it is not a tree.
    """
    pred_map = predicted.head_map() if isinstance(predicted, ParseTree) else predicted
    gold_map = gold.head_map()
    correct = sum(
        1
        for child, ann in gold_map.items()
        if pred_map.get(child) == ann
    )
    return correct / gold.n_tokens


def corpus_las(
    predicted: Sequence[Union[ParseTree, Mapping[int, tuple[str, int]]]],
    gold: Sequence[ParseTree],
) -> float:
    """Micro-averaged LAS: correct tokens over all tokens in the corpus."""
    if len(predicted) != len(gold):
        raise ValueError("prediction and gold sequences differ in length")
    correct = total = 0
    for pred, gold_tree in zip(predicted, gold):
        pred_map = pred.head_map() if isinstance(pred, ParseTree) else pred
        for child, ann in gold_tree.head_map().items():
            correct += pred_map.get(child) == ann
            total += 1
    return correct / total


def path_pr_curve(
    predicted_marginals: Sequence[Mapping[DepPath, float]],
    gold_trees: Sequence[ParseTree],
    d: int,
    thresholds: Optional[Sequence[float]] = None,
) -> PRCurve:
    """Micro-averaged PR over the corpus at each threshold.

    A path instance is (sentence position, edge set); gold is the union
    of each gold tree's length-d paths.  With ``thresholds=None`` the
    grid is every distinct predicted probability, which traces the
    complete curve.  ``best`` is the max-F1 point.
    """
    if len(predicted_marginals) != len(gold_trees):
        raise ValueError("prediction and gold sequences differ in length")
    gold_instances = set()
    for i, tree in enumerate(gold_trees):
        for path in enumerate_paths(tree, d):
            gold_instances.add((i, path))
    scored: list[tuple[float, bool]] = []
    for i, marginals in enumerate(predicted_marginals):
        for path, prob in marginals.items():
            scored.append((prob, (i, path) in gold_instances))
    if thresholds is None:
        grid = sorted({prob for prob, _ in scored}) or [1.0]
    else:
        grid = sorted(thresholds)
    points = []
    for t in grid:
        n_pred = n_hit = 0
        for prob, in_gold in scored:
            if prob >= t:
                n_pred += 1
                n_hit += in_gold
        points.append(_pr_point(t, n_hit, n_pred, len(gold_instances)))
    best = max(points, key=lambda p: p.f1)
    return PRCurve(points=points, best=best)


def greedy_path_pr(
    predicted_trees: Sequence[ParseTree],
    gold_trees: Sequence[ParseTree],
    d: int,
) -> PRPoint:
    """Single PR point for one-best trees; for d=1 this equals LAS on
    both axes."""
    if len(predicted_trees) != len(gold_trees):
        raise ValueError("prediction and gold sequences differ in length")
    n_pred = n_hit = n_gold = 0
    for pred, gold in zip(predicted_trees, gold_trees):
        gold_paths = enumerate_paths(gold, d)
        pred_paths = enumerate_paths(pred, d)
        n_gold += len(gold_paths)
        n_pred += len(pred_paths)
        n_hit += len(gold_paths & pred_paths)
    return _pr_point(None, n_hit, n_pred, n_gold)


def calibration_pairs(
    predicted_marginals: Sequence[Mapping[DepPath, float]],
    gold_trees: Sequence[ParseTree],
    d: int,
) -> list[tuple[float, bool]]:
    """(probability, in gold) for every predicted path instance.

    Gold paths that were never predicted cannot enter any bin; they
    affect recall only, not calibration.
    """
    if len(predicted_marginals) != len(gold_trees):
        raise ValueError("prediction and gold sequences differ in length")
    pairs = []
    for marginals, tree in zip(predicted_marginals, gold_trees):
        gold_paths = enumerate_paths(tree, d)
        for path, prob in marginals.items():
            pairs.append((prob, path in gold_paths))
    return pairs


@dataclass(frozen=True)
class CalibrationBin:
    count: int
    mean_predicted: float
    empirical_precision: float
    prob_min: float
    prob_max: float


@dataclass
class CalibrationReport:
    bins: list[CalibrationBin]
    mean_abs_gap: float


def calibration_table(
    predictions: Sequence[tuple[float, bool]], min_bin_size: int
) -> CalibrationReport:
    """Adaptive equal-mass binning of (confidence, correct?) pairs.

    Predictions are sorted by probability and grouped left to right
    into bins of at least ``min_bin_size`` items; a bin keeps absorbing
    items while the next one shares its probability, so ties never
    split across bins.  A short final bin merges into its predecessor.
    Reports each bin's mean confidence and empirical precision plus the
    count-weighted mean absolute gap between the two.
    """
    if min_bin_size < 1:
        raise ValueError("min_bin_size must be >= 1")
    if not predictions:
        raise ValueError("predictions must be nonempty")
    items = sorted(predictions, key=lambda pair: pair[0])
    if min_bin_size > len(items):
        warnings.warn(
            f"min_bin_size {min_bin_size} exceeds item count {len(items)}; "
            "using a single bin",
            stacklevel=2,
        )
    groups: list[list[tuple[float, bool]]] = []
    i = 0
    while i < len(items):
        j = min(i + min_bin_size, len(items))
        while j < len(items) and items[j][0] == items[j - 1][0]:
            j += 1
        groups.append(items[i:j])
        i = j
    if len(groups) >= 2 and len(groups[-1]) < min_bin_size:
        groups[-2].extend(groups.pop())
    bins = []
    weighted_gap = 0.0
    for group in groups:
        probs = [p for p, _ in group]
        mean_pred = sum(probs) / len(group)
        empirical = sum(1 for _, hit in group if hit) / len(group)
        bins.append(
            CalibrationBin(
                count=len(group),
                mean_predicted=mean_pred,
                empirical_precision=empirical,
                prob_min=probs[0],
                prob_max=probs[-1],
            )
        )
        weighted_gap += len(group) * abs(mean_pred - empirical)
    return CalibrationReport(bins=bins, mean_abs_gap=weighted_gap / len(items))


@dataclass(frozen=True)
class EntropyRow:
    sent_id: str
    n_tokens: int
    domain_size: int
    entropy: float


@dataclass
class EntropyReport:
    rows: list[EntropyRow]
    pearson: Optional[float]
    spearman: Optional[float]


def entropy_report(sample_sets: Sequence[SampleSet]) -> EntropyReport:
    """Per-sentence entropy rows plus length/entropy correlations.

    Correlations are None when undefined (fewer than two sentences, or
    a constant column).
    """
    rows = [
        EntropyRow(
            sent_id=s.sentence.sent_id,
            n_tokens=len(s.sentence),
            domain_size=len(s.entries),
            entropy=tree_entropy(s),
        )
        for s in sample_sets
    ]
    pearson = spearman = None
    if len(rows) >= 2:
        lengths = np.array([r.n_tokens for r in rows], dtype=float)
        entropies = np.array([r.entropy for r in rows], dtype=float)
        if lengths.std() > 0 and entropies.std() > 0:
            pearson = float(stats.pearsonr(lengths, entropies)[0])
            spearman = float(stats.spearmanr(lengths, entropies)[0])
    return EntropyReport(rows=rows, pearson=pearson, spearman=spearman)
