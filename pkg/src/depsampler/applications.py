"""Downstream probabilistic consumers of parse samples.

Rule-based entity extraction aggregates per-sentence match
probabilities with noisy-or into soft entity-level classifications.
Feature expectations average sparse feature vectors over the sample
distribution.  Semantic role assignment fits per-predicate label tables
conditioned on the direct argument-predicate arc (or its absence) and
predicts by marginalizing the table lookup over sampled trees.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Callable, Iterable, Mapping, Sequence, Union

from .conllu import ParseTree, Sentence
from .inference import SampleSet
from .marginals import StructureQuery, eval_query

__all__ = [
    "EntityMention",
    "RoleInstance",
    "SemanticModel",
    "NO_EDGE",
    "rule_match",
    "sentence_match_prob",
    "noisy_or",
    "rank_entities",
    "expected_features",
    "span_head",
    "arc_feature",
    "train_semantic",
    "assign_role",
    "most_common_label",
    "read_mentions_tsv",
    "read_roles_tsv",
]


@dataclass(frozen=True)
class EntityMention:
    """One occurrence of an entity: sentence id and inclusive token span."""

    entity_id: str
    sent_id: str
    span: tuple[int, int]


@dataclass(frozen=True)
class RoleInstance:
    """A (predicate token, argument) pair with its gold role label.

    The argument is a head token index, or an inclusive span whose head
    must be resolved against each parse.
    """

    sent_id: str
    predicate: int
    argument: Union[int, tuple[int, int]]
    label: str


# Rule = one or more alternative conjunctive queries.
Rule = Sequence[StructureQuery]


def _check_span(span: tuple[int, int], sentence: Sentence) -> None:
    start, end = span
    if not (1 <= start <= end <= len(sentence)):
        raise ValueError(
            f"span {start}-{end} out of range for sentence "
            f"{sentence.sent_id!r} of length {len(sentence)}"
        )


def rule_match(
    rule: Rule,
    sentence: Sentence,
    mention: EntityMention,
    tree: ParseTree,
) -> bool:
    """True iff any of the rule's alternatives matches the tree, with
    the mention span bound to ``@mention`` terms."""
    _check_span(mention.span, sentence)
    return any(
        eval_query(query, tree, sentence, mention_span=mention.span)
        for query in rule
    )


def sentence_match_prob(
    rule: Rule,
    sentence: Sentence,
    mention: EntityMention,
    samples: SampleSet,
) -> float:
    """Fraction of sampled parses where the rule fires."""
    hits = 0
    for tree, count in samples.trees():
        if rule_match(rule, sentence, mention, tree):
            hits += count
    return hits / samples.num_samples


def noisy_or(sentence_probs: Iterable[float]) -> float:
    """1 - prod(1 - p): probability at least one sentence-level match
    is real, assuming independence."""
    result = 1.0
    for p in sentence_probs:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
        result *= 1.0 - p
    return 1.0 - result


def rank_entities(
    mentions: Iterable[EntityMention],
    rule: Rule,
    samples_by_sent: Mapping[str, SampleSet],
) -> list[tuple[str, float]]:
    """Entity-level probabilities, descending; ties by entity id.

    Every mention contributes its sentence-level match probability to
    its entity's noisy-or.  Every mentioned sentence must have samples.
    """
    probs_by_entity: dict[str, list[float]] = {}
    for mention in mentions:
        samples = samples_by_sent.get(mention.sent_id)
        if samples is None:
            raise ValueError(
                f"no samples for sentence {mention.sent_id!r} "
                f"(entity {mention.entity_id!r})"
            )
        p = sentence_match_prob(rule, samples.sentence, mention, samples)
        probs_by_entity.setdefault(mention.entity_id, []).append(p)
    ranked = [
        (entity, noisy_or(ps)) for entity, ps in probs_by_entity.items()
    ]
    ranked.sort(key=lambda pair: (-pair[1], pair[0]))
    return ranked


def expected_features(
    feature_fn: Callable[[Sentence, ParseTree], Mapping[str, float]],
    samples: SampleSet,
) -> dict[str, float]:
    """Expectation of a sparse feature vector under the sampled parse
    distribution, computed per unique tree."""
    out: dict[str, float] = {}
    s = samples.num_samples
    for tree, count in samples.trees():
        w = count / s
        for key, value in feature_fn(samples.sentence, tree).items():
            out[key] = out.get(key, 0.0) + w * value
    return out


# --------------------------------------------------------------------
# Semantic role assignment.

NO_EDGE = "none"


def span_head(tree: ParseTree, span: tuple[int, int]) -> int:
    """Argument head of a span under one parse.

    Each span token climbs to its highest ancestor reachable without
    leaving the span; the candidate covering the most span tokens wins,
    ties to the leftmost.
    """
    start, end = span
    if not (1 <= start <= end <= tree.n_tokens):
        raise ValueError(f"span {start}-{end} out of range")
    head = {child: gov for _, gov, child in tree.edges}
    counts: dict[int, int] = {}
    for w in range(start, end + 1):
        x = w
        while start <= head[x] <= end:
            x = head[x]
        counts[x] = counts.get(x, 0) + 1
    return min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def arc_feature(tree: ParseTree, argument: int, predicate: int) -> str:
    """Direction-marked relation of the direct arc between argument and
    predicate: ``up:rel`` (predicate governs argument), ``down:rel``
    (argument governs predicate), or the no-edge symbol."""
    n = tree.n_tokens
    if not (1 <= argument <= n and 1 <= predicate <= n):
        raise ValueError(
            f"argument {argument} / predicate {predicate} out of range 1..{n}"
        )
    if argument == predicate:
        raise ValueError("argument and predicate must be distinct tokens")
    head = tree.head_map()
    rel, gov = head[argument]
    if gov == predicate:
        return f"up:{rel}"
    rel, gov = head[predicate]
    if gov == argument:
        return f"down:{rel}"
    return NO_EDGE


def _pred_key(sentence: Sentence, index: int) -> str:
    tok = sentence.token(index)
    return tok.lemma if tok.lemma != "_" else tok.form


def _resolve_argument(
    tree: ParseTree, argument: Union[int, tuple[int, int]]
) -> int:
    if isinstance(argument, tuple):
        return span_head(tree, argument)
    return argument


@dataclass
class SemanticModel:
    """Per-predicate conditional label tables p(label | arc feature).

    ``counts`` keeps the raw (possibly fractional) training mass so the
    estimates can be audited; lookups fall back to the predicate's
    overall label distribution for unseen features, and to the global
    label prior for unseen predicates.
    """

    labels: tuple[str, ...]
    counts: dict[str, dict[str, dict[str, float]]]
    tables: dict[str, dict[str, dict[str, float]]]
    pred_label_dist: dict[str, dict[str, float]]
    label_prior: dict[str, float]

    def conditional(self, pred_key: str, feature: str) -> Mapping[str, float]:
        by_feat = self.tables.get(pred_key)
        if by_feat is None:
            return self.label_prior
        dist = by_feat.get(feature)
        if dist is None:
            return self.pred_label_dist[pred_key]
        return dist


def _normalize(counts: Mapping[str, float]) -> dict[str, float]:
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()}


def train_semantic(
    instances: Sequence[RoleInstance],
    data: Mapping[str, object],
    mode: str = "greedy",
) -> SemanticModel:
    """Maximum-likelihood label tables from (predicate, feature, label)
    counts.

    ``mode="greedy"`` expects ``data[sent_id] = (Sentence, ParseTree)``
    and adds one count per instance.  ``mode="samples"`` expects
    ``data[sent_id] = SampleSet`` and adds fractional counts weighted
    by each unique tree's sample share, resolving span arguments per
    tree; the mass added per instance still totals one.
    """
    if not instances:
        raise ValueError("no role instances")
    if mode not in ("greedy", "samples"):
        raise ValueError(f"unknown mode {mode!r}")
    counts: dict[str, dict[str, dict[str, float]]] = {}
    label_counts: dict[str, float] = {}

    def add(pred_key: str, feature: str, label: str, weight: float):
        by_feat = counts.setdefault(pred_key, {})
        by_label = by_feat.setdefault(feature, {})
        by_label[label] = by_label.get(label, 0.0) + weight
        label_counts[label] = label_counts.get(label, 0.0) + weight

    for inst in instances:
        if inst.sent_id not in data:
            raise ValueError(f"no parse data for sentence {inst.sent_id!r}")
        if mode == "greedy":
            sentence, tree = data[inst.sent_id]
            argument = _resolve_argument(tree, inst.argument)
            add(
                _pred_key(sentence, inst.predicate),
                arc_feature(tree, argument, inst.predicate),
                inst.label,
                1.0,
            )
        else:
            samples: SampleSet = data[inst.sent_id]
            pred_key = _pred_key(samples.sentence, inst.predicate)
            s = samples.num_samples
            for tree, count in samples.trees():
                argument = _resolve_argument(tree, inst.argument)
                add(
                    pred_key,
                    arc_feature(tree, argument, inst.predicate),
                    inst.label,
                    count / s,
                )

    tables = {
        pred: {feat: _normalize(dist) for feat, dist in by_feat.items()}
        for pred, by_feat in counts.items()
    }
    pred_label_dist = {}
    for pred, by_feat in counts.items():
        totals: dict[str, float] = {}
        for dist in by_feat.values():
            for label, w in dist.items():
                totals[label] = totals.get(label, 0.0) + w
        pred_label_dist[pred] = _normalize(totals)
    return SemanticModel(
        labels=tuple(sorted(label_counts)),
        counts=counts,
        tables=tables,
        pred_label_dist=pred_label_dist,
        label_prior=_normalize(label_counts),
    )


def assign_role(
    model: SemanticModel,
    predicate: int,
    argument: Union[int, tuple[int, int]],
    samples: SampleSet,
) -> tuple[str, dict[str, float]]:
    """Posterior over labels, marginalized over sampled parses.

    Each unique tree contributes its sample share times the label table
    conditioned on that tree's argument-predicate arc feature.  Returns
    the argmax label (ties by label order) and the full posterior.
    """
    pred_key = _pred_key(samples.sentence, predicate)
    posterior = {label: 0.0 for label in model.labels}
    s = samples.num_samples
    for tree, count in samples.trees():
        arg = _resolve_argument(tree, argument)
        dist = model.conditional(pred_key, arc_feature(tree, arg, predicate))
        w = count / s
        for label, p in dist.items():
            posterior[label] = posterior.get(label, 0.0) + w * p
    best = max(model.labels, key=lambda lab: posterior.get(lab, 0.0))
    return best, posterior


def most_common_label(model: SemanticModel, sentence: Sentence, predicate: int) -> str:
    """Baseline: the predicate's most frequent training-time label,
    falling back to the global prior for unknown predicates."""
    pred_key = _pred_key(sentence, predicate)
    dist = model.pred_label_dist.get(pred_key, model.label_prior)
    return max(model.labels, key=lambda lab: dist.get(lab, 0.0))


# --------------------------------------------------------------------
# TSV inputs.


def _rows(source: Union[str, Path, IO[str]]):
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fobj:
            yield from csv.reader(fobj, delimiter="\t")
    else:
        yield from csv.reader(source, delimiter="\t")


def read_mentions_tsv(source: Union[str, Path, IO[str]]) -> list[EntityMention]:
    """Rows of (entity_id, sent_id, span_start, span_end)."""
    mentions = []
    for lineno, row in enumerate(_rows(source), start=1):
        if not row or row[0].startswith("#"):
            continue
        if len(row) != 4:
            raise ValueError(f"mentions line {lineno}: expected 4 columns")
        mentions.append(
            EntityMention(row[0], row[1], (int(row[2]), int(row[3])))
        )
    return mentions


def read_roles_tsv(source: Union[str, Path, IO[str]]) -> list[RoleInstance]:
    """Rows of (sent_id, predicate_index, argument, label); the
    argument column is a token index or an inclusive span ``a-b``."""
    instances = []
    for lineno, row in enumerate(_rows(source), start=1):
        if not row or row[0].startswith("#"):
            continue
        if len(row) != 4:
            raise ValueError(f"roles line {lineno}: expected 4 columns")
        arg_text = row[2]
        argument: Union[int, tuple[int, int]]
        if "-" in arg_text:
            a, b = arg_text.split("-", 1)
            argument = (int(a), int(b))
        else:
            argument = int(arg_text)
        instances.append(RoleInstance(row[0], int(row[1]), argument, row[3]))
    return instances
