"""Decoders over the transition model.

* greedy decoding (argmax action at every step);
* transition sampling: running the automaton stochastically draws an
  exact sample from the joint tree distribution, at essentially the
  greedy decoder's cost;
* MC-MAP (most frequent tree in the sample multiset) and per-token
  minimum-risk decoding from sample marginals;
* exhaustive enumeration of the whole derivation space for tiny
  sentences, used as the verification oracle for the samplers.

Reproducibility: sample k of a sentence uses its own counter-based
substream keyed by (seed, sentence id, k), so results never depend on
execution order or parallelism.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import log
from typing import IO, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .conllu import Edge, ParseTree, Sentence, TreeValidationError, read_conllu, write_conllu
from .features import extract_features
from .model import ActionModel, _softmax
from .transition import (
    Action,
    ParserState,
    apply_action,
    initial_state,
    is_terminal,
    legal_actions,
)

__all__ = [
    "SampledParse",
    "SampleEntry",
    "SampleSet",
    "EnumerationBudgetError",
    "greedy_parse",
    "sample_parse",
    "draw_parses",
    "draw_samples",
    "mc_map",
    "mbr_parse",
    "enumerate_exact",
    "write_sample_file",
    "load_sample_sets",
]


@dataclass(frozen=True)
class SampledParse:
    """One draw from the joint distribution: tree, derivation, log p."""

    tree: ParseTree
    actions: tuple[Action, ...]
    log_prob: float
    sample_id: int


@dataclass
class SampleEntry:
    tree: ParseTree
    count: int
    actions: Optional[tuple[Action, ...]] = None


@dataclass
class SampleSet:
    """Multiset of sampled trees for one sentence, deduplicated.

    ``entries`` maps each tree's canonical key to its count; counts sum
    to ``num_samples``.  The empirical probability count/num_samples is
    the Monte Carlo estimate of the tree's posterior.
    """

    sentence: Sentence
    num_samples: int
    entries: dict[str, SampleEntry]

    def __post_init__(self):
        if any(e.count < 1 for e in self.entries.values()):
            raise ValueError("sample entry counts must be >= 1")
        total = sum(e.count for e in self.entries.values())
        if total != self.num_samples or self.num_samples < 1:
            raise ValueError(
                f"entry counts sum to {total}, expected {self.num_samples}"
            )

    @classmethod
    def from_parses(
        cls, sentence: Sentence, parses: Sequence[SampledParse]
    ) -> "SampleSet":
        entries: dict[str, SampleEntry] = {}
        for p in parses:
            key = p.tree.canonical_key()
            entry = entries.get(key)
            if entry is None:
                entries[key] = SampleEntry(p.tree, 1, p.actions)
            else:
                entry.count += 1
        return cls(sentence, len(parses), entries)

    @classmethod
    def from_counts(
        cls, sentence: Sentence, counted: Iterable[tuple[ParseTree, int]]
    ) -> "SampleSet":
        """Hand-built sample set from (tree, count) pairs."""
        entries: dict[str, SampleEntry] = {}
        total = 0
        for tree, count in counted:
            key = tree.canonical_key()
            if key in entries:
                entries[key].count += count
            else:
                entries[key] = SampleEntry(tree, count)
            total += count
        return cls(sentence, total, entries)

    @classmethod
    def degenerate(cls, sentence: Sentence, tree: ParseTree) -> "SampleSet":
        return cls.from_counts(sentence, [(tree, 1)])

    def trees(self) -> Iterator[tuple[ParseTree, int]]:
        for entry in self.entries.values():
            yield entry.tree, entry.count

    def probability(self, tree: ParseTree) -> float:
        entry = self.entries.get(tree.canonical_key())
        return entry.count / self.num_samples if entry else 0.0

    def sorted_entries(self) -> list[SampleEntry]:
        """Entries by descending count, ties by canonical key."""
        return [
            e
            for _, e in sorted(
                self.entries.items(), key=lambda kv: (-kv[1].count, kv[0])
            )
        ]


class EnumerationBudgetError(RuntimeError):
    """Derivation space exceeded the expansion budget."""


class _Stepper:
    """Per-sentence cache of legal actions and their probabilities.

    States recur constantly while sampling the same sentence, so the
    distribution at each distinct configuration is computed once.
    """

    def __init__(self, model: ActionModel, sentence: Sentence):
        self.model = model
        self.sentence = sentence
        self._cache: dict[ParserState, tuple[list[Action], np.ndarray, np.ndarray]] = {}

    def distribution(self, state: ParserState):
        cached = self._cache.get(state)
        if cached is not None:
            return cached
        acts = legal_actions(state, self.model.labels)
        pairs = sorted((self.model.action_ids[a], a) for a in acts)
        ids = np.array([i for i, _ in pairs], dtype=np.int64)
        acts = [a for _, a in pairs]
        feat_ids = self.model.feature_ids(
            extract_features(self.sentence, state)
        )
        probs = _softmax(self.model.scores(feat_ids, ids))
        result = (acts, probs, np.cumsum(probs))
        self._cache[state] = result
        return result


def greedy_parse(model: ActionModel, sentence: Sentence) -> ParseTree:
    """Best-action decoding; ties go to the smallest action id."""
    stepper = _Stepper(model, sentence)
    state = initial_state(sentence)
    while not is_terminal(state):
        acts, probs, _ = stepper.distribution(state)
        state = apply_action(state, acts[int(np.argmax(probs))])
    return ParseTree(len(sentence), state.arcs)


def sample_parse(
    model: ActionModel,
    sentence: Sentence,
    rng: np.random.Generator,
    sample_id: int = 0,
    _stepper: Optional[_Stepper] = None,
) -> SampledParse:
    """Draw one exact sample from p(tree | sentence).

    Each action is drawn by inverse CDF over the legal actions in fixed
    action-id order, consuming one uniform variate per step.
    """
    stepper = _stepper or _Stepper(model, sentence)
    state = initial_state(sentence)
    actions: list[Action] = []
    log_prob = 0.0
    while not is_terminal(state):
        acts, probs, cum = stepper.distribution(state)
        u = rng.random()
        idx = int(np.searchsorted(cum, u, side="right"))
        if idx >= len(acts):
            idx = len(acts) - 1
        while probs[idx] == 0.0 and idx > 0:
            idx -= 1
        actions.append(acts[idx])
        log_prob += log(probs[idx])
        state = apply_action(state, acts[idx])
    return SampledParse(
        tree=ParseTree(len(sentence), state.arcs),
        actions=tuple(actions),
        log_prob=log_prob,
        sample_id=sample_id,
    )


def _substream(seed: int, sent_id: str, k: int) -> np.random.Generator:
    material = b"\x00".join(
        (str(seed).encode(), sent_id.encode("utf-8"), str(k).encode())
    )
    digest = hashlib.blake2b(material, digest_size=16).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))


def draw_parses(
    model: ActionModel, sentence: Sentence, n_samples: int, seed: int
) -> list[SampledParse]:
    """``n_samples`` independent draws, ids 1..S, one substream each."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    stepper = _Stepper(model, sentence)
    return [
        sample_parse(
            model,
            sentence,
            _substream(seed, sentence.sent_id, k),
            sample_id=k,
            _stepper=stepper,
        )
        for k in range(1, n_samples + 1)
    ]


def draw_samples(
    model: ActionModel, sentence: Sentence, n_samples: int, seed: int
) -> SampleSet:
    """Sample ``n_samples`` trees and deduplicate into a SampleSet."""
    return SampleSet.from_parses(
        sentence, draw_parses(model, sentence, n_samples, seed)
    )


def mc_map(samples: SampleSet) -> ParseTree:
    """Most frequent sampled tree; ties by smallest canonical key.

    Distinct derivations of the same tree pool their counts, since the
    sample set is keyed by the tree itself, not the action sequence.
    """
    key, entry = min(
        samples.entries.items(), key=lambda kv: (-kv[1].count, kv[0])
    )
    return entry.tree


def mbr_parse(
    samples: SampleSet,
) -> tuple[dict[int, tuple[str, int]], bool]:
    """Per-token argmax of (relation, governor) marginals.

    Returns the assignment and whether it happens to form a valid tree;
    the assignment is kept as-is either way, because repairing it would
    change what gets scored.  Ties break toward the smaller governor,
    then the lexicographically smaller relation.
    """
    n = len(samples.sentence)
    marginals: dict[int, dict[tuple[str, int], float]] = {
        child: {} for child in range(1, n + 1)
    }
    for tree, count in samples.trees():
        w = count / samples.num_samples
        for rel, gov, child in tree.edges:
            key = (rel, gov)
            marginals[child][key] = marginals[child].get(key, 0.0) + w
    assignment: dict[int, tuple[str, int]] = {}
    for child in range(1, n + 1):
        (rel, gov), _ = min(
            marginals[child].items(), key=lambda kv: (-kv[1], kv[0][1], kv[0][0])
        )
        assignment[child] = (rel, gov)
    try:
        ParseTree(n, (Edge(r, g, c) for c, (r, g) in assignment.items()))
        is_tree = True
    except TreeValidationError:
        is_tree = False
    return assignment, is_tree


def enumerate_exact(
    model: ActionModel, sentence: Sentence, max_actions: int = 200_000
) -> dict[ParseTree, float]:
    """Exact tree distribution by exhausting every legal derivation.

    Practical only for very short sentences; raises
    EnumerationBudgetError once ``max_actions`` action expansions are
    spent.  Probabilities of derivations reaching the same tree are
    summed, and the returned values total 1 up to float rounding.
    """
    stepper = _Stepper(model, sentence)
    out: dict[ParseTree, float] = {}
    budget = max_actions
    n = len(sentence)

    def recurse(state: ParserState, prob: float):
        nonlocal budget
        if is_terminal(state):
            tree = ParseTree(n, state.arcs)
            out[tree] = out.get(tree, 0.0) + prob
            return
        acts, probs, _ = stepper.distribution(state)
        for action, p in zip(acts, probs):
            if p == 0.0:
                continue
            budget -= 1
            if budget < 0:
                raise EnumerationBudgetError(
                    f"exceeded {max_actions} action expansions"
                )
            recurse(apply_action(state, action), prob * float(p))

    recurse(initial_state(sentence), 1.0)
    return out


# --------------------------------------------------------------------
# Multi-sample CoNLL-U files.

_SAMPLE_KEYS = ("sample_id", "log_prob")


def write_sample_file(
    items: Iterable[tuple[Sentence, Sequence[SampledParse]]],
    sink: Union[str, IO[bytes], IO[str]],
) -> None:
    """Dump samples as CoNLL-U, one block per sample, with
    ``sample_id`` and ``log_prob`` metadata on every block."""

    def blocks():
        for sentence, parses in items:
            for p in parses:
                meta = sentence.metadata + (
                    ("sample_id", str(p.sample_id)),
                    ("log_prob", repr(p.log_prob)),
                )
                yield Sentence(sentence.sent_id, sentence.tokens, meta), p.tree

    write_conllu(blocks(), sink)


def load_sample_sets(
    source: Union[str, IO[bytes], IO[str]],
) -> list[SampleSet]:
    """Rebuild SampleSets from a multi-sample CoNLL-U file.

    Consecutive blocks sharing a ``sent_id`` are samples of one
    sentence; every block must carry a full tree.
    """
    groups: list[tuple[Sentence, list[ParseTree]]] = []
    for sentence, tree in read_conllu(source):
        if tree is None:
            raise ValueError(
                f"sample file block for {sentence.sent_id!r} has no tree"
            )
        base_meta = tuple(
            (k, v) for k, v in sentence.metadata if k not in _SAMPLE_KEYS
        )
        base = Sentence(sentence.sent_id, sentence.tokens, base_meta)
        if groups and groups[-1][0].sent_id == base.sent_id:
            groups[-1][1].append(tree)
        else:
            groups.append((base, [tree]))
    return [
        SampleSet.from_counts(
            sentence, [(t, 1) for t in trees]
        )
        for sentence, trees in groups
    ]
