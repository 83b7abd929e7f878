"""Shared builders for tests: tiny sentences, random models, rollouts."""

from __future__ import annotations

import numpy as np

from depsampler.conllu import ParseTree, Sentence, Token
from depsampler.features import extract_features
from depsampler.model import ActionModel, build_actions
from depsampler.transition import (
    ROOT_LABEL,
    apply_action,
    initial_state,
    is_terminal,
    legal_actions,
)


def sent(forms_pos: list[tuple[str, str]], sent_id: str = "s") -> Sentence:
    tokens = tuple(
        Token(i, form, form.lower(), pos)
        for i, (form, pos) in enumerate(forms_pos, start=1)
    )
    return Sentence(sent_id, tokens)


def she_saw_stars() -> Sentence:
    return sent([("She", "PRON"), ("saw", "VERB"), ("stars", "NOUN")], "sss")


def zero_model(labels: tuple[str, ...] = ("dep",)) -> ActionModel:
    """All-zero weights: every legal action equally likely."""
    labels = tuple(sorted(set(labels) | {ROOT_LABEL}))
    return ActionModel(
        labels=labels,
        feature_index={},
        weights=np.zeros((0, len(build_actions(labels))), dtype=np.float64),
    )


def reachable_feature_keys(sentence: Sentence, labels) -> list[str]:
    keys: set[str] = set()
    seen = set()
    stack = [initial_state(sentence)]
    while stack:
        state = stack.pop()
        if state in seen:
            continue
        seen.add(state)
        keys.update(extract_features(sentence, state))
        if is_terminal(state):
            continue
        for action in legal_actions(state, labels):
            stack.append(apply_action(state, action))
    return sorted(keys)


def random_model(
    sentence: Sentence,
    labels: tuple[str, ...],
    seed: int,
    scale: float = 0.8,
) -> ActionModel:
    """Random weights covering every feature reachable on the sentence."""
    labels = tuple(sorted(set(labels) | {ROOT_LABEL}))
    keys = reachable_feature_keys(sentence, labels)
    rng = np.random.Generator(np.random.Philox(key=seed))
    weights = rng.normal(0.0, scale, (len(keys), len(build_actions(labels))))
    return ActionModel(
        labels=labels,
        feature_index={k: i for i, k in enumerate(keys)},
        weights=weights,
    )


def random_rollout(
    rng: np.random.Generator, sentence: Sentence, labels
) -> ParseTree:
    """Terminal tree of a uniformly random legal derivation."""
    state = initial_state(sentence)
    while not is_terminal(state):
        acts = legal_actions(state, labels)
        state = apply_action(state, acts[int(rng.integers(len(acts)))])
    return ParseTree(len(sentence), state.arcs)


def random_sentence(
    rng: np.random.Generator, n: int, sent_id: str = "r"
) -> Sentence:
    forms = ["fox", "box", "sky", "run", "old", "cat"]
    tags = ["NOUN", "VERB", "ADJ"]
    return sent(
        [
            (str(rng.choice(forms)), str(rng.choice(tags)))
            for _ in range(n)
        ],
        sent_id,
    )
