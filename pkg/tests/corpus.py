"""Deterministic synthetic treebank with controlled attachment ambiguity.

Sentences follow a small UD-flavored grammar: subject, verb, optional
object, up to three prepositional phrases, optional adverb, final
period.  A PP after an object attaches to the verb or to a noun on the
right frontier by a latent coin that no surface feature predicts, so a
trained model faces genuine, irreducible ambiguity there (60/40-ish),
while every other attachment is deterministic.  All trees are
projective by construction (attachment sites are restricted to the
right frontier).
"""

from __future__ import annotations

import numpy as np

from depsampler.conllu import Edge, ParseTree, Sentence, Token

DETS = ["the", "a"]
ADJS = ["old", "young", "red", "small", "happy", "quiet"]
NOUNS = [
    "dog", "cat", "man", "woman", "boy", "girl", "park", "telescope",
    "car", "house", "street", "garden", "hat", "book", "tree",
]
PROPNS = ["Alice", "Bob", "Carol", "Dave", "Emma", "Frank"]
VERBS_T = [
    "saw", "chased", "found", "liked", "followed", "helped",
    "watched", "heard", "met", "visited",
]
VERBS_I = ["slept", "ran", "smiled", "waited", "arrived", "fell"]
PREPS = ["with", "in", "near", "under", "behind", "beside"]
ADVS = ["quickly", "quietly", "today", "yesterday", "often", "soon"]

# How a PP picks its attachment among the right-frontier candidates
# (index 0 = the verb).  The first two entries give the classic 60/40
# verb-vs-noun split when exactly two candidates are open.
FRONTIER_WEIGHTS = [0.6, 0.4, 0.25]


class _Builder:
    def __init__(self):
        self.tokens: list[Token] = []
        self.edges: list[Edge] = []

    def add(self, form: str, upos: str, lemma: str | None = None) -> int:
        idx = len(self.tokens) + 1
        self.tokens.append(Token(idx, form, lemma or form.lower(), upos))
        return idx

    def attach(self, rel: str, gov: int, child: int):
        self.edges.append(Edge(rel, gov, child))


def _noun_phrase(b: _Builder, rng, rel: str) -> int:
    """Append an NP; returns its head index.  The head edge to the
    governor is attached by the caller."""
    if rng.random() < 0.25:
        return b.add(str(rng.choice(PROPNS)), "PROPN")
    det = b.add(str(rng.choice(DETS)), "DET") if rng.random() < 0.9 else None
    n_adj = int(rng.choice([0, 1, 2], p=[0.5, 0.35, 0.15]))
    adjs = [b.add(str(rng.choice(ADJS)), "ADJ") for _ in range(n_adj)]
    head = b.add(str(rng.choice(NOUNS)), "NOUN")
    if det is not None:
        b.attach("det", head, det)
    for a in adjs:
        b.attach("amod", head, a)
    return head


def make_sentence(rng: np.random.Generator, sent_id: str) -> tuple[Sentence, ParseTree]:
    b = _Builder()
    transitive = rng.random() < 0.7
    subj = _noun_phrase(b, rng, "nsubj")
    verb = b.add(str(rng.choice(VERBS_T if transitive else VERBS_I)), "VERB")
    b.attach("nsubj", verb, subj)
    frontier = [verb]
    if transitive:
        obj = _noun_phrase(b, rng, "obj")
        b.attach("obj", verb, obj)
        frontier.append(obj)
    n_pp = int(rng.choice([0, 1, 2, 3], p=[0.35, 0.3, 0.2, 0.15]))
    for _ in range(n_pp):
        prep = b.add(str(rng.choice(PREPS)), "ADP")
        pp_head = _noun_phrase(b, rng, "nmod")
        b.attach("case", pp_head, prep)
        weights = np.array(
            [
                FRONTIER_WEIGHTS[min(i, len(FRONTIER_WEIGHTS) - 1)]
                for i in range(len(frontier))
            ]
        )
        site = int(rng.choice(len(frontier), p=weights / weights.sum()))
        gov = frontier[site]
        b.attach("obl" if gov == verb else "nmod", gov, pp_head)
        # Later PPs may only attach at or below this site (projectivity).
        frontier = frontier[: site + 1] + [pp_head]
    if rng.random() < 0.4:
        adv = b.add(str(rng.choice(ADVS)), "ADV")
        b.attach("advmod", verb, adv)
    period = b.add(".", "PUNCT", ".")
    b.attach("punct", verb, period)
    b.attach("root", 0, verb)
    sentence = Sentence(sent_id, tuple(b.tokens))
    return sentence, ParseTree(len(b.tokens), b.edges)


def make_treebank(
    n_train: int, n_dev: int, seed: int = 20240101
) -> tuple[list[tuple[Sentence, ParseTree]], list[tuple[Sentence, ParseTree]]]:
    rng = np.random.Generator(np.random.Philox(key=seed))
    train = [make_sentence(rng, f"train-{i}") for i in range(1, n_train + 1)]
    dev = [make_sentence(rng, f"dev-{i}") for i in range(1, n_dev + 1)]
    return train, dev
