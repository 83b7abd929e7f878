"""Monte Carlo syntax marginals over sample sets.

A *structure query* is a conjunction of edge patterns evaluated against
one tree; its marginal probability is the count-weighted fraction of
sampled trees where it holds.  *Dependency paths* (simple undirected
paths through the tree, represented as edge sets) are treated the same
way: every path seen in any sample gets the summed probability of the
trees containing it.  Whole-tree entropy summarizes how spread out the
sampled distribution is.

Query text format (one conjunction per block, blocks separated by a
line consisting of ``or``; ``#`` starts a comment)::

    RELS(GOV, CHILD)

where RELS is a relation label, alternatives joined with ``|``, or
``*`` for any; GOV/CHILD are one of

    ``*`` or ``_``      any vertex
    ``3``               exact vertex index (0 = ROOT)
    ``"form"``          exact surface form
    ``{kill,shot}``     case-insensitive keyword set (form or lemma)
    ``$name``           named keyword set supplied by the caller
    ``@2-4``            token index span, inclusive
    ``@mention``        the entity-mention span bound at match time
    ``X``               variable, shared across patterns
    ``X:TERM``          variable constrained by another term

Example, "some token governs both a kill keyword's subject and an
object inside the mention"::

    nsubj|nmod(K:$kill, A:$police)
    nsubjpass|dobj(K, P:@mention)
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Optional, Sequence, Union

from .conllu import Edge, ParseTree, Sentence
from .inference import SampleSet

__all__ = [
    "AnyToken",
    "TokenIndex",
    "TokenForm",
    "TokenKeywords",
    "TokenSpan",
    "MentionSpan",
    "Var",
    "EdgePattern",
    "StructureQuery",
    "QueryParseError",
    "parse_query_text",
    "parse_query_file",
    "load_keywords",
    "eval_query",
    "query_marginal",
    "DepPath",
    "enumerate_paths",
    "path_endpoints",
    "format_path",
    "marginal_report_rows",
    "path_marginals",
    "predict_paths",
    "tree_entropy",
    "SampleSummary",
    "sample_summary",
]


# --------------------------------------------------------------------
# Token matchers and queries.


@dataclass(frozen=True)
class AnyToken:
    def matches(self, vertex: int, sentence: Sentence, span=None) -> bool:
        return True


@dataclass(frozen=True)
class TokenIndex:
    index: int

    def matches(self, vertex, sentence, span=None) -> bool:
        return vertex == self.index


@dataclass(frozen=True)
class TokenForm:
    form: str

    def matches(self, vertex, sentence, span=None) -> bool:
        return vertex >= 1 and sentence.token(vertex).form == self.form


@dataclass(frozen=True)
class TokenKeywords:
    """Case-insensitive membership on the surface form, or on the lemma
    when the lemma column is filled."""

    words: frozenset[str]

    def matches(self, vertex, sentence, span=None) -> bool:
        if vertex < 1:
            return False
        tok = sentence.token(vertex)
        if tok.form.lower() in self.words:
            return True
        return tok.lemma != "_" and tok.lemma.lower() in self.words


@dataclass(frozen=True)
class TokenSpan:
    start: int
    end: int

    def matches(self, vertex, sentence, span=None) -> bool:
        return self.start <= vertex <= self.end


@dataclass(frozen=True)
class MentionSpan:
    """Placeholder bound to an entity mention's span at match time."""

    def matches(self, vertex, sentence, span=None) -> bool:
        if span is None:
            raise ValueError("query uses @mention but no span was bound")
        return span[0] <= vertex <= span[1]


Matcher = Union[AnyToken, TokenIndex, TokenForm, TokenKeywords, TokenSpan, MentionSpan]


@dataclass(frozen=True)
class Var:
    """A vertex variable shared across patterns, optionally constrained."""

    name: str
    constraint: Optional[Matcher] = None


Term = Union[Matcher, Var]


@dataclass(frozen=True)
class EdgePattern:
    """Matches one edge: relation in ``relations`` (None = any),
    endpoints accepted by the governor/child terms."""

    relations: Optional[frozenset[str]]
    governor: Term
    child: Term


@dataclass(frozen=True)
class StructureQuery:
    """Conjunction of edge patterns; true iff some consistent variable
    binding satisfies all of them.  Empty conjunction is vacuously true."""

    patterns: tuple[EdgePattern, ...]


class QueryParseError(ValueError):
    pass


def _check_indices(query: StructureQuery, n: int) -> None:
    def check(term: Term):
        if isinstance(term, Var):
            if term.constraint is not None:
                check(term.constraint)
        elif isinstance(term, TokenIndex):
            if term.index > n:
                raise ValueError(
                    f"query references token {term.index}, sentence has {n}"
                )
        elif isinstance(term, TokenSpan):
            if term.end > n:
                raise ValueError(
                    f"query references token {term.end}, sentence has {n}"
                )

    for pat in query.patterns:
        check(pat.governor)
        check(pat.child)


def eval_query(
    query: StructureQuery,
    tree: ParseTree,
    sentence: Sentence,
    mention_span: Optional[tuple[int, int]] = None,
) -> bool:
    """Backtracking search for a binding satisfying every pattern."""
    _check_indices(query, len(sentence))
    edges = sorted(tree.edges)

    def term_ok(term: Term, vertex: int, binding: dict) -> Optional[dict]:
        if isinstance(term, Var):
            if term.name in binding:
                return binding if binding[term.name] == vertex else None
            if term.constraint is not None and not term.constraint.matches(
                vertex, sentence, mention_span
            ):
                return None
            new = dict(binding)
            new[term.name] = vertex
            return new
        return binding if term.matches(vertex, sentence, mention_span) else None

    def satisfy(i: int, binding: dict) -> bool:
        if i == len(query.patterns):
            return True
        pat = query.patterns[i]
        for rel, gov, child in edges:
            if pat.relations is not None and rel not in pat.relations:
                continue
            b1 = term_ok(pat.governor, gov, binding)
            if b1 is None:
                continue
            b2 = term_ok(pat.child, child, b1)
            if b2 is None:
                continue
            if satisfy(i + 1, b2):
                return True
        return False

    return satisfy(0, {})


def query_marginal(
    query: StructureQuery,
    samples: SampleSet,
    sentence: Optional[Sentence] = None,
    mention_span: Optional[tuple[int, int]] = None,
) -> float:
    """Fraction of sampled trees satisfying the query, count-weighted."""
    sentence = sentence if sentence is not None else samples.sentence
    hits = 0
    for tree, count in samples.trees():
        if eval_query(query, tree, sentence, mention_span):
            hits += count
    return hits / samples.num_samples


# --------------------------------------------------------------------
# Query text format.

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SPAN = re.compile(r"^@(\d+)-(\d+)$")


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _parse_term(
    text: str, keywords: Mapping[str, Iterable[str]], lineno: int
) -> Term:
    text = text.strip()
    if not text:
        raise QueryParseError(f"line {lineno}: empty term")
    if text in ("*", "_"):
        return AnyToken()
    if text.lstrip("-").isdigit():
        idx = int(text)
        if idx < 0:
            raise QueryParseError(f"line {lineno}: negative token index")
        return TokenIndex(idx)
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return TokenForm(text[1:-1])
    if text.startswith("{") and text.endswith("}"):
        words = [w.strip().lower() for w in text[1:-1].split(",") if w.strip()]
        if not words:
            raise QueryParseError(f"line {lineno}: empty keyword set")
        return TokenKeywords(frozenset(words))
    if text.startswith("$"):
        name = text[1:]
        if name not in keywords:
            raise QueryParseError(
                f"line {lineno}: unknown keyword set ${name}"
            )
        return TokenKeywords(frozenset(w.lower() for w in keywords[name]))
    if text == "@mention":
        return MentionSpan()
    span = _SPAN.match(text)
    if span:
        a, b = int(span.group(1)), int(span.group(2))
        if a < 1 or b < a:
            raise QueryParseError(f"line {lineno}: bad span {text}")
        return TokenSpan(a, b)
    head, colon, rest = text.partition(":")
    if colon and _IDENT.match(head):
        inner = _parse_term(rest, keywords, lineno)
        if isinstance(inner, Var):
            raise QueryParseError(
                f"line {lineno}: variable constraint cannot be a variable"
            )
        return Var(head, inner)
    if _IDENT.match(text):
        return Var(text)
    raise QueryParseError(f"line {lineno}: cannot parse term {text!r}")


def parse_query_text(
    text: str, keywords: Optional[Mapping[str, Iterable[str]]] = None
) -> list[StructureQuery]:
    """Parse the query format; returns the list of OR'd conjunctions."""
    keywords = keywords or {}
    alternatives: list[list[EdgePattern]] = [[]]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "or":
            alternatives.append([])
            continue
        m = re.match(r"^(.*?)\((.*)\)$", line)
        if not m:
            raise QueryParseError(f"line {lineno}: expected REL(GOV, CHILD)")
        rel_text = m.group(1).strip()
        relations = (
            None
            if rel_text == "*"
            else frozenset(r.strip() for r in rel_text.split("|") if r.strip())
        )
        if relations is not None and not relations:
            raise QueryParseError(f"line {lineno}: empty relation matcher")
        args = _split_top(m.group(2), ",")
        if len(args) != 2:
            raise QueryParseError(
                f"line {lineno}: expected 2 arguments, got {len(args)}"
            )
        alternatives[-1].append(
            EdgePattern(
                relations,
                _parse_term(args[0], keywords, lineno),
                _parse_term(args[1], keywords, lineno),
            )
        )
    return [StructureQuery(tuple(pats)) for pats in alternatives]


def parse_query_file(
    source: Union[str, Path, IO[str]],
    keywords: Optional[Mapping[str, Iterable[str]]] = None,
) -> list[StructureQuery]:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    return parse_query_text(text, keywords)


def load_keywords(source: Union[str, Path, IO[str]]) -> frozenset[str]:
    """One keyword per line, lowercased; blank lines and # comments skipped."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


# --------------------------------------------------------------------
# Dependency paths.

DepPath = frozenset  # of Edge


def enumerate_paths(tree: ParseTree, d: int) -> set[DepPath]:
    """All simple undirected paths of exactly ``d`` edges.

    Paths may run through ROOT and mix upward and downward edges; each
    is reported once, as its edge set.  In a tree there is exactly one
    simple path between any two vertices, so this enumerates vertex
    pairs at tree-distance ``d``.
    """
    if d < 1:
        raise ValueError("path length must be >= 1")
    up: dict[int, Edge] = {}
    for edge in tree.edges:
        up[edge.child] = edge
    ancestors: dict[int, list[int]] = {0: [0]}
    for v in range(1, tree.n_tokens + 1):
        chain = [v]
        x = v
        while x != 0:
            x = up[x].governor
            chain.append(x)
        ancestors[v] = chain

    paths: set[DepPath] = set()
    vertices = range(tree.n_tokens + 1)
    for u in vertices:
        anc_u = ancestors[u]
        pos_u = {x: i for i, x in enumerate(anc_u)}
        for v in vertices:
            if v <= u:
                continue
            lca = None
            steps_v = 0
            for x in ancestors[v]:
                if x in pos_u:
                    lca = x
                    break
                steps_v += 1
            length = pos_u[lca] + steps_v
            if length != d:
                continue
            edges = []
            x = u
            while x != lca:
                edges.append(up[x])
                x = up[x].governor
            x = v
            while x != lca:
                edges.append(up[x])
                x = up[x].governor
            paths.add(frozenset(edges))
    return paths


def path_endpoints(path: DepPath) -> tuple[int, int]:
    """The two degree-1 vertices of a path, smaller first."""
    degree: dict[int, int] = {}
    for _, gov, child in path:
        degree[gov] = degree.get(gov, 0) + 1
        degree[child] = degree.get(child, 0) + 1
    ends = sorted(v for v, deg in degree.items() if deg == 1)
    if len(ends) != 2:
        raise ValueError("edge set is not a simple path")
    return ends[0], ends[1]


def format_path(path: DepPath) -> str:
    """Stable text form: ``rel(gov,child)`` joined by ``+``."""
    triples = sorted((c, g, r) for r, g, c in path)
    return "+".join(f"{r}({g},{c})" for c, g, r in triples)


def path_marginals(samples: SampleSet, d: int) -> dict[DepPath, float]:
    """Marginal probability of every length-d path seen in the sample.

    Computed per unique tree and weighted by its count, which is
    equivalent to (and much cheaper than) scoring every sample.  Paths
    never sampled are simply absent.
    """
    counts: dict[DepPath, int] = {}
    for tree, count in samples.trees():
        for path in enumerate_paths(tree, d):
            counts[path] = counts.get(path, 0) + count
    s = samples.num_samples
    return {path: c / s for path, c in counts.items()}


def predict_paths(
    samples: SampleSet, d: int, threshold: float
) -> set[DepPath]:
    """All length-d paths with marginal probability >= threshold."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    return {
        path
        for path, prob in path_marginals(samples, d).items()
        if prob >= threshold
    }


# --------------------------------------------------------------------
# Distribution summaries.


def marginal_report_rows(
    sample_sets: Sequence[SampleSet], d: int
) -> Iterator[tuple[str, str, str, float]]:
    """(sent_id, object type, object key, probability) rows for the
    length-d path marginals of every sentence, in a stable order."""
    object_type = f"path{d}"
    for samples in sample_sets:
        sent_id = samples.sentence.sent_id
        rows = sorted(
            (format_path(path), prob)
            for path, prob in path_marginals(samples, d).items()
        )
        for key, prob in rows:
            yield sent_id, object_type, key, prob


def tree_entropy(samples: SampleSet) -> float:
    """Shannon entropy (nats) of the sampled tree distribution.

    Bounded by log(num_samples); natural log so that 100 uniform
    singletons give 4.605.
    """
    s = samples.num_samples
    h = -sum((c / s) * math.log(c / s) for _, c in samples.trees())
    return h + 0.0  # normalize -0.0 from the degenerate case


@dataclass(frozen=True)
class SampleSummary:
    domain_size: int
    top_counts: tuple[int, ...]
    entropy: float
    top_prob: float


def sample_summary(samples: SampleSet, k: int = 3) -> SampleSummary:
    """Domain size, descending top-k counts, entropy, and max c/S."""
    counts = sorted((c for _, c in samples.trees()), reverse=True)
    return SampleSummary(
        domain_size=len(counts),
        top_counts=tuple(counts[:k]),
        entropy=tree_entropy(samples),
        top_prob=counts[0] / samples.num_samples,
    )
