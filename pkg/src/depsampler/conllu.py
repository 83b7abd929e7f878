"""CoNLL-U treebank reading and writing, plus the core sentence/tree types.

Files are the standard 10-column tab-separated format with blank-line
sentence separators and ``#`` comment/metadata lines.  Multiword token
ranges (``3-4``) and empty nodes (``3.1``) are dropped on read and never
written.  Multi-sample files reuse the same format: every sample of a
sentence repeats the block, tagged with ``# sample_id = <k>`` and
``# log_prob = <float>`` metadata lines.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple, Optional, Union

__all__ = [
    "Token",
    "Sentence",
    "Edge",
    "ParseTree",
    "ConlluError",
    "TreeValidationError",
    "read_conllu",
    "write_conllu",
    "is_projective",
]


class ConlluError(ValueError):
    """Malformed CoNLL-U input (bad column count, bad indices, bad bytes)."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TreeValidationError(ValueError):
    """Edge set that violates the single-rooted dependency tree invariants."""


@dataclass(frozen=True)
class Token:
    """One token row: 1-based index, surface form, and tag columns."""

    index: int
    form: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"token index must be >= 1, got {self.index}")
        if not self.form:
            raise ValueError("token form must be non-empty")


@dataclass(frozen=True)
class Sentence:
    """A tokenized sentence with identifier and ordered metadata pairs.

    Token indices must be exactly 1..N.  Metadata values of ``None``
    round-trip as bare comment lines (``# text`` with no ``=``).
    """

    sent_id: str
    tokens: tuple[Token, ...]
    metadata: tuple[tuple[str, Optional[str]], ...] = ()

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise ValueError("sentence must contain at least one token")
        for pos, tok in enumerate(self.tokens, start=1):
            if tok.index != pos:
                raise ValueError(
                    f"token indices must be contiguous 1..N; "
                    f"position {pos} has index {tok.index}"
                )

    def __len__(self) -> int:
        return len(self.tokens)

    def token(self, index: int) -> Token:
        """Token at 1-based position ``index``."""
        return self.tokens[index - 1]


class Edge(NamedTuple):
    """A dependency edge: ``relation(governor, child)``, governor 0 = ROOT."""

    relation: str
    governor: int
    child: int


@dataclass(frozen=True)
class ParseTree:
    """A full dependency analysis: one governor per token, rooted at vertex 0.

    Validated on construction: exactly ``n_tokens`` edges, every child
    1..N appears exactly once, governors in 0..N, exactly one edge from
    vertex 0, and the head map is acyclic (hence connected).
    """

    n_tokens: int
    edges: frozenset[Edge]

    def __init__(self, n_tokens: int, edges: Iterable[Edge]):
        object.__setattr__(self, "n_tokens", n_tokens)
        object.__setattr__(self, "edges", frozenset(edges))
        self._validate()

    def _validate(self):
        n = self.n_tokens
        if n < 1:
            raise TreeValidationError("tree must cover at least one token")
        if len(self.edges) != n:
            raise TreeValidationError(
                f"expected exactly {n} edges, got {len(self.edges)}"
            )
        heads: dict[int, int] = {}
        root_edges = 0
        for rel, gov, child in self.edges:
            if not 1 <= child <= n:
                raise TreeValidationError(f"edge child {child} out of range 1..{n}")
            if not 0 <= gov <= n:
                raise TreeValidationError(f"edge governor {gov} out of range 0..{n}")
            if gov == child:
                raise TreeValidationError(f"self-loop at token {child}")
            if child in heads:
                raise TreeValidationError(f"token {child} has two governors")
            heads[child] = gov
            if gov == 0:
                root_edges += 1
        if len(heads) != n:
            raise TreeValidationError("some token has no governor")
        if root_edges != 1:
            raise TreeValidationError(
                f"expected exactly one edge from ROOT, got {root_edges}"
            )
        # Acyclicity: every head chain must reach vertex 0.
        reached: set[int] = {0}
        for child in heads:
            chain = []
            v = child
            while v not in reached:
                chain.append(v)
                v = heads[v]
                if v in chain:
                    raise TreeValidationError(
                        f"cycle through token {v} in head assignment"
                    )
            reached.update(chain)

    def head_map(self) -> dict[int, tuple[str, int]]:
        """Map child index -> (relation, governor)."""
        return {child: (rel, gov) for rel, gov, child in self.edges}

    def canonical_key(self) -> str:
        """Total-order key: sorted (child, governor, relation) triples.

        Independent of derivation order; used for deduplication and
        tie-breaking everywhere a single representative tree is needed.
        """
        triples = sorted((c, g, r) for r, g, c in self.edges)
        return "|".join(f"{c}:{g}:{r}" for c, g, r in triples)


def is_projective(tree: ParseTree) -> bool:
    """True iff no two edges cross with tokens in linear order, ROOT at 0."""
    spans = [(min(g, c), max(g, c)) for _, g, c in tree.edges]
    for i, (a1, b1) in enumerate(spans):
        for a2, b2 in spans[i + 1 :]:
            if a1 < a2 < b1 < b2 or a2 < a1 < b2 < b1:
                return False
    return True


def _open_text(source, mode: str):
    """Wrap a path or stream as a text file object; returns (file, close?)."""
    if isinstance(source, (str, Path)):
        return open(source, mode + "b"), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return source, False


def _decode(raw: Union[str, bytes], lineno: int) -> str:
    if isinstance(raw, bytes):
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConlluError(f"invalid UTF-8: {exc}", lineno) from None
    return raw


def read_conllu(
    source: Union[str, Path, IO[bytes], IO[str]],
) -> Iterator[tuple[Sentence, Optional[ParseTree]]]:
    """Read CoNLL-U blocks, yielding (Sentence, ParseTree-or-None) pairs.

    A tree is attached iff every HEAD and DEPREL column in the block is
    filled; trees are validated.  Blocks without a ``sent_id`` metadata
    line get synthesized ids ``s1``, ``s2``, ...  Multiword ranges and
    empty nodes are skipped.  Non-UTF-8 bytes are a hard error.
    """
    fobj, owned = _open_text(source, "r")
    try:
        block: list[tuple[int, str]] = []
        ordinal = 0
        for lineno, raw in enumerate(fobj, start=1):
            line = _decode(raw, lineno).rstrip("\n").rstrip("\r")
            if line.strip() == "":
                if block:
                    ordinal += 1
                    yield _parse_block(block, ordinal)
                    block = []
            else:
                block.append((lineno, line))
        if block:
            ordinal += 1
            yield _parse_block(block, ordinal)
    finally:
        if owned:
            fobj.close()


def _parse_block(
    block: list[tuple[int, str]], ordinal: int
) -> tuple[Sentence, Optional[ParseTree]]:
    metadata: list[tuple[str, Optional[str]]] = []
    sent_id: Optional[str] = None
    tokens: list[Token] = []
    heads: list[Optional[int]] = []
    deprels: list[Optional[str]] = []
    first_line = block[0][0]

    for lineno, line in block:
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                key, value = key.strip(), value.strip()
            else:
                key, value = body, None
            if key == "sent_id" and value is not None:
                sent_id = value
            else:
                metadata.append((key, value))
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(
                f"expected 10 tab-separated columns, got {len(cols)}", lineno
            )
        if "-" in cols[0] or "." in cols[0]:
            continue  # multiword range / empty node
        try:
            idx = int(cols[0])
        except ValueError:
            raise ConlluError(f"bad token index {cols[0]!r}", lineno) from None
        tokens.append(Token(idx, cols[1], cols[2], cols[3], cols[4]))
        if cols[6] == "_":
            heads.append(None)
        else:
            try:
                heads.append(int(cols[6]))
            except ValueError:
                raise ConlluError(f"bad HEAD value {cols[6]!r}", lineno) from None
        deprels.append(cols[7] if cols[7] != "_" else None)

    if not tokens:
        raise ConlluError("sentence block contains no token rows", first_line)
    if sent_id is None:
        sent_id = f"s{ordinal}"
    try:
        sentence = Sentence(sent_id, tuple(tokens), tuple(metadata))
    except ValueError as exc:
        raise ConlluError(f"sentence {sent_id!r}: {exc}", first_line) from None

    tree: Optional[ParseTree] = None
    if all(h is not None for h in heads) and all(d is not None for d in deprels):
        edges = [
            Edge(rel, gov, tok.index)
            for tok, gov, rel in zip(tokens, heads, deprels)
        ]
        try:
            tree = ParseTree(len(tokens), edges)
        except TreeValidationError as exc:
            raise TreeValidationError(f"sentence {sent_id!r}: {exc}") from None
    return sentence, tree


def write_conllu(
    items: Iterable[tuple[Sentence, Union[ParseTree, dict, None]]],
    sink: Union[str, Path, IO[bytes], IO[str]],
) -> None:
    """Serialize (Sentence, analysis) pairs as CoNLL-U.

    The analysis may be a ParseTree, ``None`` (HEAD/DEPREL written as
    ``_``), or a plain ``{child: (relation, governor)}`` mapping, which
    skips the whole-tree check (used for minimum-risk output that may
    not form a tree).  Reading the output back reproduces the items
    structurally.  Columns we do not model (FEATS, DEPS, MISC) are
    written as ``_``.
    """
    fobj, owned = _open_text(sink, "w")
    write_bytes = not isinstance(fobj, io.TextIOBase) and "b" in getattr(
        fobj, "mode", "b"
    )

    def emit(text: str):
        fobj.write(text.encode("utf-8") if write_bytes else text)

    try:
        for sentence, tree in items:
            head_of: dict[int, tuple[str, int]] = {}
            if isinstance(tree, ParseTree):
                if tree.n_tokens != len(sentence):
                    raise TreeValidationError(
                        f"sentence {sentence.sent_id!r}: tree covers "
                        f"{tree.n_tokens} tokens, sentence has {len(sentence)}"
                    )
                head_of = tree.head_map()
            elif tree is not None:
                head_of = dict(tree)
            for child, (rel, gov) in head_of.items():
                if not 1 <= child <= len(sentence) or not 0 <= gov <= len(sentence):
                    raise TreeValidationError(
                        f"sentence {sentence.sent_id!r}: edge "
                        f"{rel}({gov},{child}) out of range"
                    )
            emit(f"# sent_id = {sentence.sent_id}\n")
            for key, value in sentence.metadata:
                emit(f"# {key}\n" if value is None else f"# {key} = {value}\n")
            for tok in sentence.tokens:
                rel, gov = head_of.get(tok.index, ("_", None))
                head_col = "_" if gov is None else str(gov)
                emit(
                    f"{tok.index}\t{tok.form}\t{tok.lemma}\t{tok.upos}\t"
                    f"{tok.xpos}\t_\t{head_col}\t{rel}\t_\t_\n"
                )
            emit("\n")
    finally:
        if owned:
            fobj.close()
