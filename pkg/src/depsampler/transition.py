"""Arc-standard shift-reduce transition system.

States carry a stack (vertex 0 = ROOT at the bottom), a buffer of
unprocessed token ids, and the arcs built so far.  Every complete
derivation has exactly 2N actions: each token is shifted once and
attached once.  Attachment to ROOT is restricted to the very last
action and forced to carry :data:`ROOT_LABEL`, which guarantees a
single root without post-hoc repair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .conllu import Edge, ParseTree, Sentence, is_projective

__all__ = [
    "SHIFT",
    "LEFT_ARC",
    "RIGHT_ARC",
    "ROOT_LABEL",
    "Action",
    "ParserState",
    "NonProjectiveError",
    "OracleError",
    "initial_state",
    "legal_actions",
    "apply_action",
    "is_terminal",
    "oracle_actions",
]

SHIFT = "shift"
LEFT_ARC = "left"
RIGHT_ARC = "right"

# The one relation allowed on the final ROOT attachment.
ROOT_LABEL = "root"


class Action(NamedTuple):
    """A transition: ``shift``, or an arc action with its relation label."""

    kind: str
    relation: Optional[str] = None

    def __str__(self) -> str:
        return self.kind if self.relation is None else f"{self.kind}:{self.relation}"


@dataclass(frozen=True)
class ParserState:
    """Immutable arc-standard configuration."""

    stack: tuple[int, ...]
    buffer: tuple[int, ...]
    arcs: frozenset[Edge]
    step: int = 0


class NonProjectiveError(ValueError):
    """Gold tree cannot be derived by the arc-standard system."""


class OracleError(ValueError):
    """Gold tree is incompatible with the oracle (e.g. root label)."""


def initial_state(sentence: Sentence) -> ParserState:
    """Start state: ROOT on the stack, all tokens on the buffer."""
    n = len(sentence)
    if n < 1:
        raise ValueError("cannot initialize parser state for an empty sentence")
    return ParserState(stack=(0,), buffer=tuple(range(1, n + 1)), arcs=frozenset())


def is_terminal(state: ParserState) -> bool:
    """True iff the buffer is empty and only ROOT remains on the stack."""
    return not state.buffer and state.stack == (0,)


def legal_actions(state: ParserState, labels: Sequence[str]) -> list[Action]:
    """Executable actions, in canonical order: SHIFT, then left arcs,
    then right arcs, labels in the given order.

    Left arcs require stack height >= 2 with a non-ROOT second item.
    A right arc onto ROOT is only allowed as the final action (empty
    buffer, stack height 2) and must carry :data:`ROOT_LABEL`.
    """
    if is_terminal(state):
        raise ValueError("terminal state has no legal actions")
    out: list[Action] = []
    if state.buffer:
        out.append(Action(SHIFT))
    if len(state.stack) >= 2:
        second = state.stack[-2]
        if second != 0:
            out.extend(Action(LEFT_ARC, r) for r in labels)
            out.extend(Action(RIGHT_ARC, r) for r in labels)
        elif not state.buffer and len(state.stack) == 2:
            out.append(Action(RIGHT_ARC, ROOT_LABEL))
    return out


def _is_legal(state: ParserState, action: Action) -> bool:
    if action.kind == SHIFT:
        return bool(state.buffer) and action.relation is None
    if action.relation is None or len(state.stack) < 2:
        return False
    second = state.stack[-2]
    if action.kind == LEFT_ARC:
        return second != 0
    if action.kind == RIGHT_ARC:
        if second != 0:
            return True
        return (
            not state.buffer
            and len(state.stack) == 2
            and action.relation == ROOT_LABEL
        )
    return False


def apply_action(state: ParserState, action: Action) -> ParserState:
    """Deterministic update; raises ValueError on an illegal action."""
    if not _is_legal(state, action):
        raise ValueError(f"illegal action {action} in state {state}")
    step = state.step + 1
    if action.kind == SHIFT:
        return ParserState(
            stack=state.stack + (state.buffer[0],),
            buffer=state.buffer[1:],
            arcs=state.arcs,
            step=step,
        )
    top, second = state.stack[-1], state.stack[-2]
    if action.kind == LEFT_ARC:
        edge = Edge(action.relation, top, second)
        new_stack = state.stack[:-2] + (top,)
    else:
        edge = Edge(action.relation, second, top)
        new_stack = state.stack[:-1]
    return ParserState(
        stack=new_stack, buffer=state.buffer, arcs=state.arcs | {edge}, step=step
    )


def final_tree(state: ParserState, n_tokens: int) -> ParseTree:
    """Arcs of a terminal state as a validated ParseTree."""
    if not is_terminal(state):
        raise ValueError("state is not terminal")
    return ParseTree(n_tokens, state.arcs)


def oracle_actions(
    sentence: Sentence, gold: ParseTree
) -> list[tuple[ParserState, Action]]:
    """Static oracle: the canonical derivation of a projective gold tree.

    Prefers a left arc when the second stack item is gold-governed by
    the top, then a right arc when the top is gold-governed by the
    second and all of the top's gold children are already attached,
    else shifts.  Replaying the returned actions from the initial state
    reproduces the gold edge set in exactly 2N actions.
    """
    if gold.n_tokens != len(sentence):
        raise ValueError("gold tree does not match sentence length")
    if not is_projective(gold):
        raise NonProjectiveError(
            f"sentence {sentence.sent_id!r}: gold tree is not projective"
        )
    head = {child: (rel, gov) for rel, gov, child in gold.edges}
    root_rel = next(rel for rel, gov, _ in gold.edges if gov == 0)
    if root_rel != ROOT_LABEL:
        raise OracleError(
            f"sentence {sentence.sent_id!r}: ROOT edge carries "
            f"{root_rel!r}, expected {ROOT_LABEL!r}"
        )
    n_children: dict[int, int] = {}
    for _, gov, _ in gold.edges:
        n_children[gov] = n_children.get(gov, 0) + 1

    state = initial_state(sentence)
    attached: dict[int, int] = {}
    trace: list[tuple[ParserState, Action]] = []
    while not is_terminal(state):
        action = None
        if len(state.stack) >= 2:
            top, second = state.stack[-1], state.stack[-2]
            if second != 0 and head[second][1] == top:
                action = Action(LEFT_ARC, head[second][0])
            elif (
                head.get(top, (None, None))[1] == second
                and attached.get(top, 0) == n_children.get(top, 0)
            ):
                action = Action(RIGHT_ARC, head[top][0])
        if action is None:
            if not state.buffer:
                raise NonProjectiveError(
                    f"sentence {sentence.sent_id!r}: oracle stuck "
                    "(tree not derivable)"
                )
            action = Action(SHIFT)
        trace.append((state, action))
        if action.kind != SHIFT:
            gov = state.stack[-1] if action.kind == LEFT_ARC else state.stack[-2]
            attached[gov] = attached.get(gov, 0) + 1
        state = apply_action(state, action)
    if state.arcs != gold.edges:
        raise OracleError(
            f"sentence {sentence.sent_id!r}: oracle replay diverged from gold"
        )
    return trace
