import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depsampler.conllu import Edge, ParseTree
from depsampler.transition import (
    LEFT_ARC,
    RIGHT_ARC,
    SHIFT,
    Action,
    NonProjectiveError,
    OracleError,
    ParserState,
    apply_action,
    initial_state,
    is_terminal,
    legal_actions,
    oracle_actions,
)

from .helpers import random_rollout, random_sentence, sent, she_saw_stars

LABELS = ("nsubj", "obj", "root")


def state(stack, buffer, arcs=()):
    return ParserState(tuple(stack), tuple(buffer), frozenset(arcs))


def test_initial_state():
    s3 = initial_state(she_saw_stars())
    assert s3.stack == (0,) and s3.buffer == (1, 2, 3) and not s3.arcs
    s1 = initial_state(sent([("hi", "INTJ")]))
    assert s1.stack == (0,) and s1.buffer == (1,)


def test_legal_actions_initial_is_shift_only():
    two = initial_state(sent([("a", "X"), ("b", "X")]))
    assert legal_actions(two, LABELS) == [Action(SHIFT)]


def test_legal_actions_full_arc_menu():
    s = state([0, 1, 2], [])
    acts = set(legal_actions(s, LABELS))
    assert acts == {
        Action(LEFT_ARC, "nsubj"),
        Action(LEFT_ARC, "obj"),
        Action(LEFT_ARC, "root"),
        Action(RIGHT_ARC, "nsubj"),
        Action(RIGHT_ARC, "obj"),
        Action(RIGHT_ARC, "root"),
    }


def test_legal_actions_forced_root_attachment():
    s = state([0, 2], [])
    assert legal_actions(s, LABELS) == [Action(RIGHT_ARC, "root")]


def test_root_attachment_blocked_while_buffer_nonempty():
    s = state([0, 2], [3])
    assert legal_actions(s, LABELS) == [Action(SHIFT)]


def test_terminal_state_has_no_actions():
    with pytest.raises(ValueError):
        legal_actions(state([0], []), LABELS)


def test_apply_left_arc():
    s = state([0, 1, 2], [])
    out = apply_action(s, Action(LEFT_ARC, "nsubj"))
    assert out.stack == (0, 2)
    assert out.arcs == frozenset({Edge("nsubj", 2, 1)})
    assert out.step == 1


def test_apply_final_right_arc_terminates():
    s = state([0, 2], [], [Edge("nsubj", 2, 1)])
    out = apply_action(s, Action(RIGHT_ARC, "root"))
    assert out.stack == (0,)
    assert Edge("root", 0, 2) in out.arcs
    assert is_terminal(out)


def test_apply_illegal_action_raises():
    with pytest.raises(ValueError):
        apply_action(state([0], [1]), Action(LEFT_ARC, "obj"))


def test_is_terminal():
    assert is_terminal(state([0], []))
    assert not is_terminal(state([0, 3], []))


def _expand_all(sentence, labels):
    """Every complete legal derivation as (n_actions, final_state)."""
    done = []
    frontier = [(initial_state(sentence), 0)]
    while frontier:
        st_, depth = frontier.pop()
        if is_terminal(st_):
            done.append((depth, st_))
            continue
        for action in legal_actions(st_, labels):
            frontier.append((apply_action(st_, action), depth + 1))
    return done


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_every_derivation_has_2n_actions_and_valid_tree(n):
    rng = np.random.Generator(np.random.Philox(key=n))
    sentence = random_sentence(rng, n)
    for depth, final in _expand_all(sentence, ("dep", "root")):
        assert depth == 2 * n
        tree = ParseTree(n, final.arcs)
        assert sum(1 for e in tree.edges if e.governor == 0) == 1


def test_oracle_example_sequence():
    gold = ParseTree(
        3, [Edge("nsubj", 2, 1), Edge("root", 0, 2), Edge("obj", 2, 3)]
    )
    actions = [a for _, a in oracle_actions(she_saw_stars(), gold)]
    assert actions == [
        Action(SHIFT),
        Action(SHIFT),
        Action(LEFT_ARC, "nsubj"),
        Action(SHIFT),
        Action(RIGHT_ARC, "obj"),
        Action(RIGHT_ARC, "root"),
    ]


def test_oracle_single_token():
    one = sent([("Go", "VERB")])
    actions = [a for _, a in oracle_actions(one, ParseTree(1, [Edge("root", 0, 1)]))]
    assert actions == [Action(SHIFT), Action(RIGHT_ARC, "root")]


def test_oracle_rejects_non_projective():
    gold = ParseTree(
        4,
        [Edge("root", 0, 1), Edge("dep", 1, 3), Edge("dep", 3, 2), Edge("dep", 2, 4)],
    )
    rng = np.random.Generator(np.random.Philox(key=1))
    with pytest.raises(NonProjectiveError):
        oracle_actions(random_sentence(rng, 4), gold)


def test_oracle_rejects_foreign_root_label():
    one = sent([("Go", "VERB")])
    with pytest.raises(OracleError):
        oracle_actions(one, ParseTree(1, [Edge("ROOT", 0, 1)]))


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(1, 10))
def test_random_rollouts_are_sound(seed, n):
    rng = np.random.Generator(np.random.Philox(key=seed))
    sentence = random_sentence(rng, n)
    tree = random_rollout(rng, sentence, ["dep", "mod"])
    assert tree.n_tokens == n  # construction already validated the tree


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(1, 8))
def test_oracle_replays_every_projective_tree(seed, n):
    rng = np.random.Generator(np.random.Philox(key=seed))
    sentence = random_sentence(rng, n)
    gold = random_rollout(rng, sentence, ["dep", "mod"])
    trace = oracle_actions(sentence, gold)
    assert len(trace) == 2 * n
    st_ = initial_state(sentence)
    for _, action in trace:
        st_ = apply_action(st_, action)
    assert is_terminal(st_)
    assert st_.arcs == gold.edges
