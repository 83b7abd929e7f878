import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depsampler.conllu import Edge, ParseTree
from depsampler.inference import SampleSet, draw_samples, enumerate_exact
from depsampler.marginals import (
    AnyToken,
    EdgePattern,
    QueryParseError,
    StructureQuery,
    TokenIndex,
    Var,
    enumerate_paths,
    eval_query,
    format_path,
    load_keywords,
    parse_query_text,
    path_endpoints,
    path_marginals,
    predict_paths,
    query_marginal,
    sample_summary,
    tree_entropy,
)

from .helpers import random_model, random_rollout, random_sentence, sent, she_saw_stars

CHAIN = ParseTree(3, [Edge("nsubj", 2, 1), Edge("root", 0, 2), Edge("obj", 2, 3)])


def counted(pairs):
    return SampleSet.from_counts(she_saw_stars(), pairs)


def uniform_singletons(n):
    """n distinct trees over the 3-token sentence, one count each."""
    sentence = she_saw_stars()
    rng = np.random.Generator(np.random.Philox(key=5))
    trees = {}
    while len(trees) < n:
        tree = random_rollout(rng, sentence, [f"l{len(trees)}", "x", "y"])
        trees[tree.canonical_key()] = tree
    return SampleSet.from_counts(sentence, [(t, 1) for t in trees.values()])


def test_query_single_edge_with_form():
    [query] = parse_query_text('nsubj(V, "She")')
    assert eval_query(query, CHAIN, she_saw_stars())
    [query2] = parse_query_text('nsubj(V, "They")')
    assert not eval_query(query2, CHAIN, she_saw_stars())


def test_query_conjunction_shares_governor_binding():
    tree = ParseTree(
        3, [Edge("nsubj", 2, 1), Edge("root", 0, 2), Edge("dobj", 2, 3)]
    )
    [query] = parse_query_text("nsubj(V, c)\ndobj(V, o)")
    assert eval_query(query, tree, she_saw_stars())
    split = ParseTree(
        3, [Edge("nsubj", 3, 1), Edge("dobj", 3, 2), Edge("root", 0, 3)]
    )
    [q2] = parse_query_text('nsubj(V, "She")\ndobj(W, "saw")')
    [q3] = parse_query_text('nsubj(V, "She")\ndobj(V, "saw")')
    assert eval_query(q2, split, she_saw_stars())
    assert eval_query(q3, split, she_saw_stars())  # same governor, binds fine
    [q4] = parse_query_text('nsubj(V, "She")\nroot(V, W)')
    assert not eval_query(q4, split, she_saw_stars())  # root gov is 0, not 3


def test_empty_conjunction_is_vacuously_true():
    assert eval_query(StructureQuery(()), CHAIN, she_saw_stars())


def test_query_index_out_of_range_is_error():
    [query] = parse_query_text("nsubj(*, 9)")
    with pytest.raises(ValueError):
        eval_query(query, CHAIN, she_saw_stars())


def test_query_relation_alternation_and_keywords():
    [query] = parse_query_text("nsubj|nmod(K:{saw}, A:{she})")
    assert eval_query(query, CHAIN, she_saw_stars())
    [query2] = parse_query_text("nsubjpass|dobj(K:{saw}, *)")
    assert not eval_query(query2, CHAIN, she_saw_stars())


def test_query_or_blocks():
    queries = parse_query_text("obl(*, *)\nor\nobj(*, *)")
    assert len(queries) == 2
    assert not eval_query(queries[0], CHAIN, she_saw_stars())
    assert eval_query(queries[1], CHAIN, she_saw_stars())


def test_query_parse_errors():
    with pytest.raises(QueryParseError):
        parse_query_text("nsubj(a, b, c)")
    with pytest.raises(QueryParseError):
        parse_query_text("not a pattern")
    with pytest.raises(QueryParseError):
        parse_query_text("nsubj($missing, *)")
    with pytest.raises(QueryParseError):
        parse_query_text("nsubj(X:Y, *)")


def test_load_keywords(tmp_path):
    path = tmp_path / "kw.txt"
    path.write_text("# police words\nOfficer\ncop\n\npolice\n", encoding="utf-8")
    assert load_keywords(path) == frozenset({"officer", "cop", "police"})


def test_query_marginal_is_count_fraction():
    with_edge = CHAIN
    without = ParseTree(
        3, [Edge("nsubj", 2, 1), Edge("root", 0, 2), Edge("obl", 2, 3)]
    )
    samples = counted([(with_edge, 72), (without, 28)])
    [query] = parse_query_text("obj(2, 3)")
    assert query_marginal(query, samples) == 0.72
    [always] = parse_query_text("nsubj(2, 1)")
    assert query_marginal(always, samples) == 1.0


def test_query_marginal_matches_enumeration():
    rng = np.random.Generator(np.random.Philox(key=31))
    sentence = random_sentence(rng, 3, "qm")
    model = random_model(sentence, ("la", "lb"), seed=13)
    exact = enumerate_exact(model, sentence)
    samples = draw_samples(model, sentence, 2000, seed=17)
    query = StructureQuery(
        (EdgePattern(frozenset({"la"}), Var("G"), AnyToken()),)
    )
    exact_marginal = sum(
        p for tree, p in exact.items()
        if eval_query(query, tree, sentence)
    )
    assert query_marginal(query, samples, sentence) == pytest.approx(
        exact_marginal, abs=0.05
    )


def test_path_enumeration_on_chain():
    paths1 = enumerate_paths(CHAIN, 1)
    assert paths1 == {frozenset({e}) for e in CHAIN.edges}
    paths2 = enumerate_paths(CHAIN, 2)
    assert paths2 == {
        frozenset({Edge("root", 0, 2), Edge("nsubj", 2, 1)}),
        frozenset({Edge("root", 0, 2), Edge("obj", 2, 3)}),
        frozenset({Edge("nsubj", 2, 1), Edge("obj", 2, 3)}),
    }
    # The star around token 2 admits no 3-edge simple path.
    assert enumerate_paths(CHAIN, 3) == set()


def _brute_force_paths(tree, d):
    """Independent oracle: grow simple paths edge by edge."""
    adjacency = {}
    for edge in tree.edges:
        adjacency.setdefault(edge.governor, []).append(edge)
        adjacency.setdefault(edge.child, []).append(edge)
    found = set()

    def grow(frontier_vertex, visited, edges_so_far):
        if len(edges_so_far) == d:
            found.add(frozenset(edges_so_far))
            return
        for edge in adjacency.get(frontier_vertex, ()):
            nxt = edge.child if edge.governor == frontier_vertex else edge.governor
            if nxt in visited:
                continue
            grow(nxt, visited | {nxt}, edges_so_far + [edge])

    for start in range(tree.n_tokens + 1):
        grow(start, {start}, [])
    return found


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 7), d=st.integers(1, 4))
def test_path_enumeration_matches_brute_force(seed, n, d):
    rng = np.random.Generator(np.random.Philox(key=seed))
    sentence = random_sentence(rng, n)
    tree = random_rollout(rng, sentence, ["a", "b"])
    assert enumerate_paths(tree, d) == _brute_force_paths(tree, d)


def test_path_endpoints_and_format():
    path = frozenset({Edge("root", 0, 2), Edge("obj", 2, 3)})
    assert path_endpoints(path) == (0, 3)
    assert format_path(path) == "root(0,2)+obj(2,3)"


def test_path_marginals_unique_tree_and_shared_edge():
    samples = counted([(CHAIN, 5)])
    marginals = path_marginals(samples, 1)
    assert all(p == 1.0 for p in marginals.values())
    other = ParseTree(
        3, [Edge("nsubj", 2, 1), Edge("root", 0, 2), Edge("obl", 2, 3)]
    )
    mixed = counted([(CHAIN, 60), (other, 40)])
    marginals = path_marginals(mixed, 1)
    assert marginals[frozenset({Edge("nsubj", 2, 1)})] == 1.0
    assert marginals[frozenset({Edge("obj", 2, 3)})] == pytest.approx(0.6)


def test_path_marginals_agree_with_query_marginals():
    rng = np.random.Generator(np.random.Philox(key=9))
    sentence = random_sentence(rng, 5, "pm")
    trees = [random_rollout(rng, sentence, ["a", "b"]) for _ in range(6)]
    samples = SampleSet.from_counts(
        sentence, [(t, int(rng.integers(1, 10))) for t in trees]
    )
    for d in (1, 2, 3):
        for path, prob in path_marginals(samples, d).items():
            query = StructureQuery(
                tuple(
                    EdgePattern(
                        frozenset({e.relation}),
                        TokenIndex(e.governor),
                        TokenIndex(e.child),
                    )
                    for e in path
                )
            )
            assert query_marginal(query, samples, sentence) == prob


def test_predict_paths_thresholds_and_monotonicity():
    other = ParseTree(
        3, [Edge("nsubj", 2, 1), Edge("root", 0, 2), Edge("obl", 2, 3)]
    )
    samples = counted([(CHAIN, 99), (other, 1)])
    everywhere = predict_paths(samples, 1, 1.0)
    assert frozenset({Edge("nsubj", 2, 1)}) in everywhere
    assert frozenset({Edge("obj", 2, 3)}) not in everywhere
    seen_once = predict_paths(samples, 1, 1 / 100)
    assert frozenset({Edge("obl", 2, 3)}) in seen_once
    previous = None
    for t in (0.01, 0.25, 0.5, 0.75, 1.0):
        current = predict_paths(samples, 1, t)
        if previous is not None:
            assert current <= previous
        previous = current
    with pytest.raises(ValueError):
        predict_paths(samples, 1, 0.0)


def test_entropy_fixture_98_1_1():
    t1 = CHAIN
    t2 = ParseTree(3, [Edge("nsubj", 2, 1), Edge("root", 0, 2), Edge("obl", 2, 3)])
    t3 = ParseTree(3, [Edge("det", 2, 1), Edge("root", 0, 2), Edge("obj", 2, 3)])
    samples = counted([(t1, 98), (t2, 1), (t3, 1)])
    assert tree_entropy(samples) == pytest.approx(0.112, abs=0.001)
    summary = sample_summary(samples)
    assert summary.domain_size == 3
    assert summary.top_counts == (98, 1, 1)
    assert summary.top_prob == 0.98


def test_entropy_degenerate_is_zero():
    assert tree_entropy(counted([(CHAIN, 50)])) == 0.0
    summary = sample_summary(counted([(CHAIN, 1)]))
    assert summary == type(summary)(1, (1,), 0.0, 1.0)


def test_entropy_uniform_hits_log_s():
    samples = uniform_singletons(100)
    assert tree_entropy(samples) == pytest.approx(4.605, abs=0.001)
    summary = sample_summary(samples)
    assert summary.domain_size == 100
    assert summary.top_prob == pytest.approx(0.01)


@settings(max_examples=40, deadline=None)
@given(
    counts=st.lists(st.integers(1, 50), min_size=1, max_size=12),
    seed=st.integers(0, 1000),
)
def test_entropy_bounds(counts, seed):
    sentence = she_saw_stars()
    rng = np.random.Generator(np.random.Philox(key=seed))
    trees = {}
    while len(trees) < len(counts):
        t = random_rollout(rng, sentence, ["a", "b", "c"])
        trees[t.canonical_key()] = t
    samples = SampleSet.from_counts(
        sentence, list(zip(trees.values(), counts))
    )
    h = tree_entropy(samples)
    assert -1e-12 <= h <= math.log(min(samples.num_samples, len(counts))) + 1e-9


def test_query_monotonicity_under_conjunction_growth():
    rng = np.random.Generator(np.random.Philox(key=3))
    sentence = random_sentence(rng, 4, "mono")
    trees = [random_rollout(rng, sentence, ["a", "b"]) for _ in range(8)]
    samples = SampleSet.from_counts(sentence, [(t, 1) for t in trees])
    base = StructureQuery((EdgePattern(frozenset({"a"}), Var("G"), Var("C")),))
    extended = StructureQuery(
        base.patterns + (EdgePattern(frozenset({"b"}), Var("G"), Var("D")),)
    )
    assert query_marginal(extended, samples) <= query_marginal(base, samples)
