import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import CASES, case_embeddings, case_history, case_similarity
from consgraph.catalog import InteractionHistory
from consgraph.errors import EmptyGraph, ZeroVector
from consgraph.graph import (build_graph, connected_components, cosine, denoise, filter_report,
                             graph_from_similarities, select_max_component, similarity_matrix)
from consgraph.vectors import EmbeddingMatrix


def union_find_components(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for x in range(n):
        groups.setdefault(find(x), set()).add(x)
    return {frozenset(g) for g in groups.values()}


def random_graph(rng):
    n = int(rng.integers(2, 101))
    p = rng.uniform(0, min(1.0, 4.0 / n))
    s = rng.uniform(-1, 1, size=(n, n))
    s = (s + s.T) / 2
    tau = float(np.quantile(s, 1 - p))
    return graph_from_similarities(range(n), s, tau)


@pytest.mark.parametrize("name", ["beauty", "yelp"])
def test_golden_case(name):
    emb = case_embeddings(name)
    np.testing.assert_allclose(emb.vectors @ emb.vectors.T, case_similarity(name), atol=1e-12)
    h = case_history()
    out, g, cs = denoise(h, emb, CASES[name]["tau"], details=True)
    assert {(g.nodes[a], g.nodes[b]) for a, b in g.edge_list()} == {("n1", "n2"), ("n1", "n4"), ("n2", "n4")}
    assert out.item_ids == ["n1", "n2", "n4"]
    assert sorted(cs.sizes) == [1, 3]


def test_golden_case_exclude_last_drops_n4_event():
    # with the final event held out, n4 is not a node; n1-n2 is the largest component
    out = denoise(case_history(), case_embeddings("beauty"), 0.3, exclude_last=True)
    assert out.item_ids == ["n1", "n2"]


def test_bfs_matches_union_find():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        g = random_graph(rng)
        got = set(connected_components(g).components)
        assert got == union_find_components(g.n, g.edge_list())


def test_cosine_and_matrix():
    assert cosine([1, 0], [1, 1]) == pytest.approx(2 ** -0.5)
    assert cosine([3, 3], [1, 1]) == 1.0
    with pytest.raises(ZeroVector):
        cosine([0, 0], [1, 0])
    s = similarity_matrix(np.array([[1.0, 0], [2.0, 2.0], [-3.0, 0]]))
    np.testing.assert_allclose(np.diag(s), 1.0)
    assert s[0, 2] == -1.0


def test_threshold_is_inclusive():
    s = np.array([[1.0, 0.7], [0.7, 1.0]])
    assert graph_from_similarities("ab", s, 0.7).edge_list() == [(0, 1)]
    assert graph_from_similarities("ab", s, 0.7000001).edge_list() == []


def vectors(ids, rows):
    return EmbeddingMatrix(ids, np.array(rows, dtype=float))


def test_all_singletons_keeps_most_recent_item():
    m = vectors(["a", "b", "c"], np.eye(3))
    assert denoise(["a", "b", "c"], m, 0.5).item_ids == ["c"]


def test_equal_size_tie_goes_to_recent_component():
    # components {a, b} and {c, d}; the most recent event is b
    m = vectors(["a", "b", "c", "d"], [[1, 0], [1, 0.1], [0, 1], [0.1, 1]])
    assert denoise(["c", "a", "d", "b"], m, 0.9).item_ids == ["a", "b"]
    assert denoise(["a", "c", "b", "d"], m, 0.9).item_ids == ["c", "d"]


def test_lexicographic_rule_without_recency_signal():
    # without a graph the recency rule cannot apply; the component holding the
    # earliest node wins
    g = graph_from_similarities(["x", "y"], np.eye(2), 0.5)
    cs = select_max_component(connected_components(g), ["x", "y"])
    assert cs.components[cs.max_index] == frozenset({0})


def test_multiplicity_and_order_preserved():
    m = vectors(["a", "b", "z"], [[1, 0], [1, 0.05], [0, 1]])
    h = InteractionHistory("u", (("a", 1), ("z", 2), ("b", 3), ("a", 4), ("a", 5), ("z", 6)))
    out = denoise(h, m, 0.9)
    assert out.item_ids == ["a", "b", "a", "a"]
    assert [t for _, t in out.events] == [1, 3, 4, 5]


def test_negative_tau_keeps_everything():
    rng = np.random.default_rng(3)
    ids = [f"i{k}" for k in range(7)]
    m = EmbeddingMatrix(ids, rng.normal(size=(7, 4)))
    seq = [ids[k] for k in rng.integers(0, 7, size=15)]
    assert denoise(seq, m, -1.0).item_ids == seq


def test_empty_history():
    with pytest.raises(EmptyGraph):
        denoise([], vectors(["a"], [[1.0]]), 0.5)
    with pytest.raises(EmptyGraph):
        denoise(["a"], vectors(["a"], [[1.0]]), 0.5, exclude_last=True)


def test_filter_report_record():
    rec = filter_report("case", case_history(), case_embeddings("yelp"), 0.5, exclude_last=False)
    assert rec == {"user_id": "case", "retained": ["n1", "n2", "n4"], "removed": ["n3"],
                   "component_sizes": [3, 1]}


histories = st.lists(st.integers(0, 9), min_size=1, max_size=25)


def embedding(seed, n=10, dim=3):
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix([f"i{k}" for k in range(n)], rng.normal(size=(n, dim)))


@settings(max_examples=200, deadline=None)
@given(histories, st.integers(0, 50), st.floats(-1, 1))
def test_output_is_one_maximum_component_subsequence(seq, seed, tau):
    m = embedding(seed)
    ids = [f"i{k}" for k in seq]
    out, g, cs = denoise(ids, m, tau, details=True)
    kept = out.item_ids
    # subsequence with every occurrence of a retained item
    assert kept == [i for i in ids if i in out.retained_items]
    assert len(out.retained_items) == max(cs.sizes)
    # retained items form exactly one component
    comp = {g.nodes[i] for i in cs.components[cs.max_index]}
    assert comp == set(out.retained_items)


@settings(max_examples=200, deadline=None)
@given(histories, st.integers(0, 50), st.floats(-1, 1), st.floats(-1, 1))
def test_raising_tau_never_grows_max_component(seq, seed, t1, t2):
    lo, hi = sorted((t1, t2))
    m = embedding(seed)
    ids = [f"i{k}" for k in seq]
    g_lo, g_hi = build_graph(ids, m, lo), build_graph(ids, m, hi)
    assert set(g_hi.edge_list()) <= set(g_lo.edge_list())
    assert max(connected_components(g_hi).sizes) <= max(connected_components(g_lo).sizes)


@settings(max_examples=200, deadline=None)
@given(histories, st.integers(0, 50), st.floats(-1, 1), st.data())
def test_duplicates_do_not_change_graph(seq, seed, tau, data):
    m = embedding(seed)
    ids = [f"i{k}" for k in seq]
    extra = data.draw(st.lists(st.sampled_from(ids), max_size=5))
    doubled = extra + ids
    g1, g2 = build_graph(ids, m, tau), build_graph(doubled, m, tau)
    comps1 = {frozenset(g1.nodes[i] for i in c) for c in connected_components(g1).components}
    comps2 = {frozenset(g2.nodes[i] for i in c) for c in connected_components(g2).components}
    assert comps1 == comps2
    # prepended repeats do not move any item's latest position, so the choice is stable
    assert denoise(doubled, m, tau).retained_items == denoise(ids, m, tau).retained_items
