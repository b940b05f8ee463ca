from __future__ import annotations

import itertools
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feynknot.diagram import (
    KnotGraph,
    are_equivalent,
    automorphisms,
    canonical_form,
    canonical_key,
    chord_diagram,
    enumerate_diagrams,
    graph_from_key,
    is_normal,
    is_splittable,
    order,
    symmetry_factor,
    tripod,
)
from feynknot.strata import make_stratum

from oracles import all_equivalences, brute_classes, brute_key, brute_normal, brute_splittable, edge_multiset

X = chord_diagram((1, 3), (2, 4))
T = tripod()


def k4() -> KnotGraph:
    inner = ["y1", "y2", "y3", "y4"]
    return KnotGraph([], inner, list(itertools.combinations(inner, 2)))


def test_order_examples():
    assert order(X) == 2
    assert order(T) == 2
    assert order(k4()) == 2


def test_is_normal_examples():
    assert is_normal(X)
    assert not is_normal(KnotGraph([], ["y1", "y2"], [("y1", "y2")]))
    assert is_normal(T)
    assert not is_normal(KnotGraph(["b1", "b2", "b3"], [], [("b1", "b2")]))  # free b3


def test_two_disjoint_chords_split_into_the_chords():
    g = chord_diagram((1, 2), (3, 4))
    parts = is_splittable(g)
    assert parts is not None
    assert sorted(p.edges for p in parts) == [(("b1", "b2"),), (("b3", "b4"),)]


def test_tripod_is_not_splittable():
    assert is_splittable(T) is None
    assert not brute_splittable(T)


def test_two_tripods_split_at_shared_base_point():
    g = KnotGraph(
        ["b1", "b2", "b3", "b4", "b5"],
        ["y1", "y2"],
        [("b1", "y1"), ("b2", "y1"), ("b3", "y1"), ("b3", "y2"), ("b4", "y2"), ("b5", "y2")],
    )
    assert len(g.components()) == 1
    g1, g2 = is_splittable(g)
    assert set(g1.vertices) & set(g2.vertices) == {"b3"}
    assert g1.k + g2.k == g.k


@pytest.mark.parametrize("graph, count", [(X, 1), (T, 1), (k4(), 24)])
def test_automorphism_counts(graph, count):
    assert len(automorphisms(graph)) == count
    assert len(all_equivalences(graph, graph)) == count
    assert symmetry_factor(graph) == count


def test_equivalence_examples():
    relabeled = KnotGraph(["p", "q", "r", "s"], [], [("q", "s"), ("r", "p")])
    assert are_equivalent(X, relabeled) is not None
    assert are_equivalent(X, chord_diagram((1, 2), (3, 4))) is None
    assert not all_equivalences(X, chord_diagram((1, 2), (3, 4)))
    ident = are_equivalent(T, T)
    assert ident is not None and all(ident(v) == v for v in T.vertices)


def test_enumerate_order_one_and_two():
    assert [canonical_key(g) for g in enumerate_diagrams(1, 1)] == ["m2s0:b1-b2"]
    keys = {canonical_key(g) for g in enumerate_diagrams(2, 3, on_knot=True)}
    assert canonical_key(X) in keys and canonical_key(T) in keys
    # X is a disjoint union of two chords, so only the knot-connected listing holds it
    plain = {canonical_key(g) for g in enumerate_diagrams(2, 3)}
    assert canonical_key(T) in plain and canonical_key(X) not in plain


def test_enumerate_rejects_nonpositive_order():
    with pytest.raises(ValueError):
        enumerate_diagrams(0)


@pytest.mark.parametrize("n", [1, 2])
def test_enumeration_matches_brute_force(n):
    found = enumerate_diagrams(n)
    keys = [brute_key(g) for g in found]
    assert len(set(keys)) == len(keys)
    assert set(keys) == brute_classes(n, 3 * n)


def test_order_two_class_counts():
    # frozen from the brute-force generator in oracles.py
    assert len(enumerate_diagrams(2)) == 13
    assert len(enumerate_diagrams(1)) == 2  # the chord and the theta graph
    assert len(enumerate_diagrams(2, on_knot=True)) == 15


def test_enumerated_classes_pairwise_inequivalent():
    reps = enumerate_diagrams(2, on_knot=True)
    for a, b in itertools.combinations(reps, 2):
        assert are_equivalent(a, b) is None


def test_every_enumerated_diagram_is_normal():
    for g in enumerate_diagrams(3, on_knot=True):
        assert is_normal(g) and brute_normal(g)
        assert order(g) == 3


def test_graph_from_key_round_trip():
    for g in enumerate_diagrams(2, on_knot=True):
        key = canonical_key(g)
        assert graph_from_key(key) == canonical_form(g)
        assert canonical_key(graph_from_key(key)) == key
    for bad in ["", "m2s0", "x2s0:b1-b2", "m2s0:b1"]:
        with pytest.raises(ValueError):
            graph_from_key(bad)


def test_json_round_trip(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(T.to_json())
    assert KnotGraph.from_json(path.read_text()) == T
    data = json.loads(path.read_text())
    assert data["inner"] == ["y1"]


def test_invalid_graphs_rejected():
    with pytest.raises(ValueError):
        KnotGraph(["b1"], [], [("b1", "b1")])
    with pytest.raises(ValueError):
        KnotGraph(["b1"], ["b1"], [])
    with pytest.raises(ValueError):
        KnotGraph(["b1"], [], [("b1", "y9")])


def test_order_adds_over_strata_with_base_points():
    for g in enumerate_diagrams(2, on_knot=True):
        for r in range(2, len(g.vertices) + 1):
            for A in itertools.combinations(g.vertices, r):
                try:
                    s = make_stratum(g, A)
                except ValueError:
                    continue
                if s.has_base:
                    assert order(g) == order(s.quotient) + order(s.collapsed)
                else:
                    # the collapsed inner vertices leave one new inner vertex behind
                    assert order(g) == order(s.quotient) + order(s.collapsed) + 1


# -- property tests ------------------------------------------------------


@st.composite
def small_graphs(draw):
    m = draw(st.integers(0, 4))
    s = draw(st.integers(0 if m >= 2 else 2 - m, 3))
    labels = [f"b{i + 1}" for i in range(m)] + [f"y{i + 1}" for i in range(s)]
    pairs = list(itertools.combinations(labels, 2))
    edges = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=6))
    return KnotGraph(labels[:m], labels[m:], edges)


@st.composite
def relabelings(draw, graph):
    perm = draw(st.permutations(list(graph.inner)))
    names = {b: f"p{i}" for i, b in enumerate(graph.base_points)}
    names.update({y: f"q{perm.index(y)}" for y in graph.inner})
    base = [names[b] for b in graph.base_points]
    inner = sorted((names[y] for y in graph.inner))
    edges = draw(st.permutations([(names[u], names[v]) for u, v in graph.edges]))
    return KnotGraph(base, inner, edges)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_equivalence_is_an_equivalence_relation(data):
    g = data.draw(small_graphs())
    h = data.draw(relabelings(g))
    f = data.draw(relabelings(h))
    e1 = are_equivalent(g, h)
    e2 = are_equivalent(h, f)
    assert are_equivalent(g, g) is not None
    assert e1 is not None and e2 is not None
    back = e1.inverse()
    assert edge_multiset(h, back.vertex_map) == edge_multiset(g)
    composed = e2.compose(e1)
    assert edge_multiset(g, composed.vertex_map) == edge_multiset(f)
    assert canonical_key(g) == canonical_key(h) == canonical_key(f)


@settings(max_examples=60, deadline=None)
@given(small_graphs(), small_graphs())
def test_equivalence_agrees_with_brute_force(g1, g2):
    assert (are_equivalent(g1, g2) is not None) == bool(all_equivalences(g1, g2))
    assert (canonical_key(g1) == canonical_key(g2)) == bool(all_equivalences(g1, g2))


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_automorphism_count_divides_candidate_bijections(g):
    count = len(automorphisms(g))
    assert count == len(all_equivalences(g, g))
    assert math.factorial(g.s) % count == 0


@settings(max_examples=80, deadline=None)
@given(small_graphs())
def test_splittable_agrees_with_brute_force(g):
    assert (is_splittable(g) is not None) == brute_splittable(g)


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_random_normal_diagrams_hit_exactly_one_class(g):
    if not is_normal(g) or is_splittable(g) is not None or order(g) not in (1, 2):
        return
    hits = [rep for rep in enumerate_diagrams(order(g)) if are_equivalent(g, rep) is not None]
    assert len(hits) == 1
