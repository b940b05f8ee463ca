"""Knot-graph combinatorics.

A knot graph has linearly ordered base points (living on the knot), inner
vertices (free in space, carrying a fixed linear order used by the bundle
trivialization) and a multiset of edges.  Multi-edges are allowed.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

Edge = tuple[str, str]


@dataclass(frozen=True)
class KnotGraph:
    """A diagram with ordered base points and ordered inner vertices.

    ``inner`` lists the inner vertices in their inner order.  Edges are kept in
    the given order; that order is the default edge ordering used by the
    integrator and the bundle module.
    """

    base_points: tuple[str, ...]
    inner: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __init__(
        self,
        base_points: Iterable[str],
        inner: Iterable[str],
        edges: Iterable[Sequence[str]],
    ) -> None:
        object.__setattr__(self, "base_points", tuple(base_points))
        object.__setattr__(self, "inner", tuple(inner))
        object.__setattr__(self, "edges", tuple((str(e[0]), str(e[1])) for e in edges))
        self._validate()

    def _validate(self) -> None:
        labels = self.base_points + self.inner
        if len(set(labels)) != len(labels):
            raise ValueError("vertex labels must be unique")
        known = set(labels)
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"edge {u}-{v} is a loop")
            if u not in known or v not in known:
                raise ValueError(f"edge {u}-{v} uses an undeclared vertex")

    # -- basic structure --------------------------------------------------

    @property
    def vertices(self) -> tuple[str, ...]:
        """Base points in order followed by inner vertices in inner order."""
        return self.base_points + self.inner

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @property
    def m(self) -> int:
        return len(self.base_points)

    @property
    def s(self) -> int:
        return len(self.inner)

    @property
    def k(self) -> int:
        return len(self.edges)

    def is_base(self, v: str) -> bool:
        return self.index[v] < self.m

    def oriented(self, edge: Edge) -> Edge:
        """The edge directed from the smaller to the larger vertex in global order."""
        u, v = edge
        return (u, v) if self.index[u] < self.index[v] else (v, u)

    @cached_property
    def edge_counts(self) -> Counter:
        return Counter(self.oriented(e) for e in self.edges)

    def multiplicity(self, u: str, v: str) -> int:
        return self.edge_counts.get(self.oriented((u, v)), 0)

    @cached_property
    def degrees(self) -> dict[str, int]:
        deg = {v: 0 for v in self.vertices}
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def degree(self, v: str) -> int:
        return self.degrees[v]

    def neighbors(self, v: str) -> list[str]:
        """Neighbours of ``v`` with repetition for multi-edges."""
        out = []
        for a, b in self.edges:
            if a == v:
                out.append(b)
            elif b == v:
                out.append(a)
        return out

    def components(self) -> list[set[str]]:
        parent = {v: v for v in self.vertices}

        def find(x: str) -> str:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in self.edges:
            parent[find(u)] = find(v)
        groups: dict[str, set[str]] = {}
        for v in self.vertices:
            groups.setdefault(find(v), set()).add(v)
        return sorted(groups.values(), key=lambda g: min(self.index[v] for v in g))

    def subgraph(self, vertices: Iterable[str], edges: Iterable[Edge] | None = None) -> KnotGraph:
        """Subgraph on ``vertices`` keeping orders; by default the induced edges."""
        keep = set(vertices)
        if edges is None:
            edges = [e for e in self.edges if e[0] in keep and e[1] in keep]
        return KnotGraph(
            [b for b in self.base_points if b in keep],
            [y for y in self.inner if y in keep],
            edges,
        )

    def with_inner_order(self, order: Sequence[str]) -> KnotGraph:
        if sorted(order) != sorted(self.inner):
            raise ValueError("inner order must be a permutation of the inner vertices")
        return KnotGraph(self.base_points, order, self.edges)

    def relabeled(self, mapping: Mapping[str, str]) -> KnotGraph:
        return KnotGraph(
            [mapping[b] for b in self.base_points],
            [mapping[y] for y in self.inner],
            [(mapping[u], mapping[v]) for u, v in self.edges],
        )

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "base_points": list(self.base_points),
            "inner": list(self.inner),
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> KnotGraph:
        try:
            return cls(data["base_points"], data.get("inner", []), data["edges"])
        except KeyError as exc:
            raise ValueError(f"diagram is missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> KnotGraph:
        return cls.from_dict(json.loads(text))

    def __repr__(self) -> str:
        edges = ",".join(f"{u}{v}" for u, v in self.edges)
        return f"KnotGraph(base={list(self.base_points)}, inner={list(self.inner)}, edges=[{edges}])"


@dataclass(frozen=True)
class Equivalence:
    """A vertex bijection between two diagrams preserving base order and edges."""

    vertex_map: dict[str, str] = field(hash=False)

    def __call__(self, v: str) -> str:
        return self.vertex_map[v]

    def inverse(self) -> Equivalence:
        return Equivalence({w: v for v, w in self.vertex_map.items()})

    def compose(self, other: Equivalence) -> Equivalence:
        """``self`` after ``other``."""
        return Equivalence({v: self.vertex_map[w] for v, w in other.vertex_map.items()})


def chord_diagram(*chords: tuple[int, int]) -> KnotGraph:
    """Chord diagram on base points b1..bm from 1-based index pairs."""
    m = max(max(c) for c in chords)
    base = [f"b{i}" for i in range(1, m + 1)]
    return KnotGraph(base, [], [(f"b{a}", f"b{b}") for a, b in chords])


def tripod() -> KnotGraph:
    return KnotGraph(["b1", "b2", "b3"], ["y1"], [("b1", "y1"), ("b2", "y1"), ("b3", "y1")])


def order(graph: KnotGraph) -> int:
    """|E| - |V_1|."""
    return graph.k - graph.s


def is_normal(graph: KnotGraph) -> bool:
    """No free vertex and every inner vertex has degree at least three."""
    deg = graph.degrees
    if any(d == 0 for d in deg.values()):
        return False
    return all(deg[y] >= 3 for y in graph.inner)


def is_splittable(graph: KnotGraph) -> tuple[KnotGraph, KnotGraph] | None:
    """Split into two parts meeting in nothing or in a single base point."""
    comps = graph.components()
    if len(comps) >= 2:
        first = comps[0]
        rest = set(graph.vertices) - first
        return graph.subgraph(first), graph.subgraph(rest)
    for b in graph.base_points:
        others = [v for v in graph.vertices if v != b]
        pieces = graph.subgraph(others).components()
        if len(pieces) >= 2:
            side = pieces[0]
            e1 = [e for e in graph.edges if e[0] in side or e[1] in side]
            e2 = [e for e in graph.edges if not (e[0] in side or e[1] in side)]
            return (
                graph.subgraph(side | {b}, e1),
                graph.subgraph(set(graph.vertices) - side, e2),
            )
    return None


def _matchings(g1: KnotGraph, g2: KnotGraph, first_only: bool) -> Iterator[dict[str, str]]:
    """Backtracking over inner bijections; base points map by position."""
    if (g1.m, g1.s, g1.k) != (g2.m, g2.s, g2.k):
        return
    fixed = dict(zip(g1.base_points, g2.base_points))
    for i, a in enumerate(g1.base_points):
        for b in g1.base_points[i + 1:]:
            if g1.multiplicity(a, b) != g2.multiplicity(fixed[a], fixed[b]):
                return
        if g1.degree(a) != g2.degree(fixed[a]):
            return
    # most constrained first: inner vertices sorted by decreasing degree
    todo = sorted(g1.inner, key=lambda y: -g1.degree(y))
    used: set[str] = set()
    mapping = dict(fixed)

    def extend(pos: int) -> Iterator[dict[str, str]]:
        if pos == len(todo):
            yield dict(mapping)
            return
        y = todo[pos]
        for z in g2.inner:
            if z in used or g2.degree(z) != g1.degree(y):
                continue
            if any(g1.multiplicity(y, u) != g2.multiplicity(z, mapping[u]) for u in mapping):
                continue
            mapping[y] = z
            used.add(z)
            yield from extend(pos + 1)
            used.discard(z)
            del mapping[y]

    for found in extend(0):
        yield found
        if first_only:
            return


def are_equivalent(g1: KnotGraph, g2: KnotGraph) -> Equivalence | None:
    for found in _matchings(g1, g2, first_only=True):
        return Equivalence(found)
    return None


def automorphisms(graph: KnotGraph) -> list[Equivalence]:
    return [Equivalence(m) for m in _matchings(graph, graph, first_only=False)]


def symmetry_factor(graph: KnotGraph) -> int:
    """|Aut(graph)|, the divisor in Z(K)."""
    return sum(1 for _ in _matchings(graph, graph, first_only=False))


def _refined_colors(graph: KnotGraph) -> dict[str, tuple]:
    """Colour refinement seeded by base position and degree."""
    colors: dict[str, tuple] = {}
    for i, b in enumerate(graph.base_points):
        colors[b] = ("b", i)
    for y in graph.inner:
        colors[y] = ("y", graph.degree(y))
    for _ in range(graph.s + 1):
        signature = {
            v: (colors[v], tuple(sorted((colors[u], graph.multiplicity(v, u)) for u in set(graph.neighbors(v)))))
            for v in graph.vertices
        }
        ranks = {sig: r for r, sig in enumerate(sorted(set(signature.values()), key=repr))}
        new = {v: (colors[v][0], ranks[signature[v]]) if not graph.is_base(v) else colors[v] for v in graph.vertices}
        if len(set(new.values())) == len(set(colors.values())):
            colors = new
            break
        colors = new
    return colors


def canonical_form(graph: KnotGraph) -> KnotGraph:
    """Equivalence-class representative relabeled b1..bm, y1..ys.

    The inner order of the result is the canonical one; two diagrams are
    equivalent iff their canonical forms are identical.
    """
    colors = _refined_colors(graph)
    classes: dict[tuple, list[str]] = {}
    for y in graph.inner:
        classes.setdefault(colors[y], []).append(y)
    keys = sorted(classes, key=repr)
    base_idx = {b: i for i, b in enumerate(graph.base_points)}
    best = None
    best_order: list[str] = []
    for perms in itertools.product(*(itertools.permutations(classes[c]) for c in keys)):
        order_ = [y for p in perms for y in p]
        idx = dict(base_idx)
        idx.update({y: graph.m + i for i, y in enumerate(order_)})
        code = tuple(sorted(tuple(sorted((idx[u], idx[v]))) for u, v in graph.edges))
        if best is None or code < best:
            best, best_order = code, order_
    names = {b: f"b{i + 1}" for i, b in enumerate(graph.base_points)}
    names.update({y: f"y{i + 1}" for i, y in enumerate(best_order)})
    labels = [f"b{i + 1}" for i in range(graph.m)] + [f"y{i + 1}" for i in range(graph.s)]
    return KnotGraph(labels[: graph.m], labels[graph.m:], [(labels[a], labels[b]) for a, b in best])


def canonical_key(graph: KnotGraph) -> str:
    """Stable string key of the equivalence class, e.g. ``m4s0:b1-b3,b2-b4``."""
    canon = canonical_form(graph)
    edges = ",".join(f"{u}-{v}" for u, v in canon.edges)
    return f"m{canon.m}s{canon.s}:{edges}"


def graph_from_key(key: str) -> KnotGraph:
    """Inverse of canonical_key."""
    try:
        head, body = key.split(":", 1)
        m_str, s_str = head[1:].split("s")
        m, s = int(m_str), int(s_str)
        edges = [tuple(e.split("-")) for e in body.split(",")] if body else []
    except ValueError:
        raise ValueError(f"malformed diagram key {key!r}") from None
    if not head.startswith("m") or any(len(e) != 2 for e in edges):
        raise ValueError(f"malformed diagram key {key!r}")
    return KnotGraph([f"b{i + 1}" for i in range(m)], [f"y{i + 1}" for i in range(s)], edges)


def _is_knot_connected(graph: KnotGraph) -> bool:
    if graph.m == 0:
        return False
    return all(any(graph.is_base(v) for v in comp) for comp in graph.components())


def _raw_multigraphs(m: int, s: int, k: int) -> Iterator[list[tuple[int, int]]]:
    """Labeled loopless multigraphs with base degree >= 1 and inner degree >= 3."""
    nv = m + s
    pairs = [(i, j) for i in range(nv) for j in range(i + 1, nv)]
    need = [1] * m + [3] * s
    deg = [0] * nv
    last_pair = {}
    for p, (i, j) in enumerate(pairs):
        last_pair[i] = p
        last_pair[j] = p
    closing: dict[int, list[int]] = {}
    for v, p in last_pair.items():
        closing.setdefault(p, []).append(v)
    chosen: list[tuple[int, int]] = []

    def deficit() -> int:
        return sum(max(0, need[v] - deg[v]) for v in range(nv))

    def rec(p: int, remaining: int) -> Iterator[list[tuple[int, int]]]:
        if deficit() > 2 * remaining:
            return
        if p == len(pairs):
            if remaining == 0:
                yield list(chosen)
            return
        i, j = pairs[p]
        added = 0
        for c in range(remaining + 1):
            if c:
                deg[i] += 1
                deg[j] += 1
                chosen.append((i, j))
                added += 1
            if all(deg[v] >= need[v] for v in closing.get(p, [])):
                yield from rec(p + 1, remaining - c)
        deg[i] -= added
        deg[j] -= added
        del chosen[len(chosen) - added:]

    if nv >= 2:
        yield from rec(0, k)


def _invariant(graph: KnotGraph) -> tuple:
    """Cheap isomorphism invariant used to bucket candidates."""
    base_part = tuple(
        (graph.degree(b), tuple(graph.multiplicity(b, c) for c in graph.base_points)) for b in graph.base_points
    )
    inner_part = sorted(
        (graph.degree(y), tuple(sorted(graph.degree(u) for u in graph.neighbors(y))),
         tuple(sorted(graph.index[u] for u in graph.neighbors(y) if graph.is_base(u))))
        for y in graph.inner
    )
    return (graph.m, graph.s, graph.k, base_part, tuple(inner_part))


@lru_cache(maxsize=None)
def _enumerate(n: int, max_edges: int, on_knot: bool) -> tuple[KnotGraph, ...]:
    buckets: dict[tuple, list[KnotGraph]] = {}
    found: dict[str, KnotGraph] = {}
    for k in range(1, max_edges + 1):
        s = k - n
        if s < 0:
            continue
        for m in range(0, 2 * k - 3 * s + 1):
            if m + s > 2 * k or (on_knot and m == 0):
                continue
            base = [f"b{i + 1}" for i in range(m)]
            inner = [f"y{i + 1}" for i in range(s)]
            labels = base + inner
            for raw in _raw_multigraphs(m, s, k):
                g = KnotGraph(base, inner, [(labels[a], labels[b]) for a, b in raw])
                if on_knot:
                    if not _is_knot_connected(g):
                        continue
                elif is_splittable(g) is not None:
                    continue
                bucket = buckets.setdefault(_invariant(g), [])
                if not any(are_equivalent(g, rep) for rep in bucket):
                    bucket.append(g)
    for bucket in buckets.values():
        for g in bucket:
            found[canonical_key(g)] = canonical_form(g)
    return tuple(found[key] for key in sorted(found, key=lambda c: (found[c].k, found[c].m, c)))


def enumerate_diagrams(n: int, max_edges: int | None = None, *, on_knot: bool = False) -> list[KnotGraph]:
    """One canonical representative per class of normal diagrams of order ``n``.

    With ``on_knot=False`` the classes are the non-splittable ones.  With
    ``on_knot=True`` splittable diagrams are kept but every connected
    component must touch a base point, which is the set entering Z(K) (it
    contains the crossed chord diagram).  Edge counts are capped at 3n.
    """
    if n <= 0:
        raise ValueError("order must be positive")
    cap = 3 * n if max_edges is None else min(max_edges, 3 * n)
    return list(_enumerate(n, cap, on_knot))
