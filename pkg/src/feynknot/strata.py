"""Codimension-one strata: collapsing a vertex subset A of a diagram.

The stratum of A is described by the quotient graph (A shrunk to one vertex)
and the collapsed graph A(Γ) (the subgraph induced on A).  This module also
implements the identification maps that glue strata with equal Gauss images,
the collar that pushes configurations off a stratum, and the bookkeeping of
edge positions across a collapse.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .diagram import KnotGraph
from .geometry import Configuration, KnotCurve, edge_ordering


class StratumType(str, Enum):
    TYPE0 = "Type0"
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    TYPE_III = "TypeIII"
    TYPE_IV = "TypeIV"
    TYPE_Y = "TypeY"
    PLAIN = "Plain"


QUOTIENT = "quotient"
COLLAPSED = "collapsed"


@dataclass(frozen=True)
class Stratum:
    parent: KnotGraph
    A: tuple[str, ...]
    quotient: KnotGraph
    collapsed: KnotGraph
    edge_partition: tuple[tuple[str, int], ...]
    new_vertex: str

    @property
    def has_base(self) -> bool:
        return self.collapsed.m > 0

    @property
    def anchor(self) -> str:
        """Minimal base point of A, else its minimal inner vertex."""
        if self.collapsed.m:
            return self.collapsed.base_points[0]
        return self.collapsed.inner[0]


def _name_for(A: Sequence[str]) -> str:
    return "{" + ",".join(A) + "}"


def make_stratum(graph: KnotGraph, A: Iterable[str]) -> Stratum:
    """Build Γ/A and A(Γ).

    The new vertex is a base point iff A meets the base points; then the
    base points of A must form an interval and the new vertex takes their
    place.  For A made of inner vertices only, the new inner vertex takes the
    place of the largest element of A in the inner order.
    """
    members = set(A)
    if len(members) < 2:
        raise ValueError("a stratum needs |A| >= 2")
    unknown = members - set(graph.vertices)
    if unknown:
        raise ValueError(f"unknown vertices {sorted(unknown)}")
    ordered = tuple(v for v in graph.vertices if v in members)
    base_pos = [i for i, b in enumerate(graph.base_points) if b in members]
    if base_pos and base_pos != list(range(base_pos[0], base_pos[-1] + 1)):
        raise ValueError("base points of A must form an interval of the base order")
    a = _name_for(ordered)
    if a in graph.index:
        raise ValueError(f"label {a} already used")

    if base_pos:
        base = list(graph.base_points[: base_pos[0]]) + [a] + list(graph.base_points[base_pos[-1] + 1:])
        inner = [y for y in graph.inner if y not in members]
    else:
        base = list(graph.base_points)
        top = max(graph.inner.index(y) for y in members)
        inner = []
        for i, y in enumerate(graph.inner):
            if i == top:
                inner.append(a)
            elif y not in members:
                inner.append(y)

    q_edges: list[tuple[str, str]] = []
    c_edges: list[tuple[str, str]] = []
    partition: list[tuple[str, int]] = []
    for u, v in graph.edges:
        if u in members and v in members:
            partition.append((COLLAPSED, len(c_edges)))
            c_edges.append((u, v))
        else:
            partition.append((QUOTIENT, len(q_edges)))
            q_edges.append((a if u in members else u, a if v in members else v))
    quotient = KnotGraph(base, inner, q_edges)
    collapsed = graph.subgraph(members, c_edges)
    return Stratum(graph, ordered, quotient, collapsed, tuple(partition), a)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Distinguished:
    """Vertices a stratum's identification map acts on."""

    kind: StratumType
    v: str | None = None
    v1: str | None = None
    others: tuple[str, ...] = ()


def distinguish(s: Stratum) -> Distinguished:
    sub = s.collapsed
    if len(s.A) == 2:
        v, w = s.A
        if sub.k == 0:
            return Distinguished(StratumType.TYPE_IV, v, w)
        if sub.k == 1 and (not sub.is_base(v) or not sub.is_base(w)):
            inner = [y for y in sub.inner]
            first = inner[0]
            other = w if first == v else v
            return Distinguished(StratumType.TYPE_III, first, other)
        return Distinguished(StratumType.PLAIN)
    for x in sub.vertices:
        if sub.degree(x) == 0:
            return Distinguished(StratumType.TYPE0, x)
    for y in sub.inner:
        if sub.degree(y) == 2:
            return Distinguished(StratumType.TYPE_II, y, None, tuple(sub.neighbors(y)))
    for y in sub.inner:
        if sub.degree(y) != 1:
            continue
        (v1,) = sub.neighbors(y)
        d1 = sub.degree(v1)
        if sub.is_base(v1) or d1 == 1:
            continue  # reduced to lower-dimensional boundary by translation/dilation
        if d1 == 3:
            rest = list(sub.neighbors(v1))
            rest.remove(y)
            return Distinguished(StratumType.TYPE_Y, y, v1, tuple(rest))
        if d1 >= 4:
            return Distinguished(StratumType.TYPE_I, y, v1)
    return Distinguished(StratumType.PLAIN)


def classify(s: Stratum) -> StratumType:
    return distinguish(s).kind


def _require(s: Stratum, *kinds: StratumType) -> Distinguished:
    d = distinguish(s)
    if d.kind not in kinds:
        raise ValueError(f"stratum is {d.kind.value}, expected {'/'.join(k.value for k in kinds)}")
    return d


# ---------------------------------------------------------------------------
# identification maps on configurations of A(Γ)


def _positions(graph: KnotGraph, config: Configuration, curve: KnotCurve | None = None) -> dict[str, np.ndarray]:
    if not config.fits(graph):
        raise ValueError("configuration does not match the diagram")
    pos = config.positions(curve)
    return {v: pos[i] for i, v in enumerate(graph.vertices)}


def _with_inner(graph: KnotGraph, config: Configuration, moved: dict[str, np.ndarray]) -> Configuration:
    inner = config.inner_points.copy()
    for v, p in moved.items():
        inner[graph.inner.index(v)] = p
    return replace(config, inner_points=inner)


def tau2(s: Stratum, config: Configuration) -> Configuration:
    """Reflect the bivalent vertex v to g(w1) + g(w2) - g(v)."""
    d = _require(s, StratumType.TYPE_II)
    pos = _positions(s.collapsed, config)
    w1, w2 = d.others
    return _with_inner(s.collapsed, config, {d.v: pos[w1] + pos[w2] - pos[d.v]})


def tau_y(s: Stratum, config: Configuration) -> Configuration:
    """Reflect both the univalent vertex and its trivalent neighbour through w1 + w2."""
    d = _require(s, StratumType.TYPE_Y)
    pos = _positions(s.collapsed, config)
    w1, w2 = d.others
    c = pos[w1] + pos[w2]
    return _with_inner(s.collapsed, config, {d.v: c - pos[d.v], d.v1: c - pos[d.v1]})


def spread(points: Iterable[np.ndarray]) -> float:
    """Largest pairwise distance."""
    pts = np.array(list(points))
    if len(pts) < 2:
        return 0.0
    return float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1)))


def tau1(s: Stratum, config: Configuration) -> Configuration:
    """Move the univalent vertex to distance 2||g1|| from its neighbour, keeping the direction.

    ||g1|| is the largest pairwise distance among the other vertices of A.
    """
    d = _require(s, StratumType.TYPE_I)
    pos = _positions(s.collapsed, config)
    norm = spread(p for v, p in pos.items() if v != d.v)
    if norm < 1e-300:
        raise ValueError("||g1|| = 0: the remaining vertices of A coincide")
    diff = pos[d.v] - pos[d.v1]
    length = np.linalg.norm(diff)
    if length == 0.0:
        raise ValueError("degenerate configuration: univalent vertex sits on its neighbour")
    return _with_inner(s.collapsed, config, {d.v: pos[d.v1] + 2.0 * norm * diff / length})


def tau0(s: Stratum, config: Configuration) -> Configuration:
    """Push a free inner vertex to g1(v0) + (2||g1||, 0, 0), v0 the anchor of the rest."""
    d = _require(s, StratumType.TYPE0)
    if s.collapsed.is_base(d.v):
        raise ValueError("free base points are handled by the projection, not by tau0")
    pos = _positions(s.collapsed, config)
    rest = [v for v in s.collapsed.vertices if v != d.v]
    norm = spread(pos[v] for v in rest)
    target = pos[rest[0]] + np.array([2.0 * norm, 0.0, 0.0])
    if any(np.array_equal(target, pos[v]) for v in rest):
        raise ValueError("free vertex would collide with another vertex")
    return _with_inner(s.collapsed, config, {d.v: target})


# ---------------------------------------------------------------------------
# maps from Γ to the quotient


def quotient_configuration(s: Stratum, config: Configuration, curve: KnotCurve | None = None) -> Configuration:
    """Drop the vertices of A, placing the new vertex where the anchor was."""
    g = s.parent
    if not config.fits(g):
        raise ValueError("configuration does not match the parent diagram")
    anchor = s.anchor
    q = s.quotient
    base = []
    for b in q.base_points:
        src = anchor if b == s.new_vertex else b
        base.append(config.base_params[g.index[src]])
    inner = []
    for y in q.inner:
        if y == s.new_vertex:
            inner.append(config.inner_points[g.index[anchor] - g.m])
        else:
            inner.append(config.inner_points[g.index[y] - g.m])
    return Configuration(np.array(base), np.array(inner).reshape(-1, 3), config.frame)


def line_class(direction: np.ndarray) -> np.ndarray:
    """Unit representative of a line through the origin, largest component positive."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    return u if u[np.argmax(np.abs(u))] > 0 else -u


def tau3(s: Stratum, config: Configuration, curve: KnotCurve | None = None) -> tuple[Configuration, np.ndarray]:
    """Quotient configuration plus the line of the collapsing edge."""
    _require(s, StratumType.TYPE_III)
    pos = _positions(s.parent, config, curve)
    v, w = s.A
    diff = pos[w] - pos[v]
    if np.linalg.norm(diff) == 0.0:
        raise ValueError("degenerate configuration: the edge has coincident endpoints")
    return quotient_configuration(s, config, curve), line_class(diff)


def tau4(s: Stratum, config: Configuration, curve: KnotCurve | None = None) -> Configuration:
    """Bundle projection: forget the relative position of the two vertices."""
    _require(s, StratumType.TYPE_IV)
    return quotient_configuration(s, config, curve)


# ---------------------------------------------------------------------------
# edge orderings and the collar


def relabel(order: Sequence[int] | None, s: Stratum) -> tuple[tuple[str, int], ...]:
    """Position-by-position image of an edge ordering of Γ on (Γ/A, A(Γ)).

    Position p of the result names the part (quotient or collapsed) and the
    edge of that part which the parent edge at position p becomes.
    """
    return tuple(s.edge_partition[e] for e in edge_ordering(s.parent, order))


def act(sigma: Sequence[int], seq: Sequence) -> tuple:
    """Permutation action on positions: (sigma . seq)[sigma[p]] = seq[p]."""
    out = [None] * len(seq)
    for p, item in enumerate(seq):
        out[sigma[p]] = item
    return tuple(out)


def collar(s: Stratum, alpha: Configuration, beta: Configuration, t: float) -> Configuration:
    """Configuration of Γ at distance ~t from the stratum.

    ``alpha`` places Γ/A and ``beta`` places A(Γ); both live on the same
    line when A contains base points.  Vertices outside A keep their alpha
    position, the anchor a0 sits at g(a) and the other vertices of A are
    g(a) + t/|g'| (g'(v) - g'(a0)), with |g'| the spread of beta.
    """
    if t <= 0:
        raise ValueError("collar parameter must be positive")
    q, c, g = s.quotient, s.collapsed, s.parent
    if not alpha.fits(q) or not beta.fits(c):
        raise ValueError("configurations do not match the stratum")
    if s.has_base:
        if alpha.frame is None:
            raise ValueError("collapsing base points needs line configurations")
        if beta.frame is not None and not np.allclose(beta.frame, alpha.frame):
            raise ValueError("alpha and beta must share the line")
        beta = replace(beta, frame=alpha.frame)
    pa = _positions(q, alpha)
    pb = _positions(c, beta)
    a0 = s.anchor
    scale = spread(pb.values())
    if scale == 0.0:
        raise ValueError("beta is degenerate")
    base = []
    for b in g.base_points:
        if b in pb:
            h_a = alpha.base_params[q.index[s.new_vertex]]
            base.append(h_a + t / scale * (beta.base_params[c.index[b]] - beta.base_params[c.index[a0]]))
        else:
            base.append(alpha.base_params[q.index[b]])
    inner = []
    for y in g.inner:
        if y in pb:
            inner.append(pa[s.new_vertex] + t / scale * (pb[y] - pb[a0]))
        else:
            inner.append(pa[y])
    return Configuration(np.array(base), np.array(inner).reshape(-1, 3), alpha.frame)
