"""Monte-Carlo evaluation of configuration-space integrals.

For a diagram with k edges, m base points and s inner vertices with
m + 3s = 2k, the pullback of the product of the k normalized area forms of
S^2 along the edge-direction map is a top form.  Its density with respect to
the coordinates (t_1..t_m, then each inner vertex as x, y, z) is
det(J) / (4 pi)^k, where J stacks, edge by edge, the derivatives of the unit
direction expressed in an oriented orthonormal frame of its tangent plane.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .diagram import KnotGraph
from .geometry import (
    DEGENERATE_EDGE,
    Configuration,
    KnotCurve,
    edge_ordering,
    proposal_scale,
    sample_configurations,
    sample_lines,
)

CHUNK = 20_000


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    stderr: float
    samples: int
    rejected: int
    seed: int

    def __post_init__(self) -> None:
        if self.stderr < 0 or self.rejected > self.samples:
            raise ValueError("inconsistent estimate")

    def scaled(self, factor: float) -> IntegralEstimate:
        return IntegralEstimate(self.value * factor, self.stderr * abs(factor), self.samples, self.rejected, self.seed)

    def covers(self, target: float, sigmas: float = 3.0) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr


def check_dimension(graph: KnotGraph) -> bool:
    """True iff m + 3s = 2k."""
    return graph.m + 3 * graph.s == 2 * graph.k


def tangent_frames(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal e1, e2 with e1 x e2 = u, built by projecting out the axis of smallest |u_i|."""
    axis = np.argmin(np.abs(u), axis=-1)
    a = np.zeros_like(u)
    np.put_along_axis(a, axis[..., None], 1.0, axis=-1)
    e1 = np.cross(a, u)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(u, e1)
    return e1, e2


def direction_jacobian(
    graph: KnotGraph, order: Sequence[int] | None, pos: np.ndarray, dpos: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rows of the direction derivatives for a batch.

    ``pos`` is (n, m+s, 3) and ``dpos`` (n, m+s, 3, D) holds the derivatives
    of every vertex position with respect to the D sampling coordinates.
    Returns J of shape (n, 2k, D) and a mask of degenerate samples.
    """
    rows = []
    bad = np.zeros(pos.shape[0], dtype=bool)
    for e in edge_ordering(graph, order):
        a, b = graph.oriented(graph.edges[e])
        ia, ib = graph.index[a], graph.index[b]
        d = pos[:, ib] - pos[:, ia]
        r = np.linalg.norm(d, axis=-1)
        bad |= r < DEGENERATE_EDGE
        r = np.where(bad, 1.0, r)
        u = d / r[:, None]
        e1, e2 = tangent_frames(u)
        dd = (dpos[:, ib] - dpos[:, ia]) / r[:, None, None]
        rows.append(np.einsum("ni,nid->nd", e1, dd))
        rows.append(np.einsum("ni,nid->nd", e2, dd))
    return np.stack(rows, axis=1), bad


def _knot_frame(graph: KnotGraph, curve: KnotCurve, t: np.ndarray, inner: np.ndarray):
    n, m, s = t.shape[0], graph.m, graph.s
    dim = m + 3 * s
    pos = np.empty((n, m + s, 3))
    dpos = np.zeros((n, m + s, 3, dim))
    if m:
        p, dp = curve.evaluate(t)
        pos[:, :m] = p
        for i in range(m):
            dpos[:, i, :, i] = dp[:, i]
    pos[:, m:] = inner
    for j in range(s):
        dpos[:, m + j, :, m + 3 * j: m + 3 * j + 3] = np.eye(3)
    return pos, dpos


def _density(graph: KnotGraph, order, pos, dpos) -> tuple[np.ndarray, np.ndarray]:
    jac, bad = direction_jacobian(graph, order, pos, dpos)
    vals = np.linalg.det(jac) / (4.0 * math.pi) ** graph.k
    return np.where(bad, 0.0, vals), bad


def integrand_batch(
    graph: KnotGraph, order: Sequence[int] | None, curve: KnotCurve, t: np.ndarray, inner: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    if not check_dimension(graph):
        raise ValueError(f"dimension mismatch: m + 3s = {graph.m + 3 * graph.s} but 2k = {2 * graph.k}")
    pos, dpos = _knot_frame(graph, curve, t, inner)
    return _density(graph, order, pos, dpos)


def integrand(graph: KnotGraph, order: Sequence[int] | None, curve: KnotCurve, config: Configuration) -> float:
    """Density of the pulled-back form at one configuration on the knot."""
    vals, bad = integrand_batch(graph, order, curve, config.base_params[None], config.inner_points[None])
    if bad[0]:
        raise ValueError("degenerate configuration: an edge has coincident endpoints")
    return float(vals[0])


def _line_frame(graph: KnotGraph, x: np.ndarray, heights: np.ndarray, inner: np.ndarray):
    """Positions and derivatives for gauge-fixed collapsed configurations."""
    n, m, s = x.shape[0], graph.m, graph.s
    dim = m + 3 * s
    pos = np.empty((n, m + s, 3))
    dpos = np.zeros((n, m + s, 3, dim))
    f1, f2 = tangent_frames(x)
    pos[:, :m] = heights[:, :, None] * x[:, None, :]
    dpos[:, :m, :, 0] = heights[:, :, None] * f1[:, None, :]
    dpos[:, :m, :, 1] = heights[:, :, None] * f2[:, None, :]
    pos[:, m:] = inner
    if m >= 2:
        for i in range(1, m - 1):
            dpos[:, i, :, 1 + i] = x
        col = m
        for j in range(s):
            dpos[:, m + j, :, col + 3 * j: col + 3 * j + 3] = np.eye(3)
    else:
        w = inner[:, 0]
        g1, g2 = tangent_frames(w)
        dpos[:, 1, :, 2] = g1
        dpos[:, 1, :, 3] = g2
        for j in range(1, s):
            dpos[:, 1 + j, :, 4 + 3 * (j - 1): 7 + 3 * (j - 1)] = np.eye(3)
    return pos, dpos


def anomaly_integrand_batch(
    graph: KnotGraph, order: Sequence[int] | None, x: np.ndarray, heights: np.ndarray, inner: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Density on W(graph) w.r.t. area on S^2, free heights and inner coordinates."""
    if not check_dimension(graph):
        raise ValueError(f"dimension mismatch: m + 3s = {graph.m + 3 * graph.s} but 2k = {2 * graph.k}")
    pos, dpos = _line_frame(graph, x, heights, inner)
    return _density(graph, order, pos, dpos)


# ---------------------------------------------------------------------------
# chunked estimator


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("FEYNKNOT_THREADS", "1"))
    if threads < 1:
        raise ValueError("thread count must be at least 1")
    return threads


@dataclass
class _Moments:
    n: int
    mean: float
    m2: float
    rejected: int


def _merge(a: _Moments, b: _Moments) -> _Moments:
    n = a.n + b.n
    if n == 0:
        return _Moments(0, 0.0, 0.0, a.rejected + b.rejected)
    delta = b.mean - a.mean
    mean = a.mean + delta * b.n / n
    m2 = a.m2 + b.m2 + delta * delta * a.n * b.n / n
    return _Moments(n, mean, m2, a.rejected + b.rejected)


def run_chunks(
    weights: Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]],
    samples: int,
    seed: int,
    threads: int | None = None,
) -> IntegralEstimate:
    """Mean of importance weights over ``samples`` draws.

    Chunk i draws from ``default_rng(seed + i)``; chunk moments are merged in
    chunk order, so the result does not depend on the thread count.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    sizes = [CHUNK] * (samples // CHUNK)
    if samples % CHUNK:
        sizes.append(samples % CHUNK)

    def one(i: int) -> _Moments:
        rng = np.random.default_rng((seed + i) % 2**64)
        w, bad = weights(rng, sizes[i])
        return _Moments(len(w), float(w.mean()), float(((w - w.mean()) ** 2).sum()), int(bad.sum()))

    workers = resolve_threads(threads)
    if workers == 1:
        parts = [one(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    total = parts[0]
    for p in parts[1:]:
        total = _merge(total, p)
    var = total.m2 / (total.n - 1) if total.n > 1 else 0.0
    return IntegralEstimate(total.mean, math.sqrt(var / total.n), total.n, total.rejected, seed)


def integrate_diagram(
    graph: KnotGraph,
    order: Sequence[int] | None,
    curve: KnotCurve,
    samples: int,
    seed: int,
    threads: int | None = None,
) -> IntegralEstimate:
    """Importance-sampled estimate of I(graph, curve)."""
    if not check_dimension(graph):
        raise ValueError(f"dimension mismatch: m + 3s = {graph.m + 3 * graph.s} but 2k = {2 * graph.k}")
    scale = proposal_scale(curve)

    def weights(rng: np.random.Generator, n: int):
        batch = sample_configurations(graph, curve, n, rng, scale)
        vals, bad = integrand_batch(graph, order, curve, batch.base_params, batch.inner_points)
        return vals / batch.density, bad

    return run_chunks(weights, samples, seed, threads)


def integrate_anomaly(
    graph: KnotGraph,
    order: Sequence[int] | None,
    samples: int,
    seed: int,
    threads: int | None = None,
) -> IntegralEstimate:
    """Importance-sampled estimate of the anomaly integral over W(graph)."""
    if not check_dimension(graph):
        raise ValueError(f"dimension mismatch: m + 3s = {graph.m + 3 * graph.s} but 2k = {2 * graph.k}")
    if graph.m == 0:
        raise ValueError("the anomaly integral needs at least one base point")

    def weights(rng: np.random.Generator, n: int):
        batch = sample_lines(graph, n, rng)
        vals, bad = anomaly_integrand_batch(graph, order, batch.frames, batch.heights, batch.inner_points)
        return vals / batch.density, bad

    return run_chunks(weights, samples, seed, threads)
