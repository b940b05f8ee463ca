"""Knot curves, placements of diagrams, the edge-direction map and samplers.

Base points of a diagram sit on the knot at increasing parameters in [0, 1),
or, for collapsed configurations, on the line through the origin spanned by a
unit vector ``frame``.  Inner vertices are free points of R^3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .diagram import KnotGraph

TWO_PI = 2.0 * math.pi
DEGENERATE_EDGE = 1e-12


# ---------------------------------------------------------------------------
# curves


def _named_eval(name: str, params: tuple, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Point and d/du of a named curve at parameters u (period 1)."""
    t = TWO_PI * u
    if name == "unknot":
        p = np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1)
        d = np.stack([-np.sin(t), np.cos(t), np.zeros_like(t)], axis=-1)
    elif name == "trefoil":
        p = np.stack([np.sin(t) + 2 * np.sin(2 * t), np.cos(t) - 2 * np.cos(2 * t), -np.sin(3 * t)], axis=-1)
        d = np.stack([np.cos(t) + 4 * np.cos(2 * t), -np.sin(t) + 4 * np.sin(2 * t), -3 * np.cos(3 * t)], axis=-1)
    elif name == "figure8":
        r = 2 + np.cos(2 * t)
        dr = -2 * np.sin(2 * t)
        p = np.stack([r * np.cos(3 * t), r * np.sin(3 * t), np.sin(4 * t)], axis=-1)
        d = np.stack(
            [dr * np.cos(3 * t) - 3 * r * np.sin(3 * t), dr * np.sin(3 * t) + 3 * r * np.cos(3 * t), 4 * np.cos(4 * t)],
            axis=-1,
        )
    elif name == "torus":
        p_, q_ = params
        r = 2 + np.cos(q_ * t)
        dr = -q_ * np.sin(q_ * t)
        p = np.stack([r * np.cos(p_ * t), r * np.sin(p_ * t), -np.sin(q_ * t)], axis=-1)
        d = np.stack(
            [dr * np.cos(p_ * t) - p_ * r * np.sin(p_ * t), dr * np.sin(p_ * t) + p_ * r * np.cos(p_ * t), -q_ * np.cos(q_ * t)],
            axis=-1,
        )
    else:
        raise ValueError(f"unknown curve {name!r}")
    return p, TWO_PI * d


def _segment_distance(p0, p1, q0, q1) -> float:
    """Minimum distance between segments [p0,p1] and [q0,q1]."""
    d1, d2, r = p1 - p0, q1 - q0, p0 - q0
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    c, b = d1 @ r, d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-15 else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p0 + d1 * s - q0 - d2 * t))


def min_nonadjacent_distance(vertices: np.ndarray) -> float:
    """Smallest distance between non-adjacent edges of a closed polygon."""
    n = len(vertices)
    best = math.inf
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            best = min(best, _segment_distance(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]))
    return best


@dataclass(frozen=True)
class KnotCurve:
    """A closed curve parametrized by t in [0, 1) (taken mod 1).

    ``name`` is one of unknot, trefoil, figure8, torus or polygon.  A rigid
    motion ``(rotation, offset)`` and an orientation-preserving
    reparametrization ``t -> t + shift + warp*sin(2 pi t)/(2 pi)`` may be
    layered on top; neither changes the knot.
    """

    name: str
    params: tuple = ()
    vertices: np.ndarray | None = field(default=None, compare=False)
    rotation: np.ndarray | None = field(default=None, compare=False)
    offset: np.ndarray | None = field(default=None, compare=False)
    shift: float = 0.0
    warp: float = 0.0

    def __post_init__(self) -> None:
        if self.name == "polygon":
            pts = np.asarray(self.vertices, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
                raise ValueError("polygon needs at least three 3D vertices")
            object.__setattr__(self, "vertices", pts)
            if min_nonadjacent_distance(pts) <= 1e-12:
                raise ValueError("polygon is not embedded: non-adjacent edges meet")
            if np.any(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1) <= 1e-12):
                raise ValueError("polygon has a zero-length edge")
        if abs(self.warp) >= 1.0:
            raise ValueError("warp must satisfy |warp| < 1 to keep the parametrization monotone")

    # constructors -----------------------------------------------------

    @classmethod
    def named(cls, name: str) -> KnotCurve:
        if name.startswith("torus"):
            p, q = (int(x) for x in name[len("torus"):].strip("()").split(","))
            return cls.torus(p, q)
        if name not in ("unknot", "trefoil", "figure8"):
            raise ValueError(f"unknown named knot {name!r}")
        return cls(name)

    @classmethod
    def torus(cls, p: int, q: int) -> KnotCurve:
        if math.gcd(p, q) != 1:
            raise ValueError("torus knot needs coprime (p, q)")
        return cls("torus", (p, q))

    @classmethod
    def polygon(cls, vertices: Sequence[Sequence[float]]) -> KnotCurve:
        return cls("polygon", (), np.asarray(vertices, dtype=float))

    @classmethod
    def from_spec(cls, spec: dict) -> KnotCurve:
        """Knot file content: ``{"named": "trefoil"}`` or ``{"polygon": [[x,y,z], ...]}``.

        Optional keys ``rotation``/``offset`` and ``shift``/``warp`` apply a
        rigid motion and a reparametrization.
        """
        if "named" in spec:
            curve = cls.named(str(spec["named"]))
        elif "polygon" in spec:
            curve = cls.polygon(spec["polygon"])
        else:
            raise ValueError("knot spec needs a 'named' or 'polygon' entry")
        if "rotation" in spec:
            curve = curve.moved(np.asarray(spec["rotation"]), spec.get("offset", (0.0, 0.0, 0.0)))
        if "shift" in spec or "warp" in spec:
            curve = curve.reparametrized(float(spec.get("shift", 0.0)), float(spec.get("warp", 0.0)))
        return curve

    def moved(self, rotation: np.ndarray, offset: Sequence[float]) -> KnotCurve:
        rot = np.asarray(rotation, dtype=float)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-12) or np.linalg.det(rot) < 0:
            raise ValueError("rotation must be a proper orthogonal matrix")
        if self.rotation is not None:
            off = rot @ self.offset + np.asarray(offset, dtype=float)
            rot = rot @ self.rotation
        else:
            off = np.asarray(offset, dtype=float)
        return replace(self, rotation=rot, offset=off)

    def reparametrized(self, shift: float, warp: float) -> KnotCurve:
        if self.shift or self.warp:
            raise ValueError("curve is already reparametrized")
        return replace(self, shift=float(shift), warp=float(warp))

    # evaluation -------------------------------------------------------

    def _raw(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.name != "polygon":
            return _named_eval(self.name, self.params, u)
        pts = self.vertices
        seg = np.roll(pts, -1, axis=0) - pts
        lengths = np.linalg.norm(seg, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(lengths)]) / lengths.sum()

        def at(x: np.ndarray) -> np.ndarray:
            x = np.mod(x, 1.0)
            i = np.clip(np.searchsorted(cum, x, side="right") - 1, 0, len(pts) - 1)
            frac = (x - cum[i]) / (cum[i + 1] - cum[i])
            return pts[i] + frac[..., None] * seg[i]

        h = 1e-7
        return at(u), (at(u + h) - at(u - h)) / (2 * h)

    def evaluate(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Points and parameter derivatives at an array of parameters."""
        t = np.asarray(t, dtype=float)
        u = np.mod(t, 1.0)
        du = np.ones_like(u)
        if self.shift or self.warp:
            u = u + self.shift + self.warp * np.sin(TWO_PI * u) / TWO_PI
            du = 1.0 + self.warp * np.cos(TWO_PI * np.mod(t, 1.0))
        p, d = self._raw(np.mod(u, 1.0))
        d = d * du[..., None]
        if self.rotation is not None:
            p = p @ self.rotation.T + self.offset
            d = d @ self.rotation.T
        return p, d

    def point(self, t: float) -> np.ndarray:
        return self.evaluate(np.array([t]))[0][0]

    def tangent(self, t: float) -> np.ndarray:
        d = self.evaluate(np.array([t]))[1][0]
        n = np.linalg.norm(d)
        if n < 1e-14:
            raise ValueError(f"zero-length derivative at t={t}")
        return d / n

    def diameter(self, grid: int = 512) -> float:
        pts = self.evaluate(np.arange(grid) / grid)[0]
        return float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1)))

    def is_embedded(self, grid: int = 400) -> bool:
        """Speed nonvanishing and sampled polygon free of self-intersections."""
        ts = np.arange(grid) / grid
        pts, d = self.evaluate(ts)
        if np.min(np.linalg.norm(d, axis=1)) < 1e-9:
            return False
        return min_nonadjacent_distance(pts) > 1e-9

    def to_spec(self) -> dict:
        if self.name == "polygon":
            spec: dict = {"polygon": self.vertices.tolist()}
        elif self.name == "torus":
            spec = {"named": f"torus({self.params[0]},{self.params[1]})"}
        else:
            spec = {"named": self.name}
        if self.rotation is not None:
            spec["rotation"] = self.rotation.tolist()
            spec["offset"] = self.offset.tolist()
        if self.shift or self.warp:
            spec["shift"], spec["warp"] = self.shift, self.warp
        return spec


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class Configuration:
    """Placement of a diagram.

    ``base_params`` are knot parameters, or heights along the line spanned by
    ``frame`` when a frame is set.  ``inner_points`` follow the inner order of
    the diagram.
    """

    base_params: np.ndarray
    inner_points: np.ndarray
    frame: np.ndarray | None = None

    def __post_init__(self) -> None:
        base = np.asarray(self.base_params, dtype=float).reshape(-1)
        inner = np.asarray(self.inner_points, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "base_params", base)
        object.__setattr__(self, "inner_points", inner)
        if np.any(np.diff(base) <= 0):
            raise ValueError("base parameters must be strictly increasing")
        if self.frame is not None:
            x = np.asarray(self.frame, dtype=float)
            if abs(np.linalg.norm(x) - 1.0) > 1e-9:
                raise ValueError("frame must be a unit vector")
            object.__setattr__(self, "frame", x)
        elif base.size and (base[0] < 0 or base[-1] >= 1):
            raise ValueError("knot parameters must lie in [0, 1)")

    def positions(self, curve: KnotCurve | None = None) -> np.ndarray:
        """All vertex positions, base points first, as an (m+s, 3) array."""
        if self.frame is not None:
            base = self.base_params[:, None] * self.frame[None, :]
        elif self.base_params.size:
            if curve is None:
                raise ValueError("a knot is needed to place base points")
            base = curve.evaluate(self.base_params)[0]
        else:
            base = np.zeros((0, 3))
        return np.vstack([base, self.inner_points])

    def fits(self, graph: KnotGraph) -> bool:
        return self.base_params.size == graph.m and len(self.inner_points) == graph.s


def line_configuration(heights: Sequence[float], inner: Sequence[Sequence[float]], frame=(0.0, 0.0, 1.0)) -> Configuration:
    return Configuration(np.asarray(heights, dtype=float), np.asarray(inner, dtype=float).reshape(-1, 3), np.asarray(frame, dtype=float))


@dataclass(frozen=True)
class GaussImage:
    """Unit directions of the edges in edge-ordering order."""

    directions: np.ndarray

    @property
    def classes(self) -> np.ndarray:
        """Representatives of the lines, sign fixed by the largest component."""
        d = self.directions
        idx = np.argmax(np.abs(d), axis=1)
        signs = np.sign(d[np.arange(len(d)), idx])
        return d * signs[:, None]

    def line_distance(self, other: GaussImage) -> float:
        """Worst mismatch of an optimal matching between the two multisets of lines."""
        a, b = self.directions, other.directions
        if a.shape != b.shape:
            return math.inf
        if len(a) == 0:
            return 0.0
        diff = np.linalg.norm(a[:, None] - b[None], axis=-1)
        summ = np.linalg.norm(a[:, None] + b[None], axis=-1)
        cost = np.minimum(diff, summ)
        rows, cols = linear_sum_assignment(cost)
        return float(cost[rows, cols].max())


def edge_ordering(graph: KnotGraph, order: Sequence[int] | None) -> list[int]:
    k = graph.k
    if order is None:
        return list(range(k))
    order = [int(i) for i in order]
    if sorted(order) != list(range(k)):
        raise ValueError("edge ordering must be a permutation of the edge positions")
    return order


def gauss_map(
    graph: KnotGraph,
    order: Sequence[int] | None,
    curve: KnotCurve | None,
    config: Configuration,
) -> GaussImage:
    """Direction of each edge, pointing from its smaller to its larger endpoint."""
    pos = config.positions(curve)
    out = []
    for e in edge_ordering(graph, order):
        a, b = graph.oriented(graph.edges[e])
        d = pos[graph.index[b]] - pos[graph.index[a]]
        n = np.linalg.norm(d)
        if n < DEGENERATE_EDGE:
            raise ValueError(f"edge {a}-{b} is degenerate")
        out.append(d / n)
    return GaussImage(np.array(out).reshape(-1, 3))


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotate(config: Configuration, angle: float) -> Configuration:
    """Rotate a configuration on the z-axis line about that axis."""
    if config.frame is None or not np.allclose(config.frame, [0.0, 0.0, 1.0], atol=1e-12):
        raise ValueError("rotation is defined for configurations on the z-axis line")
    return replace(config, inner_points=config.inner_points @ rotation_z(angle).T)


def td_normalize(config: Configuration) -> Configuration:
    """Translation/dilation representative: lowest base height 0, extent 1.

    Without base points the centroid is moved to the origin instead.
    """
    if config.frame is None:
        raise ValueError("translation/dilation normalization needs a line configuration")
    pos = config.positions()
    if len(pos) < 2:
        raise ValueError("need at least two placed vertices")
    extent = float(np.max(np.linalg.norm(pos[:, None] - pos[None], axis=-1)))
    if extent < DEGENERATE_EDGE:
        raise ValueError("all vertices coincide")
    if config.base_params.size:
        low = config.base_params[0]
        shift = low * config.frame
        heights = (config.base_params - low) / extent
    else:
        shift = pos.mean(axis=0)
        heights = config.base_params
    inner = (config.inner_points - shift) / extent
    return Configuration(heights, inner, config.frame)


# ---------------------------------------------------------------------------
# sampling


def radial_density(r: np.ndarray, scale: float) -> np.ndarray:
    """Density of R = scale * (U/(1-U))^2, U uniform.

    It behaves like r^(-1/2) near 0 and like r^(-3/2) at infinity.
    """
    w = np.sqrt(r / scale)
    return 1.0 / (2.0 * scale * w * (1.0 + w) ** 2)


def _draw_radius(rng: np.random.Generator, n: int, scale: float) -> np.ndarray:
    u = rng.random(n)
    w = u / (1.0 - u)
    return scale * w * w


def _unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _place_inner(
    rng: np.random.Generator, anchors: np.ndarray, s: int, scale: float
) -> tuple[np.ndarray, np.ndarray]:
    """Sequential mixture proposal for the inner vertices.

    Inner vertex j is drawn around a uniformly chosen earlier point (an
    anchor or an already placed inner vertex) with an isotropic heavy-tailed
    radius.  Returns points (n, s, 3) and the log-density of the draw.
    """
    n = anchors.shape[0]
    pts = np.empty((n, s, 3))
    logq = np.zeros(n)
    centers = anchors
    for j in range(s):
        nc = centers.shape[1]
        pick = rng.integers(nc, size=n)
        y = centers[np.arange(n), pick] + _draw_radius(rng, n, scale)[:, None] * _unit_vectors(rng, n)
        r = np.linalg.norm(y[:, None, :] - centers, axis=-1)
        with np.errstate(divide="ignore"):
            comp = radial_density(r, scale) / (4.0 * math.pi * r * r)
        logq += np.log(comp.mean(axis=1))
        pts[:, j] = y
        centers = np.concatenate([centers, y[:, None, :]], axis=1)
    return pts, logq


@dataclass
class KnotSample:
    """A batch of configurations on a knot."""

    base_params: np.ndarray  # (n, m)
    inner_points: np.ndarray  # (n, s, 3)
    density: np.ndarray  # (n,)

    def configuration(self, i: int) -> Configuration:
        return Configuration(self.base_params[i], self.inner_points[i])


@dataclass
class LineSample:
    """A batch of collapsed configurations on lines l_x."""

    frames: np.ndarray  # (n, 3)
    heights: np.ndarray  # (n, m)
    inner_points: np.ndarray  # (n, s, 3)
    density: np.ndarray

    def configuration(self, i: int) -> Configuration:
        return Configuration(self.heights[i], self.inner_points[i], self.frames[i])


def proposal_scale(curve: KnotCurve) -> float:
    return 0.25 * curve.diameter()


def sample_configurations(
    graph: KnotGraph, curve: KnotCurve, n: int, rng: np.random.Generator, scale: float | None = None
) -> KnotSample:
    """Base parameters uniform on the ordered simplex, inner points heavy-tailed.

    The inner proposal is centred at the sampled base points (random knot
    points); without base points the first inner vertex is centred at the
    knot's centroid.
    """
    m, s = graph.m, graph.s
    if scale is None:
        scale = proposal_scale(curve)
    t = np.sort(rng.random((n, m)), axis=1)
    logq = np.full(n, math.lgamma(m + 1))
    if s:
        if m:
            anchors = curve.evaluate(t)[0]
        else:
            centroid = curve.evaluate(np.arange(256) / 256)[0].mean(axis=0)
            anchors = np.broadcast_to(centroid, (n, 1, 3))
        inner, lq = _place_inner(rng, anchors, s, scale)
        logq += lq
    else:
        inner = np.zeros((n, 0, 3))
    return KnotSample(t, inner, np.exp(logq))


def sample_configuration(graph: KnotGraph, curve: KnotCurve, seed: int) -> tuple[Configuration, float]:
    batch = sample_configurations(graph, curve, 1, np.random.default_rng(seed))
    return batch.configuration(0), float(batch.density[0])


def sample_lines(graph: KnotGraph, n: int, rng: np.random.Generator, scale: float = 0.5) -> LineSample:
    """Collapsed configurations: x uniform on S^2, base points on l_x.

    Gauge: first base height 0 and last base height 1 (one base point: at
    the origin, with the first inner vertex on the unit sphere).
    """
    m, s = graph.m, graph.s
    if m == 0:
        raise ValueError("collapsed sampling needs at least one base point")
    x = _unit_vectors(rng, n)
    logq = np.full(n, -math.log(4.0 * math.pi))
    if m >= 2:
        middle = np.sort(rng.random((n, m - 2)), axis=1)
        heights = np.concatenate([np.zeros((n, 1)), middle, np.ones((n, 1))], axis=1)
        logq += math.lgamma(m - 1)
        anchors = heights[:, :, None] * x[:, None, :]
        inner, lq = _place_inner(rng, anchors, s, scale) if s else (np.zeros((n, 0, 3)), 0.0)
        logq += lq
    else:
        heights = np.zeros((n, 1))
        if s == 0:
            raise ValueError("a single base point without inner vertices has no collapsed configurations")
        first = _unit_vectors(rng, n)
        logq -= math.log(4.0 * math.pi)
        anchors = np.stack([np.zeros((n, 3)), first], axis=1)
        rest, lq = _place_inner(rng, anchors, s - 1, scale) if s > 1 else (np.zeros((n, 0, 3)), 0.0)
        inner = np.concatenate([first[:, None, :], rest], axis=1)
        logq += lq
    return LineSample(x, heights, inner, np.exp(logq))


def sample_collapsed(graph: KnotGraph, seed: int) -> tuple[Configuration, float]:
    batch = sample_lines(graph, 1, np.random.default_rng(seed))
    return batch.configuration(0), float(batch.density[0])
