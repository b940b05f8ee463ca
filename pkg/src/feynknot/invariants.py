"""Weight systems, the order-n components of Z(K), and a Gauss-diagram oracle.

ω(Z(K)) = Σ ω(Γ) I(Γ, K) / |Γ| over equivalence classes of order n.  The
default order-2 weight system gives the second-order invariant up to an
additive constant and a global scale; ``normalized_v2`` removes both by
comparing against the unknot and the trefoil.  ``v2_oracle`` evaluates the
same invariant combinatorially from a Gauss code.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .diagram import (
    KnotGraph,
    canonical_key,
    chord_diagram,
    enumerate_diagrams,
    graph_from_key,
    symmetry_factor,
    tripod,
)
from .geometry import KnotCurve
from .integrator import IntegralEstimate, check_dimension, integrate_diagram

SUPPORTED_ORDERS = (1, 2)


def order_classes(n: int) -> list[KnotGraph]:
    """Equivalence classes of knot diagrams of order n that enter Z(K)."""
    if n not in SUPPORTED_ORDERS:
        raise ValueError(f"order {n} is not supported (choose from {SUPPORTED_ORDERS})")
    return enumerate_diagrams(n, on_knot=True)


@dataclass(frozen=True)
class WeightSystem:
    weights: Mapping[str, int]
    order: int

    def __post_init__(self) -> None:
        clean = {}
        for key, w in self.weights.items():
            if canonical_key(graph_from_key(key)) != key:
                raise ValueError(f"weight key {key!r} is not canonical")
            if int(w) != w:
                raise ValueError(f"weight of {key!r} is not an integer")
            clean[key] = int(w)
        known = {canonical_key(g) for g in order_classes(self.order)}
        unknown = set(clean) - known
        if unknown:
            raise ValueError(f"keys are not order-{self.order} classes: {sorted(unknown)}")
        for key in known - set(clean):
            clean[key] = 0
        object.__setattr__(self, "weights", dict(sorted(clean.items())))

    def __getitem__(self, key: str) -> int:
        return self.weights[key]

    def __add__(self, other: WeightSystem) -> WeightSystem:
        if other.order != self.order:
            raise ValueError("weight systems of different orders")
        return WeightSystem({k: w + other.weights[k] for k, w in self.weights.items()}, self.order)

    def scaled(self, factor: int) -> WeightSystem:
        return WeightSystem({k: factor * w for k, w in self.weights.items()}, self.order)

    @property
    def support(self) -> list[str]:
        return [k for k, w in self.weights.items() if w]

    def to_json(self) -> str:
        return json.dumps(self.weights, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, order: int) -> WeightSystem:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("a weight system file holds a JSON object")
        return cls(data, order)

    @classmethod
    def zero(cls, order: int) -> WeightSystem:
        return cls({}, order)


def default_weights() -> WeightSystem:
    """ω(X) = 1 for the crossed chords, ω(T) = -1 for the tripod, 0 elsewhere."""
    return WeightSystem({canonical_key(chord_diagram((1, 3), (2, 4))): 1, canonical_key(tripod()): -1}, 2)


def _class_seed(seed: int, index: int) -> int:
    # chunk i of class j draws from seed + j * 1000003 + i; distinct for < 10^6 chunks
    return (seed + (index + 1) * 1_000_003) % 2**64


def z_components(
    n: int,
    curve: KnotCurve,
    samples: int,
    seed: int,
    threads: int | None = None,
    keys: Sequence[str] | None = None,
) -> dict[str, IntegralEstimate]:
    """I(Γ, K) / |Γ| for every order-n class.

    Classes whose configuration space dimension differs from the degree of
    the form integrate to zero and are reported as exact zeros.  ``keys``
    restricts the Monte-Carlo work to a subset of classes.
    """
    out: dict[str, IntegralEstimate] = {}
    for j, graph in enumerate(order_classes(n)):
        key = canonical_key(graph)
        if keys is not None and key not in keys:
            continue
        class_seed = _class_seed(seed, j)
        if not check_dimension(graph):
            out[key] = IntegralEstimate(0.0, 0.0, 0, 0, class_seed)
            continue
        est = integrate_diagram(graph, None, curve, samples, class_seed, threads)
        out[key] = est.scaled(1.0 / symmetry_factor(graph))
    return out


def weighted_sum(omega: WeightSystem, comps: Mapping[str, IntegralEstimate]) -> IntegralEstimate:
    """Σ ω(Γ) comp(Γ), standard errors combined in quadrature."""
    value, var, samples, rejected = 0.0, 0.0, 0, 0
    seed = 0
    for key, w in omega.weights.items():
        if key not in comps:
            if w:
                raise ValueError(f"no component for class {key}")
            continue
        est = comps[key]
        value += w * est.value
        var += (w * est.stderr) ** 2
        if w:
            samples += est.samples
            rejected += est.rejected
            seed = seed or est.seed
    return IntegralEstimate(value, math.sqrt(var), samples, rejected, seed)


def invariant_sum(curve: KnotCurve, samples: int, seed: int, omega: WeightSystem | None = None,
                  threads: int | None = None) -> IntegralEstimate:
    """F(K) = ω(Z_2(K)) for the default (or given) order-2 weight system."""
    omega = omega or default_weights()
    comps = z_components(omega.order, curve, samples, seed, threads, keys=omega.support)
    return weighted_sum(omega, comps)


@dataclass(frozen=True)
class NormalizedInvariant:
    value: float
    stderr: float
    parts: Mapping[str, IntegralEstimate]


REFERENCE_SEEDS = {"unknot": 0x5EED_0001, "trefoil": 0x5EED_0002}


def normalized_v2(
    curve: KnotCurve,
    samples: int,
    seed: int,
    threads: int | None = None,
    omega: WeightSystem | None = None,
) -> NormalizedInvariant:
    """(F(K) - F(unknot)) / (F(trefoil) - F(unknot)) with delta-method error.

    The unknot and trefoil references are the named curves.  A knot whose
    curve equals a reference reuses that estimate, so the references map to
    exactly 0 and 1.
    """
    refs = {"unknot": KnotCurve.named("unknot"), "trefoil": KnotCurve.named("trefoil")}
    estimates: dict[str, IntegralEstimate] = {}
    spec = json.dumps(curve.to_spec(), sort_keys=True)
    target = "knot"
    for name, ref in refs.items():
        if json.dumps(ref.to_spec(), sort_keys=True) == spec:
            target = name
    for name, ref in refs.items():
        estimates[name] = invariant_sum(ref, samples, (seed + REFERENCE_SEEDS[name]) % 2**64, omega, threads)
    if target == "knot":
        estimates["knot"] = invariant_sum(curve, samples, seed, omega, threads)
    fk, fu, ft = estimates[target], estimates["unknot"], estimates["trefoil"]
    num, den = fk.value - fu.value, ft.value - fu.value
    den_err = math.hypot(ft.stderr, fu.stderr)
    if abs(den) < 3.0 * den_err or den == 0.0:
        raise ValueError(f"normalization denominator {den:.4g} is consistent with zero (stderr {den_err:.3g})")
    grad = {"unknot": (num - den) / den**2, "trefoil": -num / den**2, "knot": 0.0}
    grad[target] += 1.0 / den
    var = sum((grad[name] * est.stderr) ** 2 for name, est in estimates.items())
    return NormalizedInvariant(num / den, math.sqrt(var), estimates)


# ---------------------------------------------------------------------------
# Gauss codes


_TOKEN = re.compile(r"([OU])(\d+)([+-])")


@dataclass(frozen=True)
class GaussCode:
    """Signed over/under crossing sequence along the knot from a base point."""

    events: tuple[tuple[str, int, int], ...]

    def __post_init__(self) -> None:
        seen: dict[int, list[tuple[str, int]]] = {}
        for kind, label, sign in self.events:
            if kind not in ("O", "U") or sign not in (1, -1):
                raise ValueError("malformed Gauss code event")
            seen.setdefault(label, []).append((kind, sign))
        for label, occ in seen.items():
            if sorted(k for k, _ in occ) != ["O", "U"]:
                raise ValueError(f"crossing {label} must appear once over and once under")
            if occ[0][1] != occ[1][1]:
                raise ValueError(f"crossing {label} has inconsistent signs")

    @classmethod
    def parse(cls, text: str) -> GaussCode:
        text = "".join(text.split())
        pos, events = 0, []
        for m in _TOKEN.finditer(text):
            if m.start() != pos:
                raise ValueError(f"malformed Gauss code at position {pos}: {text!r}")
            events.append((m.group(1), int(m.group(2)), 1 if m.group(3) == "+" else -1))
            pos = m.end()
        if pos != len(text):
            raise ValueError(f"malformed Gauss code at position {pos}: {text!r}")
        return cls(tuple(events))

    def __str__(self) -> str:
        return "".join(f"{k}{label}{'+' if s > 0 else '-'}" for k, label, s in self.events)

    @property
    def crossings(self) -> list[int]:
        return sorted({label for _, label, _ in self.events})

    def relabeled(self, offset: int) -> GaussCode:
        return GaussCode(tuple((k, label + offset, s) for k, label, s in self.events))

    def rotated(self, shift: int) -> GaussCode:
        """Same knot read from another base point."""
        if not self.events:
            return self
        shift %= len(self.events)
        return GaussCode(self.events[shift:] + self.events[:shift])

    def connected_sum(self, other: GaussCode) -> GaussCode:
        top = max(self.crossings, default=0)
        return GaussCode(self.events + other.relabeled(top).events)


def v2_oracle(code: GaussCode | str) -> int:
    """Second-order invariant from arrow pairs of the based Gauss diagram.

    Sums ε_i ε_j over ordered crossing pairs met in the order
    over_i, under_j, under_i, over_j when walking from the base point.
    """
    if isinstance(code, str):
        code = GaussCode.parse(code)
    over, under, sign = {}, {}, {}
    for p, (kind, label, s) in enumerate(code.events):
        (over if kind == "O" else under)[label] = p
        sign[label] = s
    total = 0
    for i in sign:
        for j in sign:
            if i != j and over[i] < under[j] < under[i] < over[j]:
                total += sign[i] * sign[j]
    return total


def reidemeister1(code: GaussCode, position: int, sign: int = 1, over_first: bool = True) -> GaussCode:
    """Insert a kink (a crossing met twice in a row) before event ``position``."""
    label = max(code.crossings, default=0) + 1
    pair = [("O", label, sign), ("U", label, sign)]
    if not over_first:
        pair.reverse()
    ev = list(code.events)
    return GaussCode(tuple(ev[:position] + pair + ev[position:]))


def reidemeister2(code: GaussCode, first: int, second: int, reverse: bool = False) -> GaussCode:
    """Push one strand over another: crossings a, b of opposite sign.

    The over strand meets a then b right before event ``first``; the under
    strand meets them before event ``second`` (in the order b, a when the two
    strands run in opposite directions).
    """
    if not 0 <= first <= second <= len(code.events):
        raise ValueError("insertion points out of range")
    a = max(code.crossings, default=0) + 1
    b = a + 1
    over = [("O", a, 1), ("O", b, -1)]
    under = [("U", b, -1), ("U", a, 1)] if reverse else [("U", a, 1), ("U", b, -1)]
    ev = list(code.events)
    return GaussCode(tuple(ev[:first] + over + ev[first:second] + under + ev[second:]))


def gauss_code_from_curve(curve: KnotCurve, rotation: np.ndarray | None = None, points: int = 1200) -> GaussCode:
    """Read a Gauss code off the projection of a sampled knot to the xy-plane.

    The curve is sampled as a closed polygon, optionally rotated first.  The
    crossing sign is the sign of the z-component of (over direction) x
    (under direction).
    """
    t = np.arange(points) / points
    pts = curve.evaluate(t)[0]
    if rotation is not None:
        pts = pts @ np.asarray(rotation).T
    p, q = pts, np.roll(pts, -1, axis=0)
    d = q - p
    n = points
    i, j = np.triu_indices(n, 2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    a, b = d[i, :2], d[j, :2]
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    diff = p[j, :2] - p[i, :2]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (diff[:, 0] * b[:, 1] - diff[:, 1] * b[:, 0]) / cross
        u = (diff[:, 0] * a[:, 1] - diff[:, 1] * a[:, 0]) / cross
    hit = (cross != 0) & (s >= 0) & (s < 1) & (u >= 0) & (u < 1)
    events = []
    for label, (ii, jj, si, uj) in enumerate(zip(i[hit], j[hit], s[hit], u[hit]), start=1):
        zi = p[ii, 2] + si * d[ii, 2]
        zj = p[jj, 2] + uj * d[jj, 2]
        if abs(zi - zj) < 1e-9:
            raise ValueError("projection has a double point with equal heights; choose another rotation")
        ti, tj = ii + si, jj + uj
        if zi > zj:
            o_dir, u_dir, t_over, t_under = d[ii], d[jj], ti, tj
        else:
            o_dir, u_dir, t_over, t_under = d[jj], d[ii], tj, ti
        sgn = 1 if o_dir[0] * u_dir[1] - o_dir[1] * u_dir[0] > 0 else -1
        events.append((t_over, "O", label, sgn))
        events.append((t_under, "U", label, sgn))
    events.sort()
    relabel: dict[int, int] = {}
    out = []
    for _, kind, label, sgn in events:
        relabel.setdefault(label, len(relabel) + 1)
        out.append((kind, relabel[label], sgn))
    return GaussCode(tuple(out))


STANDARD_CODES = {
    "unknot": "",
    "trefoil": "O1+U2+O3+U1+O2+U3+",
    "figure8": "O1-U2-O3+U4+O2-U1-O4+U3+",
}
