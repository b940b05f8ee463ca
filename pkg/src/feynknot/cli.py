"""Command-line driver: ``feynknot <command> [options]``.

Exit codes: 0 success, 1 a checked property was violated, 2 usage or input
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from .bundle import (
    Certificate,
    boundary_suite,
    isotopy_suite,
    transition_suite,
    trivialization_suite,
)
from .diagram import KnotGraph, canonical_form, canonical_key, enumerate_diagrams, graph_from_key, symmetry_factor
from .geometry import KnotCurve
from .integrator import check_dimension, integrate_anomaly, integrate_diagram, resolve_threads
from .invariants import normalized_v2

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
ANOMALY_TOLERANCE = 0.05


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    order: int | None = None
    samples: int = 100_000
    seed: int = 0
    threads: int = 1
    knot: str | None = None
    diagram: str | None = None
    out: str | None = None
    tolerance: float | None = None
    trials: int = 1000
    inject: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise UsageError("--samples must be at least 1")
        if self.threads < 1:
            raise UsageError("--threads must be at least 1")
        if not -(2**63) <= self.seed < 2**64:
            raise UsageError("--seed must fit in 64 bits")
        self.seed %= 2**64
        if self.trials < 1:
            raise UsageError("--trials must be at least 1")


def load_knot(spec: str) -> KnotCurve:
    """A named knot, ``torus:p,q``, or a JSON file holding a curve spec."""
    path = Path(spec)
    if path.is_file():
        return KnotCurve.from_spec(json.loads(path.read_text()))
    if spec.startswith("torus:"):
        p, q = (int(x) for x in spec.split(":", 1)[1].split(","))
        return KnotCurve.torus(p, q)
    return KnotCurve.named(spec)


def load_diagram(spec: str) -> KnotGraph:
    """A JSON diagram file or a canonical class key."""
    path = Path(spec)
    if path.is_file():
        data = json.loads(path.read_text())
        if isinstance(data, dict) and "diagram" in data:
            data = data["diagram"]
        return KnotGraph.from_dict(data)
    return graph_from_key(spec)


def _write(text: str, out: str | None, stdout: TextIO) -> None:
    if out:
        Path(out).write_text(text)
    else:
        stdout.write(text)


def _tsv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(_cell(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# ---------------------------------------------------------------------------
# commands


def cmd_enumerate(cfg: RunConfig, stdout: TextIO) -> int:
    if cfg.order is None or cfg.order < 1:
        raise UsageError("--order must be a positive integer")
    entries = [
        {"key": canonical_key(g), "symmetry": symmetry_factor(g), "diagram": canonical_form(g).to_dict()}
        for g in enumerate_diagrams(cfg.order, on_knot=True)
    ]
    _write(json.dumps(entries, indent=2) + "\n", cfg.out, stdout)
    return EXIT_OK


def cmd_integrate(cfg: RunConfig, stdout: TextIO) -> int:
    if not cfg.diagram or not cfg.knot:
        raise UsageError("integrate needs --diagram and --knot")
    graph = load_diagram(cfg.diagram)
    curve = load_knot(cfg.knot)
    if not check_dimension(graph):
        raise UsageError(
            f"dimension mismatch: m + 3s = {graph.m + 3 * graph.s} but 2k = {2 * graph.k}"
        )
    est = integrate_diagram(graph, None, curve, cfg.samples, cfg.seed, cfg.threads)
    text = _tsv(["value", "stderr", "samples", "seed"], [[est.value, est.stderr, est.samples, est.seed]])
    _write(text, cfg.out, stdout)
    return EXIT_OK


def cmd_anomaly(cfg: RunConfig, stdout: TextIO) -> int:
    if cfg.order is None or cfg.order < 1:
        raise UsageError("--order must be a positive integer")
    tol = ANOMALY_TOLERANCE if cfg.tolerance is None else cfg.tolerance
    rows, ok = [], True
    for graph in enumerate_diagrams(cfg.order, on_knot=True):
        if not check_dimension(graph):
            continue
        est = integrate_anomaly(graph, None, cfg.samples, cfg.seed, cfg.threads)
        passed = abs(est.value) <= tol and est.covers(0.0)
        ok &= passed
        rows.append([canonical_key(graph), est.value, est.stderr, est.samples, est.seed, "pass" if passed else "fail"])
    text = _tsv(["diagram", "value", "stderr", "samples", "seed", "status"], rows)
    _write(text, cfg.out, stdout)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_bundle_check(cfg: RunConfig, stdout: TextIO) -> int:
    if cfg.diagram:
        diagrams = [load_diagram(cfg.diagram)]
    elif cfg.order is not None and cfg.order >= 1:
        diagrams = [g for n in range(1, cfg.order + 1) for g in enumerate_diagrams(n, on_knot=True)]
    else:
        raise UsageError("bundle-check needs --order or --diagram")
    extra = []
    for text in cfg.inject:
        try:
            extra.append(np.array(json.loads(text), dtype=float))
        except (json.JSONDecodeError, ValueError) as exc:
            raise UsageError(f"--inject-generator expects a JSON matrix: {exc}") from None
    draws = cfg.trials
    certs: list[Certificate] = []
    certs += trivialization_suite(diagrams, draws, cfg.seed)
    certs.append(isotopy_suite(diagrams, max(1, draws // 10), cfg.seed))
    cert, _ = transition_suite(diagrams, draws, cfg.seed, extra)
    certs.append(cert)
    kwargs = {} if cfg.tolerance is None else {"tolerance": cfg.tolerance}
    certs.append(boundary_suite(diagrams, draws, cfg.seed, **kwargs))
    report = {"status": "pass" if all(c.passed for c in certs) else "fail",
              "certificates": [c.to_dict() for c in certs]}
    _write(json.dumps(report, indent=2, default=float) + "\n", cfg.out, stdout)
    return EXIT_OK if report["status"] == "pass" else EXIT_VIOLATION


def cmd_invariant(cfg: RunConfig, stdout: TextIO) -> int:
    if not cfg.knot:
        raise UsageError("invariant needs --knot")
    curve = load_knot(cfg.knot)
    try:
        res = normalized_v2(curve, cfg.samples, cfg.seed, cfg.threads)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VIOLATION
    _write(_tsv(["normalized_v2", "stderr"], [[res.value, res.stderr]]), cfg.out, stdout)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, TextIO], int]] = {
    "enumerate": cmd_enumerate,
    "integrate": cmd_integrate,
    "anomaly": cmd_anomaly,
    "bundle-check": cmd_bundle_check,
    "invariant": cmd_invariant,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feynknot", description="Configuration-space integrals for knots.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", help="write output here instead of stdout")

    def sampling(p: argparse.ArgumentParser) -> None:
        p.add_argument("--samples", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: FEYNKNOT_THREADS or 1)")

    p = sub.add_parser("enumerate", help="list diagram classes of a given order")
    p.add_argument("--order", type=int, required=True)
    common(p)

    p = sub.add_parser("integrate", help="estimate I(diagram, knot)")
    p.add_argument("--diagram", required=True, help="diagram JSON file or class key")
    p.add_argument("--knot", required=True, help="knot name, torus:p,q, or curve JSON file")
    sampling(p)
    common(p)

    p = sub.add_parser("anomaly", help="anomaly integrals of every class of an order")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--tolerance", type=float, default=None, help=f"bound on |value| (default {ANOMALY_TOLERANCE})")
    sampling(p)
    common(p)

    p = sub.add_parser("bundle-check", help="trivialization, isotopy, transition and boundary certificates")
    p.add_argument("--order", type=int)
    p.add_argument("--diagram", help="diagram JSON file or class key")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=None, help="boundary-limit tolerance (default 1e-6)")
    p.add_argument("--inject-generator", action="append", default=[], dest="inject",
                   help="extra transition matrix as JSON (exercises the failure path)")
    common(p)

    p = sub.add_parser("invariant", help="normalized second-order invariant of a knot")
    p.add_argument("--knot", required=True)
    sampling(p)
    common(p)
    return parser


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    values = {k: v for k, v in vars(args).items() if v is not None}
    try:
        values["threads"] = resolve_threads(values.get("threads"))
        cfg = RunConfig(**values)
        return COMMANDS[cfg.command](cfg, stdout)
    except (UsageError, ValueError, KeyError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
