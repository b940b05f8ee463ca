from __future__ import annotations

import io
import json

import pytest

from feynknot.cli import main
from feynknot.diagram import canonical_key, chord_diagram, tripod

X_KEY = canonical_key(chord_diagram((1, 3), (2, 4)))
T_KEY = canonical_key(tripod())


def run(*argv: str) -> tuple[int, str]:
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def rows(text: str) -> list[dict[str, str]]:
    header, *body = text.strip().split("\n")
    names = header.split("\t")
    return [dict(zip(names, line.split("\t"))) for line in body]


def test_enumerate_order_two():
    code, text = run("enumerate", "--order", "2")
    assert code == 0
    keys = [e["key"] for e in json.loads(text)]
    assert X_KEY in keys and T_KEY in keys and len(keys) == 15


def test_enumerate_order_one_writes_file(tmp_path):
    path = tmp_path / "one.json"
    code, text = run("enumerate", "--order", "1", "--out", str(path))
    assert code == 0 and text == ""
    entries = json.loads(path.read_text())
    assert [e["key"] for e in entries] == ["m2s0:b1-b2"]


def test_enumerate_rejects_order_zero():
    assert run("enumerate", "--order", "0")[0] == 2


def test_integrate_is_deterministic():
    args = ("integrate", "--diagram", T_KEY, "--knot", "trefoil", "--samples", "20000", "--seed", "5")
    a, b = run(*args), run(*args)
    assert a == b and a[0] == 0
    (row,) = rows(a[1])
    assert row["samples"] == "20000" and row["seed"] == "5"


def test_integrate_planar_unknot_gives_zero():
    code, text = run("integrate", "--diagram", X_KEY, "--knot", "unknot", "--samples", "5000")
    assert code == 0
    (row,) = rows(text)
    assert float(row["value"]) == 0.0


def test_integrate_accepts_files(tmp_path):
    diagram = tmp_path / "t.json"
    diagram.write_text(tripod().to_json())
    knot = tmp_path / "k.json"
    knot.write_text(json.dumps({"named": "trefoil"}))
    by_file = run("integrate", "--diagram", str(diagram), "--knot", str(knot), "--samples", "5000")
    by_key = run("integrate", "--diagram", T_KEY, "--knot", "trefoil", "--samples", "5000")
    assert by_file == by_key


def test_integrate_usage_errors():
    bad_dim = canonical_key(chord_diagram((1, 2), (1, 3)))
    assert run("integrate", "--diagram", bad_dim, "--knot", "trefoil")[0] == 2
    assert run("integrate", "--diagram", T_KEY, "--knot", "granny")[0] == 2
    assert run("integrate", "--diagram", "nonsense", "--knot", "trefoil")[0] == 2
    assert run("integrate", "--diagram", T_KEY, "--knot", "trefoil", "--samples", "0")[0] == 2
    with pytest.raises(SystemExit):
        run("integrate", "--knot", "trefoil")


def test_anomaly_is_deterministic_and_passes():
    args = ("anomaly", "--order", "2", "--samples", "20000", "--seed", "3", "--tolerance", "0.2")
    a, b = run(*args), run(*args)
    assert a == b
    assert a[0] == 0
    table = rows(a[1])
    assert {r["status"] for r in table} == {"pass"}
    assert X_KEY in {r["diagram"] for r in table}


def test_bundle_check_passes_and_reports():
    code, text = run("bundle-check", "--order", "2", "--trials", "50", "--tolerance", "1e-5")
    assert code == 0
    report = json.loads(text)
    assert report["status"] == "pass"
    assert [c["property"] for c in report["certificates"]] == [
        "injectivity", "column_norm_bound", "isotopy_determinant", "structure_group", "boundary_limits",
    ]


def test_bundle_check_injected_generator_fails():
    code, text = run("bundle-check", "--order", "2", "--trials", "20", "--tolerance", "1e-5",
                     "--inject-generator", "[[0.5,0],[0,1]]")
    assert code == 1
    report = json.loads(text)
    group = next(c for c in report["certificates"] if c["property"] == "structure_group")
    assert group["status"] == "fail"
    assert run("bundle-check", "--order", "2", "--inject-generator", "[[0.5")[0] == 2
    assert run("bundle-check", "--trials", "5")[0] == 2


def test_invariant_of_trefoil_is_one():
    code, text = run("invariant", "--knot", "trefoil", "--samples", "20000")
    assert code == 0
    (row,) = rows(text)
    assert float(row["normalized_v2"]) == 1.0
