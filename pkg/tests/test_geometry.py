from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feynknot.diagram import KnotGraph, chord_diagram, tripod
from feynknot.geometry import (
    Configuration,
    GaussImage,
    KnotCurve,
    gauss_map,
    line_configuration,
    radial_density,
    rotate,
    sample_collapsed,
    sample_configuration,
    sample_configurations,
    sample_lines,
    td_normalize,
)

SQUARE = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]


def test_unknot_point_and_tangent():
    k = KnotCurve.named("unknot")
    np.testing.assert_allclose(k.point(0.0), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(k.tangent(0.0), [0, 1, 0], atol=1e-15)


@pytest.mark.parametrize("name", ["unknot", "trefoil", "figure8", "torus(2,5)"])
def test_parameter_is_periodic(name):
    k = KnotCurve.named(name)
    for t in (0.0, 0.13, 0.77):
        np.testing.assert_allclose(k.point(t), k.point(t + 1.0), atol=1e-12)
        np.testing.assert_allclose(k.tangent(t), k.tangent(t - 1.0), atol=1e-9)


def test_polygon_tangent_at_mid_edge_is_edge_direction():
    k = KnotCurve.polygon(SQUARE)
    np.testing.assert_allclose(k.tangent(0.125), [1, 0, 0], atol=1e-9)
    np.testing.assert_allclose(k.tangent(0.375), [0, 1, 0], atol=1e-9)
    np.testing.assert_allclose(k.point(0.125), [0.5, 0, 0], atol=1e-12)


def test_named_curves_are_embedded():
    for name in ("unknot", "trefoil", "figure8", "torus(2,3)", "torus(3,4)"):
        assert KnotCurve.named(name).is_embedded()


def test_self_intersecting_polygon_rejected():
    with pytest.raises(ValueError):
        KnotCurve.polygon([[0, 0, 0], [1, 1, 0], [1, 0, 0], [0, 1, 0]])


def test_bad_curves_rejected():
    with pytest.raises(ValueError):
        KnotCurve.named("granny")
    with pytest.raises(ValueError):
        KnotCurve.torus(2, 4)
    with pytest.raises(ValueError):
        KnotCurve.named("trefoil").reparametrized(0.1, 1.5)


def test_spec_round_trip_keeps_motion_and_reparametrization():
    rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    k = KnotCurve.named("trefoil").moved(rot, [1.0, 2.0, 3.0]).reparametrized(0.2, 0.3)
    back = KnotCurve.from_spec(k.to_spec())
    ts = np.linspace(0, 1, 17)
    np.testing.assert_allclose(back.evaluate(ts)[0], k.evaluate(ts)[0], atol=1e-12)
    poly = KnotCurve.from_spec({"polygon": SQUARE})
    np.testing.assert_allclose(poly.point(0.25), [1, 0, 0], atol=1e-12)


def test_reparametrized_derivative_matches_finite_difference():
    k = KnotCurve.named("figure8").reparametrized(0.1, 0.6)
    t = np.array([0.05, 0.4, 0.9])
    h = 1e-6
    fd = (k.evaluate(t + h)[0] - k.evaluate(t - h)[0]) / (2 * h)
    np.testing.assert_allclose(k.evaluate(t)[1], fd, rtol=1e-6, atol=1e-6)


# -- Gauss map ------------------------------------------------------------


def test_gauss_map_two_points():
    g = KnotGraph([], ["y1", "y2"], [("y1", "y2")])
    img = gauss_map(g, None, None, Configuration([], [[0, 0, 0], [1, 0, 0]]))
    np.testing.assert_allclose(img.directions, [[1, 0, 0]])
    np.testing.assert_allclose(img.classes, [[1, 0, 0]])
    flipped = gauss_map(g.with_inner_order(["y2", "y1"]), None, None, Configuration([], [[1, 0, 0], [0, 0, 0]]))
    np.testing.assert_allclose(flipped.classes, img.classes)


def test_configuration_on_axis_maps_to_fixed_point():
    c = line_configuration([0.0, 0.3, 0.6], [[0, 0, 1.5]])
    img = gauss_map(tripod(), None, None, c)
    np.testing.assert_allclose(img.classes, np.tile([0, 0, 1.0], (3, 1)))


def test_planar_configuration_stays_on_equator():
    rng = np.random.default_rng(1)
    c = Configuration([], np.c_[rng.normal(size=(4, 2)), np.zeros(4)])
    g = KnotGraph([], ["y1", "y2", "y3", "y4"], [("y1", "y2"), ("y2", "y3"), ("y3", "y4"), ("y1", "y3")])
    assert np.all(gauss_map(g, None, None, c).classes[:, 2] == 0)


def test_degenerate_edge_rejected():
    g = KnotGraph([], ["y1", "y2"], [("y1", "y2")])
    with pytest.raises(ValueError):
        gauss_map(g, None, None, Configuration([], [[0, 0, 0], [0, 0, 0]]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_classes_forget_the_sign(v):
    d = np.array(v) / np.linalg.norm(v)
    a = GaussImage(d[None]).classes
    b = GaussImage(-d[None]).classes
    np.testing.assert_array_equal(a, b)
    assert GaussImage(d[None]).line_distance(GaussImage(-d[None])) == 0.0


def random_line_config(rng, m, s):
    return line_configuration(np.sort(rng.random(m)), rng.normal(size=(s, 3)))


def test_rotation_is_equivariant_and_fixes_base_points():
    rng = np.random.default_rng(7)
    g = tripod()
    for _ in range(20):
        c = random_line_config(rng, 3, 1)
        angle = rng.uniform(0, 2 * math.pi)
        r = rotate(c, angle)
        np.testing.assert_array_equal(r.base_params, c.base_params)
        np.testing.assert_allclose(r.positions()[:3], c.positions()[:3], atol=0)
        lhs = gauss_map(g, None, None, r).directions
        rot = np.array([[math.cos(angle), -math.sin(angle), 0], [math.sin(angle), math.cos(angle), 0], [0, 0, 1]])
        rhs = gauss_map(g, None, None, c).directions @ rot.T
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    c = random_line_config(rng, 3, 1)
    np.testing.assert_array_equal(rotate(c, 0.0).inner_points, c.inner_points)


def test_rotation_needs_the_axis_line():
    c = line_configuration([0.0, 1.0], [], frame=(1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        rotate(c, 0.3)


def test_td_normalize_example_and_idempotence():
    c = line_configuration([3.0, 5.0, 9.0], [])
    n = td_normalize(c)
    np.testing.assert_allclose(n.base_params, [0, 1 / 3, 1])
    nn = td_normalize(n)
    np.testing.assert_allclose(nn.base_params, n.base_params, atol=1e-15)


def test_td_normalize_preserves_gauss_map():
    rng = np.random.default_rng(3)
    g = tripod()
    for _ in range(20):
        c = line_configuration(np.sort(rng.random(3)) * 5 + 2, rng.normal(size=(1, 3)) * 4)
        a = gauss_map(g, None, None, c).directions
        b = gauss_map(g, None, None, td_normalize(c)).directions
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_td_normalize_without_base_points_centres():
    c = Configuration([], [[1, 1, 1], [3, 1, 1]], frame=np.array([0, 0, 1.0]))
    n = td_normalize(c)
    np.testing.assert_allclose(n.inner_points, [[-0.5, 0, 0], [0.5, 0, 0]])
    with pytest.raises(ValueError):
        td_normalize(Configuration([], [[1, 1, 1], [1, 1, 1]], frame=np.array([0, 0, 1.0])))


# -- sampling -------------------------------------------------------------


def test_single_base_parameter_is_uniform():
    g = KnotGraph(["b1"], ["y1"], [("b1", "y1")])
    batch = sample_configurations(g, KnotCurve.named("unknot"), 100_000, np.random.default_rng(0))
    t = batch.base_params[:, 0]
    counts, _ = np.histogram(t, bins=10, range=(0, 1))
    assert np.all(np.abs(counts - 10_000) < 5 * math.sqrt(10_000))


def test_base_parameters_ordered_and_density_positive():
    batch = sample_configurations(tripod(), KnotCurve.named("trefoil"), 5000, np.random.default_rng(1))
    assert np.all(np.diff(batch.base_params, axis=1) > 0)
    assert np.all(batch.density > 0) and np.all(np.isfinite(batch.density))
    c, dens = sample_configuration(tripod(), KnotCurve.named("trefoil"), 5)
    assert dens > 0 and c.fits(tripod())


def test_radial_density_integrates_to_one():
    from scipy.integrate import quad

    total, _ = quad(lambda r: radial_density(np.array(r), 0.7), 0, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-7)


def test_importance_weights_recover_ball_volume():
    # E[1{|y - c| < 1} / q(y)] is the volume of the unit ball around c
    g = KnotGraph(["b1"], ["y1"], [("b1", "y1")])
    curve = KnotCurve.named("unknot")
    batch = sample_configurations(g, curve, 1_000_000, np.random.default_rng(11))
    y = batch.inner_points[:, 0]
    ball = 4 * math.pi / 3
    anchor = curve.evaluate(batch.base_params[:, 0])[0]
    w = (np.linalg.norm(y - anchor, axis=1) < 1.0) / batch.density
    assert abs(w.mean() - ball) < 0.01 * ball
    # a ball that is not centred on the knot: heavier weights, checked at 3 sigma
    w = (np.linalg.norm(y, axis=1) < 1.0) / batch.density
    assert abs(w.mean() - ball) < 3 * w.std() / math.sqrt(w.size)


def test_collapsed_samples_sit_on_their_line_with_gauge_fixed():
    g = chord_diagram((1, 3), (2, 4))
    batch = sample_lines(g, 2000, np.random.default_rng(2))
    base = batch.heights[:, :, None] * batch.frames[:, None, :]
    cross = np.cross(base, batch.frames[:, None, :])
    assert np.all(cross == 0) or np.abs(cross).max() < 1e-15
    assert np.all(batch.heights[:, 0] == 0) and np.all(batch.heights[:, -1] == 1)
    c, dens = sample_collapsed(tripod(), 4)
    assert c.frame is not None and dens > 0
    assert c.base_params[0] == 0 and c.base_params[-1] == 1


def test_line_frames_are_uniform_on_the_sphere():
    g = chord_diagram((1, 2))
    batch = sample_lines(g, 1_000_000, np.random.default_rng(9))
    mean = batch.frames.mean(axis=0)
    sigma = batch.frames.std(axis=0) / math.sqrt(len(batch.frames))
    assert np.all(np.abs(mean) <= 3 * sigma)
