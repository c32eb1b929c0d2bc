import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capsulelab import geometry as g

radii = st.floats(0.1, 3.0)
stretch = st.floats(1.0, 6.0)
unit = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 0.1)
centers = st.tuples(*[st.floats(-5, 5)] * 3)


def closed_volume(R, L):
    return 4 / 3 * math.pi * R**3 + 2 * math.pi * R**2 * (L - R)


def test_validation():
    with pytest.raises(ValueError):
        g.Capsule((0, 0, 0), 1.0, 0.5)
    with pytest.raises(ValueError):
        g.Capsule((0, 0, 0), -1.0, 1.0)
    with pytest.raises(ValueError):
        g.Capsule((0, 0, 0), 1.0, 2.0, (0, 0, 0))
    with pytest.raises(ValueError):
        g.dilate(g.Capsule.ball((0, 0, 0), 1.0), 0.5)


def test_ball_is_ball():
    c = g.Capsule.ball((1, 2, 3), 2.0)
    assert c.is_ball and c.core_half_length == 0
    assert g.contains(c, np.array([1, 2, 4.99]))
    assert not g.contains(c, np.array([1, 2, 5.01]))


@given(radii, stretch)
def test_gauss_volume_exact(R, s):
    c = g.Capsule((0.3, -1, 2), R, R * s, (1, 2, 3))
    _, w = g.capsule_rule(c, g.QuadratureSpec.gauss(4))
    assert np.sum(w) == pytest.approx(closed_volume(R, R * s), rel=1e-12)
    assert g.volume(c) == pytest.approx(closed_volume(R, R * s), rel=1e-14)


def test_mc_and_grid_volume():
    c = g.Capsule((0, 0, 0), 1.0, 3.0, (0, 1, 1))
    exact = closed_volume(1.0, 3.0)
    assert g.integrate(c, lambda y: np.ones(len(y)), g.QuadratureSpec.mc(200_000, seed=1)) == pytest.approx(exact, rel=0.01)
    assert g.integrate(c, lambda y: np.ones(len(y)), g.QuadratureSpec.grid(48)) == pytest.approx(exact, rel=0.02)


def test_gauss_second_moment():
    # int_{B_1} |y|^2 = 4 pi / 5
    c = g.Capsule.ball((0, 0, 0), 1.0)
    assert g.integrate(c, lambda y: np.sum(y * y, axis=-1), g.QuadratureSpec.gauss(6)) == pytest.approx(4 * math.pi / 5, rel=1e-12)


def test_ball_rule_averages():
    y, w = g.ball_rule(6)
    assert np.sum(w) == pytest.approx(1.0)
    assert np.sum(w * np.sum(y * y, axis=1)) == pytest.approx(3 / 5)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        g.QuadratureSpec.mc(0)
    with pytest.raises(ValueError):
        g.QuadratureSpec.grid(1)
    with pytest.raises(ValueError):
        g.QuadratureSpec.gauss(0)


@given(radii, stretch, unit, centers, st.floats(1.0, 4.0))
def test_gauge_matches_membership(R, s, e, center, lam):
    c = g.Capsule(center, R, R * s, e)
    rng = np.random.default_rng(0)
    y = np.asarray(center) + rng.normal(size=(200, 3)) * R * s
    gam = g.gauge(c, y)
    inside = g.contains(g.scaled(c, lam), y)
    mismatch = inside != (gam < lam)
    assert np.all(np.abs(gam[mismatch] - lam) < 1e-9)


@given(radii, stretch, unit)
def test_boundary_samples_on_surface(R, s, e):
    c = g.Capsule((0, 0, 0), R, R * s, e)
    pts = g.boundary_samples(c, shrink=1.0)
    np.testing.assert_allclose(g.gauge(c, pts), 1.0, atol=1e-9)
    assert g.DIRECTIONS_26.shape == (26, 3)


def brute_segment_distance(p1, q1, p2, q2, n=401):
    t = np.linspace(0, 1, n)
    a = p1 + t[:, None] * (q1 - p1)
    b = p2 + t[:, None] * (q2 - p2)
    return np.min(np.linalg.norm(a[:, None] - b[None], axis=-1))


@given(st.integers(0, 10_000))
def test_segment_distance_against_sampling(seed):
    rng = np.random.default_rng(seed)
    p1, q1, p2, q2 = rng.normal(size=(4, 3))
    d = float(g.segment_distance(p1, q1, p2, q2))
    assert d <= brute_segment_distance(p1, q1, p2, q2) + 1e-12
    assert d >= brute_segment_distance(p1, q1, p2, q2) - 0.02


def test_segment_distance_degenerate_and_parallel():
    z = np.zeros(3)
    assert g.segment_distance(z, z, np.array([3.0, 4, 0]), np.array([3.0, 4, 0])) == pytest.approx(5.0)
    assert g.segment_distance(z, np.array([1.0, 0, 0]), np.array([0.5, 1, 0]), np.array([2.0, 1, 0])) == pytest.approx(1.0)


@given(st.integers(0, 10_000))
def test_intersects_symmetric(seed):
    rng = np.random.default_rng(seed)
    a = g.Capsule(tuple(rng.uniform(-2, 2, 3)), 0.5, 1.5, tuple(rng.normal(size=3)))
    b = g.Capsule(tuple(rng.uniform(-2, 2, 3)), 0.7, 0.7)
    assert g.intersects(a, b) == g.intersects(b, a)
    arr = g.CapsuleArrays.from_capsules([a, b])
    assert bool(g.intersects_many(a, arr)[1]) == g.intersects(a, b)


def test_touching_capsules_do_not_intersect():
    # open sets: tangency is not an intersection
    a = g.Capsule.ball((0, 0, 0), 1.0)
    b = g.Capsule.ball((2, 0, 0), 1.0)
    assert not g.intersects(a, b)
    assert g.intersects(a, g.Capsule.ball((1.999, 0, 0), 1.0))


def test_chord_length_examples():
    x = np.array([[0.0, 0, 0], [0, 2, 0], [10, 0, 0], [3.0, 0, 0]])
    np.testing.assert_allclose(g.chord_length(1.0, 3.0, x), [2.0, 0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        g.chord_length(1.0, 0.5, x)


def test_json_roundtrip():
    caps = [g.Capsule((1, 2, 3), 0.5, 2.0, (0, 0, 1)), g.Capsule.ball((0, 0, 0), 1.0)]
    assert g.capsules_from_json(g.capsules_to_json(caps)) == caps


def test_orthonormal_frame():
    e, a, b = g.orthonormal_frame((1, 1, 0))
    M = np.stack([e, a, b])
    np.testing.assert_allclose(M @ M.T, np.eye(3), atol=1e-14)


@pytest.mark.parametrize("l", [2.0, 5.0])
def test_sandwich(l):
    lo, mid, hi = g.sandwich_check(lambda y: np.exp(-np.sum(y * y, axis=-1)), 1.0, l)
    assert lo <= mid * 1.02 and mid <= hi * 1.02
