import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capsulelab import fields, geometry, maximal as m
from capsulelab.verification import centered_maximal_1d


def norm(y):
    return np.linalg.norm(y, axis=-1)


def test_config_validation():
    with pytest.raises(ValueError):
        m.MaximalConfig(r_min=0)
    with pytest.raises(ValueError):
        m.MaximalConfig(n_s=0)
    with pytest.raises(ValueError):
        m.MaximalConfig(flow_steps=0)
    assert m.MaximalConfig().with_(n_r=3).radii().shape == (3,)


@given(st.floats(-3, 3))
def test_classical_maximal_of_constant(c):
    cfg = m.MaximalConfig(n_r=8, ball_order=3)
    x = np.random.default_rng(0).normal(size=(5, 3))
    np.testing.assert_allclose(m.classical_maximal(lambda y: np.full(len(y), c), x, cfg), abs(c), rtol=1e-12, atol=1e-300)


def test_classical_maximal_of_radius():
    # averages of |y| over B_r(0) are 3r/4, largest at r_max
    cfg = m.MaximalConfig(r_max=1.0, n_r=10, ball_order=8)
    assert m.classical_maximal(norm, np.zeros(3), cfg) == pytest.approx(0.75, rel=1e-3)


def test_classical_maximal_dominates():
    f = lambda y: np.exp(-np.sum(y * y, axis=-1))
    x = np.random.default_rng(1).normal(size=(40, 3))
    Mf = m.classical_maximal(f, x, m.MaximalConfig(ball_order=4))
    assert np.all(Mf >= f(x) * (1 - 1e-5))


def test_streamwise_zero_field_is_identity():
    fm = fields.FlowMap(fields.zero(), h=0.1)
    f = lambda y: np.cos(y[..., 0]) + 2
    x = np.random.default_rng(2).normal(size=(10, 3))
    np.testing.assert_allclose(m.streamwise_maximal(f, fm, x, m.MaximalConfig(n_s=10)), f(x), rtol=1e-12)


@given(st.floats(0.2, 3.0), st.integers(0, 1000))
def test_streamwise_constant_drift_matches_1d(U, seed):
    fm = fields.FlowMap(fields.constant(U), h=0.01)
    cfg = m.MaximalConfig(n_s=20)
    f = lambda y: np.exp(-np.sum(y * y, axis=-1))
    x = np.random.default_rng(seed).uniform(-2, 2, (10, 3))
    oracle = centered_maximal_1d(lambda t: f(x[None] + (U * t)[:, None, None] * np.array([1.0, 0, 0])).T, cfg.windows())
    np.testing.assert_allclose(m.streamwise_maximal(f, fm, x, cfg), oracle, rtol=1e-3)


def test_window_average_of_linear_is_exact():
    taus = np.linspace(-1, 1, 11)
    vals = (3 + taus)[:, None]
    np.testing.assert_allclose(m.streamwise_from_values(taus, vals, np.array([0.13, 0.5, 1.0])), [3.0])


def test_xi_tilde_shear_is_one():
    cfg = m.MaximalConfig(n_r=6, n_s=6, ball_order=2, flow_steps=4)
    c = geometry.Capsule.ball((0, 0, 0), 0.5)
    assert m.xi_tilde_squared(fields.shear(), c, cfg, geometry.QuadratureSpec.gauss(2)) == pytest.approx(1.0, rel=1e-12)


def test_weak_norm_of_power():
    p = 2.0
    est = m.weak_norm(lambda y: np.where(norm(y) < 1, norm(y) ** (-3 / p), 0.0), p, (-1, 1, -1, 1, -1, 1), np.geomspace(1, 10, 40), 400_000, seed=3)
    assert est.estimate == pytest.approx((4 * math.pi / 3) ** 0.5, rel=0.05)


def test_weak_norm_from_values_exact():
    vals = np.array([1.0, 2.0, 3.0, 4.0])
    est = m.weak_norm_from_values(vals, 1.0, [0.5, 1.5, 2.5, 3.5], 4.0)
    # alpha * |{f > alpha}|: 0.5*4, 1.5*3, 2.5*2, 3.5*1
    assert est.estimate == pytest.approx(5.0)
    assert est.argmax == pytest.approx(2.5)
    with pytest.raises(ValueError):
        m.weak_norm(lambda y: y[..., 0], 1.0, (0, 1, 0, 1, 0, 1), [], 10)


@given(st.floats(0, 2))
def test_lens_fraction_endpoints(d):
    assert m.lens_fraction(0.0, 1.0) == 1.0
    assert m.lens_fraction(2.0, 1.0) == 0.0
    assert 0 <= m.lens_fraction(d, 1.0) <= 1


def test_lens_fraction_against_sampling():
    y = m.uniform_ball((0, 0, 0), 1.0, 200_000, seed=4)
    frac = np.mean(norm(y - np.array([0.6, 0, 0])) < 1.0)
    assert frac == pytest.approx(m.lens_fraction(0.6, 1.0), abs=0.005)


def test_streamline_proximity():
    assert m.streamline_proximity(fields.FlowMap(fields.constant(1.0), 0.05), 1.0, 0.0, 2.0, 1.0) == pytest.approx(1.0)
    frac = m.streamline_proximity(fields.FlowMap(fields.zero(), 0.05), 1.0, 0.0, 1.0, 1.0, 50_000)
    assert frac == pytest.approx(5 / 16, rel=0.03)
    with pytest.raises(ValueError):
        m.streamline_proximity(fields.FlowMap(fields.zero(), 0.05), 1.0, 0.0, 1.0, 0.0)


def test_dirichlet_comparison_bounded():
    cfg = m.MaximalConfig(n_r=16, n_s=16, ball_order=3, flow_steps=8)
    res = m.dirichlet_comparison(fields.gaussian_curl(), geometry.Capsule.ball((0, 0, 0), 1.0), cfg)
    assert res.ratio is not None and res.ratio <= 20


def test_dirichlet_comparison_degenerate():
    res = m.dirichlet_comparison(fields.constant(), geometry.Capsule.ball((0, 0, 0), 1.0), m.MaximalConfig(n_r=4, n_s=4, flow_steps=2))
    assert res.degenerate and res.bounded


def test_strong_type_constant_drift():
    bump = lambda y: np.where(norm(y) < 1, 1 - norm(y) ** 2, 0.0)
    fm = fields.FlowMap(fields.constant(1.0), h=0.05)
    Mf, f, ratio = m.strong_type_ratio(bump, fm, (-1, 1, -1, 1, -1, 1), m.MaximalConfig(n_s=20, flow_steps=20), 2.0, 16, 1.0)
    assert 1.0 <= ratio <= 5.0
