import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capsulelab import construction as c
from capsulelab import fields
from capsulelab.geometry import Capsule


def near_constant(scale=0.01):
    g = fields.gaussian_curl()
    return fields.VectorField(
        "near_constant",
        lambda y: np.array([1.0, 0.0, 0.0]) + scale * g.evaluate_fn(y),
        lambda y: scale * g.gradient_fn(y),
        energy_fn=lambda y: scale**2 * g.energy_fn(y),
    )


def test_params_validation():
    with pytest.raises(ValueError):
        c.CapsuleParams(eps0=0)
    with pytest.raises(ValueError):
        c.CapsuleParams(eps1=0.5)
    with pytest.raises(ValueError):
        c.CapsuleParams(delta=0.5)
    with pytest.raises(ValueError):
        c.CapsuleParams(sigma=0.1)
    with pytest.raises(ValueError):
        c.CapsuleParams(mode="other")
    with pytest.raises(ValueError):
        c.CapsuleParams(R_lo=2, R_hi=1)


@given(st.floats(0, 100), st.floats(1e-3, 10))
def test_length_rule(U, R):
    p = c.CapsuleParams()
    L = c.length_rule(U, R, p)
    assert L >= R
    assert (L == R) == (U * R <= 1)
    if U * R > 1:
        assert L == pytest.approx((U * R) ** (1 / (1 + p.sigma)) * R)
    alt = c.CapsuleParams(mode="alternative", gamma=1.0)
    assert c.length_rule(U, R, alt) == pytest.approx(max(U * R, 1) * R)


def test_average_velocity():
    U, e = c.average_velocity(fields.shear(), (0, 3, 0), 0.5)
    assert U == pytest.approx(3.0)
    np.testing.assert_allclose(e, [1, 0, 0])
    U, e = c.average_velocity(fields.zero(), (0, 0, 0), 1.0)
    assert U == 0 and e.tolist() == [1, 0, 0]


def test_shear_origin_closed_form():
    # Xi~ = 1 and U = 0 at the origin, so R^2 = eps0
    for eps0 in (0.01, 0.04):
        cc = c.find_capsule(fields.shear(), (0, 0, 0), c.CapsuleParams(eps0=eps0, eps1=1e-5))
        assert cc.R == pytest.approx(math.sqrt(eps0), abs=1e-4)
        assert cc.classification == "round" and not cc.unbounded
        assert cc.residual <= 1e-6 * eps0


def test_shear_far_point_is_long():
    cc = c.find_capsule(fields.shear(), (0, 100, 0))
    assert cc.is_long and cc.L > cc.R
    assert cc.U * cc.R > 1
    assert cc.residual <= 1e-6 * cc.params.eps0


def test_alternative_mode_root():
    p = c.CapsuleParams(mode="alternative", lambda_exp=1.0, gamma=1.0)
    cc = c.find_capsule(fields.shear(), (0, 0, 0), p)
    assert cc.R == pytest.approx(0.1, abs=1e-4)


def test_constant_field_unbounded():
    cc = c.find_capsule(fields.constant(), (0, 0, 0))
    assert cc.unbounded and cc.R == cc.params.R_hi
    fam = c.classify_points(fields.constant(), np.zeros((2, 3)))
    assert fam.unbounded == [0, 1] and fam.long == [] and fam.round == []


def test_bracket_error():
    with pytest.raises(c.BracketError):
        c.find_capsule(fields.shear(), (0, 0, 0), c.CapsuleParams(R_lo=1.0))


def test_classify_collects_errors():
    fam = c.classify_points(fields.shear(), [(0, 0, 0), (0, 0, 0)], c.CapsuleParams(R_lo=1.0))
    assert fam.constructed() == [] and set(fam.errors) == {0, 1}
    assert "BracketError" in fam.errors[0]


def test_residuals_on_gaussian_points():
    pts = np.random.default_rng(0).uniform(-1, 1, (3, 3))
    fam = c.classify_points(fields.gaussian_curl(), pts)
    assert not fam.errors
    for cc in fam.constructed():
        assert cc.residual <= 1e-6 * cc.params.eps0
        assert (cc.classification == "long") == (cc.U * cc.R > 1)


def test_oscillation_on_shear_round_point():
    cc = c.find_capsule(fields.shear(), (0, 0, 0))
    rep = c.oscillation_check(fields.shear(), cc)
    # sup |u - b| = R on the ball, bound 1/R, so the ratio is R^2 = eps0
    assert rep.normalized == pytest.approx(cc.params.eps0, rel=1e-6)


def test_oscillation_near_constant_field():
    vf = near_constant()
    cc = c.find_capsule(vf, (0, 0, 0))
    rep = c.oscillation_check(vf, cc)
    assert math.isfinite(rep.normalized) and rep.normalized <= 50


def test_synthetic_capsule_and_dict():
    cc = c.synthetic_capsule((1, 2, 3), 0.5, 2.0, (0, 0, 2), 3.0)
    assert cc.is_long and cc.b == (0.0, 0.0, 3.0)
    d = cc.to_dict()
    assert Capsule.from_dict(d["capsule"]) == cc.capsule


def test_capsule_property_on_shear_family():
    pts = [(0.0, y, 0.0) for y in (20.0, 20.05, 20.1, 20.15)]
    fam = c.classify_points(fields.shear(), pts).constructed()
    rep = c.capsule_property_check(fam, 10.0)
    assert rep.pairs_checked > 0 and not rep.failures
