import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capsulelab import fields as f

points = st.lists(st.tuples(*[st.floats(-2, 2)] * 3), min_size=1, max_size=20).map(np.array)


@pytest.mark.parametrize("name", sorted(f.CATALOG))
def test_catalog_gradient_matches_differences(name):
    vf = f.make_field(name)
    x = np.random.default_rng(0).uniform(-1.5, 1.5, (50, 3))
    fd = f.central_difference_gradient(vf.evaluate_fn, x, 1e-5)
    np.testing.assert_allclose(vf.gradient(x), fd, atol=1e-7)


@pytest.mark.parametrize("name", [n for n, e in f.CATALOG.items() if e.divergence_free])
@given(x=points)
def test_divergence_free_presets(name, x):
    np.testing.assert_allclose(f.make_field(name).divergence(x), 0.0, atol=1e-12)


def test_unknown_preset():
    with pytest.raises(KeyError):
        f.make_field("nope")


@given(x=points)
def test_gaussian_curl_vorticity_and_energy(x):
    vf = f.gaussian_curl(amplitude=1.3, width=0.7, axis=(0.2, 0.0, 1.0))
    np.testing.assert_allclose(vf.vorticity_fn(x), vf.curl(x), atol=1e-12)
    grad = vf.gradient(x)
    np.testing.assert_allclose(f.gradient_energy(vf)(x), np.einsum("nij,nij->n", grad, grad), rtol=1e-10, atol=1e-14)


def test_shear_and_rotation_values():
    x = np.array([[0.25, 0.5, 0.0]])
    np.testing.assert_allclose(f.shear()(x), [[0.5, 0, 0]])
    np.testing.assert_allclose(f.rotation()(x), [[-0.5, 0.25, 0]])


def test_grid_field_exact_for_linear():
    vf = f.shear()
    grid = f.sample_to_grid(vf, (-1, 1, -1, 1, -1, 1), (5, 6, 7))
    x = np.random.default_rng(1).uniform(-1, 1, (100, 3))
    np.testing.assert_allclose(grid(x), vf(x), atol=1e-12)
    np.testing.assert_allclose(grid.gradient(x), vf.gradient(x), atol=1e-6)
    with pytest.raises(f.DomainError):
        grid(np.array([[2.0, 0, 0]]))


def test_grid_roundtrip(tmp_path):
    grid = f.sample_to_grid(f.abc(), (0, 1, 0, 2, 0, 3), (4, 5, 6))
    f.write_grid(tmp_path / "g.vf3d", grid)
    back = f.read_grid(tmp_path / "g.vf3d")
    np.testing.assert_array_equal(back.values, grid.values)
    assert back.bounds == grid.bounds


def test_constant_flow_is_translation():
    fm = f.FlowMap(f.constant(2.0, (0, 1, 0)), h=0.1)
    np.testing.assert_allclose(fm.flow(np.zeros((1, 3)), 1.5), [[0, 3.0, 0]], atol=1e-13)
    taus, pts = fm.trajectory(np.zeros((1, 3)), 1.0, 4)
    assert pts.shape == (9, 1, 3)
    np.testing.assert_allclose(pts[:, 0, 1], 2 * taus, atol=1e-13)


@given(x=points, s=st.floats(-3, 3))
def test_rotation_preserves_radius(x, s):
    fm = f.FlowMap(f.rotation(), h=0.01)
    y = fm.flow(x, s)
    np.testing.assert_allclose(np.linalg.norm(y[:, :2], axis=1), np.linalg.norm(x[:, :2], axis=1), rtol=1e-8, atol=1e-12)


@given(x=points)
def test_divergence_free_flow_preserves_volume(x):
    fm = f.FlowMap(f.abc(), h=0.01)
    _, J = fm.flow_with_jacobian(x, 0.7)
    np.testing.assert_allclose(np.linalg.det(J), 1.0, atol=1e-7)


def test_flow_backward_inverts_forward():
    fm = f.FlowMap(f.gaussian_curl(), h=0.01)
    x = np.random.default_rng(2).normal(size=(20, 3))
    np.testing.assert_allclose(fm.flow(fm.flow(x, 1.0), -1.0), x, atol=1e-9)
