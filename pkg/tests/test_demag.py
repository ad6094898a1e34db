import numpy as np
import pytest
from scipy import integrate

from chiralhom.demag import (
    cell_tensor,
    direct_sum_field,
    padded_shape,
    plate_field,
    stray_energy,
    stray_field,
    uniform_average_tensor,
)


def test_plate_field_against_quadrature():
    # Coulomb field of a unit charge density on [-1/2, 1/2]^2 x {0}
    p = np.array([0.3, -0.2, 0.45])

    def comp(k):
        def f(y, x):
            d = p - np.array([x, y, 0.0])
            return d[k] / (4 * np.pi * np.linalg.norm(d) ** 3)

        return integrate.dblquad(f, -0.5, 0.5, -0.5, 0.5, epsabs=1e-12, epsrel=1e-12)[0]

    ref = [comp(k) for k in range(3)]
    got = plate_field(p[0], p[1], p[2], 1.0, 1.0)
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-12)


def test_cell_tensor_symmetry_and_trace():
    rng = np.random.default_rng(0)
    d = rng.integers(-4, 5, size=(20, 3)).astype(float)
    d[np.all(d == 0, axis=1)] = 3.0
    K = cell_tensor(d, 1.0)
    np.testing.assert_allclose(K, np.swapaxes(K, -1, -2), atol=1e-15)
    np.testing.assert_allclose(cell_tensor(-d, 1.0), K, atol=1e-14)
    # outside the source the field is divergence free and curl free: the tensor is traceless
    np.testing.assert_allclose(np.trace(K, axis1=-2, axis2=-1), 0.0, atol=1e-13)
    K0 = cell_tensor(np.zeros(3), 1.0)
    np.testing.assert_allclose(K0, -np.eye(3) / 3, atol=1e-14)


def test_cell_tensor_scales_with_h():
    d = np.array([[1.0, 2.0, -1.0]])
    np.testing.assert_allclose(cell_tensor(d * 0.25, 0.25), cell_tensor(d, 1.0), rtol=1e-12)


def test_padded_shape():
    assert padded_shape((4, 1, 3)) == (8, 1, 6)
    assert padded_shape((4, 4, 4), 3) == (12, 12, 12)
    with pytest.raises(ValueError):
        padded_shape((4, 4, 4), 1)


@pytest.mark.parametrize("dims", [(4, 3, 5), (1, 1, 6), (3, 1, 2)])
@pytest.mark.parametrize("padding", [2, 3])
def test_fft_matches_direct_sum(dims, padding):
    rng = np.random.default_rng(1)
    m = rng.standard_normal(dims + (3,))
    msat = rng.uniform(0.2, 1.0, dims)
    np.testing.assert_allclose(
        stray_field(m, msat, 0.3, padding), direct_sum_field(m, msat, 0.3), atol=1e-13
    )


def test_uniform_cube_demag_factor():
    T = uniform_average_tensor((6, 6, 6), 1 / 6)
    np.testing.assert_allclose(T, -np.eye(3) / 3, atol=1e-13)
    m = np.broadcast_to([0.0, 0.0, 1.0], (6, 6, 6, 3))
    assert stray_field(m, 1.0, 1 / 6)[..., 2].mean() == pytest.approx(-1 / 3, rel=1e-12)


def test_uniform_average_tensor_matches_direct_sum():
    m = np.broadcast_to([0.3, -0.4, 0.5], (3, 2, 4, 3))
    H = direct_sum_field(m, 1.0, 0.5).mean(axis=(0, 1, 2))
    np.testing.assert_allclose(uniform_average_tensor((3, 2, 4), 0.5) @ [0.3, -0.4, 0.5], H, atol=1e-14)


def test_thin_film_limit():
    # in-plane extended film magnetized along its normal: N_zz -> 1
    m = np.broadcast_to([0.0, 0.0, 1.0], (64, 64, 1, 3))
    assert stray_field(m, 1.0, 1.0)[..., 2].mean() < -0.95


def test_stray_energy_nonnegative_and_self_adjoint():
    rng = np.random.default_rng(2)
    dims = (4, 4, 4)
    for _ in range(10):
        m = rng.standard_normal(dims + (3,))
        assert stray_energy(m, 1.0, 0.5) >= 0.0
    u = rng.standard_normal(dims + (3,))
    v = rng.standard_normal(dims + (3,))
    assert np.sum(stray_field(u, 1.0, 0.5) * v) == pytest.approx(np.sum(u * stray_field(v, 1.0, 0.5)), rel=1e-12)


def test_stray_field_is_linear_and_scales_with_msat():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((3, 3, 3, 3))
    np.testing.assert_allclose(stray_field(m, 2.0, 0.5), 2.0 * stray_field(m, 1.0, 0.5), atol=1e-14)
    assert stray_energy(m, 0.0, 0.5) == 0.0


def test_stray_field_rejects_non_finite():
    m = np.zeros((2, 2, 2, 3))
    m[0, 0, 0, 0] = np.nan
    with pytest.raises((ValueError, FloatingPointError)):
        stray_field(m, 1.0, 1.0)
