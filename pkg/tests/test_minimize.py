import csv

import numpy as np
import pytest

from chiralhom.energy import CellCoefficients, eps_energy
from chiralhom.magnetization import Magnetization
from chiralhom.minimize import (
    ColumnPreconditioner,
    HelixFitError,
    MinimizeOptions,
    fit_helix,
    gradient,
    minimize_sphere,
)


def column_energy(n, h, a=1.0, kappa=1.0, **kw):
    c = CellCoefficients.constant((1, 1, n), a=a, kappa=kappa, **kw)
    return eps_energy(None, 1.0, (1, 1, n), h, terms=("exchange", "dmi"), coefficients=c)


@pytest.mark.parametrize(
    "kw",
    [dict(max_iters=-1), dict(grad_tol=0.0), dict(step=0.0), dict(armijo_c=1.0), dict(backtrack=1.0), dict(max_halvings=0)],
)
def test_options_validation(kw):
    with pytest.raises(ValueError):
        MinimizeOptions(**kw)


def test_zeeman_alignment():
    c = CellCoefficients.constant((2, 2, 2), a=1.0, msat=1.0)
    E = eps_energy(None, 1.0, (2, 2, 2), 0.5, h_applied=(0.0, 1.0, 0.0), terms=("exchange", "zeeman"), coefficients=c)
    tr = minimize_sphere(E, Magnetization.random((2, 2, 2), 0.5, 0), MinimizeOptions(grad_tol=1e-9))
    assert tr.converged
    np.testing.assert_allclose(tr.final.m[..., 1], 1.0, atol=1e-8)


@pytest.mark.parametrize("precond", [False, True])
def test_energy_monotone_and_helix_found(precond):
    n, L = 128, 16.0
    E = column_energy(n, L / n)
    P = ColumnPreconditioner(E, 1.0) if precond else None
    tr = minimize_sphere(E, Magnetization.random((1, 1, n), L / n, 3), MinimizeOptions(grad_tol=1e-6, max_iters=50000), P)
    assert tr.converged and not tr.line_search_failed
    assert np.all(np.diff(tr.energies) <= 1e-12 * np.abs(tr.energies[:-1]))
    fit = fit_helix(tr.final)
    # free ends: pitch approaches kappa/a = 1 up to O(h^2)
    assert fit.q == pytest.approx(1.0, rel=1e-2)
    assert fit.max_out_of_plane < 1e-3
    assert tr.energy / (L / n) ** 2 == pytest.approx(-0.5 * L, rel=1e-2)


def test_preconditioner_is_spd_inverse_pair():
    n = 40
    E = column_energy(n, 0.2, a=1.5)
    P = ColumnPreconditioner(E, 0.7)
    rng = np.random.default_rng(0)
    m = Magnetization.random((1, 1, n), 0.2, 1).m
    u = rng.standard_normal(m.shape)
    u -= np.sum(u * m, axis=-1, keepdims=True) * m
    v = rng.standard_normal(m.shape)
    v -= np.sum(v * m, axis=-1, keepdims=True) * m
    np.testing.assert_allclose(P.apply(P.solve(u, m), m), u, atol=1e-12)
    assert np.sum(P.solve(u, m) * v) == pytest.approx(np.sum(u * P.solve(v, m)), rel=1e-12)
    assert np.sum(u * P.solve(u, m)) > 0
    F = P.frame(m)
    np.testing.assert_allclose(np.einsum("nkj,nlj->nkl", F, F), np.broadcast_to(np.eye(2), (n, 2, 2)), atol=1e-12)
    np.testing.assert_allclose(np.einsum("nkj,nj->nk", F, m[0, 0]), 0.0, atol=1e-12)


def test_preconditioner_bands_match_exchange_operator():
    n = 9
    E = column_energy(n, 0.5, a=2.0)
    P = ColumnPreconditioner(E, 1.0)
    L = np.zeros((n, n))
    for k in range(n):
        v = np.zeros((1, 1, n, 3))
        v[0, 0, k, 0] = 1.0
        L[:, k] = E.with_terms(("exchange",)).gradient(v)[0, 0, :, 0]
    np.testing.assert_allclose(np.diag(L) + 1.0, P.diag)
    np.testing.assert_allclose(np.diag(L, 1), P.off)
    assert np.abs(np.triu(L, 2)).max() == 0.0


def test_preconditioner_requires_column():
    c = CellCoefficients.constant((2, 1, 4), a=1.0)
    E = eps_energy(None, 1.0, (2, 1, 4), 0.5, terms=("exchange",), coefficients=c)
    with pytest.raises(ValueError):
        ColumnPreconditioner(E)
    with pytest.raises(ValueError):
        ColumnPreconditioner(column_energy(4, 0.5), sigma=0.0)


def test_line_search_failure_is_reported():
    def wrong(m):
        # energy sum(m_z) with a gradient of the wrong sign: no step can decrease it
        g = np.zeros_like(m)
        g[..., 2] = -1.0
        return float(np.sum(m[..., 2])), g

    m0 = Magnetization.random((1, 1, 3), 1.0, 0)
    tr = minimize_sphere(wrong, m0, MinimizeOptions(max_halvings=5))
    assert tr.line_search_failed and not tr.converged
    assert tr.iterations == 0


def test_max_iters_respected():
    E = column_energy(32, 0.25)
    tr = minimize_sphere(E, Magnetization.random((1, 1, 32), 0.25, 0), MinimizeOptions(max_iters=3, grad_tol=1e-12))
    assert tr.iterations == 3 and not tr.converged


def test_trace_csv_and_summary(tmp_path):
    E = column_energy(16, 0.25)
    tr = minimize_sphere(E, Magnetization.random((1, 1, 16), 0.25, 0), MinimizeOptions(max_iters=5))
    tr.to_csv(tmp_path / "t.csv")
    rows = list(csv.DictReader((tmp_path / "t.csv").open()))
    assert len(rows) == tr.iterations + 1
    assert float(rows[-1]["energy"]) == tr.energy
    s = tr.summary()
    assert s["iterations"] == tr.iterations and s["energy"] == tr.energy


def test_gradient_helper():
    E = column_energy(8, 0.5)
    m = Magnetization.random((1, 1, 8), 0.5, 2).m
    np.testing.assert_array_equal(gradient(m, E), E.gradient(m))


def test_fit_helix_exact():
    m = Magnetization.helix((1, 1, 50), 0.1, -2.0, theta0=1.0)
    fit = fit_helix(m)
    assert fit.q == pytest.approx(-2.0, rel=1e-12)
    assert fit.theta0 == pytest.approx(1.0, rel=1e-12)
    assert fit.rms_residual < 1e-12 and fit.max_out_of_plane == 0.0
    assert set(fit.to_dict()) == {"theta0", "q", "rms_residual", "max_out_of_plane"}


def test_fit_helix_errors():
    with pytest.raises(HelixFitError):
        fit_helix(Magnetization.uniform((1, 1, 4), 1.0))
    with pytest.raises(HelixFitError):
        fit_helix(Magnetization.random((2, 1, 4), 1.0, 0))


def test_minimizer_rotation_equivariance(two_phase):
    from chiralhom.correctors import effective_from_table
    from chiralhom.energy import hom_energy

    n, L = 128, 32.0
    h = L / n
    E = hom_energy(effective_from_table(two_phase), (1, 1, n), h, terms=("exchange", "dmi", "dmi_corrector"))
    tr = minimize_sphere(E, Magnetization.random((1, 1, n), h, 0), MinimizeOptions(grad_tol=1e-6), ColumnPreconditioner(E))
    fit = fit_helix(tr.final)
    alpha = 0.9
    rot = tr.final.rotated_about_e3(alpha)
    assert E.value(rot) == pytest.approx(tr.energy, rel=1e-10)
    shifted = fit_helix(rot)
    assert np.angle(np.exp(1j * (shifted.theta0 - fit.theta0 - alpha))) == pytest.approx(0.0, abs=1e-10)
    assert shifted.q == pytest.approx(fit.q, rel=1e-10)
