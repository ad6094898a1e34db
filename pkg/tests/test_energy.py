import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralhom.correctors import assemble_effective, effective_from_table, rve_correctors
from chiralhom.energy import (
    EPS_TERMS,
    HOM_PARTS,
    CellCoefficients,
    EnergyBreakdown,
    EnergyError,
    completed_square,
    curl_dmi,
    energy_eps,
    energy_hom,
    eps_coefficients,
    eps_energy,
    hom_energy,
    integrate_thom,
)
from chiralhom.magnetization import Magnetization
from chiralhom.microstructure import (
    LaminateRealization,
    LaminateSpec,
    Phase,
    PhaseTable,
    sample_checkerboard,
    sample_laminate,
)

FIELD = dict(mu0=1.3, h_applied=(0.3, -0.2, 0.5))


@pytest.fixture
def checker(rich_table):
    return sample_checkerboard(rich_table, 1.0, (4, 4, 4), 3)


@pytest.fixture
def energies(checker):
    e = eps_energy(checker, 1.0, (4, 4, 4), 0.25, **FIELD)
    model = assemble_effective(rve_correctors(checker), **FIELD)
    return {"eps": e, "hom": hom_energy(model, (4, 4, 4), 0.25)}


def fd_check(E, m, term, rng, step=1e-5):
    d = rng.standard_normal(m.shape)
    fd = (E.parts(m + step * d, [term])[term] - E.parts(m - step * d, [term])[term]) / (2 * step) / E.vol
    an = float(np.sum(E.gradient(m, [term]) * d))
    return an, fd


@pytest.mark.parametrize("kind", ["eps", "hom"])
def test_gradients_match_finite_differences(energies, kind):
    E = energies[kind]
    rng = np.random.default_rng(0)
    m = Magnetization.random((4, 4, 4), 0.25, 5).m
    for term in E.available:
        an, fd = fd_check(E, m, term, rng)
        assert abs(an - fd) <= 1e-6 * max(abs(fd), 1e-8), term


def test_gradient_sum_and_value(energies):
    E = energies["hom"]
    m = Magnetization.random((4, 4, 4), 0.25, 1)
    val, g = E.value_and_gradient(m.m)
    assert val == pytest.approx(E.value(m), rel=1e-15)
    np.testing.assert_allclose(g, sum(E.gradient_parts(m.m).values()), rtol=1e-14)


def test_zeeman_and_anisotropy_closed_forms():
    c = CellCoefficients.constant((2, 3, 2), a=1.0, msat=0.7, k1=0.4, easy_axis=(0.0, 0.6, 0.8))
    E = eps_energy(None, 1.0, (2, 3, 2), 0.5, mu0=2.0, h_applied=(1.0, 0.0, -1.0), coefficients=c)
    d = np.array([0.0, 0.0, 1.0])
    m = Magnetization.uniform((2, 3, 2), 0.5, d)
    P = E.parts(m)
    V = m.volume
    assert P["zeeman"] == pytest.approx(-2.0 * 0.7 * (-1.0) * V, rel=1e-14)
    assert P["anisotropy"] == pytest.approx(0.4 * (1 - 0.64) * V, rel=1e-14)
    assert P["exchange"] == 0.0 and P["dmi"] == 0.0
    assert P["stray"] > 0.0


def test_helix_energy_densities():
    a, kappa, q = 1.3, 0.9, 0.7
    for n in (128, 256):
        L = 8.0
        h = L / n
        m = Magnetization.helix((1, 1, n), h, q)
        E = eps_energy(None, 1.0, (1, 1, n), h, coefficients=CellCoefficients.constant((1, 1, n), a=a, kappa=kappa))
        P = E.parts(m, ("exchange", "dmi"))
        V = m.volume
        # boundary cells copy their only face, so the discrete rates are exact chords
        chord = 2 * np.sin(q * h / 2) / h
        assert P["exchange"] / V == pytest.approx(0.5 * a * chord**2, rel=1e-12)
        assert abs(P["dmi"] / V + kappa * q) < 2 * (q * h) ** 2 * kappa * q


def test_single_phase_hom_equals_eps():
    t = PhaseTable((Phase(1.5, 0.7, 0.8, 0.3, (0.0, 0.6, 0.8)),), (1.0,))
    r = sample_laminate(LaminateSpec(t, (1.0,)), 0, 100.0)
    model = effective_from_table(t, **FIELD)
    m = Magnetization.random((4, 4, 4), 0.25, 5)
    b1 = energy_eps(m, r, 1.0, **FIELD)
    b2 = energy_hom(m, model)
    for k in EPS_TERMS:
        assert getattr(b1, k) == pytest.approx(getattr(b2, k), rel=1e-12, abs=1e-14), k


def test_completed_square_and_curl_identity(checker):
    c = eps_coefficients(checker, 1.0, (4, 4, 4), 0.25)
    E = eps_energy(checker, 1.0, (4, 4, 4), 0.25)
    rng = np.random.default_rng(2)
    for seed in rng.integers(0, 1000, 5):
        m = Magnetization.random((4, 4, 4), 0.25, int(seed))
        P = E.parts(m)
        assert P["exchange"] + P["dmi"] == pytest.approx(completed_square(m, c), rel=1e-10)
        assert P["dmi"] == pytest.approx(curl_dmi(m, c.kappa), rel=1e-10)


def test_integrated_cell_density_is_ghom(rich_table):
    model = effective_from_table(rich_table)
    m = Magnetization.random((3, 3, 3), 0.5, 4)
    G = hom_energy(model, (3, 3, 3), 0.5, terms=("exchange", "dmi", "dmi_corrector"))
    assert integrate_thom(m, model) == pytest.approx(G.value(m), rel=1e-12)


def test_regrouping_and_breakdown(energies):
    m = Magnetization.random((4, 4, 4), 0.25, 7)
    b = energies["hom"].breakdown(m)
    assert b.grouping == "hom" and b.regrouped.grouping == "eff"
    assert b.total == pytest.approx(b.regrouped.total, rel=1e-12)
    P = energies["hom"].parts(m, HOM_PARTS)
    assert b.dmi == pytest.approx(P["dmi"] + P["dmi_corrector"], rel=1e-15)
    assert b.regrouped.anisotropy == pytest.approx(P["anisotropy"] + P["dmi_corrector"] + P["stray_corrector"], rel=1e-14)
    d = json.loads(b.to_json())
    assert d["regrouped"]["grouping"] == "eff"
    e = energies["eps"].breakdown(m)
    assert e.regrouped is None and e.model == "eps"


def test_breakdown_total_validated():
    with pytest.raises(EnergyError):
        EnergyBreakdown(1.0, 2.0, 3.0, 4.0, 5.0, total=14.0)
    assert EnergyBreakdown(1.0, 2.0, 3.0, 4.0, 5.0).total == 15.0


def test_stray_nonnegative_on_random_fields(checker):
    E = eps_energy(checker, 1.0, (4, 4, 4), 0.25, terms=("stray",))
    for seed in range(20):
        assert E.value(Magnetization.random((4, 4, 4), 0.25, seed)) >= 0.0


def test_resolution_rule(two_phase_spec, checker):
    r = sample_laminate(two_phase_spec, 0, 64.0)
    eps_coefficients(r, 1.0, (1, 1, 16), 0.25)
    with pytest.raises(EnergyError):
        eps_coefficients(r, 1.0, (1, 1, 8), 0.5)
    with pytest.raises(EnergyError):
        eps_coefficients(checker, 1.0, (2, 2, 2), 0.5)
    with pytest.raises(EnergyError):
        eps_coefficients(r, 0.0, (1, 1, 8), 0.1)
    # domain larger than the realization
    with pytest.raises(EnergyError):
        eps_coefficients(r, 1.0, (1, 1, 1024), 0.25)
    with pytest.raises(TypeError):
        eps_coefficients(object(), 1.0, (1, 1, 8), 0.1)


def test_laminate_cells_are_exact_averages(two_phase):
    r = LaminateRealization(np.array([0.0, 1.0, 3.0, 4.0]), np.array([0, 1, 0]), two_phase)
    c = eps_coefficients(r, 2.0, (1, 1, 8), 0.5)
    # y = x / 2, cells of width 0.25 in y
    np.testing.assert_allclose(c.a[0, 0], [1, 1, 1, 1, 2, 2, 2, 2])


def test_shape_and_spacing_checks(energies):
    E = energies["eps"]
    with pytest.raises(EnergyError):
        E.parts(Magnetization.random((4, 4, 3), 0.25, 0))
    with pytest.raises(EnergyError):
        E.parts(Magnetization.random((4, 4, 4), 0.5, 0))
    with pytest.raises(EnergyError):
        E.with_terms(("bogus",))
    with pytest.raises(EnergyError):
        eps_energy(None, 1.0, (2, 2, 2), 0.1, terms=("dmi_corrector",), coefficients=CellCoefficients.constant((2, 2, 2)))


def test_non_finite_gradient_is_reported():
    c = CellCoefficients.constant((2, 2, 2), a=1.0)
    c.a[1, 0, 1] = np.inf
    E = eps_energy(None, 1.0, (2, 2, 2), 0.5, terms=("exchange",), coefficients=c)
    with pytest.raises(FloatingPointError, match="cell"), np.errstate(invalid="ignore"):
        E.gradient(Magnetization.random((2, 2, 2), 0.5, 0).m)


@given(st.floats(0.0, 2 * np.pi), st.integers(0, 100))
@settings(max_examples=20, deadline=None)
def test_laminate_energy_invariant_under_inplane_rotation(alpha, seed):
    # for textures varying along e3 only, exchange and DMI depend on m only through rotation invariants
    t = PhaseTable((Phase(1.0, 1.0), Phase(2.0, -1.0)), (0.5, 0.5))
    r = sample_laminate(LaminateSpec(t, (1.0, 1.0)), seed, 8.0)
    E = eps_energy(r, 1.0, (2, 2, 32), 0.25, terms=("exchange", "dmi"))
    col = Magnetization.random((1, 1, 32), 0.25, seed).m
    m = Magnetization(np.broadcast_to(col, (2, 2, 32, 3)), 0.25)
    assert E.value(m.rotated_about_e3(alpha)) == pytest.approx(E.value(m), rel=1e-10, abs=1e-12)


def test_helix_h_refinement_order():
    a, kappa, q, L = 1.0, 1.0, 1.3, 4.0
    errs = {"exchange": [], "dmi": []}
    for n in (32, 64, 128, 256):
        h = L / n
        m = Magnetization.helix((1, 1, n), h, q)
        E = eps_energy(None, 1.0, (1, 1, n), h, coefficients=CellCoefficients.constant((1, 1, n), a=a, kappa=kappa))
        P = E.parts(m, ("exchange", "dmi"))
        V = m.volume
        errs["exchange"].append(abs(P["exchange"] / V - 0.5 * a * q * q))
        errs["dmi"].append(abs(P["dmi"] / V + kappa * q))
    for name, e in errs.items():
        orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
        assert orders.min() >= 1.9, (name, orders)
