import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rndirac import mass_decomp as md
from rndirac.geometry import BlackHole, Region

BH = BlackHole(1.0, 0.6)
M = 0.1


@pytest.fixture(scope="module")
def cache():
    return {}


def test_equal_mass_interior_terms_cancel(cache):
    for omega in (0.3, -0.25, 0.05):
        om = md.omega_matrix(BH, omega, M, M, 0.5, 1, cache)
        scale = np.max(np.abs(om.event_interior)) if om.event_interior is not None else 1.0
        assert om.diagnostics["interior_cancellation"] <= 1e-8 * max(scale, 1.0)
        np.testing.assert_allclose(om.matrix, om.event_exterior, atol=1e-8 * max(scale, 1.0))


def test_omega_matrix_rejects_shell_and_mixed_sides(cache):
    with pytest.raises(ValueError):
        md.omega_matrix(BH, M, M, 0.2, 0.5, 1, cache)
    with pytest.raises(ValueError):
        md.omega_matrix(BH, 0.15, M, 0.2, 0.5, 1, cache)


def test_hermiticity_diagnostic_is_finite(cache):
    d = md.hermiticity_defect(BH, 0.3, M, 1.01 * M, 0.5, 1, cache)
    assert math.isfinite(d) and d >= 0


def test_diagonal_vanishes_linearly(cache):
    st_ = md.diagonal_study(BH, 0.05, M, 0.5, 1, cache=cache)
    assert st_.fit.power >= 0.95
    vals = np.abs(st_.omega11)
    near = vals[[2, 3]].max()  # m' = m (1 -+ 1e-4)
    assert near <= 2e-2 * vals.max()


@given(cr=st.floats(-3, 3), ci=st.floats(-3, 3))
def test_wronskian_is_sesquilinear(cr, ci):
    c = complex(cr, ci)
    x = np.array([1 + 2j, -0.5j])
    y = np.array([0.3, 2 - 1j])
    for region in Region:
        w = md.wronskian(x, y, region).value
        assert md.wronskian(c * x, y, region).value == pytest.approx(np.conj(c) * w, abs=1e-12)
        assert md.wronskian(x, c * y, region).value == pytest.approx(c * w, abs=1e-12)


def test_wronskian_location_mismatch():
    with pytest.raises(ValueError):
        md.wronskian([1, 0], [0, 1], Region.EXTERIOR, u_i=1.0, u_j=2.0)


def test_fit_power_recovers_synthetic_law():
    d = np.array([-1e-2, -1e-3, 1e-3, 1e-2])
    fit = md.fit_power(d, 3.0 * np.abs(d) ** 1.5)
    assert fit.power == pytest.approx(1.5, abs=1e-12)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-10)
    assert fit.power_stderr < 1e-10


def test_flux_limit_extrapolation(cache):
    fl = md.flux_from_omega_limit(BH, 0.3, M, 0.5, 1, cache=cache)
    assert fl.extrapolation_error < 1e-5
    assert fl.kernel.shape == (2, 2) and len(fl.eigenvalues) == 2
    lm, lp = fl.closed_form
    assert lm * lp == pytest.approx(-(1 - math.tanh(fl.vartheta)), rel=1e-12)
    with pytest.raises(ValueError):
        md.flux_from_omega_limit(BH, 0.05, M, 0.5, 1)


def test_fit_flux_normalisation_on_exact_data():
    class F:
        def __init__(self, th, c):
            self.closed_form = (-math.sqrt(1 - math.tanh(th)), math.sqrt(1 - math.tanh(th)))
            self.eigenvalues = np.array(self.closed_form) / c

    fit = md.fit_flux_normalisation([F(0.3, 1.7), F(1.1, 1.7)])
    assert fit.constant == pytest.approx(1.7, rel=1e-12) and fit.max_relative_deviation < 1e-12


# principal value: only the antisymmetric part of B(m, m') contributes

def _pv(B, interval=(0.1, 0.3), support=(0.5, 0.7), g=lambda w: 1.0, n=24):
    return md.pv_boundary_term(
        lambda w, m: (1.0, 0.0),
        lambda w, m: (g(w), 0.0),
        lambda w, m, mp: np.array([[B(m, mp), 0.0], [0.0, 0.0]]),
        interval,
        support,
        n_mass=n,
    )


def test_pv_symmetric_kernel_vanishes():
    assert abs(_pv(lambda m, mp: 1.0)) < 1e-14
    assert abs(_pv(lambda m, mp: m * m + mp * mp)) < 1e-14


def test_pv_antisymmetric_kernel_closed_forms():
    a, b = 0.1, 0.3
    # B = m - m': PV integrand is 1, omega integral of w over (0.5, 0.7) is 0.12
    assert _pv(lambda m, mp: m - mp, g=lambda w: w) == pytest.approx(-2j * (b - a) ** 2 * 0.12, rel=1e-12)
    # B = m m'^2: antisymmetric part over (m - m') is -m m' / 2 after symmetrising
    first = (b * b - a * a) / 2
    assert _pv(lambda m, mp: m * mp * mp) == pytest.approx(-2j * 0.2 * (-0.5 * first**2), rel=1e-12)


def test_pv_real_kernel_gives_imaginary_result_and_converges():
    B = lambda m, mp: math.exp(3 * (m - mp)) * (1 + m)
    coarse, fine = _pv(B, n=12), _pv(B, n=24)
    assert abs(fine.real) < 1e-15 * abs(fine)
    assert abs(coarse - fine) <= 1e-4 * abs(fine)


@pytest.mark.parametrize("support", [(0.05, 0.2), (-0.2, -0.15), (0.3, 0.2)])
def test_pv_support_must_avoid_mass_shell(support):
    with pytest.raises(ValueError):
        _pv(lambda m, mp: 1.0, support=support)


def test_csv_roundtrip(cache, tmp_path):
    om = md.omega_matrix(BH, 0.3, M, M, 0.5, 1, cache)
    p = tmp_path / "omega.csv"
    md.write_csv(p, [om])
    head, row = p.read_text().splitlines()
    assert head.split(",") == md.OMEGA_COLUMNS
    assert float(row.split(",")[5]) == om.matrix[0, 0].real
