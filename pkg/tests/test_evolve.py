import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rndirac import evolve as ev
from rndirac.geometry import BlackHole

BH = BlackHole(1.0, 0.6)
U = np.linspace(20.0, 120.0, 1001)


def random_profile(seed, u=U):
    rng = np.random.default_rng(seed)
    env = ev.smooth_bump(u, 70.0, 40.0)
    states = (rng.normal(size=(u.size, 2)) + 1j * rng.normal(size=(u.size, 2))) * env[:, None]
    return ev.RadialProfile(BH, u, states)


def test_product_positive_and_hermitian():
    a, b = random_profile(0), random_profile(1)
    assert a.norm() > 0
    assert ev.conserved_product(a, b) == pytest.approx(np.conj(ev.conserved_product(b, a)), rel=1e-13)


@given(cr=st.floats(-2, 2), ci=st.floats(-2, 2))
@settings(max_examples=30)
def test_product_sesquilinear(cr, ci):
    a, b = random_profile(2), random_profile(3)
    c = complex(cr, ci)
    p = ev.conserved_product(a, b)
    assert ev.conserved_product(a.with_states(c * a.states), b) == pytest.approx(np.conj(c) * p, abs=1e-10 * abs(p))
    assert ev.conserved_product(a, b.with_states(c * b.states)) == pytest.approx(c * p, abs=1e-10 * abs(p))


def test_product_quadrature_converges():
    vals = []
    for n in (1001, 2001, 4001):
        u = np.linspace(20.0, 120.0, n)
        p = ev.bump_profile(BH, u, 70.0, 40.0, 0.8, 0.1)
        vals.append(p.norm())
    assert abs(vals[2] - vals[1]) <= 1e-6 * vals[2]


def test_profile_rejects_bad_grids():
    with pytest.raises(ValueError):
        ev.RadialProfile(BH, np.array([1.0, 2.0, 4.0]) + 20, np.zeros((3, 2)))
    a = random_profile(0)
    with pytest.raises(ValueError):
        ev.conserved_product(a, random_profile(0, np.linspace(20.0, 121.0, 1001)))


def test_omega_grid_skips_mass_shell():
    w, wt = ev.omega_grid(0.05, 0.25, 41, 0.1, symmetric=True)
    assert np.all(np.abs(np.abs(w) - 0.1) >= 0.005)
    assert np.allclose(w, -w[::-1]) and np.all(wt > 0)


@pytest.fixture(scope="module")
def gap_basis():
    u = np.linspace(20.0, 60.0, 201)
    ws = np.array([-0.08, -0.04, 0.04, 0.08])
    return ev.build_basis(BH, 0.5, 1, 0.1, ws, np.full(4, 0.04), u)


def test_gap_modes_carry_one_coefficient(gap_basis):
    prof = random_profile(4, gap_basis.u)
    c = ev.project(prof, gap_basis)
    assert np.all(c.values[:, 1] == 0) and np.any(c.values[:, 0] != 0)
    # the sampled decaying solution falls off outward
    amp = np.abs(gap_basis.states[:, :, 0, 0])
    assert np.all(amp[:, -1] < amp[:, 0])


def test_projection_grid_mismatch(gap_basis):
    with pytest.raises(ValueError):
        ev.project(random_profile(0), gap_basis)


# full single-sector evolution (session fixture)


def test_reconstruction_at_tau_zero(evolve_setup):
    basis, prof, c = evolve_setup
    rec = ev.synthesize(c)
    err = prof.with_states(rec.states - prof.states).norm()
    # residual is the spectral weight outside the omega band
    assert math.sqrt(err / prof.norm()) < 1e-3


def test_parseval(evolve_setup):
    _, prof, c = evolve_setup
    assert ev.coefficient_product(c, c).real == pytest.approx(prof.norm(), rel=1e-5)


def test_projection_is_linear(evolve_setup):
    basis, prof, c = evolve_setup
    other = prof.with_states(np.roll(prof.states, 100, axis=0) * 1j)
    both = ev.project(prof.with_states(prof.states + 2 * other.states), basis)
    np.testing.assert_allclose(both.values, (c + ev.project(other, basis).scale(2)).values, atol=1e-12 * np.abs(c.values).max())


def test_two_step_composition(evolve_setup):
    _, _, c = evolve_setup
    a = ev.evolve_mode(ev.advance(c, 20.0), 30.0).states
    b = ev.evolve_mode(c, 50.0).states
    assert np.abs(a - b).max() <= 1e-8 * np.abs(b).max()


def test_signature_commutes_with_evolution(evolve_setup):
    _, _, c = evolve_setup
    s1 = ev.apply_signature(ev.advance(c, 30.0)).values
    s2 = ev.advance(ev.apply_signature(c), 30.0).values
    assert np.abs(s1 - s2).max() <= 1e-10 * np.abs(s1).max()


def test_outgoing_packet_moves_at_group_velocity(evolve_setup):
    _, _, c = evolve_setup

    def centroid(p):
        wp, ws = ev.density_weights(p.bh, p.u)
        dens = wp * np.abs(p.states[:, 0]) ** 2 + ws * np.abs(p.states[:, 1]) ** 2
        return float((p.u * dens).sum() / dens.sum())

    v = (centroid(ev.evolve_mode(c, 50.0)) - centroid(ev.evolve_mode(c, 0.0))) / 50.0
    assert 0.95 < v < math.sqrt(0.8**2 - 0.1**2) / 0.8 + 1e-3


def test_aliasing_guard(evolve_setup):
    basis, _, c = evolve_setup
    limit = 2 * math.pi / basis.spacing - (basis.u[-1] - basis.u[0])
    ev.check_aliasing(basis, 0.9 * limit)
    with pytest.raises(ev.AliasingError):
        ev.evolve_mode(c, 1.01 * limit)


def test_time_series_csv(evolve_setup, tmp_path):
    _, _, c = evolve_setup
    s = ev.time_series(c, [0.0, 10.0], 30.0, 250.0)
    assert ev.norm_drift(s) < 1e-6
    p = tmp_path / "ts.csv"
    ev.write_time_series(p, s)
    lines = p.read_text().splitlines()
    assert lines[0].split(",") == ev.TIME_SERIES_COLUMNS and len(lines) == 3
    assert float(lines[1].split(",")[1]) == s[0].norm
