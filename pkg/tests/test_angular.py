import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rndirac import angular


def exact_spectrum(k, n):
    """Dirac operator on S^2: eigenvalues +-(|k| + 1/2 + j), j = 0, 1, ..."""
    j = np.arange(n)
    return abs(k) + 0.5 + j


half_integers = st.integers(-6, 5).map(lambda i: i + 0.5)


@settings(max_examples=20, deadline=None)
@given(k=half_integers)
def test_eigenvalues_match_exact_spectrum(k):
    ang = angular.angular_spectrum(k, 40)
    pos = np.sort(ang.xi[ang.xi > 0])[:20]
    neg = np.sort(-ang.xi[ang.xi < 0])[:20]
    np.testing.assert_allclose(pos, exact_spectrum(k, 20), atol=1e-10)
    np.testing.assert_allclose(neg, exact_spectrum(k, 20), atol=1e-10)


@pytest.mark.parametrize("k", [0.5, -0.5, 2.5])
def test_matrix_symmetric_and_real_spectrum(k):
    grid = angular.make_grid(64, "gauss_legendre", k)
    A = angular.angular_matrix(k, grid)
    assert np.linalg.norm(A - A.T) / np.linalg.norm(A) < 1e-10
    ev = np.linalg.eigvals(A)
    assert np.max(np.abs(ev.imag)) < 1e-10


def test_refinement_200_vs_400():
    a = angular.smallest_eigenvalues(0.5, 10, N=200)
    b = angular.smallest_eigenvalues(0.5, 10, N=400)
    np.testing.assert_allclose(np.sort(a), np.sort(b), atol=1e-6)


def test_smallest_positive_xi_against_dense_oracle():
    dense = np.linalg.eigvalsh(angular.angular_matrix(0.5, angular.make_grid(400, "gauss_legendre", 0.5)))
    assert angular.xi(0.5, 1) == pytest.approx(dense[dense > 0].min(), abs=1e-10)


@pytest.mark.parametrize("k", [0.5, -1.5])
def test_label_symmetry(k):
    for l in range(1, 9):
        assert angular.xi(k, l) == pytest.approx(-angular.xi(k, -l), abs=1e-8)


def test_label_ordering_and_window():
    assert [angular.xi(0.5, l) for l in (1, 2, 3)] == sorted(angular.xi(0.5, l) for l in (1, 2, 3))
    assert angular.xi(0.5, -1) < 0 < angular.xi(0.5, 1)
    with pytest.raises(IndexError):
        angular.xi(0.5, 0)
    with pytest.raises(IndexError):
        angular.xi(0.5, 9, L_max=8)


def test_no_zero_eigenvalue():
    for k in (0.5, -0.5, 3.5):
        assert np.min(np.abs(angular.angular_spectrum(k, 64).xi)) > 0.5


@pytest.mark.parametrize("family", angular.GRID_FAMILIES)
def test_grid_families_agree(family):
    ref = angular.smallest_eigenvalues(1.5, 12, N=48)
    got = angular.smallest_eigenvalues(1.5, 12, N=48, family=family)
    np.testing.assert_allclose(np.sort(got), np.sort(ref), atol=1e-6)


@pytest.mark.parametrize("family", angular.GRID_FAMILIES)
def test_grid_weights_positive_and_exact(family):
    g = angular.make_grid(16, family, 0.5)
    assert np.all(g.weights > 0)
    assert np.all((g.theta > 0) & (g.theta < math.pi))
    # integral of x^p sin(theta) d theta over (0, pi)
    for p in range(0, 20):
        exact = 0.0 if p % 2 else 2.0 / (p + 1)
        assert np.sum(g.weights * g.x**p) == pytest.approx(exact, abs=1e-12)


def test_eigenfunctions_orthonormal():
    ang = angular.angular_spectrum(-0.5, 64)
    grid = ang._disc.grid
    labels = [-3, -2, -1, 1, 2, 3]
    Y = [ang.eigenfunction(l) for l in labels]
    G = np.array([[2 * math.pi * np.sum(grid.weights * (p[0] * q[0] + p[1] * q[1])) for q in Y] for p in Y])
    np.testing.assert_allclose(G, np.eye(len(labels)), atol=1e-8)


def test_eigenfunction_solves_angular_equation():
    # finite-difference check of [[0, L-], [-L+, 0]] Y = xi Y at interior colatitudes
    k, l = 1.5, 2
    ang = angular.angular_spectrum(k, 32)
    th = np.linspace(0.3, 2.8, 9)
    h = 1e-5
    yp, ym = ang.eigenfunction(l, th)
    dp = (ang.eigenfunction(l, th + h)[0] - ang.eigenfunction(l, th - h)[0]) / (2 * h)
    dm = (ang.eigenfunction(l, th + h)[1] - ang.eigenfunction(l, th - h)[1]) / (2 * h)
    cot, csc = 1 / np.tan(th), 1 / np.sin(th)
    L_minus_ym = dm + 0.5 * cot * ym + k * csc * ym
    L_plus_yp = dp + 0.5 * cot * yp - k * csc * yp
    x = ang.xi_of(l)
    np.testing.assert_allclose(L_minus_ym, x * yp, atol=1e-7)
    np.testing.assert_allclose(-L_plus_yp, x * ym, atol=1e-7)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        angular.make_grid(4)
    with pytest.raises(ValueError):
        angular.angular_spectrum(1.0)
    with pytest.raises(ValueError):
        angular.make_grid(16, "trapezoid")


def test_csv_dump(tmp_path):
    path = tmp_path / "xi.csv"
    angular.write_csv(path, [0.5], L_max=3)
    rows = path.read_text().splitlines()
    assert rows[0] == "k,l,xi,N" and len(rows) == 7
