"""Spin-1/2 angular operator [[0, L-], [-L+, 0]] and its discrete spectrum.

With the azimuthal dependence exp(-i k phi), the operators become real:

    L+- = d/dtheta + cot(theta)/2 -+ k csc(theta).

Regular solutions factor as

    Y+ = c^a s^b P(x),    Y- = c^b s^a Q(x),

with c = cos(theta/2), s = sin(theta/2), x = cos(theta), a = |k + 1/2|,
b = |k - 1/2| and P, Q polynomials.  On that ansatz the operator maps the
pair (P, Q) to a pair of polynomials of the same degree, so a Galerkin
discretisation on polynomials of degree < N is an invariant subspace and the
computed eigenvalues carry no truncation error.  The quadrature grid only
needs to integrate the Gram and operator integrands exactly.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import eval_jacobi, roots_jacobi, roots_legendre

GRID_FAMILIES = ("gauss_jacobi", "gauss_legendre", "fejer")


def _check_k(k: float) -> float:
    if abs((k - 0.5) - round(k - 0.5)) > 1e-12:
        raise ValueError(f"k must be a half-integer, got {k}")
    return float(k)


def _pole_exponents(k: float) -> tuple[int, int]:
    return int(round(abs(k + 0.5))), int(round(abs(k - 0.5)))


@dataclass(frozen=True)
class AngularGrid:
    """Colatitude nodes in (0, pi) and weights for the integral of f(theta) sin(theta) dtheta."""

    N: int
    family: str
    theta: np.ndarray
    weights: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return np.cos(self.theta)


def _fejer(n: int) -> tuple[np.ndarray, np.ndarray]:
    # Fejer's first rule: equispaced interior nodes in theta, exact to degree n - 1 in x
    theta = (np.arange(n) + 0.5) * np.pi / n
    j = np.arange(1, n // 2 + 1)
    w = np.empty(n)
    for i, th in enumerate(theta):
        w[i] = 1.0 - 2.0 * np.sum(np.cos(2 * j * th) / (4 * j * j - 1))
    return theta, 2.0 * w / n


def make_grid(N: int, family: str = "gauss_legendre", k: float = 0.5) -> AngularGrid:
    """Quadrature grid with enough nodes for the degree-(N-1) Galerkin space at this k.

    ``N`` is the size of the polynomial space per spinor component; the node
    count is raised as needed so every integrand is integrated exactly.
    """
    if N < 8:
        raise ValueError("angular discretisation needs N >= 8")
    a, b = _pole_exponents(k)
    degree = 2 * (N - 1) + a + b + 2
    if family == "gauss_legendre":
        n = degree // 2 + 2
        x, w = roots_legendre(n)
    elif family == "gauss_jacobi":
        # symmetric weight (1 - x^2)^m divides both spinor blocks exactly; folded back out
        m = min(a, b)
        n = (degree - 2 * m) // 2 + 2
        x, w = roots_jacobi(n, m, m)
        w = w / (1 - x * x) ** m
    elif family == "fejer":
        n = degree + 2
        theta, w = _fejer(n)
        return AngularGrid(N, family, theta[::-1].copy(), w[::-1].copy())
    else:
        raise ValueError(f"unknown grid family {family!r}; choose from {GRID_FAMILIES}")
    order = np.argsort(-x)
    return AngularGrid(N, family, np.arccos(x[order]), w[order])


def _jacobi_block(N: int, a: int, b: int, x: np.ndarray):
    """Jacobi polynomials P_n^(a,b) and their x-derivatives at x, shape (len(x), N)."""
    V = np.empty((x.size, N))
    dV = np.zeros((x.size, N))
    for n in range(N):
        V[:, n] = eval_jacobi(n, a, b, x)
        if n:
            dV[:, n] = 0.5 * (n + a + b + 1) * eval_jacobi(n - 1, a + 1, b + 1, x)
    return V, dV


def _orthonormalise(V: np.ndarray, dV: np.ndarray, wq: np.ndarray):
    G = V.T @ (wq[:, None] * V)
    R = linalg.cholesky(G, lower=False)
    Rinv = linalg.solve_triangular(R, np.eye(R.shape[0]))
    return V @ Rinv, dV @ Rinv


@dataclass(frozen=True)
class _Discretisation:
    k: float
    grid: AngularGrid
    Pp: np.ndarray  # orthonormal upper-component polynomials at the nodes
    Pm: np.ndarray
    matrix: np.ndarray
    defect: float


def _discretise(k: float, grid: AngularGrid) -> _Discretisation:
    a, b = _pole_exponents(k)
    x = grid.x
    N = grid.N
    # (1 +- x)/2 = c^2, s^2
    cc, ss = 0.5 * (1 + x), 0.5 * (1 - x)
    w_plus = 2 * math.pi * grid.weights * cc**a * ss**b
    w_minus = 2 * math.pi * grid.weights * cc**b * ss**a

    Vp, dVp = _jacobi_block(N, b, a, x)
    Vm, dVm = _jacobi_block(N, a, b, x)
    Pp, dPp = _orthonormalise(Vp, dVp, w_plus)
    Pm, dPm = _orthonormalise(Vm, dVm, w_minus)

    half = abs(k) + 0.5
    if k > 0:
        op_on_minus = half * Pm - (1 - x)[:, None] * dPm  # L- Y-, upper slot
        op_on_plus = half * Pp + (1 + x)[:, None] * dPp  # -L+ Y+, lower slot
    else:
        op_on_minus = -half * Pm - (1 + x)[:, None] * dPm
        op_on_plus = -half * Pp + (1 - x)[:, None] * dPp

    B_upper = Pp.T @ (w_plus[:, None] * op_on_minus)
    B_lower = Pm.T @ (w_minus[:, None] * op_on_plus)
    A = np.block([[np.zeros((N, N)), B_upper], [B_lower, np.zeros((N, N))]])
    defect = float(np.linalg.norm(A - A.T) / np.linalg.norm(A))
    return _Discretisation(k, grid, Pp, Pm, A, defect)


def angular_matrix(k: float, grid: AngularGrid) -> np.ndarray:
    """Dense 2N x 2N matrix of the angular operator in an orthonormal Galerkin basis.

    The basis is orthonormal for the L2(S^2) product, so symmetry of this
    matrix is symmetry of the operator in that product.
    """
    return _discretise(_check_k(k), grid).matrix


def symmetry_defect(k: float, grid: AngularGrid) -> float:
    return _discretise(_check_k(k), grid).defect


@dataclass(frozen=True)
class AngularSpectrum:
    k: float
    N: int
    family: str
    xi: np.ndarray  # all eigenvalues, ascending
    vectors: np.ndarray  # columns in the Galerkin basis
    defect: float
    _disc: _Discretisation

    def index_of(self, l: int) -> int:
        if l == 0:
            raise ValueError("l = 0 is not a mode label; use l >= 1 or l <= -1")
        pos = np.flatnonzero(self.xi > 0)
        neg = np.flatnonzero(self.xi < 0)[::-1]
        seq = pos if l > 0 else neg
        if abs(l) > seq.size:
            raise IndexError(f"l={l} outside the computed window")
        return int(seq[abs(l) - 1])

    def xi_of(self, l: int) -> float:
        return float(self.xi[self.index_of(l)])

    def eigenfunction(self, l: int, theta=None):
        """(Y+, Y-) of mode l on the grid nodes (or at given colatitudes)."""
        v = self.vectors[:, self.index_of(l)]
        N = self.N
        if theta is None:
            Pp, Pm, th = self._disc.Pp, self._disc.Pm, self._disc.grid.theta
        else:
            th = np.atleast_1d(np.asarray(theta, dtype=float))
            Pp, Pm = _basis_at(self._disc, th)
        a, b = _pole_exponents(self.k)
        c, s = np.cos(th / 2), np.sin(th / 2)
        return c**a * s**b * (Pp @ v[:N]), c**b * s**a * (Pm @ v[N:])


def _basis_at(disc: _Discretisation, theta: np.ndarray):
    # re-express the orthonormal basis at new points via the raw Jacobi basis
    a, b = _pole_exponents(disc.k)
    xg = disc.grid.x
    N = disc.grid.N
    Vp, _ = _jacobi_block(N, b, a, xg)
    Vm, _ = _jacobi_block(N, a, b, xg)
    Cp = np.linalg.lstsq(Vp, disc.Pp, rcond=None)[0]
    Cm = np.linalg.lstsq(Vm, disc.Pm, rcond=None)[0]
    x = np.cos(theta)
    return _jacobi_block(N, b, a, x)[0] @ Cp, _jacobi_block(N, a, b, x)[0] @ Cm


@functools.lru_cache(maxsize=256)
def angular_spectrum(k: float, N: int = 64, family: str = "gauss_legendre") -> AngularSpectrum:
    k = _check_k(k)
    disc = _discretise(k, make_grid(N, family, k))
    sym = 0.5 * (disc.matrix + disc.matrix.T)
    xi, vecs = linalg.eigh(sym)
    return AngularSpectrum(k, N, family, xi, vecs, disc.defect, disc)


def xi(k: float, l: int, N: int = 64, family: str = "gauss_legendre", L_max: int = 8) -> float:
    """Separation constant of mode (k, l).

    l >= 1 labels the l-th positive eigenvalue and l <= -1 the |l|-th negative
    one.  Only the 2 L_max eigenvalues of smallest modulus are exposed.
    """
    if l == 0 or abs(l) > L_max:
        raise IndexError(f"l={l} outside the window 1 <= |l| <= {L_max}")
    return angular_spectrum(k, max(N, L_max + 8), family).xi_of(l)


def smallest_eigenvalues(k: float, count: int, N: int = 64, family: str = "gauss_legendre") -> np.ndarray:
    ang = angular_spectrum(k, N, family)
    order = np.argsort(np.abs(ang.xi), kind="stable")
    return ang.xi[order[:count]]


def write_csv(path, ks, N: int = 64, L_max: int = 8, family: str = "gauss_legendre"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "l", "xi", "N"])
        for k in ks:
            for l in [*range(-L_max, 0), *range(1, L_max + 1)]:
                w.writerow([k, l, repr(float(xi(k, l, N, family, L_max))), N])
