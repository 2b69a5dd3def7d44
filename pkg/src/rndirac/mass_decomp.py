"""Boundary matrix Omega(omega, m, m') of the mass decomposition and its principal-value term.

Omega_ij = W(chi_i^m, chi_j^m')(r+ outside) - W(chi_i^m, chi_j^m')(r+ inside) + W(chi_i^m, chi_j^m')(r-)

with W(X, Y) = X^H diag(1, -eps) Y.  The signs are those of the boundary
terms produced by integrating the radial Dirac operator by parts on
(r-, r+) and (r+, inf); at m' = m the two interior terms cancel because the
Wronskian is r-independent within a region.  Near a horizon every solution
tends to (h+ e^{2 i omega u}, h-) independently of the mass, so the
Wronskians at the three boundaries are evaluated from the horizon
coefficients.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .geometry import BlackHole, Region
from .operators import flux_eigenvalues, t_matrix
from .radial_solver import ModeIndex, SolverError, gram
from .scattering import ModeSolution, solve_mode, solve_phi2


@dataclass(frozen=True)
class WronskianValue:
    value: complex
    region: Region
    labels: tuple = ("i", "j")


def wronskian(x_i, x_j, region: Region, u_i: float | None = None, u_j: float | None = None, labels=("i", "j")) -> WronskianValue:
    """<x_i, A^r x_j> for two states at the same point of one region."""
    if u_i is not None and u_j is not None and u_i != u_j:
        raise ValueError(f"states at different points u={u_i} and u={u_j}")
    val = gram(np.asarray(x_i, dtype=complex).reshape(2, 1), np.asarray(x_j, dtype=complex).reshape(2, 1), region)[0, 0]
    return WronskianValue(complex(val), region, tuple(labels))


@dataclass(frozen=True)
class OmegaMatrix:
    omega: float
    m: float
    m_prime: float
    k: float
    l: int
    matrix: np.ndarray
    event_exterior: np.ndarray
    event_interior: np.ndarray | None
    cauchy: np.ndarray | None
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, ij):
        return self.matrix[ij]


def _boundary_gram(a: np.ndarray, b: np.ndarray, signature) -> np.ndarray:
    return np.conj(a).T @ np.diag(signature) @ b


def _solution(bh, omega, k, l, m, cache):
    key = (omega, k, l, m)
    if cache is not None and key in cache:
        return cache[key]
    sol = solve_mode(bh, ModeIndex.from_angular(omega, k, l, m))
    if cache is not None:
        cache[key] = sol
    return sol


def omega_from_solutions(a: ModeSolution, b: ModeSolution) -> OmegaMatrix:
    """Omega between the fundamental bases of two mode solutions at the same omega, k, l."""
    if a.mode.omega != b.mode.omega or a.mode.k != b.mode.k or a.mode.l != b.mode.l:
        raise ValueError("Omega pairs solutions of one (omega, k, l)")
    if a.u_ext != b.u_ext:
        raise ValueError("solutions use different reference points")
    da, db = a.boundary_data(a.chi()), b.boundary_data(b.chi())
    w_ext = _boundary_gram(da["h_ext"], db["h_ext"], (1.0, -1.0))
    total = w_ext.copy()
    w_int = w_c = None
    if a.has_interior and b.has_interior:
        w_int = _boundary_gram(da["h_int"], db["h_int"], (1.0, 1.0))
        w_c = _boundary_gram(da["c"], db["c"], (1.0, 1.0))
        total = total - w_int + w_c
    diag = {
        "wronskian_drift": max(a.diagnostics["wronskian_drift"], b.diagnostics["wronskian_drift"]),
        "interior_cancellation": float(np.max(np.abs(w_int - w_c))) if w_int is not None else 0.0,
    }
    return OmegaMatrix(a.mode.omega, a.mode.m, b.mode.m, a.mode.k, a.mode.l, total, w_ext, w_int, w_c, diag)


def omega_matrix(bh: BlackHole, omega: float, m: float, m_prime: float, k: float, l: int, cache: dict | None = None) -> OmegaMatrix:
    """Boundary matrix between the fundamental solutions of masses m and m'."""
    for mass in (m, m_prime):
        if abs(abs(omega) - mass) <= 1e-12 * mass:
            raise ValueError(f"omega={omega} on the mass shell of m={mass}")
    if (abs(omega) > m) != (abs(omega) > m_prime):
        raise ValueError("m and m' must lie on the same side of |omega|")
    return omega_from_solutions(_solution(bh, omega, k, l, m, cache), _solution(bh, omega, k, l, m_prime, cache))


def hermiticity_defect(bh: BlackHole, omega: float, m: float, m_prime: float, k: float, l: int, cache: dict | None = None) -> float:
    """max |Omega(m, m') - Omega(m', m)^H| relative to max |Omega(m, m')| (diagnostic only)."""
    a = omega_matrix(bh, omega, m, m_prime, k, l, cache).matrix
    b = omega_matrix(bh, omega, m_prime, m, k, l, cache).matrix
    return float(np.max(np.abs(a - b.conj().T)) / max(np.max(np.abs(a)), 1e-300))


@dataclass(frozen=True)
class PowerFit:
    power: float
    power_stderr: float
    prefactor: float
    residual: float


def fit_power(deltas, values) -> PowerFit:
    """Least-squares fit |values| = C |deltas|^p in log-log form with a standard error on p."""
    x = np.log(np.abs(np.asarray(deltas, dtype=float)))
    y = np.log(np.abs(np.asarray(values)))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    dof = max(len(x) - 2, 1)
    s2 = float(res @ res) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return PowerFit(float(coef[0]), float(math.sqrt(cov[0, 0])), float(math.exp(coef[1])), float(np.max(np.abs(res))))


def diagonal_ladder(m: float, rel=(1e-4, 1e-3, 1e-2)) -> np.ndarray:
    """m' = m (1 +- rel) for each relative offset."""
    rel = np.asarray(rel, dtype=float)
    return np.concatenate([m * (1 - rel[::-1]), m * (1 + rel)])


@dataclass(frozen=True)
class DiagonalStudy:
    omega: float
    m: float
    m_primes: np.ndarray
    omega11: np.ndarray
    fit: PowerFit


def diagonal_study(bh: BlackHole, omega: float, m: float, k: float, l: int, rel=(1e-4, 1e-3, 1e-2), cache=None) -> DiagonalStudy:
    """|Omega_11(omega, m, m')| along a ladder m' -> m and its power-law fit in |m - m'|."""
    cache = {} if cache is None else cache
    mps = diagonal_ladder(m, rel)
    vals = np.array([omega_matrix(bh, omega, m, mp, k, l, cache).matrix[0, 0] for mp in mps])
    return DiagonalStudy(omega, m, mps, vals, fit_power(mps - m, vals))


def _neville(hs, values):
    """Polynomial extrapolation to h = 0 with the last-diagonal difference as error."""
    hs = np.asarray(hs, dtype=float)
    P = [np.asarray(v, dtype=complex) for v in values]
    prev = None
    n = len(P)
    for j in range(1, n):
        P = [(hs[i + j] * P[i] - hs[i] * P[i + 1]) / (hs[i + j] - hs[i]) for i in range(n - j)]
        if j == n - 2:
            prev = P
    err = float(np.max(np.abs(P[0] - prev[-1]))) if prev is not None else math.inf
    return P[0], err


@dataclass(frozen=True)
class FluxLimit:
    omega: float
    m: float
    omega_limit: np.ndarray  # extrapolated Omega(omega, m, m' -> m)
    omega_equal: np.ndarray  # Omega(omega, m, m) evaluated directly
    extrapolation_error: float
    kernel: np.ndarray  # -T Omega, the coefficient-space flux kernel
    eigenvalues: np.ndarray  # of the kernel, ascending real parts
    vartheta: float
    closed_form: tuple[float, float]


def flux_from_omega_limit(
    bh: BlackHole, omega: float, m: float, k: float, l: int, rel=(4e-3, 2e-3, 1e-3), cache=None
) -> FluxLimit:
    """Equal-mass limit of Omega by 3-point extrapolation, mapped to the flux kernel -T Omega.

    Symmetric pairs m' = m (1 +- h) are averaged first, which removes the odd
    orders before the polynomial extrapolation in h^2.
    """
    if abs(omega) <= m:
        raise ValueError("the flux limit is taken for |omega| > m")
    cache = {} if cache is None else cache
    hs, vals = [], []
    for h in rel:
        lo = omega_matrix(bh, omega, m, m * (1 - h), k, l, cache).matrix
        hi = omega_matrix(bh, omega, m, m * (1 + h), k, l, cache).matrix
        hs.append(h * h)
        vals.append(0.5 * (lo + hi))
    lim, err = _neville(hs, vals)
    if not err < 1e-5 * max(1.0, float(np.max(np.abs(lim)))):
        raise SolverError(f"equal-mass extrapolation did not converge (error {err:.2e})")
    equal = omega_matrix(bh, omega, m, m, k, l, cache).matrix
    mode = ModeIndex.from_angular(omega, k, l, m)
    sol = cache.get((omega, k, l, m)) or _solution(bh, omega, k, l, m, cache)
    res = solve_phi2(bh, mode, solution=sol)
    T = t_matrix(mode, res)
    K = -T.matrix @ lim
    ev = np.linalg.eigvals(K)
    ev = ev[np.argsort(ev.real)]
    return FluxLimit(omega, m, lim, equal, err, K, ev, res.vartheta, flux_eigenvalues(res.vartheta))


@dataclass(frozen=True)
class NormalisationFit:
    constant: float
    max_relative_deviation: float
    ratios: np.ndarray


def fit_flux_normalisation(limits) -> NormalisationFit:
    """One global constant c with c |lambda(kernel)| ~ sqrt(2 n_F) over all modes and branches."""
    got = np.concatenate([np.sort(np.abs(f.eigenvalues)) for f in limits])
    want = np.concatenate([np.sort(np.abs(f.closed_form)) for f in limits])
    ratios = want / got
    # least squares in relative error: minimise sum (c got/want - 1)^2
    q = got / want
    c = float(np.sum(q) / np.sum(q * q))
    return NormalisationFit(c, float(np.max(np.abs(c * q - 1))), ratios)


# --- principal-value term ---------------------------------------------------------


def _check_support(mass_interval, omega_support):
    a, b = mass_interval
    lo, hi = omega_support
    if not (0 < a < b) or not lo < hi:
        raise ValueError("need 0 < m_lo < m_hi and omega_lo < omega_hi")
    for s in (1, -1):
        # the set {s m : m in I} must not meet [lo, hi]
        ma, mb = sorted((s * a, s * b))
        if not (hi < ma or lo > mb):
            raise ValueError(f"omega support [{lo}, {hi}] touches the mass shell omega = {'+' if s > 0 else '-'}m, m in [{a}, {b}]")


def pv_boundary_term(
    psi_hat,
    phi_hat,
    omega_kernel,
    mass_interval,
    omega_support,
    n_mass: int = 24,
    omega_rtol: float = 1e-10,
) -> complex:
    """-2i int_I int_I dm dm' PV 1/(m - m') int d omega psi_hat(omega, m)^H Omega(omega, m, m') phi_hat(omega, m').

    ``psi_hat(omega, m)`` and ``phi_hat(omega, m')`` return coefficient pairs,
    ``omega_kernel(omega, m, m')`` a 2x2 matrix.  With s = (m + m')/2 and
    d = (m - m')/2 the principal value becomes the regular integral
    int ds int_0^D [B(s+d, s-d) - B(s-d, s+d)] / d dd, evaluated with
    Gauss-Legendre nodes (the s range is split at the interval midpoint
    where D(s) has its kink).  The inner omega integral is adaptive.
    """
    _check_support(mass_interval, omega_support)
    a, b = mass_interval
    lo, hi = omega_support

    def inner(m, mp):
        def f(w):
            v = np.conj(np.asarray(psi_hat(w, m), dtype=complex)) @ np.asarray(omega_kernel(w, m, mp), dtype=complex) @ np.asarray(phi_hat(w, mp), dtype=complex)
            return np.array([v.real, v.imag])

        val, _ = integrate.quad_vec(f, lo, hi, epsrel=omega_rtol, epsabs=0.0)
        return complex(val[0], val[1])

    x, w = special.roots_legendre(n_mass)
    mid = 0.5 * (a + b)
    total = 0.0 + 0.0j
    for s_lo, s_hi in ((a, mid), (mid, b)):
        ss = 0.5 * (s_hi - s_lo) * x + 0.5 * (s_hi + s_lo)
        ws = 0.5 * (s_hi - s_lo) * w
        for s, wsi in zip(ss, ws):
            D = min(s - a, b - s)
            ds = 0.5 * D * (x + 1)
            wd = 0.5 * D * w
            acc = 0.0 + 0.0j
            for d, wdi in zip(ds, wd):
                acc += wdi * (inner(s + d, s - d) - inner(s - d, s + d)) / d
            total += wsi * acc
    return complex(-2j * total)


OMEGA_COLUMNS = ["omega", "k", "l", "m", "m_prime", "re_O11", "im_O11", "re_O12", "im_O12", "re_O21", "im_O21", "re_O22", "im_O22", "interior_cancellation", "wronskian_drift"]


def omega_row(om: OmegaMatrix) -> list:
    M = om.matrix
    vals = [om.omega, om.k, om.l, om.m, om.m_prime]
    for i in range(2):
        for j in range(2):
            vals += [M[i, j].real, M[i, j].imag]
    vals += [om.diagnostics["interior_cancellation"], om.diagnostics["wronskian_drift"]]
    return vals


def write_csv(path, matrices) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(OMEGA_COLUMNS)
        for om in matrices:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in omega_row(om)])
