"""Single-sector Dirac propagator through the spectral representation.

Initial data psi_0 on an exterior tortoise grid are transformed to mode
coefficients

    psi_hat_i(omega) = (1/2 pi) sum_j T_ij (Psi_j(omega) | psi_0),

evolved by the phase e^{-i omega tau} and resynthesised as
sum_i int psi_hat_i Psi_i d omega.  The fundamental solutions Psi_i are the
transmission-vector solutions for |omega| > m (decaying and regular ones
inside the gap).

The conserved scalar product counts both two-spinor blocks of the
four-spinor (a factor 2) with the horizon-radius prefactor absorbed into the
state normalisation:

    (phi | psi) = 2 int [(2 r^2 - Delta)/|Delta| conj(phi_+) psi_+ + conj(phi_s) psi_s] dr,

phi_s = r+ phi_- the scaled lower component carried by the solver.  With this
weight the coefficient-space product 2 pi int psi_hat^H T^{-1} phi_hat equals
the hypersurface product.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BlackHole, Region, exterior_chart, chart_from_tortoise
from .operators import signature_apply, t_matrix
from .radial_solver import AsymptoticFrame, ModeIndex, init_bound_state, integrate
from .scattering import solve_mode, solve_phi2


class AliasingError(ValueError):
    pass


@dataclass(frozen=True)
class RadialProfile:
    """Spinor states (X+, r+ X-) on a uniform exterior tortoise grid.

    A uniform u grid is logarithmic in r - r+ near the event horizon.
    """

    bh: BlackHole
    u: np.ndarray
    states: np.ndarray  # (n, 2)
    region: Region = Region.EXTERIOR

    def __post_init__(self):
        if self.region is not Region.EXTERIOR:
            raise ValueError("profiles live on the exterior grid")
        du = np.diff(self.u)
        if self.u.size < 3 or np.ptp(du) > 1e-9 * abs(du[0]):
            raise ValueError("profile grid must be uniform with at least 3 points")

    @property
    def du(self) -> float:
        return float(self.u[1] - self.u[0])

    def radii(self) -> tuple[np.ndarray, np.ndarray]:
        """(r, Delta) on the grid."""
        return _radii(self.bh, self.u)

    def with_states(self, states) -> "RadialProfile":
        return RadialProfile(self.bh, self.u, np.asarray(states, dtype=complex), self.region)

    def norm(self) -> float:
        return conserved_product(self, self).real


def _radii(bh: BlackHole, u: np.ndarray):
    r = np.empty(u.size)
    for i, uu in enumerate(u):
        r[i] = exterior_chart(bh, chart_from_tortoise(bh, float(uu), Region.EXTERIOR))[0]
    return r, bh.delta(r)


def density_weights(bh: BlackHole, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-du weights (w_+, w_s) of the conserved density, trapezoid factor included."""
    r, delta = _radii(bh, u)
    du = u[1] - u[0]
    # dr = |Delta|/r^2 du
    wp = 2.0 * (2 * r * r - delta) / (r * r) * du
    ws = 2.0 * np.abs(delta) / (r * r) * du
    wp[[0, -1]] *= 0.5
    ws[[0, -1]] *= 0.5
    return wp, ws


def _same_grid(a: RadialProfile, b: RadialProfile):
    if a.bh != b.bh or a.u.shape != b.u.shape or not np.array_equal(a.u, b.u):
        raise ValueError("profiles are on different grids")


def conserved_product(a: RadialProfile, b: RadialProfile) -> complex:
    """(a | b), antilinear in a, by trapezoid quadrature on the common grid."""
    _same_grid(a, b)
    wp, ws = density_weights(a.bh, a.u)
    return complex(np.sum(wp * np.conj(a.states[:, 0]) * b.states[:, 0]) + np.sum(ws * np.conj(a.states[:, 1]) * b.states[:, 1]))


def _pairings(basis_states: np.ndarray, wp: np.ndarray, ws: np.ndarray, states: np.ndarray) -> np.ndarray:
    """(Psi_j | psi) for basis (n_omega, n_u, 2, 2) [omega, u, component, j] and states (n_u, 2)."""
    return np.einsum("wuj,u->wj", np.conj(basis_states[:, :, 0, :]), wp * states[:, 0]) + np.einsum(
        "wuj,u->wj", np.conj(basis_states[:, :, 1, :]), ws * states[:, 1]
    )


def smooth_bump(u: np.ndarray, center: float, half_width: float, sigma: float | None = None) -> np.ndarray:
    """C-infinity bump supported in |u - center| < half_width.

    A Gaussian of width sigma (default half_width/8.5) times the standard
    exp(1 - 1/(1 - x^2)) cutoff; the Gaussian keeps the spectrum compact while
    the cutoff makes the support exactly compact.
    """
    sigma = half_width / 8.5 if sigma is None else sigma
    x = (np.asarray(u, dtype=float) - center) / half_width
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    xi = x[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - xi * xi)) * np.exp(-0.5 * (xi * half_width / sigma) ** 2)
    return out


def bump_profile(
    bh: BlackHole,
    u: np.ndarray,
    center: float,
    half_width: float,
    omega0: float,
    m: float,
    mix=(1.0, 0.0),
    sigma: float | None = None,
) -> RadialProfile:
    """Compact bump times the asymptotic plane-wave state of frequency omega0 (|omega0| > m).

    ``mix`` = (outgoing, incoming) frame amplitudes of the carrier.
    """
    env = smooth_bump(u, center, half_width, sigma)
    frame = AsymptoticFrame(omega0, m, bh.M)
    states = np.zeros((u.size, 2), dtype=complex)
    nz = env > 0
    pp, pm = frame.phases(u[nz])
    g = np.array([mix[0] * np.exp(1j * pp), mix[1] * np.exp(-1j * pm)])
    states[nz] = (frame.matrix @ g * env[nz]).T
    return RadialProfile(bh, np.asarray(u, dtype=float), states)


def tortoise_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def omega_grid(lo: float, hi: float, n: int, m: float, gap: float = 0.05, symmetric: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Uniform omega nodes on [lo, hi] (and on [-hi, -lo] if ``symmetric``) with trapezoid weights.

    Nodes with ||omega| - m| < gap m are dropped.
    """
    w = np.linspace(lo, hi, n)
    wt = np.full(n, w[1] - w[0])
    wt[[0, -1]] *= 0.5
    if symmetric:
        w, wt = np.concatenate([-w[::-1], w]), np.concatenate([wt[::-1], wt])
    keep = np.abs(np.abs(w) - m) >= gap * m
    return w[keep], wt[keep]


@dataclass
class ModeBasis:
    """Fundamental solutions of one (k, l, m) sector sampled on (omega grid) x (u grid)."""

    bh: BlackHole
    k: float
    l: int
    m: float
    omegas: np.ndarray
    weights: np.ndarray
    u: np.ndarray
    states: np.ndarray  # (n_omega, n_u, 2, 2): [omega, u, component, solution]
    T: list  # TMatrix per omega
    diagnostics: list = field(default_factory=list)

    @property
    def spacing(self) -> float:
        return float(np.min(np.diff(np.unique(self.omegas)))) if self.omegas.size > 1 else math.inf

    def t_stack(self) -> np.ndarray:
        return np.array([T.matrix for T in self.T])


def _sample_sector(args):
    bh, omega, k, l, m, u, rtol, q = args
    mode = ModeIndex.from_angular(omega, k, l, m)
    sol = solve_mode(bh, mode, interior=False, rtol=rtol)
    chi = sol.chi()
    hi, lo = float(u[-1]), float(u[0])
    out = np.empty((u.size, 2, 2), dtype=complex)
    diag = {"omega": omega, "wronskian_drift": sol.diagnostics["wronskian_drift"]}
    if mode.scattering:
        res = solve_phi2(bh, mode, solution=sol)
        T = t_matrix(mode, res, q=q)
        cols = [0, 1]
        X0 = chi
    else:
        T = t_matrix(mode, q=q)
        # the decaying column is sampled on an inward run to stay stable
        kappa = mode.kappa
        u_start = max(hi, sol.u_ext) + 30.0 / kappa + 20.0 * bh.M * m * m / kappa**2
        X_far = init_bound_state(bh, mode, u_start, "decaying").as_array()
        tr = integrate(bh, mode, Region.EXTERIOR, u_start, min(lo, sol.u_ext), X_far, rtol=rtol, dense=True)
        at_e = tr.at([sol.u_ext])[0, :, 0]
        scale = sol.decaying[0] / at_e[0]
        out[:, :, 0] = tr.at(u)[:, :, 0] * scale
        cols = [1]
        X0 = chi[:, 1:]
    parts = []
    if hi > sol.u_ext:
        parts.append(integrate(bh, mode, Region.EXTERIOR, sol.u_ext, hi, X0, rtol=rtol, dense=True))
    if lo < sol.u_ext:
        parts.append(integrate(bh, mode, Region.EXTERIOR, sol.u_ext, lo, X0, rtol=rtol, dense=True))
    vals = np.empty((u.size, 2, len(cols)), dtype=complex)
    for tr in parts:
        a, b = sorted((tr.u[0], tr.u[-1]))
        sel = (u >= a) & (u <= b)
        vals[sel] = tr.at(u[sel])
    out[:, :, cols] = vals
    return out, T, diag


def build_basis(
    bh: BlackHole,
    k: float,
    l: int,
    m: float,
    omegas,
    weights,
    u,
    rtol: float = 1e-11,
    q: float = 1.0,
    threads: int = 1,
) -> ModeBasis:
    omegas = np.asarray(omegas, dtype=float)
    u = np.asarray(u, dtype=float)
    jobs = [(bh, float(w), k, l, m, u, rtol, q) for w in omegas]
    if threads > 1:
        with cf.ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sample_sector, jobs))
    else:
        results = [_sample_sector(j) for j in jobs]
    states = np.array([r[0] for r in results])
    return ModeBasis(bh, k, l, m, omegas, np.asarray(weights, dtype=float), u, states, [r[1] for r in results], [r[2] for r in results])


@dataclass(frozen=True)
class ModeCoefficients:
    """psi_hat_i(omega) on the basis omega grid (zero second entry inside the gap)."""

    basis: ModeBasis
    values: np.ndarray  # (n_omega, 2)
    tau: float = 0.0

    @property
    def omegas(self) -> np.ndarray:
        return self.basis.omegas

    def __add__(self, other: "ModeCoefficients") -> "ModeCoefficients":
        if other.basis is not self.basis or other.tau != self.tau:
            raise ValueError("coefficients on different bases or times")
        return ModeCoefficients(self.basis, self.values + other.values, self.tau)

    def scale(self, c: complex) -> "ModeCoefficients":
        return ModeCoefficients(self.basis, c * self.values, self.tau)


def project(profile: RadialProfile, basis: ModeBasis) -> ModeCoefficients:
    """psi_hat = (1/2 pi) T (Psi | psi_0), the pairing taken in the conserved product."""
    if profile.bh != basis.bh or not np.array_equal(profile.u, basis.u):
        raise ValueError("profile and basis grids differ")
    wp, ws = density_weights(profile.bh, profile.u)
    pair = _pairings(basis.states, wp, ws, profile.states)
    vals = np.einsum("wij,wj->wi", basis.t_stack(), pair) / (2 * math.pi)
    return ModeCoefficients(basis, vals)


def advance(coeffs: ModeCoefficients, tau: float) -> ModeCoefficients:
    """Multiply by e^{-i omega tau}."""
    ph = np.exp(-1j * coeffs.omegas * tau)
    return ModeCoefficients(coeffs.basis, coeffs.values * ph[:, None], coeffs.tau + tau)


def check_aliasing(basis: ModeBasis, tau: float) -> None:
    """The omega grid period 2 pi / d omega must exceed the grid span plus the travel distance."""
    period = 2 * math.pi / basis.spacing
    need = float(basis.u[-1] - basis.u[0]) + abs(tau)
    if period <= need:
        raise AliasingError(f"omega spacing {basis.spacing:.3g} aliases at tau={tau}: period {period:.4g} <= {need:.4g}")


def synthesize(coeffs: ModeCoefficients) -> RadialProfile:
    b = coeffs.basis
    check_aliasing(b, coeffs.tau)
    states = np.einsum("w,wi,wuci->uc", b.weights, coeffs.values, b.states)
    return RadialProfile(b.bh, b.u, states)


def evolve_mode(coeffs: ModeCoefficients, tau: float) -> RadialProfile:
    """Profile at time tau: omega quadrature of e^{-i omega tau} sum_i psi_hat_i Psi_i."""
    return synthesize(advance(coeffs, tau))


def coefficient_product(a: ModeCoefficients, b: ModeCoefficients) -> complex:
    """2 pi sum_omega w(omega) a^H T^{-1} b over |omega| > m (the gap carries no T^{-1})."""
    if a.basis is not b.basis:
        raise ValueError("coefficients on different bases")
    basis = a.basis
    total = 0.0 + 0.0j
    for i, T in enumerate(basis.T):
        if T.scattering:
            total += basis.weights[i] * np.conj(a.values[i]) @ np.linalg.solve(T.matrix, b.values[i])
        elif T.q:
            total += basis.weights[i] * np.conj(a.values[i, 0]) * b.values[i, 0] / (0.5 * T.q)
    return complex(2 * math.pi * total)


def apply_signature(coeffs: ModeCoefficients) -> ModeCoefficients:
    b = coeffs.basis
    vals = np.array(
        [signature_apply(coeffs.values[i], ModeIndex.from_angular(w, b.k, b.l, b.m), b.T[i]) for i, w in enumerate(b.omegas)]
    )
    return ModeCoefficients(b, vals, coeffs.tau)


@dataclass(frozen=True)
class NormSample:
    tau: float
    norm: float
    horizon_fraction: float
    infinity_fraction: float


def window_fractions(profile: RadialProfile, horizon_u: float, infinity_u: float) -> tuple[float, float, float]:
    """(norm, fraction at u < horizon_u, fraction at u > infinity_u)."""
    wp, ws = density_weights(profile.bh, profile.u)
    dens = wp * np.abs(profile.states[:, 0]) ** 2 + ws * np.abs(profile.states[:, 1]) ** 2
    total = float(dens.sum())
    if total == 0:
        return 0.0, 0.0, 0.0
    return total, float(dens[profile.u < horizon_u].sum() / total), float(dens[profile.u > infinity_u].sum() / total)


def time_series(coeffs: ModeCoefficients, taus, horizon_u: float, infinity_u: float) -> list[NormSample]:
    out = []
    for tau in taus:
        prof = evolve_mode(coeffs, float(tau))
        out.append(NormSample(float(tau), *window_fractions(prof, horizon_u, infinity_u)))
    return out


def norm_drift(samples) -> float:
    ref = samples[0].norm
    return max(abs(s.norm - ref) for s in samples) / ref


TIME_SERIES_COLUMNS = ["tau", "norm", "horizon_fraction", "infinity_fraction"]


def write_time_series(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIME_SERIES_COLUMNS)
        for s in samples:
            w.writerow([repr(float(v)) for v in (s.tau, s.norm, s.horizon_fraction, s.infinity_fraction)])
