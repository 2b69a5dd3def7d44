"""Global fundamental solutions on (r-, inf) and their scattering data.

Every solution is determined by its state X_e at a fixed exterior reference
point u_e (radius r+ + delta).  One pass per mode builds linear maps from X_e
to

    f       frame coefficients at infinity (|omega| > m),
    h_ext   coefficients at the event horizon seen from outside,
    h_int   coefficients at the event horizon seen from inside,
    c       coefficients at the Cauchy horizon,

the interior maps going through the frequency-ladder crossing.  Particular
solutions are then linear algebra on X_e.

Phi_2 is the solution regular across the event horizon (no e^{2 i omega u}
component on the exterior side).  Its Wronskian is -|h_-|^2, so after
normalising |h_-| = 1 its infinity coefficients (a, b) satisfy
|b|^2 - |a|^2 = 1 and define the mixing parameter vartheta.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BlackHole, Region, tortoise_from_offset
from .radial_solver import (
    CAUCHY,
    DEFAULT_RTOL,
    EVENT,
    CrossingResult,
    ModeIndex,
    TransmissionVector,
    cross_event_horizon,
    crossing_matrix,
    default_crossing_radius,
    horizon_window,
    init_bound_state,
    integrate,
    propagate_to_horizon,
    propagate_to_infinity,
)

__all__ = [
    "ModeSolution",
    "GlobalSolution",
    "ScatterResult",
    "TransmissionVector",
    "solve_mode",
    "solve_phi1",
    "solve_phi2",
    "crossing_study",
    "theta_from_f",
    "write_csv",
]


@dataclass
class ModeSolution:
    """Linear maps from the exterior reference state X_e to all boundary coefficients."""

    bh: BlackHole
    mode: ModeIndex
    u_ext: float
    to_infinity: np.ndarray | None  # X_e -> f (|omega| > m)
    to_event_ext: np.ndarray  # X_e -> h_ext
    crossing: CrossingResult | None  # X_e -> interior state at u_match
    to_event_int: np.ndarray | None  # interior state -> h_int
    to_cauchy: np.ndarray | None  # interior state -> c
    decaying: np.ndarray | None = None  # X_e of the decaying solution (|omega| < m)
    diagnostics: dict = field(default_factory=dict)

    @property
    def has_interior(self) -> bool:
        return self.crossing is not None

    def interior_state(self, X_e) -> np.ndarray:
        return self.crossing.transfer @ X_e

    def boundary_data(self, X_e) -> dict:
        """Boundary coefficients of the solutions with exterior reference states X_e (2,) or (2, n)."""
        X_e = np.asarray(X_e, dtype=complex)
        out = {"h_ext": self.to_event_ext @ X_e}
        if self.to_infinity is not None:
            out["f"] = self.to_infinity @ X_e
        if self.has_interior:
            Xi = self.interior_state(X_e)
            out["h_int"] = self.to_event_int @ Xi
            out["c"] = self.to_cauchy @ Xi
        return out

    def chi(self) -> np.ndarray:
        """Exterior reference states of the two fundamental solutions as columns.

        |omega| > m: transmission vectors (1, 0) and (0, 1).  |omega| < m: the
        decaying solution and the solution regular at the event horizon.
        """
        if self.to_infinity is not None:
            return np.linalg.inv(self.to_infinity)
        return np.column_stack([self.decaying, self.regular()])

    def regular(self) -> np.ndarray:
        """Exterior reference state of the solution regular at r+, normalised to |h_-| = 1.

        The overall phase makes c_- real positive when the interior is
        available, h_- real positive otherwise.
        """
        H = self.to_event_ext
        X = np.array([H[0, 1], -H[0, 0]], dtype=complex)
        h = H @ X
        X = X / abs(h[1])
        if self.has_interior:
            c_minus = (self.to_cauchy @ self.interior_state(X))[1]
            X = X * (abs(c_minus) / c_minus)
        else:
            h = H @ X
            X = X * (abs(h[1]) / h[1])
        return X


def _normalise_decaying(X: np.ndarray) -> np.ndarray:
    X = X / np.linalg.norm(X)
    return X * (abs(X[0]) / X[0])


def solve_mode(
    bh: BlackHole,
    mode: ModeIndex,
    interior: bool = True,
    rtol: float = DEFAULT_RTOL,
    delta: float | None = None,
    eps0: float | None = None,
) -> ModeSolution:
    """Build all transfer maps for one mode (interior maps need Q != 0)."""
    delta = default_crossing_radius(bh) if delta is None else delta
    u_e = tortoise_from_offset(bh, delta, Region.EXTERIOR)
    eye = np.eye(2, dtype=complex)
    diag = {}

    hd_ext, traj = propagate_to_horizon(bh, mode, Region.EXTERIOR, u_e, eye, EVENT, rtol=rtol)
    diag["drift_event_ext"] = traj.wronskian_drift()
    diag["residual_event_ext"] = hd_ext.residual

    to_inf = None
    decaying = None
    if mode.scattering:
        F, err, resid, U, traj = propagate_to_infinity(bh, mode, u_e, eye, rtol=rtol)
        to_inf = F
        diag.update(drift_infinity=traj.wronskian_drift(), infinity_error=err, infinity_residual=resid, u_infinity=U)
    else:
        kappa = mode.kappa
        u_start = u_e + 30.0 / kappa + 20.0 * bh.M * mode.m**2 / kappa**2
        X0 = init_bound_state(bh, mode, u_start, "decaying").as_array()
        traj = integrate(bh, mode, Region.EXTERIOR, u_start, u_e, X0, rtol=rtol)
        decaying = _normalise_decaying(traj.end[:, 0])
        diag.update(drift_decaying=traj.wronskian_drift(), u_bound_start=u_start)

    crossing = to_hi = to_c = None
    if interior and bh.has_cauchy_horizon():
        crossing = cross_event_horizon(bh, mode, (eye, u_e), eps0=eps0)
        u_i = crossing.u_match
        hd_int, traj = propagate_to_horizon(bh, mode, Region.INTERIOR, u_i, eye, EVENT, rtol=rtol)
        to_hi = hd_int.coeffs
        diag.update(drift_event_int=traj.wronskian_drift(), residual_event_int=hd_int.residual)
        hd_c, traj = propagate_to_horizon(bh, mode, Region.INTERIOR, u_i, eye, CAUCHY, rtol=rtol)
        to_c = hd_c.coeffs
        diag.update(drift_cauchy=traj.wronskian_drift(), residual_cauchy=hd_c.residual, crossing_error=crossing.error)
    diag["wronskian_drift"] = max(v for k, v in diag.items() if k.startswith("drift"))
    return ModeSolution(bh, mode, u_e, to_inf, hd_ext.coeffs, crossing, to_hi, to_c, decaying, diag)


@dataclass(frozen=True)
class GlobalSolution:
    """One solution on (r-, inf) with its boundary coefficients."""

    mode: ModeIndex
    x_ext: np.ndarray
    f: np.ndarray | None
    h_ext: np.ndarray
    h_int: np.ndarray | None
    c: np.ndarray | None
    solution: ModeSolution

    @property
    def wronskian_exterior(self) -> float:
        """|X+|^2 - |r+ X-|^2, evaluated from the event-horizon coefficients."""
        return float(abs(self.h_ext[0]) ** 2 - abs(self.h_ext[1]) ** 2)


def _global(sol: ModeSolution, X_e) -> GlobalSolution:
    data = sol.boundary_data(X_e)
    return GlobalSolution(sol.mode, X_e, data.get("f"), data["h_ext"], data.get("h_int"), data.get("c"), sol)


def solve_phi1(bh: BlackHole, mode: ModeIndex, solution: ModeSolution | None = None) -> GlobalSolution:
    """Solution with transmission vector (1, 0) at infinity, continued into the interior."""
    if not mode.scattering:
        raise ValueError("solve_phi1 needs |omega| > m")
    sol = solve_mode(bh, mode) if solution is None else solution
    return _global(sol, np.linalg.solve(sol.to_infinity, np.array([1.0, 0.0], dtype=complex)))


def theta_from_f(f) -> float:
    """Mixing parameter from cosh(2 theta) = |a|^2 + |b|^2."""
    a, b = (complex(v) for v in np.asarray(f).reshape(2))
    arg = abs(a) ** 2 + abs(b) ** 2
    if abs(b) < 1.0 - 1e-6 or arg < 1.0 - 1e-6:
        raise ValueError(f"|a|^2 + |b|^2 = {arg} is inconsistent with a pseudo-normalised pair")
    return 0.5 * math.acosh(max(arg, 1.0))


@dataclass(frozen=True)
class ScatterResult:
    mode: ModeIndex
    a: complex
    b: complex
    vartheta: float
    alpha: float
    beta: float
    t: complex
    c_omega: complex
    diagnostics: dict

    @property
    def transmission(self) -> TransmissionVector:
        return TransmissionVector(self.a, self.b, self.diagnostics.get("infinity_error", 0.0))

    @property
    def pseudo_norm(self) -> float:
        return abs(self.b) ** 2 - abs(self.a) ** 2


def solve_phi2(bh: BlackHole, mode: ModeIndex, solution: ModeSolution | None = None) -> ScatterResult:
    """Phi_2 from Cauchy-horizon data (c(omega) e^{2 i omega u}, 1) and its infinity coefficients.

    c(omega) = c_+/c_- of the solution regular at r+.  The Cauchy data are
    then integrated back through the interior in a separate run and matched
    to the continued regular solution; the relative misfit of that match is
    reported as ``regularity_residual``.  Without
    a Cauchy horizon (Q = 0) the regular solution itself is used.
    """
    if not mode.scattering:
        raise ValueError("solve_phi2 needs |omega| > m")
    sol = solve_mode(bh, mode) if solution is None else solution
    diag = dict(sol.diagnostics)
    X_reg = sol.regular()
    c_omega = complex("nan")
    X_e = X_reg
    if sol.has_interior:
        c = sol.to_cauchy @ sol.interior_state(X_reg)
        c_omega = complex(c[0] / c[1])
        lo, hi = horizon_window(bh, mode, Region.INTERIOR, CAUCHY)
        X_c = np.array([c_omega * np.exp(2j * mode.omega * lo), 1.0])
        traj = integrate(bh, mode, Region.INTERIOR, lo, sol.crossing.u_match, X_c)
        Y = traj.end[:, 0]
        # The crossing map damps the singular direction by about e^{-pi omega / kappa+},
        # so Y is fitted onto the image of the regular solution instead of inverting it.
        R = sol.interior_state(X_reg)
        coef = complex(np.vdot(R, Y) / np.vdot(R, R))
        diag["regularity_residual"] = float(np.linalg.norm(Y - coef * R) / np.linalg.norm(Y))
        diag["drift_phi2_interior"] = traj.wronskian_drift()
        X_e = coef * X_reg
        X_e = X_e / abs((sol.to_event_ext @ X_e)[1])
    a, b = sol.to_infinity @ X_e
    vartheta = theta_from_f((a, b))
    alpha, beta = float(np.angle(a)), float(np.angle(b))
    t = complex(np.conj(a) * b / abs(b) ** 2)
    diag["pseudo_norm_residual"] = float(abs(abs(b) ** 2 - abs(a) ** 2 - 1.0))
    return ScatterResult(mode, complex(a), complex(b), vartheta, alpha, beta, t, c_omega, diag)


@dataclass(frozen=True)
class CrossingStudy:
    """Sensitivity of the continued interior data to the frequency-ladder settings."""

    mode: ModeIndex
    eps0: float
    error_estimate: float  # estimate of the base ladder
    halved_difference: float  # base ladder vs ladder started at eps0 / 2
    moved_difference: float  # base vs a different matching radius
    bracketed: bool  # error estimate covers the two-ladder difference


def _interior_event_map(bh, mode, C, r_match, rtol):
    from .geometry import tortoise

    u_i = tortoise(bh, r_match, Region.INTERIOR)
    hd, _ = propagate_to_horizon(bh, mode, Region.INTERIOR, u_i, np.eye(2, dtype=complex), EVENT, rtol=rtol)
    return hd.coeffs @ C


def crossing_study(
    bh: BlackHole,
    mode: ModeIndex,
    eps0: float | None = None,
    r_match: float | None = None,
    r_match_moved: float | None = None,
    rtol: float = DEFAULT_RTOL,
) -> CrossingStudy:
    """Compare the exterior-to-interior-horizon map across ladder settings.

    The map X(r+ + delta) -> h_int does not depend on where the interior
    integration starts, so ladders with different eps0 or r_match must agree.
    Differences are relative to the largest entry of the base map.
    """
    delta = default_crossing_radius(bh)
    eps0 = 1e-2 * abs(mode.omega) if eps0 is None else eps0
    r_match = bh.r_plus - delta if r_match is None else r_match
    r_moved = 0.5 * (bh.r_minus + r_match) if r_match_moved is None else r_match_moved
    C0, err0, _ = crossing_matrix(bh, mode, delta, r_match, eps0)
    C1, _, _ = crossing_matrix(bh, mode, delta, r_match, 0.5 * eps0)
    C2, _, _ = crossing_matrix(bh, mode, delta, r_moved, eps0)
    base = _interior_event_map(bh, mode, C0, r_match, rtol)
    halved = _interior_event_map(bh, mode, C1, r_match, rtol)
    moved = _interior_event_map(bh, mode, C2, r_moved, rtol)
    scale = float(np.abs(base).max())
    d_half = float(np.abs(base - halved).max()) / scale
    d_move = float(np.abs(base - moved).max()) / scale
    ladder_diff = float(np.abs(C0 - C1).max() / np.abs(C0).max())
    return CrossingStudy(mode, eps0, err0, d_half, d_move, bool(err0 >= ladder_diff))


CSV_COLUMNS = [
    "M", "Q", "m", "k", "l", "omega", "re_a", "im_a", "re_b", "im_b", "vartheta",
    "pseudo_norm_residual", "infinity_error", "crossing_error", "wronskian_drift",
]  # fmt: skip


def csv_row(bh: BlackHole, res: ScatterResult) -> list:
    d = res.diagnostics
    md = res.mode
    return [
        bh.M, bh.Q, md.m, md.k, md.l, md.omega, res.a.real, res.a.imag, res.b.real, res.b.imag, res.vartheta,
        d.get("pseudo_norm_residual", ""), d.get("infinity_error", ""), d.get("crossing_error", ""),
        d.get("wronskian_drift", ""),
    ]  # fmt: skip


def write_csv(path, bh: BlackHole, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for res in results:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in csv_row(bh, res)])
