"""Separated radial Dirac system in the tortoise coordinate.

State vector X = (X+, r+ X-) obeys

    dX/du = (i w / r^2) diag(2 r^2 - Delta, -Delta) X - (1/r^2) [[0, S], [eps S*, 0]] X,

with S = sqrt|Delta| (i m r - xi) and eps the sign of Delta.  The Wronskian
W(X, Y) = X^H diag(1, -eps) Y is u-independent for real frequency.

Integration runs in u inside one region.  The chart variable (log offset
t = ln(r - r+) outside, logit z = ln((r - r-)/(r+ - r)) inside) is carried as
an extra state component so the right-hand side never has to invert u(r).

Crossing the event horizon uses the regularised variables

    y1 = X+ / sqrt|Delta|,   y2 = r+ X-,

in which the system reads

    Delta y1' = [i w (2 r^2 - Delta) - Delta'/2] y1 - (i m r - xi) y2,
          y2' = (i m r + xi) y1 - i w y2,

in both regions.  Its only singular points are the zeros of Delta, so it can
be carried around r+ on a small semicircle in the complex r plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import angular
from .geometry import BlackHole, Region, chart_from_tortoise, exterior_chart, interior_chart

DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-14


class SolverError(RuntimeError):
    """Numerical failure: integrator breakdown, non-convergent fit or ladder."""


def _is_half_integer(k: float) -> bool:
    return abs((k - 0.5) - round(k - 0.5)) < 1e-12


@dataclass(frozen=True)
class ModeIndex:
    """One separated mode (omega, k, l) at fermion mass m with separation constant xi."""

    omega: float
    k: float
    l: int
    m: float
    xi: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got m={self.m}")
        if not _is_half_integer(self.k):
            raise ValueError(f"k must be a half-integer, got {self.k}")
        if self.l == 0:
            raise ValueError("l = 0 is not a mode label")
        if self.omega == 0.0:
            raise ValueError("omega = 0 is excluded (degenerate horizon asymptotics)")
        if abs(abs(self.omega) - self.m) <= 1e-12 * self.m:
            raise ValueError(f"omega = +-m is excluded (omega={self.omega}, m={self.m})")

    @classmethod
    def from_angular(cls, omega: float, k: float, l: int, m: float, N: int = 64) -> "ModeIndex":
        return cls(omega, k, l, m, angular.xi(k, l, N))

    @property
    def scattering(self) -> bool:
        """True for |omega| > m (oscillating at infinity)."""
        return abs(self.omega) > self.m

    @property
    def kappa(self) -> float:
        """Decay rate sqrt(m^2 - omega^2) at infinity; only for |omega| < m."""
        return bound_state_rate(self.omega, self.m)

    def with_mass(self, m: float) -> "ModeIndex":
        return ModeIndex(self.omega, self.k, self.l, m, self.xi)

    def conjugate(self) -> "ModeIndex":
        """Mode whose solutions are (conj X+, -conj X-) of this one's."""
        return ModeIndex(-self.omega, self.k, -self.l, self.m, -self.xi)


def bound_state_rate(omega: float, m: float) -> float:
    if abs(omega) >= m:
        raise ValueError("decay rate only defined for |omega| < m")
    return math.sqrt((m - omega) * (m + omega))


@dataclass(frozen=True)
class SpinorPair:
    """Radial state (X+, r+ X-) at tortoise coordinate u in a region."""

    x_plus: complex
    x_minus_scaled: complex
    u: float
    region: Region

    def as_array(self) -> np.ndarray:
        return np.array([self.x_plus, self.x_minus_scaled], dtype=complex)

    @classmethod
    def from_array(cls, v, u: float, region: Region) -> "SpinorPair":
        v = np.asarray(v, dtype=complex).reshape(2)
        return cls(complex(v[0]), complex(v[1]), float(u), region)


# --- asymptotics at infinity -----------------------------------------------------


@dataclass(frozen=True)
class AsymptoticFrame:
    """Plane-wave frame at infinity for |omega| > m.

    Solutions behave as H (f+ e^{i Phi+}, f- e^{-i Phi-}) + O(1/u) with
    H = [[cosh Theta, -sinh Theta], [-sinh Theta, cosh Theta]].  The signed
    root w = sign(omega) sqrt(omega^2 - m^2) makes one frame valid on both
    sides of the mass gap.  H preserves diag(1, -1), so the Wronskian of a
    state equals |f+|^2 - |f-|^2 of its frame coordinates at every u.
    """

    omega: float
    m: float
    M: float
    w: float = field(init=False)
    Theta: float = field(init=False)

    def __post_init__(self):
        if abs(self.omega) <= self.m:
            raise ValueError("asymptotic frame needs |omega| > m")
        w = math.copysign(math.sqrt((self.omega - self.m) * (self.omega + self.m)), self.omega)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "Theta", 0.25 * math.log((self.omega - self.m) / (self.omega + self.m)))

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cosh(self.Theta), math.sinh(self.Theta)
        return np.array([[c, -s], [-s, c]])

    @property
    def inverse(self) -> np.ndarray:
        c, s = math.cosh(self.Theta), math.sinh(self.Theta)
        return np.array([[c, s], [s, c]])

    def phases(self, u):
        u = np.asarray(u, dtype=float)
        lu = np.log(u)
        base = self.w * u
        log_coeff = self.M * self.m**2 / self.w
        return base + self.M * (2 * self.omega) * lu + log_coeff * lu, base + self.M * (-2 * self.omega) * lu + log_coeff * lu

    def state(self, f, u) -> np.ndarray:
        """Leading-order state at u (scalar) for frame coefficients f (shape (2,) or (2, n))."""
        f = np.asarray(f, dtype=complex)
        pp, pm = self.phases(u)
        ph = np.array([np.exp(1j * pp), np.exp(-1j * pm)])
        return self.matrix @ (ph.reshape((2,) + (1,) * (f.ndim - 1)) * f)

    def coordinates(self, X, u) -> np.ndarray:
        """Frame coordinates g with X = H (g+ e^{i Phi+}, g- e^{-i Phi-}); X shape (2, n), one column per u."""
        X = np.asarray(X, dtype=complex)
        u = np.asarray(u, dtype=float)
        g = self.inverse @ X
        pp, pm = self.phases(u)
        g[0] *= np.exp(-1j * pp)
        g[1] *= np.exp(1j * pm)
        return g


def init_infinity(bh: BlackHole, mode: ModeIndex, f, u_start: float) -> SpinorPair:
    """Leading-order state at large u for transmission vector f = (f+, f-)."""
    if not mode.scattering:
        raise ValueError("init_infinity needs |omega| > m; use init_bound_state")
    frame = AsymptoticFrame(mode.omega, mode.m, bh.M)
    return SpinorPair.from_array(frame.state(f, u_start), u_start, Region.EXTERIOR)


def _local_matrix(bh: BlackHole, mode: ModeIndex, r: float, dp: float, dm: float, eps: int) -> np.ndarray:
    delta = dp * dm
    r2 = r * r
    S = math.sqrt(abs(delta)) * (1j * mode.m * r - mode.xi) / r2
    w = mode.omega
    return np.array(
        [[1j * w * (2 * r2 - delta) / r2, -S], [-eps * S.conjugate(), -1j * w * delta / r2]], dtype=complex
    )


def init_bound_state(bh: BlackHole, mode: ModeIndex, u_start: float, kind: str = "decaying") -> SpinorPair:
    """State along the decaying (or growing) eigenvector of the frozen system at u_start.

    Uses the exact eigenvector of the coefficient matrix at r(u_start) rather
    than its r -> infinity limit, which removes the O(1/u) misalignment.
    """
    if mode.scattering:
        raise ValueError("init_bound_state needs |omega| < m")
    if kind not in ("decaying", "growing"):
        raise ValueError(f"kind must be 'decaying' or 'growing', got {kind!r}")
    s = chart_from_tortoise(bh, u_start, Region.EXTERIOR)
    r, dp, dm = exterior_chart(bh, s)
    A = _local_matrix(bh, mode, r, dp, dm, +1)
    vals, vecs = np.linalg.eig(A)
    idx = int(np.argmin(vals.real)) if kind == "decaying" else int(np.argmax(vals.real))
    v = vecs[:, idx]
    # fixed phase convention: upper component real positive
    v = v * (abs(v[0]) / v[0]) / np.linalg.norm(v)
    return SpinorPair.from_array(v, u_start, Region.EXTERIOR)


# --- right-hand sides ----------------------------------------------------------


def _make_rhs(bh: BlackHole, mode: ModeIndex, region: Region):
    rp, L = bh.r_plus, bh.width
    m, xi = mode.m, mode.xi
    iw = 1j * mode.omega
    exterior = region is Region.EXTERIOR
    eps = 1.0 if exterior else -1.0

    def rhs(u, y):
        s = y[0].real
        if exterior:
            dp = math.exp(s)
            r = rp + dp
            dm = L + dp
            ds = dm / (r * r)
        else:
            # logistic split keeps both offsets to full relative precision
            if s >= 0:
                e = math.exp(-s)
                dm, dp = L / (1 + e), -L * e / (1 + e)
            else:
                e = math.exp(s)
                dm, dp = L * e / (1 + e), -L / (1 + e)
            r = bh.r_minus + dm if s < 0 else rp + dp
            ds = -L / (r * r)
        delta = dp * dm
        r2 = r * r
        S = math.sqrt(abs(delta)) * complex(-xi, m * r) / r2
        a11 = iw * (2 * r2 - delta) / r2
        a22 = -iw * delta / r2
        xp = y[1::2]
        yy = y[2::2]
        out = np.empty_like(y)
        out[0] = ds
        out[1::2] = a11 * xp - S * yy
        out[2::2] = -eps * S.conjugate() * xp + a22 * yy
        return out

    return rhs


def rhs(bh: BlackHole, mode: ModeIndex, region: Region, u: float, state) -> np.ndarray:
    """dX/du at tortoise coordinate u for state (2,) or (2, n)."""
    X = np.asarray(state, dtype=complex)
    s = chart_from_tortoise(bh, u, region)
    r, dp, dm = exterior_chart(bh, s) if region is Region.EXTERIOR else interior_chart(bh, s)
    return _local_matrix(bh, mode, r, dp, dm, region.eps) @ X


# --- trajectories --------------------------------------------------------------


def wronskian_matrix(region: Region) -> np.ndarray:
    """A^r = diag(1, -eps)."""
    return np.diag([1.0, -float(region.eps)])


def gram(X: np.ndarray, Y: np.ndarray, region: Region):
    """W(X_i, Y_j) = X_i^H A^r Y_j for column stacks, broadcasting over leading axes."""
    A = wronskian_matrix(region)
    return np.einsum("...ai,ab,...bj->...ij", np.conj(X), A, Y)


@dataclass
class Trajectory:
    """Solution columns of one integration run, sampled at the accepted steps."""

    bh: BlackHole
    mode: ModeIndex
    region: Region
    u: np.ndarray
    chart: np.ndarray
    states: np.ndarray  # shape (len(u), 2, ncols)
    dense: object = None
    nfev: int = 0

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    @property
    def end_u(self) -> float:
        return float(self.u[-1])

    def radius(self) -> np.ndarray:
        f = exterior_chart if self.region is Region.EXTERIOR else interior_chart
        return np.array([f(self.bh, s)[0] for s in self.chart])

    def at(self, u) -> np.ndarray:
        """States at tortoise points u (dense output), shape (len(u), 2, ncols)."""
        if self.dense is None:
            raise ValueError("trajectory was integrated without dense output")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        y = self.dense(u)
        return y[1:].T.reshape(u.size, -1, 2).transpose(0, 2, 1)

    def wronskian_gram(self) -> np.ndarray:
        return gram(self.states, self.states, self.region)

    def wronskian_drift(self) -> float:
        """max_u ||G(u) - G(u0)|| / ||G(u0)||, G the Wronskian Gram of the columns.

        For self-orthogonal columns (G = 0, e.g. a decaying bound state) the
        drift is measured pointwise against |X(u)|^2 instead.
        """
        G = self.wronskian_gram()
        ref = np.linalg.norm(G[0])
        scale = np.linalg.norm(self.states, axis=(1, 2)) ** 2
        if ref < 1e-6 * scale[0]:
            return float(np.max(np.linalg.norm(G - G[0], axis=(1, 2)) / scale))
        return float(np.max(np.linalg.norm(G - G[0], axis=(1, 2))) / ref)


def integrate(
    bh: BlackHole,
    mode: ModeIndex,
    region: Region,
    u_from: float,
    u_to: float,
    init,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    dense: bool = False,
    max_step: float = np.inf,
) -> Trajectory:
    """Integrate columns of ``init`` (SpinorPair, (2,) or (2, n)) from u_from to u_to.

    Uses an explicit embedded 8(5,3) Runge-Kutta pair with per-step relative
    tolerance ``rtol``.
    """
    if region is Region.INTERIOR and not bh.has_cauchy_horizon():
        raise ValueError("interior region needs Q != 0")
    if isinstance(init, SpinorPair):
        init = init.as_array()
    X0 = np.asarray(init, dtype=complex)
    if X0.ndim == 1:
        X0 = X0[:, None]
    ncols = X0.shape[1]
    s0 = chart_from_tortoise(bh, u_from, region)
    y0 = np.empty(1 + 2 * ncols, dtype=complex)
    y0[0] = s0
    y0[1:] = X0.T.reshape(-1)
    if u_from == u_to:
        return Trajectory(bh, mode, region, np.array([u_from]), np.array([s0]), X0[None].copy(), None, 0)
    sol = solve_ivp(
        _make_rhs(bh, mode, region),
        (u_from, u_to),
        y0,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=dense,
        max_step=max_step,
    )
    if not sol.success:
        raise SolverError(f"integration failed between u={u_from} and u={u_to}: {sol.message}")
    states = sol.y[1:].T.reshape(sol.t.size, ncols, 2).transpose(0, 2, 1)
    return Trajectory(bh, mode, region, sol.t, sol.y[0].real, states, sol.sol if dense else None, sol.nfev)


# --- coefficient extraction at infinity ------------------------------------------


@dataclass(frozen=True)
class TransmissionVector:
    """Frame coefficients f = (f+, f-) at infinity, with extraction diagnostics."""

    f_plus: complex
    f_minus: complex
    error: float = 0.0  # window-to-window change of the fitted limit
    residual: float = 0.0  # max relative misfit of the asymptotic model on the window
    u_window: tuple = (math.nan, math.nan)

    def as_array(self) -> np.ndarray:
        return np.array([self.f_plus, self.f_minus], dtype=complex)

    @property
    def wronskian(self) -> float:
        return abs(self.f_plus) ** 2 - abs(self.f_minus) ** 2


def _fit_limits(frame: AsymptoticFrame, M: float, us: np.ndarray, r: np.ndarray, X: np.ndarray, order: int):
    """Least-squares limits of the frame coordinates of X (shape (n, 2, ncols)).

    Model per component: g = f + sum_k a_k / r^k + E sum_k b_k / r^k with E the
    counter-rotating phase.  Phases are taken with ln r in place of ln u; the
    two differ by O(ln u / u), so the limits coincide while the model needs
    no logarithmic terms.
    """
    lr = np.log(r)
    lc = M * frame.m**2 / frame.w
    base = frame.w * us
    pp = base + (2 * M * frame.omega + lc) * lr
    pm = base + (-2 * M * frame.omega + lc) * lr
    g = np.einsum("ij,njk->nik", frame.inverse, X)
    g[:, 0, :] *= np.exp(-1j * pp)[:, None]
    g[:, 1, :] *= np.exp(1j * pm)[:, None]
    E = np.exp(-1j * (pp + pm))
    smooth = [r**-n for n in range(order + 1)]
    f = np.empty(X.shape[1:], dtype=complex)
    resid = 0.0
    for comp, osc in ((0, E), (1, np.conj(E))):
        B = np.array(smooth + [osc / r**n for n in range(1, order + 1)], dtype=complex).T
        coef, *_ = np.linalg.lstsq(B, g[:, comp, :], rcond=None)
        f[comp] = coef[0]
        scale = np.maximum(np.abs(g).max(axis=(0, 1)), 1e-300)
        resid = max(resid, float((np.abs(B @ coef - g[:, comp, :]).max(axis=0) / scale).max()))
    return f, resid


def _window_fit(traj: Trajectory, frame: AsymptoticFrame, lo: float, hi: float, npts: int, order: int):
    us = np.linspace(lo, hi, npts)
    y = traj.dense(us)
    r = traj.bh.r_plus + np.exp(y[0].real)
    X = y[1:].T.reshape(us.size, -1, 2).transpose(0, 2, 1)
    return _fit_limits(frame, traj.bh.M, us, r, X, order)


def extract_coeffs_infinity(
    bh: BlackHole, mode: ModeIndex, trajectory: Trajectory, order: int = 4, npts: int = 300
):
    """Frame coefficients at infinity from a dense trajectory reaching u_end.

    Fits the windows [u_end/6, u_end/2] and [u_end/3, u_end]; returns the
    coefficient matrix (2, ncols) from the outer window, the change between
    windows as error estimate, and the fit residual.
    """
    frame = AsymptoticFrame(mode.omega, mode.m, bh.M)
    U = trajectory.end_u
    lo_u = float(min(trajectory.u[0], trajectory.u[-1]))
    if U / 6 < lo_u or U <= 0:
        raise ValueError("trajectory must cover [u_end/6, u_end] with u_end > 0")
    f_in, _ = _window_fit(trajectory, frame, U / 6, U / 2, npts, order)
    f_out, resid = _window_fit(trajectory, frame, U / 3, U, npts, order)
    scale = max(float(np.abs(f_out).max()), 1e-300)
    err = float(np.abs(f_out - f_in).max() / scale)
    return f_out, err, resid


def default_infinity_start(mode: ModeIndex) -> float:
    """Initial outer window edge: a few tens of wavelengths, grown adaptively afterwards."""
    w = math.sqrt(abs(mode.omega**2 - mode.m**2))
    return max(600.0, 40.0 * 2 * math.pi / w)


def propagate_to_infinity(
    bh: BlackHole,
    mode: ModeIndex,
    u0: float,
    X0,
    tol: float = 1e-8,
    rtol: float = DEFAULT_RTOL,
    u_max: float = 2e6,
):
    """Integrate columns X0 from u0 outward and extract frame coefficients.

    The outer window edge doubles until two nested windows agree to ``tol``
    or the estimate stops improving (integration error floor).  Returns (f (2, ncols), error, residual, u_end, trajectory_from_u0).
    """
    if not mode.scattering:
        raise ValueError("propagate_to_infinity needs |omega| > m")
    X0 = np.asarray(X0, dtype=complex)
    if X0.ndim == 1:
        X0 = X0[:, None]
    U = max(default_infinity_start(mode), 6 * max(u0, 1.0))
    traj = integrate(bh, mode, Region.EXTERIOR, u0, U, X0, rtol=rtol, dense=True)
    pieces = [traj]
    last = math.inf
    while True:
        f, err, resid = extract_coeffs_infinity(bh, mode, traj, order=4)
        if err < tol or (err > 0.5 * last and err < 100 * tol):
            break
        last = err
        if 2 * U > u_max:
            raise SolverError(f"extraction at infinity did not converge (error {err:.2e} at u={U:.0f})")
        nxt = integrate(bh, mode, Region.EXTERIOR, U, 2 * U, traj.end, rtol=rtol, dense=True)
        pieces.append(nxt)
        traj = _join(pieces)
        U *= 2
    return f, err, resid, U, traj


class _PiecewiseDense:
    def __init__(self, pieces):
        self.pieces = pieces
        self.edges = np.array([p.u[-1] for p in pieces])

    def __call__(self, u):
        u = np.atleast_1d(u)
        idx = np.minimum(np.searchsorted(self.edges, u), len(self.pieces) - 1)
        out = None
        for i, p in enumerate(self.pieces):
            sel = idx == i
            if not sel.any():
                continue
            y = p.dense(u[sel])
            if out is None:
                out = np.empty((y.shape[0], u.size), dtype=complex)
            out[:, sel] = y
        return out


def _join(pieces) -> Trajectory:
    first = pieces[0]
    u = np.concatenate([first.u] + [p.u[1:] for p in pieces[1:]])
    chart = np.concatenate([first.chart] + [p.chart[1:] for p in pieces[1:]])
    states = np.concatenate([first.states] + [p.states[1:] for p in pieces[1:]])
    nfev = sum(p.nfev for p in pieces)
    return Trajectory(first.bh, first.mode, first.region, u, chart, states, _PiecewiseDense(pieces), nfev)


# --- horizons ------------------------------------------------------------------


EVENT = "event"
CAUCHY = "cauchy"


@dataclass(frozen=True)
class HorizonData:
    """Leading coefficients (plus, minus) at one horizon, one column per solution."""

    coeffs: np.ndarray  # shape (2, ncols)
    horizon: str
    region: Region
    u_window: tuple
    residual: float
    degenerate: bool = False

    @property
    def plus(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def minus(self) -> np.ndarray:
        return self.coeffs[1]


def horizon_window(bh: BlackHole, mode: ModeIndex, region: Region, horizon: str, tol: float = 1e-12, width=None):
    """Tortoise window (lo, hi) where the horizon asymptotics hold to about ``tol``.

    The neglected terms scale like sqrt|Delta| times the coupling ratio
    (|xi| + m r) / (|omega| r^2 + kappa r^2); the window edge is placed where
    that product falls to ``tol``.
    """
    from .geometry import tortoise_from_cauchy_offset, tortoise_from_offset

    width = 20.0 * bh.M if width is None else width
    if horizon == EVENT:
        rh, kappa = bh.r_plus, bh.kappa_plus
    elif horizon == CAUCHY:
        if region is not Region.INTERIOR:
            raise ValueError("the Cauchy horizon bounds the interior region only")
        rh, kappa = bh.r_minus, bh.kappa_minus
    else:
        raise ValueError(f"unknown horizon {horizon!r}")
    coupling = (abs(mode.xi) + mode.m * rh) / (rh * rh * (abs(mode.omega) + kappa))
    sqrt_delta = tol / (1.0 + coupling)
    offset = sqrt_delta**2 / bh.width
    if horizon == EVENT:
        x = offset if region is Region.EXTERIOR else -offset
        edge = tortoise_from_offset(bh, x, region)
        return edge - width, edge
    edge = tortoise_from_cauchy_offset(bh, offset)
    return edge, edge + width


def extract_coeffs_horizon(us, states, omega: float, horizon: str = EVENT, region: Region = Region.EXTERIOR, tol=1e-8):
    """Window averages of (X+ e^{-2 i omega u}, r+ X-) over samples near a horizon.

    ``states`` has shape (n, 2, ncols).  ``omega == 0`` is reported as
    degenerate: the two asymptotic solutions then share the same u-dependence
    and the window average cannot separate a residual from the data.
    """
    us = np.asarray(us, dtype=float)
    X = np.asarray(states, dtype=complex)
    if X.ndim == 2:
        X = X[..., None]
    plus = X[:, 0, :] * np.exp(-2j * omega * us)[:, None]
    minus = X[:, 1, :]
    coeffs = np.array([plus.mean(axis=0), minus.mean(axis=0)])
    scale = max(float(np.abs(coeffs).max()), 1e-300)
    resid = float(max(np.abs(plus - coeffs[0]).max(), np.abs(minus - coeffs[1]).max()) / scale)
    if resid > tol:
        raise SolverError(f"residual oscillation {resid:.2e} above tolerance in the {horizon} horizon window")
    window = (float(us.min()), float(us.max()))
    return HorizonData(coeffs, horizon, region, window, resid, degenerate=(omega == 0.0))


def propagate_to_horizon(
    bh: BlackHole, mode: ModeIndex, region: Region, u0: float, X0, horizon: str = EVENT, rtol=DEFAULT_RTOL, npts=64, tol=1e-8
):
    """Integrate columns X0 from u0 into the horizon window and extract the coefficients."""
    lo, hi = horizon_window(bh, mode, region, horizon)
    far, near = (lo, hi) if horizon == EVENT else (hi, lo)
    traj = integrate(bh, mode, region, u0, far, X0, rtol=rtol, dense=True)
    us = np.linspace(lo, hi, npts)
    return extract_coeffs_horizon(us, traj.at(us), mode.omega, horizon, region, tol), traj


# --- event horizon crossing -------------------------------------------------------


def _y_field(bh: BlackHole, mode: ModeIndex, omega: complex):
    rp, rm = bh.r_plus, bh.r_minus
    m, xi = mode.m, mode.xi
    iw = 1j * omega
    twoM = 2 * bh.M

    def field(r, y):
        delta = (r - rp) * (r - rm)
        d1 = (iw * (2 * r * r - delta) - (r - 0.5 * twoM)) * y[0] - (1j * m * r - xi) * y[1]
        d2 = (1j * m * r + xi) * y[0] - iw * y[1]
        return d1 / delta, d2

    return field


def _cross_once(bh, mode, omega, Y0, delta, r_match, upper, rtol):
    """Carry y-columns from r+ + delta around r+ to r_match along the complex contour."""
    field = _y_field(bh, mode, omega)
    sign = 1.0 if upper else -1.0
    n = Y0.shape[1]
    rp = bh.r_plus

    def arc(theta, yflat):
        e = delta * np.exp(1j * sign * theta)
        d1, d2 = field(rp + e, yflat.reshape(2, n))
        return (1j * sign * e * np.array([d1, d2])).reshape(-1)

    sol = solve_ivp(arc, (0.0, math.pi), Y0.reshape(-1).astype(complex), method="DOP853", rtol=rtol, atol=1e-14)
    if not sol.success:
        raise SolverError(f"horizon arc integration failed: {sol.message}")
    y = sol.y[:, -1]
    r_end = rp - delta
    if abs(r_match - r_end) > 0:

        def line(r, yflat):
            d1, d2 = field(r, yflat.reshape(2, n))
            return np.array([d1, d2]).reshape(-1)

        sol = solve_ivp(line, (r_end, r_match), y, method="DOP853", rtol=rtol, atol=1e-14)
        if not sol.success:
            raise SolverError(f"interior segment integration failed: {sol.message}")
        y = sol.y[:, -1]
    return y.reshape(2, n)


def _neville_zero(xs, values):
    """Polynomial extrapolation to x = 0; returns (value, error estimate) elementwise."""
    P = [np.asarray(v, dtype=complex) for v in values]
    n = len(P)
    prev_diag = P[0]
    best = P[0]
    err = np.full(P[0].shape, np.inf)
    table = list(P)
    for level in range(1, n):
        new = []
        for i in range(n - level):
            xi_, xj = xs[i], xs[i + level]
            new.append((xj * table[i] - xi_ * table[i + 1]) / (xj - xi_))
        table = new
        prev_diag, best = best, table[-1]
        err = np.abs(best - prev_diag)
    return best, err


@dataclass(frozen=True)
class CrossingResult:
    """Interior data at r_match obtained from exterior data at r+ + delta."""

    states: np.ndarray  # (2, ncols) interior X at u_match
    u_match: float
    r_match: float
    delta: float
    error: float  # extrapolation error estimate, relative to max |state|
    transfer: np.ndarray  # 2x2 map from exterior X(r+ + delta) to interior X(r_match)
    ladder: tuple


def default_crossing_radius(bh: BlackHole) -> float:
    return 0.5 * min(bh.width, bh.r_plus)


def crossing_matrix(
    bh: BlackHole,
    mode: ModeIndex,
    delta: float | None = None,
    r_match: float | None = None,
    eps0: float | None = None,
    rungs: int = 6,
    rtol: float = 1e-12,
    epsilon: float | None = None,
):
    """2x2 transfer X(r+ + delta) -> X(r_match) across the event horizon.

    Evaluated on the frequency ladder omega + i eps0 2^-j (j < rungs) and
    extrapolated to eps = 0.  The contour half-plane follows the sign of
    eps0 (upper for eps0 > 0).  Passing ``epsilon`` evaluates a single
    frequency omega + i epsilon without extrapolation.
    Returns (matrix, error estimate, ladder eps values).
    """
    if not bh.has_cauchy_horizon():
        raise ValueError("crossing into the interior needs Q != 0")
    delta = default_crossing_radius(bh) if delta is None else delta
    if not 0 < delta < bh.width:
        raise ValueError("contour radius must lie in (0, r+ - r-)")
    r_match = bh.r_plus - delta if r_match is None else r_match
    if not bh.r_minus < r_match < bh.r_plus:
        raise ValueError("r_match must lie strictly inside (r-, r+)")
    eps0 = 1e-2 * abs(mode.omega) if eps0 is None else eps0
    d_in = math.sqrt(delta * (bh.width + delta))
    d_out = math.sqrt(abs(bh.delta(r_match)))
    to_y = np.diag([1.0 / d_in, 1.0])
    to_x = np.diag([d_out, 1.0])

    def single(eps):
        upper = eps > 0 if eps != 0 else eps0 > 0
        Y = _cross_once(bh, mode, mode.omega + 1j * eps, to_y.astype(complex), delta, r_match, upper, rtol)
        return to_x @ Y

    if epsilon is not None:
        return single(epsilon), 0.0, (epsilon,)
    eps = [eps0 * 2.0**-j for j in range(rungs)]
    mats = [single(e) for e in eps]
    C, err = _neville_zero(eps, mats)
    scale = float(np.abs(C).max())
    floor = 50 * rtol * scale
    return C, float(err.max() + floor) / scale, tuple(eps)


def cross_event_horizon(
    bh: BlackHole,
    mode: ModeIndex,
    exterior_solution,
    r_match: float | None = None,
    eps0: float | None = None,
    rungs: int = 6,
    tol: float = 1e-6,
) -> CrossingResult:
    """Continue exterior data into the interior by the vanishing-eps frequency ladder.

    ``exterior_solution`` is a SpinorPair (or (X, u) with X of shape (2,) or
    (2, n)) in the exterior; its radius fixes the contour radius.
    """
    from .geometry import offsets_from_tortoise, tortoise

    if isinstance(exterior_solution, SpinorPair):
        X, u_e = exterior_solution.as_array()[:, None], exterior_solution.u
        if exterior_solution.region is not Region.EXTERIOR:
            raise ValueError("crossing starts from exterior data")
    else:
        X, u_e = exterior_solution
        X = np.asarray(X, dtype=complex)
        X = X[:, None] if X.ndim == 1 else X
    _, dp, _ = offsets_from_tortoise(bh, u_e, Region.EXTERIOR)
    C, err, eps = crossing_matrix(bh, mode, dp, r_match, eps0, rungs)
    r_match = bh.r_plus - dp if r_match is None else r_match
    if err > tol:
        raise SolverError(f"frequency ladder did not converge (error estimate {err:.2e})")
    return CrossingResult(C @ X, tortoise(bh, r_match, Region.INTERIOR), r_match, dp, err, C, eps)


# --- bound states -----------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    rate: float  # fitted exponential rate (positive for growth)
    log_power: float
    residual: float


def fit_exponential_rate(us, log_norm) -> RateFit:
    """Fit ln|X| = A + k u + B ln u + C/u + D ln u / u."""
    us = np.asarray(us, dtype=float)
    lu = np.log(us)
    B = np.array([np.ones_like(us), us, lu, 1 / us, lu / us]).T
    coef, *_ = np.linalg.lstsq(B, log_norm, rcond=None)
    resid = float(np.abs(B @ coef - log_norm).max())
    return RateFit(float(coef[1]), float(coef[2]), resid)


def measure_rate(bh: BlackHole, mode: ModeIndex, kind: str = "growing", u_lo: float | None = None, span: float | None = None, rtol=DEFAULT_RTOL) -> RateFit:
    """Measured asymptotic growth (outward) or decay rate of a bound-state solution.

    Growing: a generic state integrated outward.  Decaying: the decaying
    eigen-direction integrated inward from far out, where it dominates.
    The returned rate is positive for growth and negative for decay.
    """
    kappa = mode.kappa
    span = 300.0 / kappa if span is None else span
    span = min(span, 600.0 / kappa)  # keep e^(kappa span) well inside double range
    # the 1/u expansion needs u beyond the Coulomb scale M m^2 / kappa^2
    u_lo = 50.0 + 4.0 / kappa + 20.0 * bh.M * mode.m**2 / kappa**2 if u_lo is None else u_lo
    us = np.linspace(u_lo, u_lo + span, 400)
    if kind == "growing":
        traj = integrate(bh, mode, Region.EXTERIOR, u_lo - 10.0 / kappa, u_lo + span, np.array([1.0, 1.0j]), rtol=rtol, dense=True)
    elif kind == "decaying":
        u_hi = u_lo + span + 10.0 / kappa
        X0 = init_bound_state(bh, mode, u_hi, "decaying").as_array()
        traj = integrate(bh, mode, Region.EXTERIOR, u_hi, u_lo, X0, rtol=rtol, dense=True)
    else:
        raise ValueError(f"kind must be 'growing' or 'decaying', got {kind!r}")
    X = traj.at(us)[:, :, 0]
    return fit_exponential_rate(us, np.log(np.linalg.norm(X, axis=1)))
