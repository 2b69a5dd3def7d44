"""Coefficient-space operators at one mode: T-matrix, fermionic signature and flux spectra.

Conventions:

* T = 1/2 [[1, conj(t)], [t, 1]] for |omega| > m, with t = e^{-i(alpha - beta)} tanh(vartheta).
  This Hermitian arrangement is the one for which 2 T^{-1} equals the Gram
  matrix of the incoming channels (from infinity and from the event horizon),
  so that the projection formula and the coefficient scalar product agree
  with the conserved scalar product.
* T = 1/2 diag(q, 0) for |omega| < m with q = 1 by default.
* n_F = 1 / (1 + e^{2 vartheta}) = (1 - tanh vartheta) / 2.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import BlackHole
from .radial_solver import ModeIndex
from .scattering import ScatterResult, solve_phi2

J = np.diag([1.0, -1.0])


def eps(omega: float) -> int:
    return 1 if omega > 0 else (-1 if omega < 0 else 0)


def fermi_weight(vartheta: float) -> float:
    """n_F = 1/(1 + e^{2 vartheta}), evaluated without overflow."""
    return 0.5 * (1.0 - math.tanh(vartheta))


@dataclass(frozen=True)
class TMatrix:
    scattering: bool
    matrix: np.ndarray
    t: complex = 0.0
    q: float = 1.0

    @property
    def vartheta(self) -> float:
        return math.atanh(abs(self.t)) if self.scattering else math.nan

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def inverse(self) -> np.ndarray:
        if not self.scattering:
            raise ValueError("T is singular for |omega| < m")
        return np.linalg.inv(self.matrix)


def t_from_angles(vartheta: float, alpha: float, beta: float) -> complex:
    return complex(np.exp(-1j * (alpha - beta)) * math.tanh(vartheta))


def t_matrix(mode: ModeIndex | None = None, scatter: ScatterResult | None = None, t: complex | None = None, q: float = 1.0) -> TMatrix:
    """T for a mode from its scattering result (or directly from t)."""
    scattering = mode.scattering if mode is not None else True
    if not scattering:
        return TMatrix(False, 0.5 * np.diag([q, 0.0]).astype(complex), 0.0, q)
    if t is None:
        if scatter is None:
            raise ValueError("need a ScatterResult or t for |omega| > m")
        t = scatter.t
    if not abs(t) < 1.0:
        raise ValueError(f"|t| = {abs(t)} must be < 1")
    T = 0.5 * np.array([[1.0, np.conj(t)], [t, 1.0]], dtype=complex)
    return TMatrix(True, T, complex(t), q)


def signature_eigenvalues(omega: float, m: float, vartheta: float) -> tuple[float, float]:
    """(lambda_+, lambda_-) = (2 eps n_F, 2 eps (1 - n_F)); both zero for |omega| <= m."""
    if abs(omega) <= m:
        return 0.0, 0.0
    e = eps(omega)
    lam_plus = 2.0 * e * fermi_weight(vartheta)
    # the complement keeps lambda_+ + lambda_- = 2 eps exact in floating point
    return lam_plus, 2.0 * e - lam_plus


def signature_apply(coeffs, mode: ModeIndex, T: TMatrix) -> np.ndarray:
    """(S psi)_i = 2 eps(omega) 1_{|omega| > m} sum_j T_ij psi_j."""
    c = np.asarray(coeffs, dtype=complex)
    if not mode.scattering:
        return np.zeros_like(c)
    return 2.0 * eps(mode.omega) * (T.matrix @ c)


@dataclass(frozen=True)
class FluxMatrix:
    M: np.ndarray  # T J T
    eigenvalues: tuple[float, float]  # closed form (lambda_+, lambda_-) = (-sqrt(2 n_F), +sqrt(2 n_F))
    M_eigenvalues: np.ndarray
    kernel_eigenvalues: np.ndarray  # of -T J, the coefficient-space kernel for Omega = J


def flux_eigenvalues(vartheta: float) -> tuple[float, float]:
    s = math.sqrt(2.0 * fermi_weight(vartheta))
    return -s, s


def flux_matrix(T: TMatrix) -> FluxMatrix:
    if not T.scattering:
        raise ValueError("flux spectrum is defined for |omega| > m only")
    M = T.matrix @ J @ T.matrix
    K = -T.matrix @ J
    kev = np.sort(np.linalg.eigvals(K).real)
    return FluxMatrix(M, flux_eigenvalues(T.vartheta), np.sort(np.linalg.eigvals(M).real), kev)


def projector_indicator(omega: float, m: float, vartheta: float) -> tuple[int, int]:
    """Per eigenbranch: 1 if the signature eigenvalue is negative, else 0."""
    return tuple(int(lam < 0) for lam in signature_eigenvalues(omega, m, vartheta))


# --- spectrum scan ----------------------------------------------------------------


@dataclass
class SpectrumRecord:
    index: int
    omega: float
    k: float
    l: int
    m: float
    vartheta: float
    n_F: float
    lambda_plus_S: float
    lambda_minus_S: float
    lambda_plus_B: float
    lambda_minus_B: float
    projector_plus: int
    projector_minus: int
    pseudo_norm_residual: float = math.nan
    wronskian_drift: float = math.nan
    status: str = "ok"
    message: str = ""

    def check(self) -> list[str]:
        """Violated record invariants (empty when all hold)."""
        bad = []
        if self.status != "ok":
            return bad
        lam_s = (self.lambda_plus_S, self.lambda_minus_S)
        lam_b = (self.lambda_plus_B, self.lambda_minus_B)
        if abs(self.omega) > self.m:
            if not 0.0 < self.n_F <= 0.5:
                bad.append("n_F outside (0, 1/2]")
            if sum(lam_s) != 2 * eps(self.omega):
                bad.append("signature eigenvalues do not sum to 2 eps(omega)")
        elif lam_s != (0.0, 0.0):
            bad.append("signature operator nonzero inside the mass gap")
        if max(abs(v) for v in lam_s) > 2.0 + 1e-9:
            bad.append("|lambda(S)| > 2")
        if max(abs(v) for v in lam_b) > 1.0 + 1e-9:
            bad.append("|lambda(B)| > 1")
        return bad


RECORD_FIELDS = [f for f in SpectrumRecord.__dataclass_fields__]


def spectrum_record(bh: BlackHole, index: int, omega: float, k: float, l: int, m: float, xi: float | None = None) -> SpectrumRecord:
    try:
        mode = ModeIndex(omega, k, l, m, xi) if xi is not None else ModeIndex.from_angular(omega, k, l, m)
        if not mode.scattering:
            return SpectrumRecord(index, omega, k, l, m, math.nan, math.nan, 0.0, 0.0, 0.0, 0.0, 0, 0)
        res = solve_phi2(bh, mode)
        th = res.vartheta
        ls = signature_eigenvalues(omega, m, th)
        lb = flux_eigenvalues(th)
        pp, pm = projector_indicator(omega, m, th)
        d = res.diagnostics
        return SpectrumRecord(
            index, omega, k, l, m, th, fermi_weight(th), *ls, *lb, pp, pm,
            d["pseudo_norm_residual"], d["wronskian_drift"],
        )  # fmt: skip
    except Exception as exc:  # per-mode failures are recorded, the scan continues
        nan = math.nan
        return SpectrumRecord(index, omega, k, l, m, nan, nan, nan, nan, nan, nan, 0, 0, status="failed", message=f"{type(exc).__name__}: {exc}")


def scan_grid(omegas, kl_pairs, masses) -> list[tuple]:
    """Deterministic grid order: mass, then (k, l), then omega."""
    out = []
    for m in masses:
        for k, l in kl_pairs:
            for w in omegas:
                out.append((float(w), float(k), int(l), float(m)))
    return out


def _read_done(path) -> dict[int, SpectrumRecord]:
    done = {}
    if not path or not os.path.exists(path):
        return done
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                rec = _record_from_row(row)
            except (KeyError, ValueError):
                continue  # truncated trailing line from an interrupted run
            done[rec.index] = rec
    return done


def _record_from_row(row: dict) -> SpectrumRecord:
    kw = {}
    for name, f in SpectrumRecord.__dataclass_fields__.items():
        v = row[name]
        if f.type in ("int",):
            kw[name] = int(v)
        elif f.type in ("float",):
            kw[name] = float(v)
        else:
            kw[name] = v
    return SpectrumRecord(**kw)


def _row(rec: SpectrumRecord) -> list:
    return [repr(float(v)) if isinstance(v, float) else v for v in asdict(rec).values()]


def _rewrite(path, records):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        for rec in records:
            w.writerow(_row(rec))
    os.replace(tmp, path)


def spectrum_scan(
    bh: BlackHole,
    omegas,
    kl_pairs,
    masses,
    out_csv=None,
    resume: bool = False,
    threads: int = 1,
    progress=None,
) -> list[SpectrumRecord]:
    """One SpectrumRecord per grid point in deterministic order.

    With ``out_csv`` each finished record is appended immediately, so an
    interrupted scan can be resumed (``resume=True``) without recomputing or
    duplicating rows; the file is rewritten in grid order at the end.
    """
    grid = scan_grid(omegas, kl_pairs, masses)
    for w, _, _, m in grid:
        if abs(abs(w) - m) <= 1e-12 * m:
            raise ValueError(f"grid point omega={w} sits on the mass shell m={m}")
    done = _read_done(out_csv) if resume else {}
    todo = [(i, g) for i, g in enumerate(grid) if i not in done]
    results = dict(done)
    fh = writer = None
    if out_csv:
        fresh = not (resume and os.path.exists(out_csv))
        if fresh:
            _rewrite(out_csv, [])
        fh = open(out_csv, "a", newline="")
        writer = csv.writer(fh)
    try:
        if threads > 1 and len(todo) > 1:
            with cf.ProcessPoolExecutor(max_workers=threads) as pool:
                futs = {pool.submit(spectrum_record, bh, i, *g): i for i, g in todo}
                for fut in cf.as_completed(futs):
                    rec = fut.result()
                    results[rec.index] = rec
                    if writer:
                        writer.writerow(_row(rec))
                        fh.flush()
                    if progress:
                        progress(rec)
        else:
            for i, g in todo:
                rec = spectrum_record(bh, i, *g)
                results[i] = rec
                if writer:
                    writer.writerow(_row(rec))
                    fh.flush()
                if progress:
                    progress(rec)
    finally:
        if fh:
            fh.close()
    ordered = [results[i] for i in range(len(grid))]
    if out_csv:
        _rewrite(out_csv, ordered)
    return ordered
