import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rndirac.geometry import BlackHole
from rndirac.operators import (
    RECORD_FIELDS,
    fermi_weight,
    flux_eigenvalues,
    flux_matrix,
    projector_indicator,
    signature_apply,
    signature_eigenvalues,
    spectrum_scan,
    t_from_angles,
    t_matrix,
)
from rndirac.radial_solver import ModeIndex

BH = BlackHole(1.0, 0.6)
SCAT = ModeIndex(0.3, 0.5, 1, 0.1, 1.0)
GAP = ModeIndex(0.05, 0.5, 1, 0.1, 1.0)

thetas = st.floats(0.0, 12.0)
phases = st.floats(-math.pi, math.pi)
cvec = st.tuples(*[st.floats(-1, 1)] * 4).map(lambda v: np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]]))


def test_t_identity_at_zero_vartheta():
    np.testing.assert_array_equal(t_matrix(t=0.0).matrix, 0.5 * np.eye(2))


@given(th=thetas, a=phases, b=phases)
def test_t_eigenvalues_and_determinant(th, a, b):
    T = t_matrix(t=t_from_angles(th, a, b))
    tanh = math.tanh(th)
    np.testing.assert_allclose(T.eigenvalues(), [0.5 * (1 - tanh), 0.5 * (1 + tanh)], atol=1e-12)
    assert np.linalg.det(T.matrix).real == pytest.approx(0.25 * (1 - tanh**2), abs=1e-15)
    np.testing.assert_allclose(T.matrix, T.matrix.conj().T)


def test_t_bound_case_and_errors():
    T = t_matrix(GAP)
    np.testing.assert_array_equal(T.matrix, 0.5 * np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        T.inverse()
    with pytest.raises(ValueError):
        t_matrix(t=1.0)
    with pytest.raises(ValueError):
        t_matrix(SCAT)


def test_signature_examples():
    assert signature_eigenvalues(0.2, 0.1, 0.0) == (1.0, 1.0)
    assert signature_eigenvalues(-0.2, 0.1, 0.0) == (-1.0, -1.0)
    for w in (0.05, -0.1, 0.1):
        assert signature_eigenvalues(w, 0.1, 3.0) == (0.0, 0.0)
    lp, lm = signature_eigenvalues(0.2, 0.1, 40.0)
    assert lp == pytest.approx(0.0, abs=1e-30) and lm == 2.0


@given(th=thetas, w=st.floats(0.1001, 5.0), s=st.sampled_from([1, -1]))
def test_signature_identities(th, w, s):
    lp, lm = signature_eigenvalues(s * w, 0.1, th)
    assert lp + lm == 2 * s
    assert 0.5 * (1 - math.tanh(th)) == fermi_weight(th)
    assert abs(lp) <= 2 and abs(lm) <= 2
    lp2, _ = signature_eigenvalues(s * w, 0.1, th + 0.1)
    assert abs(lp2) <= abs(lp)


@given(th=thetas, a=phases, b=phases, psi=cvec)
def test_signature_apply_bounds_and_eigenvectors(th, a, b, psi):
    T = t_matrix(t=t_from_angles(th, a, b))
    out = signature_apply(psi, SCAT, T)
    assert np.linalg.norm(out) <= 2 * np.linalg.norm(psi) + 1e-12
    vals, vecs = np.linalg.eigh(T.matrix)
    for lam, v in zip(vals, vecs.T):
        np.testing.assert_allclose(signature_apply(v, SCAT, T), 2 * lam * v, atol=1e-12)
    np.testing.assert_array_equal(signature_apply(psi, GAP, T), 0)


def test_signature_apply_identity_at_zero_vartheta():
    T = t_matrix(t=0.0)
    psi = np.array([0.3 + 1j, -2.0])
    np.testing.assert_allclose(signature_apply(psi, ModeIndex(-0.3, 0.5, 1, 0.1, 1.0), T), -psi)


@settings(max_examples=200)
@given(th=st.floats(0.0, 8.0), a=phases, b=phases, psi=cvec, phi=cvec, s=st.sampled_from([1, -1]))
def test_signature_symmetric_in_pairing(th, a, b, psi, phi, s):
    T = t_matrix(t=t_from_angles(th, a, b))
    md = ModeIndex(s * 0.3, 0.5, 1, 0.1, 1.0)
    Tinv = T.inverse()
    lhs = np.vdot(psi, Tinv @ signature_apply(phi, md, T))
    rhs = np.conj(np.vdot(phi, Tinv @ signature_apply(psi, md, T)))
    # T has condition number e^{2 vartheta}; roundoff in T^{-1} scales with it
    assert abs(lhs - rhs) <= 1e-14 * math.exp(2 * th) * max(1.0, abs(lhs))


def test_flux_closed_form_examples():
    assert flux_eigenvalues(0.0) == (-1.0, 1.0)
    for th in (0.1, 1.0, 5.0):
        lm, lp = flux_eigenvalues(th)
        assert lm * lp == pytest.approx(-(1 - math.tanh(th)), abs=1e-15)
        assert lp**2 == pytest.approx(2 * fermi_weight(th), abs=1e-15)
        assert 2 * fermi_weight(th) == pytest.approx(1 - math.tanh(th), abs=1e-12)


def test_flux_matrix_diagnostic():
    T = t_matrix(t=t_from_angles(0.7, 0.2, -0.4))
    F = flux_matrix(T)
    np.testing.assert_allclose(F.M, T.matrix @ np.diag([1, -1]) @ T.matrix)
    # the kernel -T J has eigenvalues +- sech(vartheta) / 2
    np.testing.assert_allclose(np.abs(F.kernel_eigenvalues), [0.5 / math.cosh(0.7)] * 2, atol=1e-12)
    with pytest.raises(ValueError):
        flux_matrix(t_matrix(GAP))


@pytest.mark.parametrize(
    "w,expected", [(-0.2, (1, 1)), (0.2, (0, 0)), (0.05, (0, 0)), (-0.05, (0, 0))]
)
def test_projector_indicator(w, expected):
    assert projector_indicator(w, 0.1, 0.4) == expected


OMEGAS = (-0.3, -0.05, 0.2, 0.35)


@pytest.fixture(scope="module")
def scan(tmp_path_factory):
    path = tmp_path_factory.mktemp("scan") / "spectrum.csv"
    return path, spectrum_scan(BH, OMEGAS, ((0.5, 1),), (0.1,), out_csv=str(path))


def test_scan_records_and_invariants(scan):
    path, recs = scan
    assert [r.index for r in recs] == list(range(len(OMEGAS)))
    assert all(r.status == "ok" and not r.check() for r in recs)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == RECORD_FIELDS and len(rows) == len(OMEGAS)
    gap = recs[1]
    assert math.isnan(gap.vartheta) and (gap.lambda_plus_S, gap.lambda_minus_S) == (0.0, 0.0)


def test_scan_refinement_keeps_shared_nodes(scan):
    _, recs = scan
    finer = spectrum_scan(BH, (-0.3, 0.2, 0.27, 0.35), ((0.5, 1),), (0.1,))
    by_omega = {r.omega: r for r in finer}
    for r in recs:
        if r.omega in by_omega:
            assert by_omega[r.omega].vartheta == r.vartheta or math.isnan(r.vartheta)


def test_scan_resume_without_duplicates(scan, tmp_path):
    path, recs = scan
    lines = path.read_text().splitlines()
    partial = tmp_path / "spectrum.csv"
    # interrupted run: two finished rows and a truncated third line
    partial.write_text("\n".join(lines[:3]) + "\n" + lines[3][:10])
    calls = []
    again = spectrum_scan(BH, OMEGAS, ((0.5, 1),), (0.1,), out_csv=str(partial), resume=True, progress=calls.append)
    assert sorted(c.index for c in calls) == [2, 3]
    assert partial.read_text() == path.read_text()
    assert [r.vartheta for r in again] == pytest.approx([r.vartheta for r in recs], nan_ok=True)


def test_scan_records_failures_and_rejects_shell():
    recs = spectrum_scan(BH, (0.3,), ((0.5, 40),), (0.1,))
    assert recs[0].status == "failed" and "IndexError" in recs[0].message
    with pytest.raises(ValueError):
        spectrum_scan(BH, (0.1,), ((0.5, 1),), (0.1,))
