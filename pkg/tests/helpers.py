"""Shared, cached builders for expensive test fixtures.

Used both by the pytest fixtures and by the acceptance suite run as a script.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from rndirac import evolve as ev
from rndirac.geometry import BlackHole
from rndirac.radial_solver import ModeIndex
from rndirac.scattering import solve_phi2

# evolution setup: one (k, l) sector, compact bump carried at omega0 = 0.8
EVOLVE = dict(Q=0.6, m=0.1, k=0.5, l=1, u=(20.0, 300.0, 2801), band=(0.2, 1.4, 76), center=150.0, half_width=80.0, carrier=0.8)


@functools.lru_cache(maxsize=1)
def evolve_setup():
    p = EVOLVE
    bh = BlackHole(1.0, p["Q"])
    u = np.linspace(*p["u"])
    ws, wt = ev.omega_grid(*p["band"], p["m"], symmetric=True)
    basis = ev.build_basis(bh, p["k"], p["l"], p["m"], ws, wt, u)
    prof = ev.bump_profile(bh, u, p["center"], p["half_width"], p["carrier"], p["m"])
    return basis, prof, ev.project(prof, basis)


# signed labels ordered by |xi|: the first three are 1, -1, 2
FIRST_LABELS = (1, -1, 2)


def random_scattering_modes(n=100, seed=20240531, m=0.1):
    """(bh, mode) pairs with Q in {0.3, 0.6, 0.9}, omega in (m, 5m), k = +-1/2, l among the first three labels."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        bh = BlackHole(1.0, float(rng.choice([0.3, 0.6, 0.9])))
        omega = float(rng.uniform(m, 5 * m))
        while abs(omega - m) < 1e-3 * m:
            omega = float(rng.uniform(m, 5 * m))
        k = float(rng.choice([0.5, -0.5]))
        l = int(rng.choice(FIRST_LABELS))
        out.append((bh, ModeIndex.from_angular(omega, k, l, m)))
    return out


@functools.lru_cache(maxsize=1)
def random_scattering_results():
    return [(bh, solve_phi2(bh, mode)) for bh, mode in random_scattering_modes()]


def drift_of(res) -> float:
    """Largest relative Wronskian drift over every trajectory of a Phi_2 solve."""
    return max(v for k, v in res.diagnostics.items() if k.startswith("drift") or k == "wronskian_drift")


def random_bound_modes(n, seed, m=0.1, lim=0.95):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        bh = BlackHole(1.0, float(rng.choice([0.3, 0.6, 0.9])))
        omega = float(rng.uniform(-lim * m, lim * m))
        if abs(omega) < 1e-3 * m:
            omega = math.copysign(1e-3 * m, omega or 1.0)
        k = float(rng.choice([0.5, -0.5]))
        l = int(rng.choice(FIRST_LABELS))
        out.append((bh, ModeIndex.from_angular(omega, k, l, m)))
    return out
