"""Reconstruction, Parseval and norm drift of the single-sector propagator versus omega resolution.

    python3 scripts/reconstruction_study.py --counts 41 76 --out results/
"""

import argparse
import csv
import math
import time
from pathlib import Path

import numpy as np

from rndirac import evolve as ev
from rndirac.geometry import BlackHole


def study(count, args):
    bh = BlackHole(1.0, args.Q)
    u = np.linspace(args.u_min, args.u_max, args.u_count)
    ws, wt = ev.omega_grid(args.band_min, args.band_max, count, args.m, symmetric=True)
    t0 = time.perf_counter()
    basis = ev.build_basis(bh, 0.5, 1, args.m, ws, wt, u, threads=args.threads)
    build = time.perf_counter() - t0
    prof = ev.bump_profile(bh, u, args.center, args.half_width, args.carrier, args.m)
    c = ev.project(prof, basis)
    n0 = prof.norm()
    rec = ev.synthesize(c)
    samples = ev.time_series(c, np.linspace(0.0, args.tau_max, 11), 0.0, math.inf)
    return {
        "band_count": count,
        "d_omega": basis.spacing,
        "alias_period": 2 * math.pi / basis.spacing,
        "reconstruction_error": math.sqrt(rec.with_states(rec.states - prof.states).norm() / n0),
        "parseval_error": abs(ev.coefficient_product(c, c) - n0) / n0,
        "norm_drift": ev.norm_drift(samples),
        "build_seconds": build,
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--counts", type=int, nargs="+", default=[41, 76])
    p.add_argument("--Q", type=float, default=0.6)
    p.add_argument("--m", type=float, default=0.1)
    p.add_argument("--u-min", type=float, default=20.0)
    p.add_argument("--u-max", type=float, default=300.0)
    p.add_argument("--u-count", type=int, default=2801)
    p.add_argument("--band-min", type=float, default=0.2)
    p.add_argument("--band-max", type=float, default=1.4)
    p.add_argument("--center", type=float, default=150.0)
    p.add_argument("--half-width", type=float, default=80.0)
    p.add_argument("--carrier", type=float, default=0.8)
    p.add_argument("--tau-max", type=float, default=50.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("."))
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in args.counts:
        try:
            rows.append(study(n, args))
        except ev.AliasingError as exc:
            print(f"band_count {n}: {exc}")
            continue
        print(", ".join(f"{k}={v:.3g}" for k, v in rows[-1].items()), flush=True)
    if rows:
        with open(args.out / "reconstruction_study.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
