"""Infinity extraction and pseudo-normalisation accuracy as omega approaches the mass shell.

Near threshold vartheta grows and |b|^2 - |a|^2 = 1 becomes a difference of
two numbers of size cosh^2 vartheta; the relative column shows the residual
measured against |a|^2 + |b|^2.

    python3 scripts/threshold_extraction_study.py --out results/
"""

import argparse
import csv
from pathlib import Path

from rndirac.geometry import BlackHole
from rndirac.radial_solver import ModeIndex
from rndirac.scattering import solve_mode, solve_phi2


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--Q", type=float, default=0.9)
    p.add_argument("--m", type=float, default=0.1)
    p.add_argument("--ratios", type=float, nargs="+", default=[1.0015, 1.01, 1.0424, 1.2, 2.0, 4.0])
    p.add_argument("--rtols", type=float, nargs="+", default=[1e-11, 1e-13])
    p.add_argument("--out", type=Path, default=Path("."))
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    bh = BlackHole(1.0, args.Q)
    rows = []
    for rtol in args.rtols:
        for q in args.ratios:
            mode = ModeIndex.from_angular(q * args.m, 0.5, 2, args.m)
            res = solve_phi2(bh, mode, solution=solve_mode(bh, mode, rtol=rtol))
            d = res.diagnostics
            scale = abs(res.a) ** 2 + abs(res.b) ** 2
            rows.append(
                dict(
                    rtol=rtol,
                    omega_over_m=q,
                    vartheta=res.vartheta,
                    u_infinity=d["u_infinity"],
                    infinity_error=d["infinity_error"],
                    pseudo_norm_residual=abs(res.pseudo_norm - 1),
                    relative_residual=abs(res.pseudo_norm - 1) / scale,
                    wronskian_drift=d["wronskian_drift"],
                )
            )
            print(", ".join(f"{k}={v:.4g}" for k, v in rows[-1].items()), flush=True)
    with open(args.out / "threshold_extraction_study.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
