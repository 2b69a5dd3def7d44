"""Does vartheta depend on (omega, m) only through omega/m?  Also the omega -> -omega conjugation check.

    python3 scripts/vartheta_mass_scaling.py --out results/
"""

import argparse
import csv
from pathlib import Path

from rndirac.geometry import BlackHole
from rndirac.radial_solver import ModeIndex
from rndirac.scattering import solve_phi2


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--Q", type=float, default=0.6)
    p.add_argument("--masses", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    p.add_argument("--ratios", type=float, nargs="+", default=[1.5, 3.0])
    p.add_argument("--out", type=Path, default=Path("."))
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    bh = BlackHole(1.0, args.Q)
    rows = []
    for q in args.ratios:
        for m in args.masses:
            mode = ModeIndex.from_angular(q * m, 0.5, 1, m)
            th = solve_phi2(bh, mode).vartheta
            th_conj = solve_phi2(bh, mode.conjugate()).vartheta
            rows.append(dict(omega_over_m=q, m=m, omega=q * m, vartheta=th, conjugate_difference=abs(th - th_conj)))
            print(", ".join(f"{k}={v:.6g}" for k, v in rows[-1].items()), flush=True)
    with open(args.out / "vartheta_mass_scaling.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
