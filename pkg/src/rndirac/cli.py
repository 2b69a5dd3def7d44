"""Command-line interface: mode, spectrum, omega, evolve, selftest.

Configuration is a flat ``key = value`` file (``#`` starts a comment) plus
``key=value`` overrides on the command line.  Every output table is written
next to a JSON manifest holding the resolved configuration, its hash,
library versions and tolerances.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .geometry import BlackHole, ExtremalError, Region
from .radial_solver import DEFAULT_RTOL, ModeIndex, SolverError

log = logging.getLogger("rndirac")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
SCHEMA_VERSION = "1"
SCHEMA_PATH = Path(__file__).with_name("schema") / "csv_schema.md"


class ConfigError(ValueError):
    pass


# --- configuration ----------------------------------------------------------------

# key -> (parser, default); None default means required when used
_FLOAT, _INT = float, int


def _floats(v: str) -> tuple[float, ...]:
    return tuple(float(x) for x in v.replace(";", ",").split(",") if x.strip())


def _pairs(v: str) -> tuple[tuple[float, int], ...]:
    out = []
    for item in v.replace(";", ",").split(","):
        if item.strip():
            k, l = item.split(":")
            out.append((float(k), int(l)))
    return tuple(out)


KEYS = {
    "M": (_FLOAT, 1.0),
    "Q": (_FLOAT, 0.6),
    "m": (_FLOAT, 0.1),
    "omega": (_FLOAT, None),
    "k": (_FLOAT, 0.5),
    "l": (_INT, 1),
    "tol": (_FLOAT, DEFAULT_RTOL),
    "threads": (_INT, 1),
    # spectrum grid
    "omegas": (_floats, ()),
    "omega_min": (_FLOAT, None),
    "omega_max": (_FLOAT, None),
    "omega_count": (_INT, 0),
    "masses": (_floats, ()),
    "kl": (_pairs, ((0.5, 1),)),
    # omega study
    "m_prime_rel": (_floats, (1e-4, 1e-3, 1e-2)),
    "flux_rel": (_floats, (4e-3, 2e-3, 1e-3)),
    # evolve
    "center": (_FLOAT, 150.0),
    "half_width": (_FLOAT, 80.0),
    "carrier": (_FLOAT, 0.8),
    "band_min": (_FLOAT, 0.2),
    "band_max": (_FLOAT, 1.4),
    "band_count": (_INT, 76),
    "gap": (_FLOAT, 0.05),
    "u_min": (_FLOAT, 20.0),
    "u_max": (_FLOAT, 300.0),
    "u_count": (_INT, 2801),
    "tau_max": (_FLOAT, 50.0),
    "tau_count": (_INT, 11),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        v = self.values[key]
        if v is None:
            raise ConfigError(f"missing required key {key!r}")
        return v

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def canonical(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(self.values.items())}

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()

    def black_hole(self) -> BlackHole:
        try:
            return BlackHole(self["M"], self["Q"])
        except (ExtremalError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def omega_grid(self) -> tuple[float, ...]:
        if self.values["omegas"]:
            return tuple(self.values["omegas"])
        n = self.values["omega_count"]
        if n <= 0:
            return ()
        lo, hi = self["omega_min"], self["omega_max"]
        return tuple(float(w) for w in np.linspace(lo, hi, n)) if n > 1 else (float(lo),)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        out[key] = val
    return out


def build_config(raw: dict) -> RunConfig:
    values = {}
    for key, (parse, default) in KEYS.items():
        values[key] = default
    for key, text in raw.items():
        if key not in KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            values[key] = KEYS[key][0](text) if isinstance(text, str) else text
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {text!r}") from exc
    cfg = RunConfig(values)
    _validate(cfg)
    return cfg


def _on_shell(w: float, m: float) -> bool:
    return abs(abs(w) - m) <= 1e-12 * m


def _validate(cfg: RunConfig):
    v = cfg.values
    cfg.black_hole()
    if not v["tol"] > 0 or v["tol"] >= 1e-3:
        raise ConfigError("tol must lie in (0, 1e-3)")
    if v["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    masses = v["masses"] or (v["m"],)
    if any(mm <= 0 for mm in masses):
        raise ConfigError("masses must be positive")
    for k, l in v["kl"] + ((v["k"], v["l"]),):
        if abs((k - 0.5) - round(k - 0.5)) > 1e-12:
            raise ConfigError(f"k={k} is not a half-integer")
        if l == 0:
            raise ConfigError("l = 0 is not a mode label")
    omegas = list(cfg.omega_grid())
    if v["omega"] is not None:
        omegas.append(v["omega"])
    for w in omegas:
        if w == 0:
            raise ConfigError("omega = 0 is excluded")
        for mm in masses:
            if _on_shell(w, mm):
                raise ConfigError(f"omega={w} lies on the mass shell |omega| = m = {mm}")


def load_config(path: str | None, overrides: list[str], tol: float | None = None, threads: int | None = None) -> RunConfig:
    raw = {}
    if path:
        try:
            raw.update(parse_config_text(Path(path).read_text(), path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, val = item.split("=", 1)
        raw[k.strip()] = val.strip()
    if tol is not None:
        raw["tol"] = repr(tol)
    if threads is not None:
        raw["threads"] = str(threads)
    return build_config(raw)


# --- outputs ----------------------------------------------------------------------


def manifest(cfg: RunConfig, command: str, outputs: list[str], summary: dict | None = None) -> dict:
    return {
        "command": command,
        "schema_version": SCHEMA_VERSION,
        "config": cfg.canonical(),
        "config_hash": cfg.digest(),
        "versions": {
            "rndirac": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "tolerances": {"rtol": cfg["tol"], "atol": 1e-14},
        "outputs": outputs,
        "summary": summary or {},
    }


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_table(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_manifest(out: Path, command: str, cfg: RunConfig, outputs, summary=None) -> Path:
    path = out / f"{command}.manifest.json"
    data = manifest(cfg, command, [str(o) for o in outputs], summary)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


def _finished(out: Path, command: str, cfg: RunConfig) -> bool:
    path = out / f"{command}.manifest.json"
    if not path.exists():
        return False
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError:
        return False
    return data.get("config_hash") == cfg.digest() and all((out / o).exists() for o in data.get("outputs", []))


# --- commands ---------------------------------------------------------------------

MODE_COLUMNS = [
    "omega", "k", "l", "m", "xi", "re_a", "im_a", "re_b", "im_b", "vartheta", "re_t", "im_t",
    "pseudo_norm_residual", "wronskian_drift", "infinity_error", "crossing_error", "regularity_residual",
]  # fmt: skip
TRAJECTORY_COLUMNS = ["region", "u", "r", "re_x_plus", "im_x_plus", "re_x_minus_scaled", "im_x_minus_scaled"]


def cmd_mode(cfg: RunConfig, out: Path, resume: bool = False) -> dict:
    from .radial_solver import integrate, horizon_window, CAUCHY, EVENT
    from .scattering import solve_mode, solve_phi2

    if resume and _finished(out, "mode", cfg):
        log.info("mode: outputs up to date, skipped")
        return {"skipped": True}
    bh = cfg.black_hole()
    mode = ModeIndex.from_angular(cfg["omega"], cfg["k"], cfg["l"], cfg["m"])
    sol = solve_mode(bh, mode, rtol=cfg["tol"])
    summary = {"scattering": mode.scattering, "xi": mode.xi, "wronskian_drift": sol.diagnostics["wronskian_drift"]}
    if mode.scattering:
        res = solve_phi2(bh, mode, solution=sol)
        d = res.diagnostics
        X_e = np.linalg.solve(sol.to_infinity, np.array([res.a, res.b]))
        row = [
            mode.omega, mode.k, mode.l, mode.m, mode.xi, res.a.real, res.a.imag, res.b.real, res.b.imag, res.vartheta,
            res.t.real, res.t.imag, d["pseudo_norm_residual"], d["wronskian_drift"], d.get("infinity_error", math.nan),
            d.get("crossing_error", math.nan), d.get("regularity_residual", math.nan),
        ]  # fmt: skip
        summary.update(vartheta=res.vartheta, pseudo_norm_residual=d["pseudo_norm_residual"])
    else:
        X_e = sol.decaying
        nan = math.nan
        row = [mode.omega, mode.k, mode.l, mode.m, mode.xi] + [nan] * 7 + [nan, sol.diagnostics["wronskian_drift"], nan, sol.diagnostics.get("crossing_error", nan), nan]
    write_table(out / "mode.csv", MODE_COLUMNS, [row])

    rows = []
    u_far = sol.diagnostics.get("u_infinity", 200.0) if mode.scattering else sol.diagnostics["u_bound_start"]
    lo_ext, _ = horizon_window(bh, mode, Region.EXTERIOR, EVENT)
    for u_to in (lo_ext, min(u_far, 400.0)):
        tr = integrate(bh, mode, Region.EXTERIOR, sol.u_ext, u_to, X_e, rtol=cfg["tol"])
        rr = tr.radius()
        for u, r, X in zip(tr.u, rr, tr.states[:, :, 0]):
            rows.append(("exterior", u, r, X[0].real, X[0].imag, X[1].real, X[1].imag))
    if sol.has_interior:
        Xi = sol.interior_state(X_e)
        for horizon in (EVENT, CAUCHY):
            lo, hi = horizon_window(bh, mode, Region.INTERIOR, horizon)
            end = lo if horizon == EVENT else hi
            tr = integrate(bh, mode, Region.INTERIOR, sol.crossing.u_match, end, Xi, rtol=cfg["tol"])
            for u, r, X in zip(tr.u, tr.radius(), tr.states[:, :, 0]):
                rows.append(("interior", u, r, X[0].real, X[0].imag, X[1].real, X[1].imag))
    rows.sort(key=lambda t: (t[0] != "interior", t[1]))
    write_table(out / "mode_trajectory.csv", TRAJECTORY_COLUMNS, rows)
    write_manifest(out, "mode", cfg, ["mode.csv", "mode_trajectory.csv"], summary)
    return summary


def cmd_spectrum(cfg: RunConfig, out: Path, resume: bool = False) -> dict:
    from .operators import RECORD_FIELDS, spectrum_scan

    bh = cfg.black_hole()
    omegas = cfg.omega_grid()
    masses = cfg.values["masses"] or (cfg["m"],)
    kl = cfg["kl"]
    path = out / "spectrum.csv"
    if not omegas or not kl:
        log.warning("spectrum: empty grid, nothing to do")
        write_table(path, RECORD_FIELDS, [])
        write_manifest(out, "spectrum", cfg, ["spectrum.csv"], {"records": 0, "empty_grid": True})
        return {"records": 0}
    recs = spectrum_scan(bh, omegas, kl, masses, out_csv=str(path), resume=resume, threads=cfg["threads"])
    bad = {r.index: r.check() for r in recs if r.check()}
    failed = [r.index for r in recs if r.status != "ok"]
    ok = [r for r in recs if r.status == "ok"]
    summary = {
        "records": len(recs),
        "failed": failed,
        "invariant_violations": {str(k): v for k, v in bad.items()},
        "max_abs_lambda_S": max((max(abs(r.lambda_plus_S), abs(r.lambda_minus_S)) for r in ok), default=0.0),
        "max_abs_lambda_B": max((max(abs(r.lambda_plus_B), abs(r.lambda_minus_B)) for r in ok if not math.isnan(r.lambda_plus_B)), default=0.0),
    }
    write_manifest(out, "spectrum", cfg, ["spectrum.csv"], summary)
    if failed:
        raise SolverError(f"{len(failed)} of {len(recs)} spectrum records failed (rows flagged in spectrum.csv)")
    return summary


FIT_COLUMNS = ["omega", "k", "l", "m", "kind", "value", "ci_low", "ci_high", "extra"]


def cmd_omega(cfg: RunConfig, out: Path, resume: bool = False) -> dict:
    from . import mass_decomp as md

    if resume and _finished(out, "omega", cfg):
        return {"skipped": True}
    bh = cfg.black_hole()
    m, k, l = cfg["m"], cfg["k"], cfg["l"]
    omegas = cfg.omega_grid() or ((cfg["omega"],) if cfg.values["omega"] is not None else ())
    if not omegas:
        log.warning("omega: empty grid, nothing to do")
        write_table(out / "omega.csv", md.OMEGA_COLUMNS, [])
        write_table(out / "omega_fit.csv", FIT_COLUMNS, [])
        write_manifest(out, "omega", cfg, ["omega.csv", "omega_fit.csv"], {"empty_grid": True})
        return {}
    rows, fits, limits = [], [], []
    for w in omegas:
        cache = {}
        if abs(w) < m:
            st = md.diagonal_study(bh, w, m, k, l, cfg["m_prime_rel"], cache)
            for mp in st.m_primes:
                rows.append(md.omega_row(md.omega_matrix(bh, w, m, mp, k, l, cache)))
            f = st.fit
            fits.append([w, k, l, m, "diagonal_power", f.power, f.power - 1.96 * f.power_stderr, f.power + 1.96 * f.power_stderr, f.prefactor])
        else:
            fl = md.flux_from_omega_limit(bh, w, m, k, l, cfg["flux_rel"], cache)
            limits.append(fl)
            rows.append(md.omega_row(md.omega_matrix(bh, w, m, m, k, l, cache)))
            for lam, ref in zip(np.sort(np.abs(fl.eigenvalues)), np.sort(np.abs(fl.closed_form))):
                fits.append([w, k, l, m, "flux_eigenvalue", lam, lam - fl.extrapolation_error, lam + fl.extrapolation_error, ref])
    summary = {}
    if limits:
        nf = md.fit_flux_normalisation(limits)
        summary["flux_normalisation"] = nf.constant
        summary["flux_max_relative_deviation"] = nf.max_relative_deviation
    powers = [f[5] for f in fits if f[4] == "diagonal_power"]
    if powers:
        summary["min_diagonal_power"] = min(powers)
    write_table(out / "omega.csv", md.OMEGA_COLUMNS, rows)
    write_table(out / "omega_fit.csv", FIT_COLUMNS, fits)
    write_manifest(out, "omega", cfg, ["omega.csv", "omega_fit.csv"], summary)
    return summary


def cmd_evolve(cfg: RunConfig, out: Path, resume: bool = False) -> dict:
    from . import evolve as ev

    if resume and _finished(out, "evolve", cfg):
        return {"skipped": True}
    bh = cfg.black_hole()
    m = cfg["m"]
    if abs(cfg["carrier"]) <= m:
        raise ConfigError("carrier frequency must satisfy |carrier| > m")
    if cfg["band_count"] < 2 or cfg["u_count"] < 3 or cfg["tau_count"] < 1:
        log.warning("evolve: empty grid, nothing to do")
        write_table(out / "evolve.csv", ev.TIME_SERIES_COLUMNS, [])
        write_manifest(out, "evolve", cfg, ["evolve.csv"], {"empty_grid": True})
        return {}
    u = np.linspace(cfg["u_min"], cfg["u_max"], cfg["u_count"])
    ws, wt = ev.omega_grid(cfg["band_min"], cfg["band_max"], cfg["band_count"], m, cfg["gap"], symmetric=True)
    taus = np.linspace(0.0, cfg["tau_max"], cfg["tau_count"])
    period = 2 * math.pi / float(np.min(np.diff(np.unique(ws))))
    if period <= u[-1] - u[0] + taus[-1]:
        raise ConfigError(f"omega grid aliases: period {period:.4g} <= grid span plus tau_max {u[-1] - u[0] + taus[-1]:.4g}; raise band_count")
    basis = ev.build_basis(bh, cfg["k"], cfg["l"], m, ws, wt, u, rtol=cfg["tol"], threads=cfg["threads"])
    prof = ev.bump_profile(bh, u, cfg["center"], cfg["half_width"], cfg["carrier"], m)
    coeffs = ev.project(prof, basis)
    samples = ev.time_series(coeffs, taus, cfg["center"] - cfg["half_width"] - cfg["tau_max"], cfg["center"] + cfg["half_width"] + cfg["tau_max"])
    rec = ev.evolve_mode(coeffs, 0.0)
    n0 = prof.norm()
    drift = ev.norm_drift(samples)
    summary = {
        "initial_norm": n0,
        "norm_drift": drift,
        "norm_drift_below_1e-6": bool(drift < 1e-6),
        "reconstruction_error": math.sqrt(rec.with_states(rec.states - prof.states).norm() / n0),
        "coefficient_product_error": abs(ev.coefficient_product(coeffs, coeffs) - n0) / n0,
    }
    ev.write_time_series(out / "evolve.csv", samples)
    write_manifest(out, "evolve", cfg, ["evolve.csv"], summary)
    return summary


def cmd_selftest(cfg: RunConfig, out: Path, resume: bool = False) -> dict:
    from . import angular, operators
    from .scattering import solve_phi2

    checks = {}
    ang = angular.angular_spectrum(0.5, 32)
    checks["angular_exact"] = float(np.max(np.abs(np.sort(np.abs(ang.xi))[:6] - np.array([1, 1, 2, 2, 3, 3]))))
    bh = BlackHole(1.0, 0.6)
    res = solve_phi2(bh, ModeIndex.from_angular(0.3, 0.5, 1, 0.1))
    checks["pseudo_norm_residual"] = res.diagnostics["pseudo_norm_residual"]
    checks["wronskian_drift"] = res.diagnostics["wronskian_drift"]
    T = operators.t_matrix(res.mode, res)
    th = T.vartheta
    checks["t_eigenvalues"] = float(np.max(np.abs(T.eigenvalues() - 0.5 * np.array([1 - math.tanh(th), 1 + math.tanh(th)]))))
    limits = {"angular_exact": 1e-10, "pseudo_norm_residual": 1e-6, "wronskian_drift": 1e-8, "t_eigenvalues": 1e-12}
    failed = [k for k, v in checks.items() if not v < limits[k]]
    for k, v in checks.items():
        print(f"{'PASS' if k not in failed else 'FAIL'} {k}: {v:.3e} (limit {limits[k]:.0e})")
    rows = [[k, v, limits[k], k not in failed] for k, v in checks.items()]
    write_table(out / "selftest.csv", ["check", "value", "limit", "passed"], rows)
    write_manifest(out, "selftest", cfg, ["selftest.csv"], {"failed": failed})
    if failed:
        raise SolverError(f"selftest failed: {', '.join(failed)}")
    return {"failed": failed}


COMMANDS = {"mode": cmd_mode, "spectrum": cmd_spectrum, "omega": cmd_omega, "evolve": cmd_evolve, "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rndirac", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rndirac {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=COMMANDS[name].__name__.replace("cmd_", "") + " run")
        s.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
        s.add_argument("--out", metavar="DIR", default=".", help="output directory (created if missing)")
        s.add_argument("--threads", metavar="N", type=int, help="worker processes for parallel grids")
        s.add_argument("--tol", metavar="X", type=float, help="relative ODE tolerance")
        s.add_argument("--resume", action="store_true", help="reuse finished outputs and partial scans")
        s.add_argument("overrides", nargs="*", metavar="KEY=VALUE", help="configuration overrides")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.tol, args.threads)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = COMMANDS[args.command](cfg, out, args.resume)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(summary, sort_keys=True, default=_json_default))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
