"""Command-line front end: config ingestion, scans, sweeps and file output.

Every task writes its artifacts into ``--out`` (default: the config's
``output.dir``) under the config's prefix.  Files are written to a temporary
name and renamed into place, so a crashed run never leaves half a table.

Exit codes: 0 success, 2 configuration or input error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (antiresonance_depth, background_subtracted, cooperativity_vs_tem_order,
                       fit_lorentzian, optimal_cooperativity, phase_swing, solve_cavity_tuning,
                       tem_search, tuned_cooperativity, tuned_resonances)
from .config import RunConfig, build_array, build_model, load_config, parse_config
from .errors import ConfigError, ModelError
from .oracle import OracleConfig, compare_linearization
from .steady_state import SystemModel, effective_cooperativity, scan_spectrum

log = logging.getLogger("antiresonance")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
CSV_SCHEMA = 1
SPECTRUM_COLUMNS = ("delta_over_kappa", "re_t", "im_t", "T", "phase", "phase_rel",
                    "delta_eff", "gamma_eff", "c_eff", "condition_flag")
FIGURES = {
    "1": ("fig1",),
    "2": ("fig2ab", "fig2cd", "fig2ef"),
    "3": ("fig3",),
    "4": ("fig4",),
    "a1": ("figA1",),
}


# --- formatting and atomic output -------------------------------------------

def fmt(x) -> str:
    """Fixed 12-significant-digit rendering used in every table."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.12g" % float(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    return x


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path: Path, columns: Sequence[str], rows, meta: dict) -> None:
    lines = [f"# {k}: {v}" for k, v in meta.items()]
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    atomic_write(path, "\n".join(lines) + "\n")


def write_dat(path: Path, x, y, label: str) -> None:
    lines = [f"# {label}"]
    lines.extend(f"{fmt(a)} {fmt(b)}" for a, b in zip(x, y))
    atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: Path, payload: dict) -> None:
    atomic_write(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


# --- shared pieces ------------------------------------------------------------

class Run:
    """A parsed config bound to an output directory."""

    def __init__(self, cfg: RunConfig, sha: str, out: str | None, threads: int):
        self.cfg = cfg
        self.sha = sha
        self.out = Path(out if out is not None else cfg.output.dir)
        self.threads = max(1, threads)

    def path(self, suffix: str) -> Path:
        return self.out / f"{self.cfg.prefix}{suffix}"

    def meta(self, **extra) -> dict:
        cfg_json = json.dumps(self.cfg.model_dump(mode="json", by_alias=True),
                              sort_keys=True, separators=(",", ":"))
        return {"schema": CSV_SCHEMA, "config_sha256": self.sha, "config": cfg_json, **extra}


def _tuning(cfg: RunConfig, model: SystemModel) -> tuple[float, float | None]:
    """(offset, delta): offset = omega_e - omega_c for the scan, delta the tuned root if any."""
    if cfg.cavity.auto_tune is not None:
        delta = solve_cavity_tuning(model, cfg.cavity.auto_tune)
        return delta, delta
    return -float(cfg.cavity.delta_c), None


def _scan_mode(cfg: RunConfig, offset: float, tuned: bool) -> str:
    scan = cfg.active_scan
    requested = scan.mode if scan is not None else None
    natural = "sweep_both" if offset == 0 and not tuned else "sweep_laser"
    if requested == "sweep_both" and natural != "sweep_both":
        raise ConfigError("scan.mode 'sweep_both' conflicts with a detuned or auto-tuned cavity")
    return requested or natural


def dip_analysis(deltas, T, kappa: float, mode: str, offset: float) -> dict:
    """Depth and Lorentzian fit of the background-subtracted dip.

    Shared by ``spectrum`` and ``fit`` so both give the same numbers.
    """
    scan_like = _TableScan(np.asarray(deltas, float), np.asarray(T, float), kappa, mode, offset)
    d, b = background_subtracted(scan_like)
    i = int(np.nanargmax(b))
    out = {"dip_delta": float(d[i]), "dip_depth": float(b[i]),
           "T_min": float(np.nanmin(T)), "T_at_dip": float(T[i])}
    try:
        f = fit_lorentzian(d, b)
        out["fit"] = {"s": f.s, "beta": f.beta, "center": f.center, "residual_rms": f.residual,
                      "s_curvature": f.s_curvature, "beta_curvature": f.beta_curvature}
    except (ModelError, ValueError) as exc:
        out["fit"] = None
        out["fit_error"] = str(exc)
    return out


class _TableScan:
    """Minimal stand-in for ScanResult built from tabulated columns."""

    def __init__(self, deltas, T, kappa, mode, offset):
        self.deltas, self.T = deltas, T
        self.model = {"kappa": kappa}
        self.mode, self.offset = mode, offset


# --- tasks -----------------------------------------------------------------

def task_spectrum(run: Run) -> dict:
    cfg = run.cfg
    if cfg.active_scan is None:
        raise ConfigError("spectrum needs a scan block")
    model = build_model(cfg)
    offset, delta = _tuning(cfg, model)
    mode = _scan_mode(cfg, offset, delta is not None)
    scan = scan_spectrum(model, cfg.active_scan.grid(), mode, offset, run.threads)
    kappa = model.cavity.kappa

    rows = [(p.delta, p.t.real, p.t.imag, p.T, p.phase, p.phase_rel, p.delta_eff, p.gamma_eff,
             p.c_eff, p.flag is not None) for p in scan.points]
    write_table(run.path("_spectrum.csv"), SPECTRUM_COLUMNS, rows,
                run.meta(kappa=fmt(kappa), mode=mode, offset=fmt(offset)))
    write_dat(run.path("_T.dat"), scan.deltas, scan.T, "delta/kappa T")
    write_dat(run.path("_phase.dat"), scan.deltas, scan.phase_rel, "delta/kappa phase_rel")

    summary = _model_summary(cfg, model)
    summary.update(task="spectrum", mode=mode, offset=offset, delta=delta,
                   points=len(scan.points), flagged_points=len(scan.flagged))
    dip = dip_analysis(scan.deltas, scan.T, kappa, mode, offset)
    summary.update(dip)
    c_col = scan.column("c_eff")
    summary["c_eff_at_dip"] = float(c_col[int(np.argmin(np.abs(scan.deltas - dip["dip_delta"])))])
    if delta is not None:
        summary["c_eff_tuned"] = effective_cooperativity(model, delta)
    try:
        summary["phase_swing"] = phase_swing(scan)
    except ModelError:
        summary["phase_swing"] = None
    if model.n == 1:
        c = model.g_vec.norm2 / (kappa * model.couplings.gamma_matrix[0, 0])
        summary["depth_closed_form"] = antiresonance_depth(c)
    write_json(run.path("_summary.json"), summary)
    return summary


def _model_summary(cfg: RunConfig, model: SystemModel) -> dict:
    s = model.summary()
    kappa = model.cavity.kappa
    s.update(name=cfg.name, gamma=cfg.rates.gamma, g=cfg.rates.g,
             g_vector=model.g_vec.g.tolist(),
             c_independent=model.n * cfg.rates.g**2 / (kappa * cfg.rates.gamma),
             c_opt=optimal_cooperativity(model.g_vec, model.couplings, kappa) if model.n else None)
    return s


def task_tune(run: Run) -> dict:
    cfg = run.cfg
    model = build_model(cfg)
    summary = _model_summary(cfg, model)
    summary["task"] = "tune"
    if cfg.cavity.auto_tune is not None:
        window = cfg.cavity.auto_tune
        delta = solve_cavity_tuning(model, window)
        roots = tuned_resonances(model, window)
        roots = [r for r in roots if abs(r.delta - delta) < 1e-9] or roots
    else:
        roots = tuned_resonances(model)
        if not roots:
            raise ModelError("delta_eff has no root in the default search window")
        delta = max(roots, key=lambda r: r.c_eff).delta
    best = min(roots, key=lambda r: abs(r.delta - delta))
    summary.update(delta=delta, gamma_eff=best.gamma_eff, c_eff=best.c_eff,
                   roots=[{"delta": r.delta, "gamma_eff": r.gamma_eff, "c_eff": r.c_eff}
                          for r in tuned_resonances(model)])
    write_json(run.path("_tune.json"), summary)
    return summary


def task_cooperativity(run: Run) -> dict:
    cfg = run.cfg
    sw = cfg.sweep
    if sw is None:
        raise ConfigError("cooperativity needs a sweep block")
    kappa = cfg.cavity.kappa
    meta = run.meta(kappa=fmt(kappa), sweep=sw.kind)
    summary = {"task": "cooperativity", "name": cfg.name, "sweep": sw.kind}

    if sw.kind == "spacing":
        def one(d):
            model = build_model(cfg, d=d)
            best = tuned_cooperativity(model)
            return (d, best.c_eff, optimal_cooperativity(model.g_vec, model.couplings, kappa),
                    model.n * cfg.rates.g**2 / (kappa * cfg.rates.gamma), best.delta)
        rows = _map(one, [float(v) for v in sw.values], run.threads)
        cols = ("d", "c_eff", "c_opt", "c_independent", "delta")
        write_dat(run.path("_ceff.dat"), [r[0] for r in rows], [r[1] for r in rows], "d C_eff")
        write_dat(run.path("_copt.dat"), [r[0] for r in rows], [r[2] for r in rows], "d C_opt")
    elif sw.kind == "tem_order":
        if cfg.coupling.tem is None:
            raise ConfigError("tem_order sweep needs a coupling.tem block")
        array = build_array(cfg)
        w = sw.w or cfg.coupling.tem.w
        orders = [int(v) for v in sw.values]
        res = cooperativity_vs_tem_order(array, orders, w, cfg.rates.g, kappa)
        rows = [(r.m, r.norm_g, r.c_eff, r.delta) for r in res]
        cols = ("m", "norm_g", "c_eff", "delta")
        write_dat(run.path("_ceff.dat"), orders, [r.c_eff for r in res], "m C_eff")
    else:
        array = build_array(cfg)
        w = sw.w or (cfg.coupling.tem.w if cfg.coupling.tem else None)
        if w is None:
            raise ConfigError("tem_search needs sweep.w or coupling.tem.w")
        res = tem_search(array, w, cfg.rates.g, sw.max_order, sw.offsets, kappa)
        rows = [(r.m, r.n, r.offset[0], r.offset[1], r.norm_g, r.c_eff, r.delta) for r in res]
        cols = ("m", "n", "offset_x", "offset_y", "norm_g", "c_eff", "delta")
        if res:
            b = res[0]
            summary["best"] = {"m": b.m, "n": b.n, "offset": list(b.offset),
                               "c_eff": b.c_eff, "delta": b.delta}
        summary["c_independent"] = array.n * cfg.rates.g**2 / (kappa * cfg.rates.gamma)

    write_table(run.path("_cooperativity.csv"), cols, rows, meta)
    summary["rows"] = [dict(zip(cols, r)) for r in rows]
    write_json(run.path("_summary.json"), summary)
    return summary


def task_oracle(run: Run) -> dict:
    cfg = run.cfg
    ob = cfg.oracle
    if ob is None:
        raise ConfigError("oracle task needs an oracle block")
    model = build_model(cfg)
    offset, delta = _tuning(cfg, model)
    mode = _scan_mode(cfg, offset, delta is not None)
    ocfg = OracleConfig(n_max=ob.n_max, method=ob.method)
    grid = cfg.active_scan.grid()

    def one(eta):
        return compare_linearization(model, grid, [eta], ocfg, mode, offset)
    rows = [r for block in _map(one, list(ob.etas), run.threads) for r in block]

    cols = ("delta_over_kappa", "eta", "T_exact", "T_linear", "abs_diff", "max_excitation",
            "photon_number", "top_fock_population")
    table = [(r.delta, r.eta, r.T_exact, r.T_linear, r.abs_diff, r.max_excitation,
              r.photon_number, r.top_fock_population) for r in rows]
    write_table(run.path("_oracle.csv"), cols, table,
                run.meta(kappa=fmt(model.cavity.kappa), mode=mode, offset=fmt(offset),
                         n_max=ob.n_max))
    per_eta = {}
    for eta in ob.etas:
        sub = [r for r in rows if r.eta == eta]
        d = np.array([r.delta for r in sub])
        write_dat(run.path(f"_oracle_eta{fmt(eta)}.dat"), d, [r.T_exact for r in sub],
                  f"delta/kappa T_exact eta={fmt(eta)}")
        per_eta[fmt(eta)] = {
            "max_abs_diff": max(r.abs_diff for r in sub),
            "T_exact_min": min(r.T_exact for r in sub),
            "T_linear_min": min(r.T_linear for r in sub),
            "max_excitation": max(r.max_excitation for r in sub),
            "max_top_fock_population": max(r.top_fock_population for r in sub),
        }
    write_dat(run.path("_oracle_linear.dat"), grid,
              [r.T_linear for r in rows[:len(grid)]], "delta/kappa T_linear")
    summary = _model_summary(cfg, model)
    summary.update(task="oracle", mode=mode, offset=offset, n_max=ob.n_max,
                   method=ob.method, per_eta=per_eta)
    write_json(run.path("_summary.json"), summary)
    return summary


TASKS = {"spectrum": task_spectrum, "tune": task_tune,
         "cooperativity": task_cooperativity, "oracle": task_oracle}


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --- fit from an existing table ------------------------------------------------

def read_spectrum_csv(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Metadata header and numeric columns of a spectrum table."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    meta = {}
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, val = ln[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif ln.strip():
            body.append(ln)
    if not body:
        raise ConfigError(f"{path}: no header row")
    header = body[0].split(",")
    missing = {"delta_over_kappa", "T"} - set(header)
    if missing:
        raise ConfigError(f"{path}: missing columns {sorted(missing)}")
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric data ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigError(f"{path}: ragged table")
    return meta, {h: data[:, i] for i, h in enumerate(header)}


def fit_table(path: str | Path) -> dict:
    meta, cols = read_spectrum_csv(path)
    kappa = float(meta.get("kappa", 1.0))
    mode = meta.get("mode", "sweep_both")
    offset = float(meta.get("offset", 0.0))
    res = dip_analysis(cols["delta_over_kappa"], cols["T"], kappa, mode, offset)
    res.update(source=str(path), kappa=kappa, mode=mode, offset=offset,
               config_sha256=meta.get("config_sha256"))
    return res


# --- entry point ------------------------------------------------------------------

def recipe_text(name: str) -> str:
    return resources.files("antiresonance").joinpath("recipes", f"{name}.json").read_text()


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: config output.dir)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for point evaluation")
    common.add_argument("--seed", type=int, default=None,
                        help="accepted for interface compatibility; runs are deterministic")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="antiresonance",
                                description="Cavity antiresonances of dipole-coupled emitter arrays.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run the task named in a config")
    r.add_argument("config_path", nargs="?")
    r.add_argument("--config", dest="config_flag")
    for name, text in (("spectrum", "transmission scan"), ("tune", "solve for the tuned detuning"),
                       ("cooperativity", "C_eff sweeps"), ("oracle", "exact vs linear comparison")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("config_path", nargs="?")
        s.add_argument("--config", dest="config_flag")
    f = sub.add_parser("fit", parents=[common], help="fit the dip of an existing spectrum CSV")
    f.add_argument("csv")
    fig = sub.add_parser("figure", parents=[common], help="run a bundled recipe")
    fig.add_argument("which", choices=sorted(FIGURES))
    return p


def _config_path(args) -> str:
    path = args.config_flag or args.config_path
    if not path:
        raise ConfigError("no config given (positional path or --config)")
    return path


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fit":
            result = fit_table(args.csv)
            if args.out:
                write_json(Path(args.out) / (Path(args.csv).stem + "_fit.json"), result)
            print(json.dumps(_jsonable(result), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "figure":
            for name in FIGURES[args.which]:
                text = recipe_text(name)
                cfg = parse_config(text)
                run = Run(cfg, hashlib.sha256(text.encode()).hexdigest(), args.out, args.threads)
                TASKS[cfg.task](run)
                print(f"{name}: wrote {run.out}/{cfg.prefix}_*")
            return EXIT_OK
        cfg, sha = load_config(_config_path(args))
        task = cfg.task if args.command == "run" else args.command
        run = Run(cfg, sha, args.out, args.threads)
        summary = TASKS[task](run)
        print(json.dumps(_jsonable({k: v for k, v in summary.items() if k != "rows"}),
                         indent=2, sort_keys=True))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
