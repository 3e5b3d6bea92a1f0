"""Command implementations: every ``cmd_*`` writes CSV data files plus a run manifest.

CSV bytes depend only on the configuration and seed. Timestamps and
durations go to ``manifest.json`` alone.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, fig2_config
from .experiments import k_surface, repeat_trials_many, simulate_records, summarise, trial_seeds
from .grids import uniform_axis
from .sampling import MeasurementRecord
from .systems import exact_k_spin, exact_k_xp

log = logging.getLogger(__name__)

PROBE_COLUMNS = {"fock_xp": ("x", "p"), "spin": ("sigma1", "sigma2")}
SWEEP_COLUMNS = ("chi", "{0}", "{1}", "k_exact", "k_est_mean", "std_error")


class NumericalDiagnosticError(RuntimeError):
    pass


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_manifest(out_dir, cfg, files, started, seeds=None, command=""):
    out_dir = Path(out_dir)
    inventory = {}
    for f in files:
        f = Path(f)
        inventory[str(f.relative_to(out_dir))] = hashlib.sha256(f.read_bytes()).hexdigest()
    manifest = {
        "command": command,
        "config": cfg.snapshot(),
        "code_version": __version__,
        "trial_seeds": seeds or {},
        "duration_s": round(time.monotonic() - started, 3),
        "files": inventory,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _cols(cfg):
    return PROBE_COLUMNS[cfg.system]


def _exact(cfg, chi, probes):
    probes = np.atleast_2d(probes)
    f = exact_k_xp if cfg.system == "fock_xp" else exact_k_spin
    return f(probes[:, 0], probes[:, 1], chi, cfg.chi_prime)


def _probe_grid(cfg):
    if cfg.system == "fock_xp":
        xs, ps = (uniform_axis(*ax) for ax in cfg.grid[:2])
        X, P = np.meshgrid(xs, ps, indexing="ij")
        return np.column_stack([X.ravel(), P.ravel()])
    s1 = uniform_axis(*cfg.grid[0])
    return np.vstack([np.column_stack([s1, np.full_like(s1, s2)]) for s2 in (1.0, -1.0)])


def cmd_exact(cfg: ExperimentConfig):
    """Exact K on the configured probe grid for every chi."""
    started = time.monotonic()
    out = Path(cfg.output_dir)
    grid = _probe_grid(cfg)
    rows = []
    for chi in cfg.chi:
        for probe, k in zip(grid, _exact(cfg, chi, grid)):
            rows.append((chi, *probe, k))
    path = write_csv(out / "exact_k.csv", ("chi", *_cols(cfg), "k_exact"), rows)
    return [path, write_manifest(out, cfg, [path], started, command="exact")]


def cmd_simulate(cfg: ExperimentConfig):
    """Sample every record of ``trials`` trials for each chi."""
    started = time.monotonic()
    out = Path(cfg.output_dir)
    files, seeds = [], {}
    for ci, chi in enumerate(cfg.chi):
        exp = cfg.experiment(chi)
        seeds[_fmt(chi)] = trial_seeds(cfg.master_seed, max(cfg.trials, 1))
        for t, seed in enumerate(seeds[_fmt(chi)]):
            folder = out / "records" / f"chi_{ci:02d}"
            folder.mkdir(parents=True, exist_ok=True)
            for role, rec in simulate_records(exp, seed).items():
                rec.meta = {"role": role, "trial": t, "chi_prime": cfg.chi_prime}
                files.extend(rec.save(folder / f"trial_{t:03d}_{role}"))
    return [*files, write_manifest(out, cfg, files, started, seeds, command="simulate")]


def load_record_bundles(folder):
    """Group saved records by trial: ``{trial: {role: MeasurementRecord}}``."""
    bundles = {}
    for path in sorted(Path(folder).glob("trial_*_*.csv")):
        _, trial, role = path.stem.split("_", 2)
        bundles.setdefault(int(trial), {})[role] = MeasurementRecord.from_csv(path)
    if not bundles:
        raise ConfigError(f"no record files found in {folder}")
    return bundles


def _estimate_from_records(cfg):
    exp = cfg.experiment()
    bundles = load_record_bundles(cfg.records)
    if len(bundles) < 2:
        raise ConfigError("need records from at least two trials to estimate a standard error")
    vals, cut = [], False
    for t in sorted(bundles):
        est = exp.estimator().fit(**bundles[t])
        vals.append(est.predict_complex(cfg.probes))
        cut |= est.all_cut_off_
    vals = np.array(vals)
    seeds = [int(next(iter(bundles[t].values())).seed) for t in sorted(bundles)]
    return [
        summarise(exp, p, vals[:, j].real, cfg.z_threshold, seeds, vals[:, j].imag, cut)
        for j, p in enumerate(cfg.probes)
    ]


def _check_cut(reports):
    if any(r.all_cut_off for r in reports):
        raise NumericalDiagnosticError("every lambda node was cut off; estimate is identically zero")


def cmd_estimate(cfg: ExperimentConfig, n_jobs=1):
    """Repeat-trial K estimates (fresh data, or saved records when ``records`` is set)."""
    started = time.monotonic()
    out = Path(cfg.output_dir)
    if cfg.records:
        reports = _estimate_from_records(cfg)
    else:
        reports = repeat_trials_many(
            cfg.experiment(), cfg.trials, cfg.master_seed, cfg.probes, cfg.z_threshold, n_jobs
        )
    _check_cut(reports)
    rows = [row for r in reports for row in r.rows()]
    csv_path = write_csv(out / "estimates.csv", (*_cols(cfg), "trial", "k_estimate"), rows)
    json_path = out / "report.json"
    json_path.write_text("[\n" + ",\n".join(r.to_json().rstrip() for r in reports) + "\n]\n")
    files = [csv_path, json_path]
    return [*files, write_manifest(out, cfg, files, started, reports[0].seeds, command="estimate")]


def sweep_rows(cfg, n_jobs=1):
    """One summary row per (chi, probe) plus the per-chi reports."""
    rows, reports = [], {}
    for chi in cfg.chi:
        reps = repeat_trials_many(
            cfg.experiment(chi), cfg.trials, cfg.master_seed, cfg.probes, cfg.z_threshold, n_jobs
        )
        _check_cut(reps)
        reports[chi] = reps
        for r in reps:
            rows.append((chi, *r.probe, r.exact_k, r.mean, r.std_error))
    return rows, reports


def cmd_sweep(cfg: ExperimentConfig, n_jobs=1):
    """Exact vs estimated K across the chi list."""
    if not cfg.chi:
        raise ConfigError("sweep needs a non-empty chi list")
    started = time.monotonic()
    out = Path(cfg.output_dir)
    rows, reports = sweep_rows(cfg, n_jobs)
    header = tuple(c.format(*_cols(cfg)) for c in SWEEP_COLUMNS)
    path = write_csv(out / "sweep.csv", header, rows)
    seeds = trial_seeds(cfg.master_seed, cfg.trials)
    return [path, write_manifest(out, cfg, [path], started, seeds, command="sweep")]


def cmd_reproduce_fig2(panel, output_dir="out", master_seed=0, n_jobs=1):
    """Full bundle for one figure panel: sweep, dense exact curve, all trials, one K surface."""
    started = time.monotonic()
    cfg = fig2_config(panel, output_dir).override(master_seed=master_seed)
    out = Path(cfg.output_dir)
    cols = _cols(cfg)
    rows, reports = sweep_rows(cfg, n_jobs)
    files = [write_csv(out / "sweep.csv", tuple(c.format(*cols) for c in SWEEP_COLUMNS), rows)]

    dense = np.linspace(min(cfg.chi), max(cfg.chi), 111)
    curve = [(chi, *cfg.probes[0], _exact(cfg, chi, cfg.probes[0])[0]) for chi in dense]
    files.append(write_csv(out / "exact_curve.csv", ("chi", *cols, "k_exact"), curve))

    trial_rows = [(chi, *row) for chi, reps in reports.items() for r in reps for row in r.rows()]
    files.append(write_csv(out / "estimates.csv", ("chi", *cols, "trial", "k_estimate"), trial_rows))

    # side panel: a single data set at chi = 1
    exp = cfg.experiment(1.0)
    seed = trial_seeds(cfg.master_seed, 1)[0]
    if cfg.system == "fock_xp":
        axes = [(-3.0, 3.0, 0.1), (-3.0, 3.0, 0.1)]
        surf = k_surface(exp, axes, seed)
        xs, ps = surf.nodes
        X, P = np.meshgrid(xs, ps, indexing="ij")
        exact = exact_k_xp(X, P, exp.chi, exp.chi_prime)
        srows = zip(X.ravel(), P.ravel(), surf.values.ravel(), exact.ravel())
    else:
        ax = (-2.5, 2.5, 0.02)
        surfs = k_surface(exp, [ax], seed)
        s1 = uniform_axis(*ax)
        srows = [
            (s, float(s2), k, exact_k_spin(s, s2, exp.chi, exp.chi_prime))
            for s2 in (1, -1)
            for s, k in zip(s1, surfs[s2].values)
        ]
    files.append(write_csv(out / "surface_chi1.csv", (*cols, "k_estimate", "k_exact"), srows))
    seeds = trial_seeds(cfg.master_seed, cfg.trials)
    return [*files, write_manifest(out, cfg, files, started, seeds, command=f"reproduce-fig2{panel}")]
