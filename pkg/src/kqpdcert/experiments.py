"""Repeated sample-and-estimate pipelines and the non-classicality verdict."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimation import FIG2A_CUTOFFS, FIG2B_CUTOFFS, CutoffConfig, SpinKEstimator, XPKEstimator
from .grids import DensityGrid, uniform_axis
from .sampling import (
    derive_seed,
    sample_spin_joint,
    sample_spin_single,
    sample_x_single,
    sample_xp_joint,
)
from .systems import exact_k_spin, exact_k_xp
from .validation import check_count, check_positive, check_seed

CLASSICAL_REJECTED = "classical_rejected"
INCONCLUSIVE = "inconclusive"

# stream indices under a trial seed
STREAM_JOINT = 0
STREAM_SINGLE_1 = 1
STREAM_SINGLE_2 = 2
STREAM_SINGLE_1_PRIME = 3
STREAM_SINGLE_2_PRIME = 4

DEFAULT_PROBES = {"fock_xp": (0.0, 0.0), "spin": (0.0, -1.0)}


@dataclass(frozen=True)
class Experiment:
    """One measurement configuration: what is sampled and how K is estimated.

    With ``oracle=True`` no data are drawn and the closed-form CFs stand in for
    the empirical ones, isolating quadrature and cutoff effects.
    """

    system: str
    chi: float
    chi_prime: float
    n_single: int = 15_000
    n_joint: int = 30_000
    cutoffs: CutoffConfig = None
    oracle: bool = False

    def __post_init__(self):
        if self.system not in DEFAULT_PROBES:
            raise ValueError(f"unknown system {self.system!r}")
        check_positive("chi", self.chi)
        check_positive("chi_prime", self.chi_prime)
        check_count("n_single", self.n_single)
        check_count("n_joint", self.n_joint)
        if self.cutoffs is None:
            default = FIG2A_CUTOFFS if self.system == "fock_xp" else FIG2B_CUTOFFS
            object.__setattr__(self, "cutoffs", default)

    def as_dict(self):
        d = asdict(self)
        d["cutoffs"] = self.cutoffs.as_dict()
        return d

    def exact_k(self, probes):
        probes = np.atleast_2d(np.asarray(probes, dtype=float))
        if self.system == "fock_xp":
            return exact_k_xp(probes[:, 0], probes[:, 1], self.chi, self.chi_prime)
        return exact_k_spin(probes[:, 0], probes[:, 1], self.chi, self.chi_prime)

    def estimator(self):
        c = self.cutoffs
        cls = XPKEstimator if self.system == "fock_xp" else SpinKEstimator
        return cls(c_o=c.c_o, lambda_c=c.lambda_c, n_lambda=c.n_lambda)


def simulate_records(experiment, trial_seed):
    """All records one trial needs, keyed by role; each role has its own stream."""
    e = experiment
    s = lambda idx: derive_seed(trial_seed, idx)  # noqa: E731
    if e.system == "fock_xp":
        return {
            "joint": sample_xp_joint(e.chi, e.n_joint, s(STREAM_JOINT)),
            "single_x": sample_x_single(e.chi, e.n_single, s(STREAM_SINGLE_1), "single_1"),
            "single_p": sample_x_single(e.chi, e.n_single, s(STREAM_SINGLE_2), "single_2"),
            "single_x_prime": sample_x_single(e.chi_prime, e.n_single, s(STREAM_SINGLE_1_PRIME), "single_1"),
            "single_p_prime": sample_x_single(e.chi_prime, e.n_single, s(STREAM_SINGLE_2_PRIME), "single_2"),
        }
    return {
        "joint": sample_spin_joint(e.chi, e.n_joint, s(STREAM_JOINT)),
        "single": sample_spin_single(e.chi, e.n_single, s(STREAM_SINGLE_1)),
        "single_prime": sample_spin_single(e.chi_prime, e.n_single, s(STREAM_SINGLE_1_PRIME)),
    }


def fit_estimator(experiment, records=None):
    est = experiment.estimator()
    if experiment.oracle:
        return est.fit_exact(experiment.chi, experiment.chi_prime)
    return est.fit(**records)


def run_trial(experiment, trial_seed, probes):
    """Complex K estimates at ``probes`` from one freshly sampled data set."""
    records = None if experiment.oracle else simulate_records(experiment, trial_seed)
    est = fit_estimator(experiment, records)
    return est.predict_complex(probes), est.all_cut_off_


def trial_seeds(master_seed, trials):
    return [derive_seed(master_seed, i) for i in range(trials)]


@dataclass
class KEstimateReport:
    probe: tuple
    k_estimates: list
    mean: float
    std_error: float
    z_score: float
    verdict: str
    z_threshold: float
    exact_k: float = None
    imag_parts: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    all_cut_off: bool = False
    config: dict = field(default_factory=dict)

    @property
    def std(self):
        return float(np.std(self.k_estimates, ddof=1)) if len(self.k_estimates) > 1 else 0.0

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n"

    def rows(self):
        """Flat rows ``(*probe, trial, k_estimate)`` for plotting."""
        return [(*self.probe, i, k) for i, k in enumerate(self.k_estimates)]


def _json_default(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def verdict_for(mean, std_error, z_threshold=5.0):
    if std_error > 0:
        z = mean / std_error
    else:
        z = -math.inf if mean < 0 else (math.inf if mean > 0 else 0.0)
    return z, (CLASSICAL_REJECTED if z < -z_threshold else INCONCLUSIVE)


def summarise(experiment, probe, estimates, z_threshold=5.0, seeds=(), imag=(), cut=False):
    k = np.asarray(estimates, dtype=float)
    mean = float(k.mean())
    se = float(k.std(ddof=1) / np.sqrt(k.size)) if k.size > 1 else 0.0
    z, verdict = verdict_for(mean, se, z_threshold)
    return KEstimateReport(
        probe=tuple(float(v) for v in probe),
        k_estimates=[float(v) for v in k],
        mean=mean,
        std_error=se,
        z_score=float(z),
        verdict=verdict,
        z_threshold=float(z_threshold),
        exact_k=float(experiment.exact_k([probe])[0]),
        imag_parts=[float(v) for v in imag],
        seeds=[int(s) for s in seeds],
        all_cut_off=bool(cut),
        config=experiment.as_dict(),
    )


def _run_trial_star(args):
    return run_trial(*args)


def repeat_trials_many(experiment, trials, master_seed, probes=None, z_threshold=5.0, n_jobs=1, seeds=None):
    """Run ``trials`` independent pipelines and summarise K at every probe.

    Each trial shares one data set across probes. Trials are reduced in
    trial-index order, so the report does not depend on ``n_jobs``.
    """
    trials = check_count("trials", trials, minimum=2)
    if seeds is None:
        seeds = trial_seeds(check_seed(master_seed), trials)
    seeds = [check_seed(s) for s in seeds]
    if len(seeds) != trials:
        raise ValueError("need one seed per trial")
    if len(set(seeds)) != len(seeds):
        raise ValueError("trial seeds must be distinct")
    if probes is None:
        probes = [DEFAULT_PROBES[experiment.system]]
    probes = np.atleast_2d(np.asarray(probes, dtype=float))

    jobs = [(experiment, s, probes) for s in seeds]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_trial_star, jobs))
    else:
        results = [_run_trial_star(j) for j in jobs]

    values = np.array([r[0] for r in results])  # (trials, probes)
    cut = any(r[1] for r in results)
    return [
        summarise(experiment, probe, values[:, j].real, z_threshold, seeds, values[:, j].imag, cut)
        for j, probe in enumerate(probes)
    ]


def repeat_trials(experiment, trials, master_seed, probe=None, z_threshold=5.0, n_jobs=1, seeds=None):
    """Repeat-trial statistics and verdict for a single probe."""
    probes = None if probe is None else [probe]
    return repeat_trials_many(experiment, trials, master_seed, probes, z_threshold, n_jobs, seeds)[0]


def k_surface(experiment, axes, seed):
    """K estimate on a probe grid from one shared data set.

    For ``fock_xp`` ``axes`` is ``[(x_min, x_max, step), (p_min, p_max, step)]``
    and a 2D :class:`DensityGrid` is returned. For ``spin`` ``axes`` is a single
    ``(s_min, s_max, step)`` and the result maps ``sigma2`` to a 1D grid.
    """
    records = None if experiment.oracle else simulate_records(experiment, seed)
    est = fit_estimator(experiment, records)
    meta = {"seed": int(seed), **experiment.as_dict()}
    if experiment.system == "fock_xp":
        xs, ps = (uniform_axis(*ax) for ax in axes)
        X, P = np.meshgrid(xs, ps, indexing="ij")
        k = est.predict(np.column_stack([X.ravel(), P.ravel()])).reshape(X.shape)
        return DensityGrid(axes=list(axes), values=k, meta=meta)
    ax = axes[0] if isinstance(axes[0], (tuple, list)) else axes
    s1 = uniform_axis(*ax)
    out = {}
    for s2 in (1, -1):
        k = est.predict(np.column_stack([s1, np.full_like(s1, s2)]))
        out[s2] = DensityGrid(axes=[ax], values=k, meta={**meta, "sigma2": s2})
    return out
