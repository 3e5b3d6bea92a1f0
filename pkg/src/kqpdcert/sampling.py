"""Exact, seeded samplers for the four measured distributions.

Every sampler draws i.i.d. outcomes from ``numpy.random.Generator(PCG64(seed))``.
Independent streams are derived with :func:`derive_seed`, a SplitMix64
finaliser applied to ``master + (index + 1) * 0x9E3779B97F4A7C15 (mod 2**64)``,
so parallel and serial runs draw identical data.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .systems import BALANCED, SPIN_CENTRES, dressed_spin_weights

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

SYSTEMS = ("fock_xp", "spin")
KINDS = ("joint", "single_1", "single_2")
MIN_ACCEPTANCE = 0.01


def splitmix64(z):
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed, index):
    """Seed of stream ``index`` under ``master_seed``; both are unsigned 64-bit."""
    if master_seed < 0 or index < 0:
        raise ValueError("seeds and stream indices are unsigned")
    return splitmix64((int(master_seed) + (int(index) + 1) * GOLDEN) & MASK64)


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


class SamplingError(RuntimeError):
    pass


@dataclass
class MeasurementRecord:
    """A batch of sampled outcomes with enough provenance to regenerate it."""

    system: str
    kind: str
    chi: float
    seed: int
    outcomes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}")
        out = np.asarray(self.outcomes, dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        self.outcomes = out

    @property
    def n(self):
        return self.outcomes.shape[0]

    @property
    def width(self):
        return self.outcomes.shape[1]

    def header(self):
        return {"system": self.system, "kind": self.kind, "chi": self.chi, "seed": self.seed, "N": self.n}

    def to_csv(self, path):
        path = Path(path)
        cols = ["a1", "a2"][: self.width]
        with path.open("w", newline="") as fh:
            fh.write("# system,kind,chi,seed,N\n")
            fh.write(f"# {self.system},{self.kind},{self.chi!r},{self.seed},{self.n}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for row in self.outcomes:
                writer.writerow([repr(float(v)) for v in row])
        return path

    def manifest(self):
        return {
            **self.header(),
            "created": datetime.now(timezone.utc).isoformat(),
            "code_version": __version__,
            **self.meta,
        }

    def save(self, stem):
        """Write ``<stem>.csv`` and ``<stem>.json``; returns both paths."""
        stem = Path(stem)
        csv_path = self.to_csv(stem.with_suffix(".csv"))
        json_path = stem.with_suffix(".json")
        json_path.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with path.open() as fh:
            first = fh.readline().strip()
            values = fh.readline().strip()
            if not first.startswith("#") or not values.startswith("#"):
                raise ValueError(f"{path}: missing '# system,kind,chi,seed,N' header")
            keys = [k.strip() for k in first.lstrip("#").split(",")]
            vals = [v.strip() for v in values.lstrip("#").split(",")]
            head = dict(zip(keys, vals))
            rows = list(csv.reader(fh))
        cols = rows[0]
        if cols not in (["a1"], ["a1", "a2"]):
            raise ValueError(f"{path}: unexpected columns {cols}")
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(cols))
        if data.shape[0] != int(head["N"]):
            raise ValueError(f"{path}: header says N={head['N']}, found {data.shape[0]} rows")
        return cls(head["system"], head["kind"], float(head["chi"]), int(head["seed"]), data)


def _check(chi, n):
    if not chi > 0:
        raise ValueError(f"chi must be positive, got {chi}")
    if int(n) != n or n < 1:
        raise ValueError(f"N must be a positive integer, got {n}")
    return int(n)


def sample_xp_joint(chi, n, seed):
    """Joint (x, p) outcomes of the Fock-state heterodyne measurement.

    In polar form ``u = r^2`` has density proportional to ``exp(-a u) (b u + c)``,
    a mixture of Exponential(a) and Gamma(2, a); the angle is uniform.
    """
    n = _check(chi, n)
    rng = make_rng(seed)
    a = 4 * chi**2 / (2 + chi**2) ** 2
    b = 32 * chi**4
    c = (4 - chi**4) ** 2
    w_exp = c / a
    w_gamma = b / a**2
    is_gamma = rng.random(n) < w_gamma / (w_exp + w_gamma)
    u = rng.gamma(np.where(is_gamma, 2.0, 1.0), 1.0 / a)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    r = np.sqrt(u)
    out = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return MeasurementRecord("fock_xp", "joint", float(chi), int(seed), out)


def sample_x_single(chi, n, seed, kind="single_1"):
    """Single-quadrature outcomes; ``kind="single_2"`` labels the momentum record.

    The density is a Gaussian (weight ``1/(1+chi^2)``) plus an ``x^2``-weighted
    Gaussian (weight ``chi^2/(1+chi^2)``) sharing the variance ``(1+chi^2)/(2 chi^2)``.
    """
    n = _check(chi, n)
    rng = make_rng(seed)
    s = np.sqrt((1 + chi**2) / (2 * chi**2))
    shaped = rng.random(n) < chi**2 / (1 + chi**2)
    gauss = rng.standard_normal(n)
    chi3 = np.sqrt(np.sum(rng.standard_normal((n, 3)) ** 2, axis=1))
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    x = s * np.where(shaped, sign * chi3, gauss)
    return MeasurementRecord("fock_xp", kind, float(chi), int(seed), x)


def sample_spin_joint(chi, n, seed, amplitudes=BALANCED):
    """(sigma1, sigma2) outcomes of the weak-then-projective spin measurement.

    sigma2 is drawn from its exact marginal; sigma1 given sigma2 by rejection
    from the positive part of the Gaussian mixture.
    """
    n = _check(chi, n)
    rng = make_rng(seed)
    weights = dressed_spin_weights(chi, amplitudes)
    p_up = float(weights[1].sum())
    sigma2 = np.where(rng.random(n) < p_up, 1.0, -1.0)
    sigma1 = np.empty(n)
    sd = 1 / (np.sqrt(2) * chi)
    for s2 in (1, -1):
        idx = np.flatnonzero(sigma2 == s2)
        if idx.size:
            sigma1[idx] = _rejection_mixture(rng, weights[s2], sd, idx.size, chi)
    out = np.column_stack([sigma1, sigma2])
    return MeasurementRecord("spin", "joint", float(chi), int(seed), out)


def _rejection_mixture(rng, w, sd, n, chi):
    pos = np.clip(w, 0.0, None)
    neg = np.clip(w, None, 0.0)
    mass = w.sum()
    if not pos.sum() > 0 or not mass > 0:
        raise SamplingError("conditional distribution has no positive mass")
    accept_rate = mass / pos.sum()
    if accept_rate < MIN_ACCEPTANCE:
        raise SamplingError(
            f"rejection acceptance rate {accept_rate:.3g} below {MIN_ACCEPTANCE} at chi={chi}"
        )
    probs = pos / pos.sum()
    out = np.empty(0)
    while out.size < n:
        m = int((n - out.size) / accept_rate * 1.1) + 16
        comp = rng.choice(len(w), size=m, p=probs)
        x = SPIN_CENTRES[comp] + sd * rng.standard_normal(m)
        if np.any(neg < 0):
            kern = np.exp(-np.square((x[:, None] - SPIN_CENTRES) / sd) / 2)
            ratio = (kern @ w) / (kern @ pos)
            x = x[rng.random(m) < ratio]
        out = np.concatenate([out, x])
    log.debug("spin rejection sampler: acceptance %.3f", accept_rate)
    return out[:n]


def sample_spin_single(chi, n, seed, amplitudes=BALANCED):
    n = _check(chi, n)
    rng = make_rng(seed)
    p_up = abs(amplitudes.alpha) ** 2
    centre = np.where(rng.random(n) < p_up, 1.0, -1.0)
    x = centre + rng.standard_normal(n) / (np.sqrt(2) * chi)
    return MeasurementRecord("spin", "single_1", float(chi), int(seed), x)

