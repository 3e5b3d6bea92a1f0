"""Experiment configuration files.

The format is INI-style: one section per CLI command, flat ``key = value``
lines, ``#`` comments. Keys in ``[DEFAULT]`` apply to every section. Unknown
sections or keys are rejected. Example::

    [sweep]
    system = fock_xp
    chi = 0.5, 1.0, 1.5
    chi_prime = 5
    c_o = 0.011
    lambda_c = 10
    probes = 0 0; 0.5 0
    trials = 20
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .estimation import FIG2A_CUTOFFS, FIG2B_CUTOFFS, CutoffConfig
from .experiments import DEFAULT_PROBES, Experiment

COMMANDS = ("exact", "simulate", "estimate", "sweep")
MIN_SAMPLES = 100

KEYS = {
    "system",
    "chi",
    "chi_prime",
    "n_single",
    "n_joint",
    "c_o",
    "lambda_c",
    "n_lambda",
    "probes",
    "trials",
    "master_seed",
    "output_dir",
    "z_threshold",
    "oracle",
    "grid",
    "records",
}

DEFAULT_GRIDS = {
    "fock_xp": ((-6.0, 6.0, 0.05), (-6.0, 6.0, 0.05)),
    "spin": ((-4.0, 4.0, 0.01),),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    system: str
    chi: list
    chi_prime: float
    n_single: int = 15_000
    n_joint: int = 30_000
    cutoffs: CutoffConfig = None
    probes: list = field(default_factory=list)
    trials: int = 20
    master_seed: int = 0
    output_dir: str = "out"
    z_threshold: float = 5.0
    oracle: bool = False
    grid: tuple = None
    records: str = None

    def __post_init__(self):
        if self.system not in DEFAULT_PROBES:
            raise ConfigError(f"unknown system {self.system!r}")
        if isinstance(self.chi, (int, float)):
            self.chi = [float(self.chi)]
        if not self.chi:
            raise ConfigError("chi list is empty")
        if any(not c > 0 for c in self.chi) or not self.chi_prime > 0:
            raise ConfigError("measurement strengths must be positive")
        if self.n_single < MIN_SAMPLES or self.n_joint < MIN_SAMPLES:
            raise ConfigError(f"n_single and n_joint must be >= {MIN_SAMPLES}")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.cutoffs is None:
            self.cutoffs = FIG2A_CUTOFFS if self.system == "fock_xp" else FIG2B_CUTOFFS
        if not self.probes:
            self.probes = [DEFAULT_PROBES[self.system]]
        self.probes = [tuple(float(v) for v in p) for p in self.probes]
        if any(len(p) != 2 for p in self.probes):
            raise ConfigError("each probe needs two coordinates")
        if self.system == "spin" and any(p[1] not in (-1.0, 1.0) for p in self.probes):
            raise ConfigError("spin probes need sigma2 = +1 or -1")
        if self.grid is None:
            self.grid = DEFAULT_GRIDS[self.system]

    def experiment(self, chi=None):
        return Experiment(
            system=self.system,
            chi=float(self.chi[0] if chi is None else chi),
            chi_prime=self.chi_prime,
            n_single=self.n_single,
            n_joint=self.n_joint,
            cutoffs=self.cutoffs,
            oracle=self.oracle,
        )

    def override(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def snapshot(self):
        return {
            "system": self.system,
            "chi": list(self.chi),
            "chi_prime": self.chi_prime,
            "n_single": self.n_single,
            "n_joint": self.n_joint,
            "cutoffs": self.cutoffs.as_dict(),
            "probes": [list(p) for p in self.probes],
            "trials": self.trials,
            "master_seed": self.master_seed,
            "output_dir": str(self.output_dir),
            "z_threshold": self.z_threshold,
            "oracle": self.oracle,
            "grid": [list(a) for a in self.grid],
            "records": self.records,
        }


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _probes(text):
    out = [_floats(chunk) for chunk in text.split(";") if chunk.strip()]
    if not out:
        raise ConfigError("probes list is empty")
    return out


def _grid(text):
    axes = [tuple(_floats(chunk)) for chunk in text.split(";") if chunk.strip()]
    if any(len(a) != 3 for a in axes):
        raise ConfigError("grid axes are 'min max step' triples separated by ';'")
    return tuple(axes)


def parse_section(items):
    """Build an :class:`ExperimentConfig` from a mapping of raw string values."""
    unknown = set(items) - KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "system" not in items:
        raise ConfigError("missing required key 'system'")
    try:
        system = items["system"].strip()
        default_cut = FIG2A_CUTOFFS if system == "fock_xp" else FIG2B_CUTOFFS
        kw = dict(
            system=system,
            chi=_floats(items.get("chi", "")),
            chi_prime=float(items.get("chi_prime", 5.0 if system == "fock_xp" else 3.0)),
            cutoffs=CutoffConfig(
                c_o=float(items.get("c_o", default_cut.c_o)),
                lambda_c=float(items.get("lambda_c", default_cut.lambda_c)),
                n_lambda=int(items.get("n_lambda", default_cut.n_lambda)),
            ),
        )
        for key in ("n_single", "n_joint", "trials", "master_seed"):
            if key in items:
                kw[key] = int(items[key])
        if "z_threshold" in items:
            kw["z_threshold"] = float(items["z_threshold"])
        if "probes" in items:
            kw["probes"] = _probes(items["probes"])
        if "grid" in items:
            kw["grid"] = _grid(items["grid"])
        if "oracle" in items:
            kw["oracle"] = items["oracle"].strip().lower() in ("1", "true", "yes", "on")
        if "output_dir" in items:
            kw["output_dir"] = items["output_dir"].strip()
        if "records" in items:
            kw["records"] = items["records"].strip()
        return ExperimentConfig(**kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, command):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    bad = [s for s in parser.sections() if s not in COMMANDS]
    if bad:
        raise ConfigError(f"unknown config sections: {', '.join(bad)}")
    if parser.has_section(command):
        items = dict(parser.items(command))
    else:
        items = dict(parser.defaults())
    if not items:
        raise ConfigError(f"config {path} has no [{command}] section")
    return parse_section(items)


def fig2_config(panel, output_dir="out"):
    """Canned configuration for one panel of the certification figure."""
    if panel == "a":
        return ExperimentConfig(
            system="fock_xp",
            chi=[0.25 * k for k in range(1, 13)],
            chi_prime=5.0,
            cutoffs=FIG2A_CUTOFFS,
            probes=[(0.0, 0.0)],
            trials=20,
            output_dir=str(Path(output_dir)),
        )
    if panel == "b":
        return ExperimentConfig(
            system="spin",
            chi=[0.25 * k for k in range(1, 11)],
            chi_prime=3.0,
            cutoffs=FIG2B_CUTOFFS,
            probes=[(0.0, -1.0)],
            trials=20,
            output_dir=str(Path(output_dir)),
        )
    raise ConfigError(f"unknown panel {panel!r}")
