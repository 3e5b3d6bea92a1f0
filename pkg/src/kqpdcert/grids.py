"""Uniform grids for densities and characteristic functions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def uniform_axis(lo, hi, step):
    """Nodes of a closed uniform axis ``[lo, hi]`` with spacing ``step``."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    n = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


def trapezoid_weights(n, step):
    """1D composite trapezoidal weights for ``n`` equally spaced nodes."""
    if n < 1:
        raise ValueError("need at least one node")
    w = np.full(n, float(step))
    if n == 1:
        return np.zeros(1)
    w[0] = w[-1] = 0.5 * step
    return w


def lambda_grid(lambda_c, n_lambda=401):
    """Symmetric grid on ``[-lambda_c, lambda_c]``; ``n_lambda`` odd so 0 is a node."""
    if n_lambda < 1 or n_lambda % 2 == 0:
        raise ValueError(f"n_lambda must be odd and positive, got {n_lambda}")
    return np.linspace(-lambda_c, lambda_c, n_lambda)


@dataclass
class DensityGrid:
    """Real (possibly signed) density tabulated on a uniform grid.

    ``axes`` holds one ``(min, max, step)`` triple per dimension and
    ``values`` has shape ``(len(axis_0), len(axis_1), ...)``.
    """

    axes: list
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = [tuple(float(v) for v in ax) for ax in self.axes]
        self.values = np.asarray(self.values, dtype=float)
        for lo, hi, step in self.axes:
            if step <= 0:
                raise ValueError("grid step must be positive")
        shape = tuple(len(uniform_axis(*ax)) for ax in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match axes {shape}")

    @property
    def nodes(self):
        return [uniform_axis(*ax) for ax in self.axes]

    def integral(self):
        """Trapezoidal integral over the whole grid."""
        out = self.values
        for ax in reversed(self.axes):
            n = len(uniform_axis(*ax))
            out = out @ trapezoid_weights(n, ax[2])
        return float(out)

    @classmethod
    def from_function(cls, func, axes, **meta):
        nodes = [uniform_axis(*ax) for ax in axes]
        mesh = np.meshgrid(*nodes, indexing="ij")
        return cls(axes=list(axes), values=func(*mesh), meta=meta)


@dataclass
class CharFnGrid:
    """Complex characteristic-function values on a symmetric uniform lambda grid."""

    axes: list
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = [tuple(float(v) for v in ax) for ax in self.axes]
        self.values = np.asarray(self.values, dtype=complex)

    @property
    def nodes(self):
        return [uniform_axis(*ax) for ax in self.axes]

    def at_origin(self):
        idx = tuple(len(n) // 2 for n in self.nodes)
        return complex(self.values[idx])

    def conjugate_symmetry_error(self):
        """max |values(-lambda) - conj(values(lambda))|."""
        flipped = self.values[tuple(slice(None, None, -1) for _ in self.axes)]
        return float(np.max(np.abs(flipped - np.conj(self.values))))

    @classmethod
    def from_nodes(cls, nodes, values, **meta):
        axes = []
        for lam in nodes:
            lam = np.asarray(lam, dtype=float)
            step = lam[1] - lam[0] if lam.size > 1 else 1.0
            axes.append((lam[0], lam[-1], step))
        return cls(axes=axes, values=values, meta=meta)
