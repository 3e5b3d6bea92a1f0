"""Empirical characteristic functions and the cutoff-regularised K estimator.

The estimators follow the scikit-learn conventions: hyper-parameters go to
``__init__`` (so ``get_params``/``set_params``/``clone`` work), ``fit`` takes
measurement records, and ``predict`` evaluates K at an array of probe
outcomes. Fitted state lives in trailing-underscore attributes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .grids import CharFnGrid, lambda_grid, trapezoid_weights
from .sampling import MeasurementRecord
from .systems import (
    cf_spin_joint,
    cf_spin_single,
    cf_x_single,
    cf_xp_joint,
)
from .validation import check_outcomes, check_probes

CHUNK = 4096


class CutoffWarning(RuntimeWarning):
    """Every lambda node was excluded; the estimate is identically zero."""


@dataclass(frozen=True)
class CutoffConfig:
    """Denominator magnitude floor ``c_o``, band limit ``lambda_c`` and grid size."""

    c_o: float
    lambda_c: float
    n_lambda: int = 401

    def __post_init__(self):
        if not self.c_o >= 0:
            raise ValueError(f"c_o must be non-negative, got {self.c_o}")
        if not self.lambda_c >= 0:
            raise ValueError(f"lambda_c must be non-negative, got {self.lambda_c}")
        if self.n_lambda < 11 or self.n_lambda % 2 == 0:
            raise ValueError(f"n_lambda must be odd and >= 11, got {self.n_lambda}")

    def as_dict(self):
        return {"c_o": self.c_o, "lambda_c": self.lambda_c, "n_lambda": self.n_lambda}


FIG2A_CUTOFFS = CutoffConfig(c_o=0.011, lambda_c=10.0)
FIG2B_CUTOFFS = CutoffConfig(c_o=0.01, lambda_c=12.0)


# ---------------------------------------------------------------------------
# empirical characteristic functions


def _is_symmetric_uniform(lam):
    if lam.ndim != 1 or lam.size < 3 or lam.size % 2 == 0:
        return False
    step = lam[1] - lam[0]
    return step > 0 and np.allclose(np.diff(lam), step, rtol=1e-9, atol=0) and np.allclose(
        lam, -lam[::-1], rtol=0, atol=1e-12 * max(1.0, abs(lam[-1]))
    )


def _phases(x, lam):
    """Matrix ``exp(-i lam_k x_j)`` of shape (lam.size, x.size).

    On a symmetric uniform grid the entries come from the recurrence
    ``z_{k+1} = z_k exp(-i step x)`` started at lam = 0 and mirrored by
    conjugation; round-off grows like k * eps, well below 1e-12 at 401 nodes.
    """
    if not _is_symmetric_uniform(lam):
        return np.exp(-1j * np.multiply.outer(lam, x))
    m = lam.size // 2
    out = np.empty((lam.size, x.size), dtype=complex)
    out[m] = 1.0
    w = np.exp(-1j * (lam[1] - lam[0]) * x)
    z = np.ones(x.size, dtype=complex)
    for k in range(1, m + 1):
        z = z * w
        out[m + k] = z
        out[m - k] = z.conj()
    return out


def _phase_mean(x, lam):
    """(1/N) sum_j exp(-i lam x_j) for each lam, chunked over samples."""
    x = np.asarray(x, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float)
    acc = np.zeros(lam.size, dtype=complex)
    for start in range(0, x.size, CHUNK):
        acc += _phases(x[start : start + CHUNK], lam.ravel()).sum(axis=1)
    return (acc / x.size).reshape(lam.shape)


def _column(record, col=0):
    if isinstance(record, MeasurementRecord):
        return record.outcomes[:, col]
    return check_outcomes(record, width=None)[:, col]


def empirical_cf(record, lam):
    """Empirical characteristic function ``Y_lam = mean_j exp(-i lam x_j)`` of a 1D record."""
    if isinstance(record, MeasurementRecord) and record.kind == "joint":
        raise ValueError("empirical_cf needs a single-observable record")
    x = _column(record)
    if x.size == 0:
        raise ValueError("empty record")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    return CharFnGrid.from_nodes([lam], _phase_mean(x, lam), n=x.size)


def empirical_cf_joint_xp(record, lam_x, lam_p=None):
    """Empirical CF of a joint (x, p) record on the product grid ``lam_x x lam_p``."""
    lam_x = np.atleast_1d(np.asarray(lam_x, dtype=float))
    lam_p = lam_x if lam_p is None else np.atleast_1d(np.asarray(lam_p, dtype=float))
    xp = record.outcomes if isinstance(record, MeasurementRecord) else check_outcomes(record, width=2)
    if xp.shape[0] == 0:
        raise ValueError("empty record")
    acc = np.zeros((lam_x.size, lam_p.size), dtype=complex)
    for start in range(0, xp.shape[0], CHUNK):
        blk = xp[start : start + CHUNK]
        acc += _phases(blk[:, 0], lam_x) @ _phases(blk[:, 1], lam_p).T
    return CharFnGrid.from_nodes([lam_x, lam_p], acc / xp.shape[0], n=xp.shape[0])


def empirical_cf_spin(record, lam):
    """Per-sigma2 empirical CFs of a joint spin record, both normalised by the total N."""
    data = record.outcomes if isinstance(record, MeasurementRecord) else check_outcomes(record, width=2)
    if data.shape[0] == 0:
        raise ValueError("empty record")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    n = data.shape[0]
    out = {}
    for s2 in (1, -1):
        sel = data[data[:, 1] == s2, 0]
        vals = _phase_mean(sel, lam) * (sel.size / n) if sel.size else np.zeros(lam.shape, complex)
        out[s2] = CharFnGrid.from_nodes([lam], vals, n=n, sigma2=s2)
    return out


# ---------------------------------------------------------------------------
# estimators


def _masked_ratio(numer, denom, c_o):
    keep = np.abs(denom) > c_o
    ratio = np.zeros(denom.shape, dtype=complex)
    ratio[keep] = numer[keep] / denom[keep]
    return ratio, keep


class _KEstimatorBase(BaseEstimator):
    def _grid(self):
        CutoffConfig(self.c_o, self.lambda_c, self.n_lambda)
        lam = lambda_grid(self.lambda_c, self.n_lambda)
        w = trapezoid_weights(lam.size, lam[1] - lam[0])
        return lam, w

    def _flag_cutoff(self):
        self.all_cut_off_ = self.n_contributing_ == 0
        if self.all_cut_off_:
            warnings.warn("all lambda nodes cut off; K estimate is 0", CutoffWarning, stacklevel=3)

    @property
    def cutoffs(self):
        return CutoffConfig(self.c_o, self.lambda_c, self.n_lambda)

    def predict(self, probes):
        """Real part of the K estimate at each probe outcome."""
        return self.predict_complex(probes).real


class XPKEstimator(_KEstimatorBase):
    """K estimator for the simultaneous position/momentum measurement.

    Parameters
    ----------
    c_o : float
        Node (lambda_x, lambda_p) contributes only where both denominator
        empirical CFs exceed ``c_o`` in magnitude.
    lambda_c : float
        Quadrature runs over ``[-lambda_c, lambda_c]^2``.
    n_lambda : int
        Odd number of trapezoidal nodes per axis.
    """

    def __init__(self, c_o=0.011, lambda_c=10.0, n_lambda=401):
        self.c_o = c_o
        self.lambda_c = lambda_c
        self.n_lambda = n_lambda

    def fit(self, joint, single_x, single_p, single_x_prime, single_p_prime):
        """Store the joint samples and the cutoff-masked imprecision ratios.

        ``single_x``/``single_p`` are measured at the same strength as the joint
        record; the ``*_prime`` records at the replacement strength.
        """
        lam, w = self._grid()
        self.lambda_, self.weights_ = lam, w
        self.ratio_x_, self.mask_x_ = _masked_ratio(
            _phase_mean(_column(single_x_prime), lam), _phase_mean(_column(single_x), lam), self.c_o
        )
        self.ratio_p_, self.mask_p_ = _masked_ratio(
            _phase_mean(_column(single_p_prime), lam), _phase_mean(_column(single_p), lam), self.c_o
        )
        xp = joint.outcomes if isinstance(joint, MeasurementRecord) else check_outcomes(joint, width=2)
        if xp.shape[0] == 0:
            raise ValueError("empty joint record")
        self.joint_samples_ = xp
        self.joint_cf_ = None
        self._finish()
        return self

    def fit_exact(self, chi, chi_prime):
        """Oracle mode: use the closed-form CFs in place of every empirical one."""
        lam, w = self._grid()
        self.lambda_, self.weights_ = lam, w
        ratio, mask = _masked_ratio(cf_x_single(lam, chi_prime), cf_x_single(lam, chi), self.c_o)
        self.ratio_x_, self.mask_x_ = ratio, mask
        self.ratio_p_, self.mask_p_ = ratio.copy(), mask.copy()
        self.joint_samples_ = None
        self.joint_cf_ = cf_xp_joint(lam[:, None], lam[None, :], chi)
        self._finish()
        return self

    def fit_cfs(self, joint_cf, cf_x, cf_p, cf_x_prime, cf_p_prime):
        """Fit from precomputed CF values on this estimator's lambda grid."""
        lam, w = self._grid()
        self.lambda_, self.weights_ = lam, w
        self.ratio_x_, self.mask_x_ = _masked_ratio(np.asarray(cf_x_prime), np.asarray(cf_x), self.c_o)
        self.ratio_p_, self.mask_p_ = _masked_ratio(np.asarray(cf_p_prime), np.asarray(cf_p), self.c_o)
        self.joint_samples_ = None
        self.joint_cf_ = np.asarray(joint_cf, dtype=complex)
        self._finish()
        return self

    def _finish(self):
        live = self.weights_ > 0
        self.n_contributing_ = int((self.mask_x_ & live).sum() * (self.mask_p_ & live).sum())
        self._flag_cutoff()

    def predict_complex(self, probes):
        check_is_fitted(self, "lambda_")
        probes = check_probes(probes, width=2)
        if self.all_cut_off_:
            return np.zeros(probes.shape[0], dtype=complex)
        kx = np.flatnonzero(self.mask_x_)
        kp = np.flatnonzero(self.mask_p_)
        lam, w = self.lambda_, self.weights_
        ux, ix = np.unique(probes[:, 0], return_inverse=True)
        up, ip = np.unique(probes[:, 1], return_inverse=True)
        # gx[i, a] = w_i R_i exp(i lam_i x_a), restricted to contributing nodes
        gx = (w[kx] * self.ratio_x_[kx])[:, None] * np.exp(1j * np.multiply.outer(lam[kx], ux))
        gp = (w[kp] * self.ratio_p_[kp])[:, None] * np.exp(1j * np.multiply.outer(lam[kp], up))
        if self.joint_samples_ is None:
            grid = gx.T @ self.joint_cf_[np.ix_(kx, kp)] @ gp
            out = grid[ix, ip]
        else:
            out = self._sample_sum(gx, gp, kx, kp, ix, ip)
        return out / (4 * np.pi**2)

    def _sample_sum(self, gx, gp, kx, kp, ix, ip):
        # mean_n Fx[n, x] Fp[n, p], with Fx = exp(-i x_n lam) @ gx; avoids the full 2D joint CF
        xp = self.joint_samples_
        dense = ix.size > 0.25 * (gx.shape[1] * gp.shape[1])
        acc = np.zeros((gx.shape[1], gp.shape[1]) if dense else ix.size, dtype=complex)
        for start in range(0, xp.shape[0], CHUNK):
            blk = xp[start : start + CHUNK]
            fx = _phases(blk[:, 0], self.lambda_)[kx].T @ gx
            fp = _phases(blk[:, 1], self.lambda_)[kp].T @ gp
            if dense:
                acc += fx.T @ fp
            else:
                acc += np.einsum("nk,nk->k", fx[:, ix], fp[:, ip])
        acc /= xp.shape[0]
        return acc[ix, ip] if dense else acc


class SpinKEstimator(_KEstimatorBase):
    """K estimator for the weak sigma_1 / projective sigma_2 spin measurement.

    Probes are ``(sigma1, sigma2)`` pairs with ``sigma2`` in {-1, +1}.
    """

    def __init__(self, c_o=0.01, lambda_c=12.0, n_lambda=401):
        self.c_o = c_o
        self.lambda_c = lambda_c
        self.n_lambda = n_lambda

    def fit(self, joint, single, single_prime):
        lam, w = self._grid()
        self.lambda_, self.weights_ = lam, w
        self.ratio_, self.mask_ = _masked_ratio(
            _phase_mean(_column(single_prime), lam), _phase_mean(_column(single), lam), self.c_o
        )
        cfs = empirical_cf_spin(joint, lam)
        self.joint_cf_ = {s2: g.values for s2, g in cfs.items()}
        self._finish()
        return self

    def fit_exact(self, chi, chi_prime):
        lam, w = self._grid()
        self.lambda_, self.weights_ = lam, w
        self.ratio_, self.mask_ = _masked_ratio(cf_spin_single(lam, chi_prime), cf_spin_single(lam, chi), self.c_o)
        self.joint_cf_ = {s2: cf_spin_joint(lam, s2, chi) for s2 in (1, -1)}
        self._finish()
        return self

    def _finish(self):
        self.n_contributing_ = int((self.mask_ & (self.weights_ > 0)).sum())
        self._flag_cutoff()

    def predict_complex(self, probes):
        check_is_fitted(self, "lambda_")
        probes = check_probes(probes, width=2)
        sigma2 = probes[:, 1]
        if not np.all(np.isin(sigma2, (-1.0, 1.0))):
            raise ValueError("sigma2 probes must be +1 or -1")
        out = np.zeros(probes.shape[0], dtype=complex)
        if self.all_cut_off_:
            return out
        k = np.flatnonzero(self.mask_)
        lam = self.lambda_[k]
        for s2 in (1, -1):
            sel = sigma2 == s2
            if sel.any():
                coef = self.weights_[k] * self.ratio_[k] * self.joint_cf_[s2][k]
                out[sel] = np.exp(1j * np.multiply.outer(probes[sel, 0], lam)) @ coef
        return out / (2 * np.pi)


def estimate_k_xp(joint, single_x, single_p, single_x_prime, single_p_prime, probe, cutoffs=FIG2A_CUTOFFS):
    """K estimate at one (x, p) probe from the five x/p records."""
    est = XPKEstimator(cutoffs.c_o, cutoffs.lambda_c, cutoffs.n_lambda)
    est.fit(joint, single_x, single_p, single_x_prime, single_p_prime)
    return float(est.predict([probe])[0])


def estimate_k_spin(joint, single, single_prime, probe, cutoffs=FIG2B_CUTOFFS):
    """K estimate at one (sigma1, sigma2) probe from the three spin records."""
    est = SpinKEstimator(cutoffs.c_o, cutoffs.lambda_c, cutoffs.n_lambda)
    est.fit(joint, single, single_prime)
    return float(est.predict([probe])[0])
