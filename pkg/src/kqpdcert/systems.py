"""Closed-form physics of the two benchmark systems.

Two examples are covered:

* ``xp``: simultaneous heterodyne-style measurement of position and momentum
  on a single-photon Fock state, with equal detector strengths on both
  quadratures.
* ``spin``: a weak measurement of ``sigma_z`` (strength ``chi``) followed by a
  projective measurement of ``sigma_x`` on a spin-1/2 prepared in ``|+>``.

Detectors are minimal-uncertainty Gaussians, so every measured distribution
is the Keldysh quasi-probability (KQPD) blurred by a Gaussian imprecision
kernel and averaged over a Gaussian backaction kick. Everything here is a
pure function of its arguments.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SQRT_PI = np.sqrt(np.pi)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
NORM_TOL = 1e-10
IMAG_RESIDUE_TOL = 1e-10
MERGE_TOL = 1e-9
CLAMP_TOL = 1e-12


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {np.trace(rho)}, expected 1")
        if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
            raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self):
        return self.entries.shape[0]

    @classmethod
    def pure(cls, ket):
        ket = np.asarray(ket, dtype=complex)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()))


@dataclass(frozen=True)
class Observable:
    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("observable must be square")
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL:
            raise ValueError(f"observable {self.label!r} is not Hermitian")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self):
        return self.entries.shape[0]


SIGMA_X = Observable(np.array([[0, 1], [1, 0]]), "sigma_x")
SIGMA_Y = Observable(np.array([[0, -1j], [1j, 0]]), "sigma_y")
SIGMA_Z = Observable(np.array([[1, 0], [0, -1]]), "sigma_z")


@dataclass(frozen=True)
class StrengthConfig:
    """Raw strength ``chi`` and the imprecision-replacement strength ``chi_prime``."""

    chi: float
    chi_prime: float

    def __post_init__(self):
        if not self.chi > 0 or not self.chi_prime > 0:
            raise ValueError("measurement strengths must be positive")

    @property
    def g(self):
        return g_parameter(self.chi, self.chi_prime)


@dataclass
class SignedAtomDistribution:
    """Discrete signed distribution over outcome pairs ``(a1, a2)``."""

    atoms: list
    backaction: tuple = (0.0, 0.0)

    def __post_init__(self):
        keys = [(a1, a2) for a1, a2, _ in self.atoms]
        if len(set(keys)) != len(keys):
            raise ValueError("atom outcome tuples must be unique")

    def total(self):
        return float(sum(w for _, _, w in self.atoms))

    def as_dict(self):
        return {(a1, a2): w for a1, a2, w in self.atoms}

    def weight(self, a1, a2, tol=MERGE_TOL):
        for b1, b2, w in self.atoms:
            if abs(b1 - a1) <= tol and abs(b2 - a2) <= tol:
                return w
        return 0.0

    def is_negative(self, tol=0.0):
        return any(w < -tol for _, _, w in self.atoms)


class SpinAmplitudes(NamedTuple):
    """``|psi> = alpha|+_1> + beta|-_1>`` and ``|+_2> = gamma|+_1> + delta|-_1>``."""

    alpha: complex
    beta: complex
    gamma: complex
    delta: complex

    def check(self):
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1) > NORM_TOL:
            raise ValueError("|alpha|^2 + |beta|^2 must be 1")
        if abs(abs(self.gamma) ** 2 + abs(self.delta) ** 2 - 1) > NORM_TOL:
            raise ValueError("|gamma|^2 + |delta|^2 must be 1")
        return self


BALANCED = SpinAmplitudes(*(4 * (1 / np.sqrt(2),)))


# ---------------------------------------------------------------------------
# Wigner functions and detector kernels


def wigner_fock(x, p):
    """Wigner function of the one-photon Fock state."""
    r2 = np.square(x) + np.square(p)
    return (2 * r2 - 1) * np.exp(-r2) / np.pi


def wigner_detector(r, pi):
    """Wigner function of the Gaussian detector ground state."""
    return np.exp(-(np.square(r) + np.square(pi))) / np.pi


def imprecision_pdf(a, chi):
    """Position part of the detector Wigner function, rescaled to outcome units."""
    return chi / SQRT_PI * np.exp(-np.square(chi * np.asarray(a)))


def backaction_pdf(gamma, chi):
    """Momentum part of the detector Wigner function: density of the kick ``gamma``."""
    return np.exp(-np.square(np.asarray(gamma) / chi)) / (SQRT_PI * chi)


def imprecision_cf(lam, chi):
    return np.exp(-np.square(lam) / (4 * chi**2))


def g_parameter(chi, chi_prime):
    return (chi / 2) ** 2 + 1 / chi_prime**2


# ---------------------------------------------------------------------------
# quasi-probabilities


def kqpd_xp(x, p, gamma_x, gamma_p):
    """KQPD of the simultaneous x/p measurement: the Wigner function, shifted by the kicks."""
    return wigner_fock(np.asarray(x) - np.asarray(gamma_p) / 2, np.asarray(p) + np.asarray(gamma_x) / 2)


def kqpd_spin_weights(alpha, beta, gamma, delta, gamma1=0.0):
    """Six-atom KQPD of the sequential ``sigma_1`` then ``sigma_2`` measurement."""
    amp = SpinAmplitudes(alpha, beta, gamma, delta).check()
    a2, b2 = abs(amp.alpha) ** 2, abs(amp.beta) ** 2
    c2, d2 = abs(amp.gamma) ** 2, abs(amp.delta) ** 2
    interference = 2 * np.real(
        np.exp(-2j * gamma1) * amp.alpha * np.conj(amp.beta) * np.conj(amp.gamma) * amp.delta
    )
    atoms = [
        (1.0, 1.0, a2 * c2),
        (-1.0, 1.0, b2 * d2),
        (0.0, 1.0, float(interference)),
        (1.0, -1.0, a2 * d2),
        (-1.0, -1.0, b2 * c2),
        (0.0, -1.0, -float(interference)),
    ]
    return SignedAtomDistribution(atoms=atoms, backaction=(float(gamma1), 0.0))


def kqpd_generic_sequential(rho, A1, A2, gamma1=0.0, gamma2=0.0):
    """KQPD of two subsequent measurements on a finite-dimensional system.

    Expanding the trace in the eigenbases of ``A1`` (``a_m, |m>``) and ``A2``
    (``b_k, |b_k>``) makes the Fourier integrals collapse onto atoms at
    ``((a_m + a_n)/2, b_k)`` with weight
    ``rho_mn exp(-i gamma1 (a_m - a_n)) <b_k|m><n|b_k>``. The ``gamma2`` phase
    cancels inside the trace, so the result does not depend on it.
    """
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    if not isinstance(A1, Observable):
        A1 = Observable(A1)
    if not isinstance(A2, Observable):
        A2 = Observable(A2)
    if not (rho.dim == A1.dim == A2.dim):
        raise ValueError("state and observables must share a dimension")
    try:
        a, U = np.linalg.eigh(A1.entries)
        b, V = np.linalg.eigh(A2.entries)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("eigendecomposition failed") from exc

    rho_1 = U.conj().T @ rho.entries @ U  # rho_mn in the A1 basis
    overlap = V.conj().T @ U  # overlap[k, m] = <b_k|m>
    phase = np.exp(-1j * gamma1 * (a[:, None] - a[None, :]))
    # w[k, m, n] = rho_mn phase_mn <b_k|m> <n|b_k>
    w = (rho_1 * phase)[None, :, :] * overlap[:, :, None] * overlap.conj()[:, None, :]
    centres = (a[:, None] + a[None, :]) / 2

    merged = []  # [a1, a2, complex weight]
    for k in range(len(b)):
        for m in range(len(a)):
            for n in range(len(a)):
                key1, key2 = centres[m, n], b[k]
                for atom in merged:
                    if abs(atom[0] - key1) <= MERGE_TOL and abs(atom[1] - key2) <= MERGE_TOL:
                        atom[2] += w[k, m, n]
                        break
                else:
                    merged.append([key1, key2, complex(w[k, m, n])])

    residue = sum(abs(atom[2].imag) for atom in merged)
    if residue > IMAG_RESIDUE_TOL:
        raise ArithmeticError(f"imaginary residue {residue:.3e} in KQPD weights")
    atoms = [(float(_snap(a1)), float(_snap(a2)), float(wt.real)) for a1, a2, wt in merged]
    atoms.sort(key=lambda t: (-t[1], -t[0]))
    return SignedAtomDistribution(atoms=atoms, backaction=(float(gamma1), float(gamma2)))


def _snap(v, tol=MERGE_TOL):
    # keeps eigenvalue round-off (e.g. -1.0000000000000002) out of atom labels
    r = round(v)
    return float(r) if abs(v - r) <= tol else v


# ---------------------------------------------------------------------------
# x/p example


def pdf_xp_joint(x, p, chi):
    """Measured density of the joint x/p measurement at equal strengths ``chi``."""
    r2 = np.square(x) + np.square(p)
    s = 2 + chi**2
    pref = 4 * chi**2 / (np.pi * s**6)
    return pref * np.exp(-4 * chi**2 * r2 / s**2) * (32 * chi**4 * r2 + (4 - chi**4) ** 2)


def cf_xp_joint(lam_x, lam_p, chi):
    l2 = np.square(lam_x) + np.square(lam_p)
    out = 0.5 * np.exp(-((2 + chi**2) ** 2) / (16 * chi**2) * l2) * (2 - l2)
    return out.astype(complex) if isinstance(out, np.ndarray) else complex(out)


def pdf_x_single(x, chi):
    """Measured density of ``x`` alone (the ``p`` marginal is identical)."""
    x2 = np.square(x)
    c2 = chi**2
    return chi / np.sqrt(np.pi * (1 + c2) ** 5) * (1 + c2 + 2 * x2 * c2**2) * np.exp(-c2 * x2 / (1 + c2))


def cf_x_single(lam, chi):
    l2 = np.square(lam)
    out = 0.5 * np.exp(-(1 + chi**2) * l2 / (4 * chi**2)) * (2 - l2)
    return out.astype(complex) if isinstance(out, np.ndarray) else complex(out)


def imprecision_ratio_xp(lam, chi, chi_prime):
    """``cf_x_single(lam, chi_prime) / cf_x_single(lam, chi)`` with the common factor cancelled."""
    return np.exp(-np.square(lam) / 4 * (1 / chi_prime**2 - 1 / chi**2))


def exact_k_xp(x, p, chi, chi_prime):
    g = g_parameter(chi, chi_prime)
    r2 = np.square(x) + np.square(p)
    return np.exp(-r2 / (1 + g)) * (2 * r2 - 1 + g**2) / (np.pi * (1 + g) ** 3)


# ---------------------------------------------------------------------------
# spin example

SPIN_CENTRES = np.array([-1.0, 0.0, 1.0])


def _check_sigma2(sigma2):
    s = np.asarray(sigma2)
    if not np.all((s == 1) | (s == -1)):
        raise ValueError(f"sigma2 must be +1 or -1, got {sigma2}")


def dressed_spin_weights(chi, amplitudes=BALANCED):
    """Atom weights at ``sigma1' = -1, 0, +1`` for each ``sigma2``.

    The interference atom carries the backaction damping ``exp(-chi^2)``.
    Returns ``{+1: array(3), -1: array(3)}``.
    """
    dist = kqpd_spin_weights(*amplitudes, gamma1=0.0).as_dict()
    damp = np.array([1.0, np.exp(-chi**2), 1.0])
    return {
        s2: damp * np.array([dist[(c, float(s2))] for c in SPIN_CENTRES]) for s2 in (1, -1)
    }


def spin_sigma2_marginal(chi, amplitudes=BALANCED):
    """``P(sigma2 = +1 | chi)`` and ``P(sigma2 = -1 | chi)``."""
    w = dressed_spin_weights(chi, amplitudes)
    return {s2: float(w[s2].sum()) for s2 in (1, -1)}


def pdf_spin_joint(sigma1, sigma2, chi, amplitudes=BALANCED, diagnostics=None):
    """Measured density in ``sigma1`` (probability in ``sigma2``) of the sequential measurement.

    Values in ``(-1e-12, 0)`` from cancellation are clamped to zero and counted
    under ``diagnostics["clamped"]`` when a dict is supplied.
    """
    _check_sigma2(sigma2)
    s1 = np.asarray(sigma1, dtype=float)
    s2 = np.broadcast_to(np.asarray(sigma2), np.broadcast_shapes(s1.shape, np.shape(sigma2)))
    s1 = np.broadcast_to(s1, s2.shape)
    w = dressed_spin_weights(chi, amplitudes)
    out = np.zeros(s1.shape)
    for s2_val in (1, -1):
        sel = s2 == s2_val
        kern = np.exp(-(chi**2) * np.square(s1[sel][..., None] - SPIN_CENTRES))
        out[sel] = chi / SQRT_PI * kern @ w[s2_val]
    if np.any(out < -CLAMP_TOL):
        raise ArithmeticError("measured spin distribution went negative")
    neg = out < 0
    if diagnostics is not None:
        diagnostics["clamped"] = diagnostics.get("clamped", 0) + int(neg.sum())
    out[neg] = 0.0
    return out if out.ndim else float(out)


def cf_spin_joint(lam1, sigma2, chi, amplitudes=BALANCED):
    """Characteristic function in ``sigma1`` of the joint record restricted to ``sigma2``."""
    _check_sigma2(sigma2)
    lam = np.asarray(lam1, dtype=float)
    w = dressed_spin_weights(chi, amplitudes)[int(sigma2)]
    phases = np.exp(-1j * lam[..., None] * SPIN_CENTRES)
    out = imprecision_cf(lam, chi) * (phases @ w)
    return out if out.ndim else complex(out)


def pdf_spin_single(sigma1, chi, amplitudes=BALANCED):
    s1 = np.asarray(sigma1, dtype=float)
    pa, pb = abs(amplitudes.alpha) ** 2, abs(amplitudes.beta) ** 2
    out = chi / SQRT_PI * (pa * np.exp(-(chi**2) * (s1 - 1) ** 2) + pb * np.exp(-(chi**2) * (s1 + 1) ** 2))
    return out if out.ndim else float(out)


def cf_spin_single(lam1, chi, amplitudes=BALANCED):
    lam = np.asarray(lam1, dtype=float)
    pa, pb = abs(amplitudes.alpha) ** 2, abs(amplitudes.beta) ** 2
    out = imprecision_cf(lam, chi) * (np.cos(lam) + (pb - pa) * 1j * np.sin(lam))
    return out if out.ndim else complex(out)


def exact_k_spin(sigma1, sigma2, chi, chi_prime, amplitudes=BALANCED):
    """K for the spin example: KQPD atoms blurred at ``chi_prime``, damped by backaction at ``chi``."""
    _check_sigma2(sigma2)
    s1 = np.asarray(sigma1, dtype=float)
    s2 = np.broadcast_to(np.asarray(sigma2), np.broadcast_shapes(s1.shape, np.shape(sigma2)))
    s1 = np.broadcast_to(s1, s2.shape)
    w = dressed_spin_weights(chi, amplitudes)
    out = np.zeros(s1.shape)
    for s2_val in (1, -1):
        sel = s2 == s2_val
        kern = np.exp(-(chi_prime**2) * np.square(s1[sel][..., None] - SPIN_CENTRES))
        out[sel] = chi_prime / SQRT_PI * kern @ w[s2_val]
    return out if out.ndim else float(out)
