"""Angles between right eigenvectors and their limit laws.

For a pair at microscopic distance, ``Phi^{-1}(angle)`` scaled by
``sqrt(N)|l_1 - l_2|`` is a circular complex Gaussian with ``E|X|^2 = 1``,
where ``Phi(z) = z / sqrt(1 + |z|^2)``.  With one eigenvalue at the origin,
``N |angle|^2`` converges to the density ``(1 - (1+t) e^{-t}) / t^2``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InsufficientSamples
from .estimators import KSReport, ks_distance
from .formulas import angle_finite_N_cdf, angle_limit_cdf
from .rand_ensembles import RandomSource, as_generator, sample_conditioned_radii_origin

MIN_SAMPLES = 1000


def eigenvector_angle(X, i: int, j: int) -> complex:
    """``R_i^* R_j / (|R_i| |R_j|)`` for columns of ``X``."""
    ri = X[:, i]
    rj = X[:, j]
    return complex(np.vdot(ri, rj) / (np.linalg.norm(ri) * np.linalg.norm(rj)))


def pair_angles(X, i, j) -> np.ndarray:
    """Vectorised ``eigenvector_angle`` for index arrays."""
    norms = np.linalg.norm(X, axis=0)
    gram = X.conj().T @ X
    return gram[i, j] / (norms[i] * norms[j])


def phi_map(z):
    """``z / sqrt(1 + |z|^2)``, a bijection from the plane onto the open unit disk."""
    z = np.asarray(z, dtype=complex)
    return z / np.sqrt(1.0 + np.abs(z) ** 2)


def phi_inverse(w):
    """``w / sqrt(1 - |w|^2)`` for ``|w| < 1``."""
    w = np.asarray(w, dtype=complex)
    return w / np.sqrt(1.0 - np.abs(w) ** 2)


def sample_angle_at_origin(N: int, rng: RandomSource, size: int) -> np.ndarray:
    """Samples of ``N |angle|^2`` for eigenvalue 0 and a uniformly chosen partner.

    In the Schur basis ordered (0, l_2, ...), the squared angle is
    ``|b|^2/(1 + |b|^2)`` with ``b = T_12 / l_2``.
    """
    gen = as_generator(rng)
    r = sample_conditioned_radii_origin(N, gen, size)
    pick = gen.integers(0, N - 1, size=size)
    r2 = r[np.arange(size), pick] ** 2
    t2 = gen.standard_exponential(size) / N
    b2 = t2 / r2
    return N * b2 / (1.0 + b2)


def angle_distribution_test(samples, N: int, omega=None, mode: str = "pair", threshold: float = 0.05,
                            finite_N: bool = False) -> KSReport:
    """KS test of eigenvector angles against their law.

    ``mode="pair"``: ``samples`` are complex angles and ``omega`` the matching
    ``sqrt(N)|l_i - l_j|``; the modulus squared of ``omega Phi^{-1}(angle)``
    is tested against Exp(1).
    ``mode="origin"``: ``samples`` are values of ``N |angle|^2``, tested against
    the limit CDF (or the exact finite-``N`` mixture if ``finite_N``).
    """
    s = np.asarray(samples)
    if s.size < MIN_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_SAMPLES} samples, got {s.size}")
    if mode == "pair":
        if omega is None:
            raise ValueError("pair mode needs the separations omega")
        x = np.abs(np.asarray(omega) * phi_inverse(s)) ** 2
        d = ks_distance(x, lambda t: -np.expm1(-np.clip(t, 0.0, None)))
        return KSReport("angle_pair", s.size, d, threshold)
    if mode == "origin":
        cdf = (lambda t: angle_finite_N_cdf(N, t)) if finite_N else angle_limit_cdf
        return KSReport("angle_origin", s.size, ks_distance(np.real(s), cdf), threshold)
    raise ValueError(f"unknown mode {mode!r}")


def microscopic_pair_angles(eigenvalues, X, N: int, omega_min: float, omega_max: float,
                            bulk_radius: float = 1.0):
    """Angles and separations of unordered pairs with ``sqrt(N)|l_i - l_j|`` in a band."""
    lam = np.asarray(eigenvalues)
    omega = math.sqrt(N) * np.abs(lam[:, None] - lam[None, :])
    inside = np.abs(lam) < bulk_radius
    ok = (omega >= omega_min) & (omega <= omega_max) & inside[:, None] & inside[None, :]
    i, j = np.nonzero(np.triu(ok, 1))
    return pair_angles(X, i, j), omega[i, j]
