"""Eigendecomposition and eigenvector overlap matrices.

For right eigenvectors ``R_i`` (columns of ``X``) and left eigenvectors
``L_i`` (rows of ``Y = X^{-1}``, so ``L_i^t R_j = delta_ij``) the overlap
matrix is ``O_ij = (R_j^* R_i) (L_j^* L_i)``.  Its diagonal holds the squared
eigenvalue condition numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateSpectrum, NonConvergence
from .rand_ensembles import EnsembleSpec, RandomSource, sample_matrix

GAP_FLOOR = 1e-12


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    min_gap: float


@dataclass(frozen=True)
class EigenSystem:
    """Sorted eigenvalues with right eigenvectors ``X`` and ``Y = X^{-1}``."""

    spectrum: Spectrum
    X: np.ndarray
    Y: np.ndarray
    residual_bound: float

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues


def min_gap(eigenvalues) -> float:
    """Smallest pairwise distance (``inf`` for fewer than two points)."""
    lam = np.asarray(eigenvalues, dtype=complex).ravel()
    if lam.size < 2:
        return float("inf")
    d = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def eigendecompose(G, tol: float = 1e-10, gap_floor: float = GAP_FLOOR) -> EigenSystem:
    """Dense eigendecomposition with left eigenvectors by inversion.

    Eigenvalues are sorted lexicographically by (real, imaginary) part.

    Raises
    ------
    NonConvergence
        If LAPACK fails or ``max_i |G R_i - lambda_i R_i| > tol * ||G||``.
    DegenerateSpectrum
        If two eigenvalues are closer than ``gap_floor * ||G||``.
    """
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("G must be a square matrix")
    if not np.all(np.isfinite(G)):
        raise NonConvergence("matrix has non-finite entries")
    n = G.shape[0]
    try:
        lam, X = np.linalg.eig(G)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    order = np.lexsort((lam.imag, lam.real))
    lam = np.asarray(lam[order], dtype=complex)
    X = np.asarray(X[:, order], dtype=complex)

    norm = float(np.linalg.norm(G, 2)) if n > 0 else 0.0
    scale = norm if norm > 0 else 1.0
    gap = min_gap(lam)
    if gap < gap_floor * scale:
        raise DegenerateSpectrum(f"eigenvalue gap {gap:.3e} below floor {gap_floor * scale:.3e}")
    resid = np.linalg.norm(G @ X - X * lam[None, :], axis=0) / np.linalg.norm(X, axis=0)
    bound = float(resid.max()) if n else 0.0
    if not np.isfinite(bound) or bound > tol * scale:
        raise NonConvergence(f"eigen-residual {bound:.3e} exceeds {tol * scale:.3e}")
    try:
        Y = np.linalg.solve(X, np.eye(n, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise DegenerateSpectrum("eigenvector matrix is singular") from exc
    return EigenSystem(Spectrum(lam, gap), X, Y, bound)


def overlaps(X, Y) -> np.ndarray:
    """Full overlap matrix ``O_ij = (X^* X)_{ji} (Y Y^*)_{ij}``."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    gram_right = X.conj().T @ X
    gram_left = Y @ Y.conj().T
    return gram_right.T * gram_left


def diagonal_overlaps(X, Y) -> np.ndarray:
    """Diagonal overlaps ``O_ii = |R_i|^2 |L_i|^2`` in O(N^2)."""
    right = np.sum(np.abs(X) ** 2, axis=0)
    left = np.sum(np.abs(Y) ** 2, axis=1)
    return right * left


def condition_numbers(O) -> np.ndarray:
    """Eigenvalue condition numbers ``sqrt(O_ii)`` from an overlap matrix."""
    return np.sqrt(np.real(np.diagonal(O)))


@dataclass(frozen=True)
class OverlapSample:
    """Eigenvalues of one matrix with diagonal (and optionally full) overlaps."""

    eigenvalues: np.ndarray
    diag: np.ndarray
    full: Optional[np.ndarray] = None


def sample_overlaps(spec: EnsembleSpec, rng: RandomSource, full: bool = False,
                    tol: float = 1e-8) -> OverlapSample:
    """Draw a matrix from ``spec`` and return its overlaps."""
    system = eigendecompose(sample_matrix(spec, rng), tol=tol)
    O = overlaps(system.X, system.Y) if full else None
    diag = np.real(np.diagonal(O)).copy() if full else diagonal_overlaps(system.X, system.Y)
    return OverlapSample(system.eigenvalues, diag, O)
