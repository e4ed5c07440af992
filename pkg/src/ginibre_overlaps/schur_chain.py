"""Overlaps from the Schur form, and their quenched (fixed-spectrum) laws.

With ``T`` upper triangular, ``alpha_ij = 1/(lambda_i - lambda_j)`` and
columns revealed one at a time,

    b_1 = 1,           b_n = alpha_1n sum_{k<n} b_k T_kn
    d_1 = 0, d_2 = 1,  d_n = alpha_2n sum_{k<n} d_k T_kn

and ``O_11 = sum |b|^2``, ``O_12 = -conj(b_2) sum b conj(d)``,
``O_22 = (1 + |b_2|^2) sum |d|^2``.  Only O(N) memory is needed.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DeltaDegenerate, GapTooSmall
from .formulas import DELTA_FLOOR, PairGeometry, combine_second_moments
from .rand_ensembles import (RandomSource, as_generator, sample_conditioned_radii_origin,
                             sample_standard_complex_gaussian)

GAP_FLOOR = 1e-12


def _spectrum(spectrum) -> np.ndarray:
    lam = np.asarray(spectrum, dtype=complex).ravel()
    if lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    return lam


def _check_gaps(lam: np.ndarray, rows=(0, 1)) -> None:
    scale = max(1.0, float(np.max(np.abs(lam))))
    for r in rows:
        d = np.abs(lam[r] - np.delete(lam, r))
        if d.min() < GAP_FLOOR * scale:
            raise GapTooSmall(f"eigenvalue {r} is within {d.min():.3e} of another")


def _chain(lam: np.ndarray, columns) -> tuple:
    """Run the recursion on batches; ``columns(n)`` returns T[:n, n] with shape (batch, n)."""
    N = lam.size
    t12 = columns(1)[:, 0]
    batch = t12.shape[0]
    b = np.zeros((batch, N), dtype=complex)
    d = np.zeros((batch, N), dtype=complex)
    b[:, 0] = 1.0
    b[:, 1] = t12 / (lam[0] - lam[1])
    d[:, 1] = 1.0
    for n in range(2, N):
        col = columns(n)
        b[:, n] = np.einsum("bk,bk->b", b[:, :n], col) / (lam[0] - lam[n])
        d[:, n] = np.einsum("bk,bk->b", d[:, :n], col) / (lam[1] - lam[n])
    b2 = b[:, 1]
    o11 = np.sum(np.abs(b) ** 2, axis=1)
    o12 = -np.conj(b2) * np.sum(b * np.conj(d), axis=1)
    o22 = (1.0 + np.abs(b2) ** 2) * np.sum(np.abs(d) ** 2, axis=1)
    return o11, o12, o22


def chain_overlaps(spectrum, rng: RandomSource) -> tuple[float, complex, float]:
    """One draw of ``(O_11, O_12, O_22)`` for the given spectrum.

    Consumes the random stream exactly like ``sample_schur_T``, so both see
    the same Schur entries when started from the same state.
    """
    lam = _spectrum(spectrum)
    _check_gaps(lam)
    gen = as_generator(rng)
    N = lam.size
    o11, o12, o22 = _chain(lam, lambda n: (sample_standard_complex_gaussian(gen, n) / math.sqrt(N))[None, :])
    return float(o11[0]), complex(o12[0]), float(o22[0])


def chain_overlaps_batch(spectrum, rng: RandomSource, size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``size`` independent draws, vectorised over draws."""
    lam = _spectrum(spectrum)
    _check_gaps(lam)
    gen = as_generator(rng)
    N = lam.size
    return _chain(lam, lambda n: sample_standard_complex_gaussian(gen, (size, n)) / math.sqrt(N))


def chain_overlaps_from_T(T) -> tuple[float, complex, float]:
    """Overlaps of the first two diagonal entries of an upper-triangular ``T``."""
    T = np.asarray(T, dtype=complex)
    lam = np.diagonal(T).copy()
    _check_gaps(lam)
    o11, o12, o22 = _chain(lam, lambda n: T[:n, n][None, :])
    return float(o11[0]), complex(o12[0]), float(o22[0])


def diag_martingale_ratios(spectrum, rng: RandomSource, size: int) -> np.ndarray:
    """Ratios ``x_n / (x_{n-1} (1 + 1/(N|lambda_1 - lambda_n|^2)))`` with ``x_n = sum_{i<=n} |b_i|^2``.

    Each ratio has conditional mean one; shape ``(size, N - 1)``.
    """
    lam = _spectrum(spectrum)
    _check_gaps(lam, rows=(0,))
    gen = as_generator(rng)
    N = lam.size
    b = np.zeros((size, N), dtype=complex)
    b[:, 0] = 1.0
    x_prev = np.ones(size)
    out = np.empty((size, N - 1))
    for n in range(1, N):
        col = sample_standard_complex_gaussian(gen, (size, n)) / math.sqrt(N)
        b[:, n] = np.einsum("bk,bk->b", b[:, :n], col) / (lam[0] - lam[n])
        x_new = x_prev + np.abs(b[:, n]) ** 2
        out[:, n - 1] = x_new / (x_prev * (1.0 + 1.0 / (N * abs(lam[0] - lam[n]) ** 2)))
        x_prev = x_new
    return out


# ---------------------------------------------------------------------------
# Quenched laws


def _log_diag_factors(lam: np.ndarray, X2: np.ndarray) -> np.ndarray:
    N = lam.size
    dist2 = np.abs(lam[0] - lam[1:]) ** 2
    return np.sum(np.log1p(X2 / (N * dist2)), axis=-1)


def quenched_diag_sample(spectrum, rng: RandomSource, size=None):
    """``O_11 = prod_{n>=2} (1 + |X_n|^2 / (N |lambda_1 - lambda_n|^2))`` with iid ``|X_n|^2 ~ Exp(1)``."""
    lam = _spectrum(spectrum)
    _check_gaps(lam, rows=(0,))
    gen = as_generator(rng)
    shape = (lam.size - 1,) if size is None else (int(size), lam.size - 1)
    out = np.exp(_log_diag_factors(lam, gen.standard_exponential(shape)))
    return float(out) if size is None else out


def quenched_diag_origin_samples(N: int, rng: RandomSource, size: int, chunk: int = 2000) -> np.ndarray:
    """Samples of ``O_11`` given ``lambda_1 = 0``, the other moduli drawn from the conditioned radii law."""
    gen = as_generator(rng)
    out = np.empty(int(size))
    for start in range(0, int(size), chunk):
        m = min(chunk, int(size) - start)
        r2 = sample_conditioned_radii_origin(N, gen, m) ** 2
        X2 = gen.standard_exponential((m, N - 1))
        out[start:start + m] = np.exp(np.sum(np.log1p(X2 / (N * r2)), axis=1))
    return out


def quenched_diag_expectation(spectrum) -> float:
    """``prod_{n>=2} (1 + 1/(N |lambda_1 - lambda_n|^2))``."""
    lam = _spectrum(spectrum)
    _check_gaps(lam, rows=(0,))
    return float(np.exp(_log_diag_factors(lam, np.ones(lam.size - 1))))


def quenched_offdiag_expectation(spectrum) -> complex:
    """``-1/(N|l1-l2|^2) prod_{k>=3} (1 + 1/(N (l1-lk) conj(l2-lk)))``."""
    lam = _spectrum(spectrum)
    _check_gaps(lam)
    N = lam.size
    f = 1.0 + 1.0 / (N * (lam[0] - lam[2:]) * np.conj(lam[1] - lam[2:]))
    return complex(-np.prod(f) / (N * abs(lam[0] - lam[1]) ** 2))


def transfer_eigenvalues(spectrum) -> tuple[np.ndarray, np.ndarray, PairGeometry]:
    """Eigenvalues ``lambda_+(n), lambda_-(n)`` (n = 3..N) of the second-moment transfer matrices."""
    lam = _spectrum(spectrum)
    _check_gaps(lam)
    N = lam.size
    geo = PairGeometry.from_delta(N * abs(lam[0] - lam[1]) ** 2)
    g1 = 1.0 / (N * np.abs(lam[0] - lam[2:]) ** 2)
    g2 = 1.0 / (N * np.abs(lam[1] - lam[2:]) ** 2)
    base = (1.0 + g1) * (1.0 + g2)
    return base - g1 * g2 * geo.a, base - g1 * g2 * geo.b, geo


def quenched_second_moments(spectrum) -> tuple[float, float]:
    """``(E|O_12|^2, E O_11 O_22)`` for a fixed spectrum, Schur entries integrated out."""
    lp, lm, geo = transfer_eigenvalues(spectrum)
    d_plus = float(np.exp(np.sum(np.log(lp))))
    d_minus = float(np.exp(np.sum(np.log(lm))))
    return combine_second_moments(geo.delta, geo.a, d_plus, d_minus)


def transfer_matrix(spectrum, n: int) -> np.ndarray:
    """Explicit 2x2 matrix propagating ``(E|w|^2, E x y)`` through column ``n`` (0-based, n >= 2).

    Built from the Gaussian moment identities directly, without the
    codiagonalisation used by ``quenched_second_moments``.
    """
    lam = _spectrum(spectrum)
    N = lam.size
    g1 = 1.0 / (math.sqrt(N) * (lam[0] - lam[n]))
    g2 = 1.0 / (math.sqrt(N) * (lam[1] - lam[n]))
    c = abs(g1 * g2) ** 2
    return np.array([[abs(1.0 + g1 * np.conj(g2)) ** 2, c],
                     [c, (1.0 + abs(g1) ** 2) * (1.0 + abs(g2) ** 2)]])


def quenched_second_moments_direct(spectrum) -> tuple[float, float]:
    """Same quantity as ``quenched_second_moments`` via the explicit matrix product."""
    lam = _spectrum(spectrum)
    _check_gaps(lam)
    N = lam.size
    delta = N * abs(lam[0] - lam[1]) ** 2
    if delta < DELTA_FLOOR:
        raise DeltaDegenerate(f"delta={delta:.3e} below floor")
    P = np.eye(2)
    log_scale = 0.0
    for n in range(2, N):
        P = P @ transfer_matrix(lam, n)
        m = np.abs(P).max()
        P /= m
        log_scale += math.log(m)
    P *= math.exp(log_scale)
    s1, s2 = 1.0 / delta, 2.0 / delta ** 2
    off = P[0, 0] * s2 + P[0, 1] * (s1 + s2)
    diag = P[1, 0] * (s1 + s2) + P[1, 1] * (1.0 + 2.0 * s1 + s2)
    return float(off), float(diag)
