"""Random streams and samplers for Ginibre-type ensembles.

Every sampler takes an explicit random source.  ``RngStream`` wraps a
counter-based Philox generator keyed by ``(root_seed, stream_index)``, so a
trial's draws depend only on its own index and never on how trials are
distributed over workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

ENSEMBLE_KINDS = ("complex_gaussian", "complex_bernoulli", "complex_uniform_disk", "real_gaussian")


class RngStream:
    """Independent, reproducible random stream.

    Parameters
    ----------
    root_seed : int
        Seed shared by all streams of a run.
    stream_index : int or tuple of int
        Position of this stream in the run (e.g. the trial index).
    """

    def __init__(self, root_seed: int, stream_index: Union[int, tuple] = 0):
        if isinstance(stream_index, (int, np.integer)):
            key = (int(stream_index),)
        else:
            key = tuple(int(i) for i in stream_index)
        if int(root_seed) < 0 or any(i < 0 for i in key):
            raise ValueError("seed and stream index must be non-negative")
        self.root_seed = int(root_seed)
        self.stream_index = key[0] if len(key) == 1 else key
        self._key = key
        seq = np.random.SeedSequence(self.root_seed, spawn_key=key)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def child(self, index: int) -> "RngStream":
        """Sub-stream ``index`` of this stream (independent of its state)."""
        return RngStream(self.root_seed, self._key + (int(index),))

    def __repr__(self) -> str:
        return f"RngStream(root_seed={self.root_seed}, stream_index={self.stream_index})"


RandomSource = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RandomSource) -> np.random.Generator:
    """Return a numpy Generator for any accepted random source."""
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(0 if rng is None else int(rng)).generator
    raise TypeError(f"unsupported random source {type(rng).__name__}")


@dataclass(frozen=True)
class EnsembleSpec:
    """Matrix ensemble with entries of mean zero and variance ``1/N``."""

    kind: str
    N: int

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}; expected one of {ENSEMBLE_KINDS}")
        if int(self.N) < 1:
            raise ValueError("N must be at least 1")


def sample_standard_complex_gaussian(rng: RandomSource, shape=()) -> np.ndarray:
    """Circular complex Gaussians with ``E X = 0`` and ``E|X|^2 = 1``."""
    gen = as_generator(rng)
    z = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    return z * np.sqrt(0.5)


def sample_matrix(spec: EnsembleSpec, rng: RandomSource) -> np.ndarray:
    """Draw one ``N x N`` matrix from ``spec``."""
    gen = as_generator(rng)
    n = spec.N
    if spec.kind == "complex_gaussian":
        return sample_standard_complex_gaussian(gen, (n, n)) / np.sqrt(n)
    if spec.kind == "complex_bernoulli":
        signs = 2.0 * gen.integers(0, 2, size=(2, n, n)) - 1.0
        return (signs[0] + 1j * signs[1]) / np.sqrt(2 * n)
    if spec.kind == "complex_uniform_disk":
        radius = np.sqrt(gen.random((n, n)))
        theta = 2 * np.pi * gen.random((n, n))
        return radius * np.exp(1j * theta) * np.sqrt(2.0 / n)
    return gen.standard_normal((n, n)) / np.sqrt(n)


def sample_kostlan_radii(N: int, rng: RandomSource, size=None) -> np.ndarray:
    """Eigenvalue moduli of an ``N x N`` complex Ginibre matrix.

    The squared moduli times ``N`` are independent Gamma(k) variables for
    ``k = 1..N``.  Output shape is ``(N,)`` or ``(size, N)``.
    """
    gen = as_generator(rng)
    shape = (int(N),) if size is None else (int(size), int(N))
    g = gen.standard_gamma(np.broadcast_to(np.arange(1, N + 1, dtype=float), shape))
    return np.sqrt(g / N)


def sample_conditioned_radii_origin(N: int, rng: RandomSource, size=None) -> np.ndarray:
    """Moduli of the other ``N - 1`` eigenvalues given an eigenvalue at 0.

    Squared moduli times ``N`` are independent Gamma(k), ``k = 2..N``.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    gen = as_generator(rng)
    shape = (N - 1,) if size is None else (int(size), N - 1)
    g = gen.standard_gamma(np.broadcast_to(np.arange(2, N + 1, dtype=float), shape))
    return np.sqrt(g / N)


def sample_schur_T(spectrum, rng: RandomSource) -> np.ndarray:
    """Upper-triangular Schur form with the given diagonal.

    Strict upper entries are iid circular complex Gaussians of variance
    ``1/N``, drawn column by column (column ``n`` uses ``n`` draws).
    """
    lam = np.asarray(spectrum, dtype=complex)
    n = lam.size
    gen = as_generator(rng)
    T = np.diag(lam)
    for col in range(1, n):
        T[:col, col] = sample_standard_complex_gaussian(gen, col) / np.sqrt(n)
    return T
