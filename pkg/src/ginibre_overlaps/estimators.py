"""Monte Carlo estimators for conditional overlap statistics.

Accumulators are mergeable (count, mean, centred second moment), so batches
computed by different workers combine into the same estimate as one pass
over the concatenated data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EmptyWindow
from .formulas import pseudospectrum_prediction


@dataclass(frozen=True)
class EstimateWithCI:
    mean: float
    std_error: float
    count: int

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return self.mean - z * self.std_error, self.mean + z * self.std_error


@dataclass
class MeanAccumulator:
    """Streaming mean and variance of real samples (Chan's pairwise update)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, values) -> "MeanAccumulator":
        v = np.asarray(values, dtype=float).ravel()
        if v.size:
            self.merge(MeanAccumulator(v.size, float(v.mean()), float(np.sum((v - v.mean()) ** 2))))
        return self

    def merge(self, other: "MeanAccumulator") -> "MeanAccumulator":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / n
        self.m2 += other.m2 + delta * delta * self.count * other.count / n
        self.count = n
        return self

    def estimate(self) -> EstimateWithCI:
        if self.count == 0:
            raise EmptyWindow("no samples accumulated")
        var = self.m2 / (self.count - 1) if self.count > 1 else float("nan")
        return EstimateWithCI(self.mean, math.sqrt(var / self.count) if self.count > 1 else float("nan"),
                              self.count)


# ---------------------------------------------------------------------------
# Windows


@dataclass(frozen=True)
class DiskWindow:
    """Eigenvalues within ``radius`` of ``center``."""

    center: complex
    radius: float

    @classmethod
    def default(cls, center, N: int) -> "DiskWindow":
        return cls(complex(center), 0.3 / math.sqrt(N))

    def contains(self, lam) -> np.ndarray:
        return np.abs(np.asarray(lam) - self.center) < self.radius


@dataclass(frozen=True)
class AnnulusWindow:
    """Eigenvalues with ``|lambda|`` within ``half_width`` of ``modulus``.

    For rotation-invariant ensembles, conditioning on ``|lambda| ~ |z|``
    estimates the same conditional law as a disk around ``z`` while
    collecting far more hits per matrix.
    """

    modulus: float
    half_width: float

    def contains(self, lam) -> np.ndarray:
        return np.abs(np.abs(np.asarray(lam)) - self.modulus) < self.half_width


@dataclass(frozen=True)
class PairWindow:
    """Ordered pairs with the first eigenvalue near ``center`` and ``sqrt(N)|l_i - l_j|`` in a band."""

    center: complex
    radius: float
    omega_min: float
    omega_max: float
    center2: Optional[complex] = None


@dataclass
class DiagAccumulator:
    """Accumulates ``O_ii`` and ``O_ii / (N (1 - |lambda_i|^2))`` inside a window."""

    window: object
    N: int
    raw: MeanAccumulator = field(default_factory=MeanAccumulator)
    normalised: MeanAccumulator = field(default_factory=MeanAccumulator)
    samples: list = field(default_factory=list)
    keep_samples: bool = True

    def add(self, eigenvalues, diag_overlaps) -> "DiagAccumulator":
        lam = np.asarray(eigenvalues)
        o = np.asarray(diag_overlaps, dtype=float)
        mask = self.window.contains(lam)
        if mask.any():
            self.raw.add(o[mask])
            norm = o[mask] / (self.N * (1.0 - np.abs(lam[mask]) ** 2))
            self.normalised.add(norm)
            if self.keep_samples:
                self.samples.append(norm)
        return self

    def merge(self, other: "DiagAccumulator") -> "DiagAccumulator":
        self.raw.merge(other.raw)
        self.normalised.merge(other.normalised)
        self.samples.extend(other.samples)
        return self


@dataclass(frozen=True)
class DiagStats:
    mean: EstimateWithCI
    normalised_mean: EstimateWithCI
    normalised_samples: np.ndarray


def conditional_diag_stats(samples, window, N: int) -> DiagStats:
    """Windowed statistics of diagonal overlaps.

    ``samples`` is an iterable of ``(eigenvalues, diag_overlaps)`` pairs, one
    per matrix.
    """
    acc = DiagAccumulator(window, N)
    for lam, o in samples:
        acc.add(lam, o)
    if acc.raw.count == 0:
        raise EmptyWindow("no eigenvalue fell inside the window")
    return DiagStats(acc.raw.estimate(), acc.normalised.estimate(), np.concatenate(acc.samples))


@dataclass
class PairAccumulator:
    window: PairWindow
    N: int
    re_o12: MeanAccumulator = field(default_factory=MeanAccumulator)
    im_o12: MeanAccumulator = field(default_factory=MeanAccumulator)
    abs_o12_sq: MeanAccumulator = field(default_factory=MeanAccumulator)
    o11_o22: MeanAccumulator = field(default_factory=MeanAccumulator)

    def add(self, eigenvalues, O) -> "PairAccumulator":
        lam = np.asarray(eigenvalues)
        i, j = select_pairs(lam, self.window, self.N)
        if i.size:
            o12 = O[i, j]
            self.re_o12.add(o12.real)
            self.im_o12.add(o12.imag)
            self.abs_o12_sq.add(np.abs(o12) ** 2)
            self.o11_o22.add(np.real(O[i, i]) * np.real(O[j, j]))
        return self

    def merge(self, other: "PairAccumulator") -> "PairAccumulator":
        for name in ("re_o12", "im_o12", "abs_o12_sq", "o11_o22"):
            getattr(self, name).merge(getattr(other, name))
        return self


def select_pairs(lam: np.ndarray, window: PairWindow, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays ``(i, j)``, ``i != j``, of pairs inside a ``PairWindow``."""
    first = np.flatnonzero(np.abs(lam - window.center) < window.radius)
    if first.size == 0:
        return first, first
    omega = math.sqrt(N) * np.abs(lam[first][:, None] - lam[None, :])
    ok = (omega >= window.omega_min) & (omega <= window.omega_max)
    if window.center2 is not None:
        ok &= (np.abs(lam - window.center2) < window.radius)[None, :]
    ok[np.arange(first.size), first] = False
    a, b = np.nonzero(ok)
    return first[a], b


@dataclass(frozen=True)
class PairStats:
    o12: complex
    o12_error: complex
    abs_o12_sq: EstimateWithCI
    o11_o22: EstimateWithCI
    count: int


def conditional_pair_stats(samples, window: PairWindow, N: int) -> PairStats:
    """Windowed statistics of off-diagonal overlaps; ``samples`` yields ``(eigenvalues, O)``."""
    acc = PairAccumulator(window, N)
    for lam, O in samples:
        acc.add(lam, O)
    if acc.re_o12.count == 0:
        raise EmptyWindow("no eigenvalue pair fell inside the window")
    re, im = acc.re_o12.estimate(), acc.im_o12.estimate()
    return PairStats(complex(re.mean, im.mean), complex(re.std_error, im.std_error),
                     acc.abs_o12_sq.estimate(), acc.o11_o22.estimate(), re.count)


# ---------------------------------------------------------------------------
# Goodness of fit


def ks_distance(sample, cdf: Callable) -> float:
    """Kolmogorov-Smirnov distance ``sup_x |F_n(x) - F(x)|``.

    Ties are grouped and the reference CDF's left limit is taken at the
    previous float, so a point mass tested against its own step CDF gives 0.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    values, counts = np.unique(x, return_counts=True)
    above = np.cumsum(counts) / n
    below = above - counts / n
    f_at = np.asarray(cdf(values), dtype=float)
    f_left = np.asarray(cdf(np.nextafter(values, -np.inf)), dtype=float)
    d = max(np.max(np.abs(above - f_at)), np.max(np.abs(f_left - below)))
    return float(min(1.0, max(0.0, d)))


@dataclass(frozen=True)
class KSReport:
    test_name: str
    n: int
    distance: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.distance < self.threshold

    def row(self) -> dict:
        return {"test_name": self.test_name, "n": self.n, "distance": self.distance,
                "threshold": self.threshold, "pass": self.passed}


# ---------------------------------------------------------------------------
# Pseudospectrum


@dataclass(frozen=True)
class Ball:
    center: complex
    radius: float

    def contains(self, lam) -> np.ndarray:
        return np.abs(np.asarray(lam) - self.center) < self.radius


def pseudospectrum_volume(eigenvalues, diag_overlaps, ball: Ball, eps: float) -> tuple[float, float]:
    """First-order pseudospectrum area inside ``ball`` and its predicted mean.

    Returns ``(sum_{lambda_j in ball} pi O_jj eps^2, eps^2 N^2 int_ball (1-|z|^2) dm)``.
    """
    lam = np.asarray(eigenvalues)
    mask = ball.contains(lam)
    empirical = float(np.pi * eps ** 2 * np.sum(np.asarray(diag_overlaps)[mask]))
    return empirical, pseudospectrum_prediction(lam.size, ball.center, ball.radius, eps)


def pseudospectrum_area_direct(G, ball: Ball, eps: float, grid: int = 400) -> float:
    """Area of ``{z in ball : sigma_min(z - G) < eps}`` on a square grid (small matrices only)."""
    G = np.asarray(G, dtype=complex)
    n = G.shape[0]
    xs = np.linspace(-ball.radius, ball.radius, grid)
    h = xs[1] - xs[0]
    area = 0.0
    eye = np.eye(n)
    for xv in xs:
        zs = ball.center + xv + 1j * xs
        inside = np.abs(zs - ball.center) < ball.radius
        for zv in zs[inside]:
            if np.linalg.svd(zv * eye - G, compute_uv=False)[-1] < eps:
                area += h * h
    return area


# ---------------------------------------------------------------------------
# Extremes


@dataclass(frozen=True)
class ExtremesReport:
    count: int
    min_overlap: float
    max_overlap: float
    lower_bound: float
    upper_bound: float

    @property
    def lower_violated(self) -> bool:
        return self.count > 0 and self.min_overlap < self.lower_bound

    @property
    def upper_violated(self) -> bool:
        return self.count > 0 and self.max_overlap > self.upper_bound


def extremes_scan(eigenvalues, diag_overlaps, bulk_radius: float, eps: float,
                  kappa: float = 0.5, kappa0: float = 0.5) -> ExtremesReport:
    """Smallest and largest overlap with ``|lambda| < bulk_radius`` against the scale bounds.

    Bounds are ``N^{1/2 + kappa - eps}`` below and
    ``N^{1 + kappa0 + eps} m(region)^{1/2}`` above, with the region the disk of
    radius ``bulk_radius``.
    """
    lam = np.asarray(eigenvalues)
    o = np.asarray(diag_overlaps, dtype=float)
    N = lam.size
    mask = np.abs(lam) < bulk_radius
    area = math.pi * bulk_radius ** 2
    lower = N ** (0.5 + kappa - eps)
    upper = N ** (1.0 + kappa0 + eps) * math.sqrt(area)
    if not mask.any():
        return ExtremesReport(0, float("nan"), float("nan"), lower, upper)
    return ExtremesReport(int(mask.sum()), float(o[mask].min()), float(o[mask].max()), lower, upper)
