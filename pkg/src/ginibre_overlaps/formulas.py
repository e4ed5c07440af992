"""Closed-form overlap expectations, limit laws and the special functions they use.

The workhorse is the partial exponential sum ``e_k^(l)(x) = sum_{i=k}^{l} x^i/i!``.
All ratios of partial sums are formed in log space so that large ``N`` and
large ``x`` neither overflow nor cancel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ArgumentTooLarge, DeltaDegenerate

INF = math.inf
DELTA_FLOOR = 1e-8
_LOG_MAX = math.log(np.finfo(float).max)


def log_exp_partial_sum(k, l, x) -> float:
    """``log e_k^(l)(x)`` for ``x >= 0``; ``l`` may be ``math.inf``."""
    x = float(x)
    if x < 0 or not math.isfinite(x):
        raise ValueError("x must be finite and non-negative")
    k = max(int(k), 0)
    if l != INF:
        l = int(l)
        if l < k:
            return -INF
    if x == 0.0:
        return 0.0 if k == 0 else -INF
    # Terms are Poisson-shaped around i = x: anything more than ~15 standard
    # deviations away is below double precision relative to the peak.
    spread = 15.0 * math.sqrt(max(x, float(k))) + 60.0
    lo = max(k, int(math.floor(x - spread)))
    hi = int(math.ceil(max(x, float(k)) + spread))
    if l != INF:
        hi = min(hi, l)
        if lo > hi:
            lo = k
    i = np.arange(lo, hi + 1, dtype=float)
    return float(logsumexp(i * math.log(x) - gammaln(i + 1.0)))


def exp_partial_sum(k, l, x) -> float:
    """Partial exponential sum ``sum_{i=k}^{l} x^i / i!``.

    Raises ``ArgumentTooLarge`` when the value overflows a double (for
    ``l = inf`` this happens for ``x`` beyond about 709).
    """
    val = log_exp_partial_sum(k, l, x)
    if val > _LOG_MAX:
        raise ArgumentTooLarge(f"e_{k}^({l})({x}) overflows")
    return math.exp(val)


def signed_exp_partial_sum(k, l, x) -> float:
    """Partial sum extended to ``l < k`` so that ``e_k^(l) = e_0^(l) - e_0^(k-1)``.

    For ``l >= k - 1`` this is the ordinary sum; below that it is minus the
    terms ``l+1 .. k-1``.  The second-moment closed form needs this for
    fewer than three free eigenvalues.
    """
    k = max(int(k), 0)
    if l == INF or int(l) >= k - 1:
        return exp_partial_sum(k, l, x)
    return -exp_partial_sum(int(l) + 1, k - 1, x)


def _ratio_exp(log_num: float, log_den: float) -> float:
    return math.exp(log_num - log_den)


# ---------------------------------------------------------------------------
# Conditional expectations of overlaps


def mean_diag_exact(N: int, z) -> float:
    """``E(O_11 | lambda_1 = z)`` for complex Ginibre of size ``N``.

    Equals ``N e^(N)(x) / e^(N-1)(x) - x`` with ``x = N|z|^2``.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be positive")
    x = N * abs(complex(z)) ** 2
    if x == 0.0:
        return float(N)
    # e^(N)/e^(N-1) = 1 + r with r the ratio of the last term to e^(N-1).
    r = _ratio_exp(N * math.log(x) - math.lgamma(N + 1.0), log_exp_partial_sum(0, N - 1, x))
    return math.fsum([N, -x, N * r])


def mean_diag_asymptotic(N: int, z) -> float:
    """Bulk approximation ``N (1 - |z|^2)``."""
    return N * (1.0 - abs(complex(z)) ** 2)


def mean_offdiag_exact_origin(N: int, z) -> float:
    """``E(O_12 | lambda_1 = 0, lambda_2 = z)``, equal to ``-(N/x^2) e_2^(N)(x)/e_1^(N)(x)``."""
    N = int(N)
    if N < 2:
        raise ValueError("N must be at least 2")
    x = N * abs(complex(z)) ** 2
    if x <= 0.0:
        raise DeltaDegenerate("the two eigenvalues coincide")
    lg = math.log(N) + log_exp_partial_sum(2, N, x) - log_exp_partial_sum(1, N, x) - 2 * math.log(x)
    return -math.exp(lg)


def _e2_over_e1_inf(u: float) -> float:
    """``(1 - (1+u) e^{-u}) / (1 - e^{-u})`` without cancellation."""
    if u > 700:
        return (1.0 - (1.0 + u) * math.exp(-u)) / (-math.expm1(-u))
    return math.exp(log_exp_partial_sum(2, INF, u) - log_exp_partial_sum(1, INF, u))


def mean_offdiag_asymptotic(N: int, z1, z2) -> complex:
    """Microscopic-scale approximation of ``E(O_12 | lambda_1 = z1, lambda_2 = z2)``.

    With ``w = sqrt(N)(z1 - z2)`` this is
    ``-N (1 - z1 conj(z2)) / |w|^4 * (1 - (1+|w|^2) e^{-|w|^2}) / (1 - e^{-|w|^2})``,
    which behaves like ``-N (1 - z1 conj(z2)) / (2|w|^2)`` as ``w -> 0``.
    """
    z1 = complex(z1)
    z2 = complex(z2)
    u = N * abs(z1 - z2) ** 2
    if u <= 0.0:
        raise DeltaDegenerate("the two eigenvalues coincide")
    return -N * (1 - z1 * z2.conjugate()) * _e2_over_e1_inf(u) / u ** 2


@dataclass(frozen=True)
class PairGeometry:
    """Rescaled separation ``delta = N|z1 - z2|^2`` and the roots ``a > 1 > 0 > b = -1/a``."""

    delta: float
    a: float
    b: float
    a_minus_1: float

    @classmethod
    def from_delta(cls, delta: float) -> "PairGeometry":
        delta = float(delta)
        if not delta >= DELTA_FLOOR:
            raise DeltaDegenerate(f"delta={delta:.3e} below floor {DELTA_FLOOR:.0e}")
        root = math.sqrt(1.0 + delta * delta / 4.0)
        a = delta / 2.0 + root
        a_minus_1 = delta / 2.0 + (delta * delta / 4.0) / (root + 1.0)
        return cls(delta, a, -1.0 / a, a_minus_1)


def u_k(k: int, x: float) -> float:
    """``1 - (1 - 1/x) / (k + 3)``."""
    return 1.0 - (1.0 - 1.0 / x) / (k + 3.0)


def d_k(k: int, x: float, delta: float, x_minus_1: float | None = None) -> float:
    """Expected product of the transfer eigenvalues over ``k`` free eigenvalues.

    ``d_k(a, delta)`` and ``d_k(b, delta)`` are the expectations of the
    products of the larger and smaller transfer-matrix eigenvalues.
    ``x_minus_1`` may be passed to avoid cancellation when ``x`` is near 1.
    """
    k = int(k)
    xm1 = (x - 1.0) if x_minus_1 is None else x_minus_1
    uk = u_k(k, x)
    log_e1 = log_exp_partial_sum(1, k + 1, delta)
    pre = math.log((k + 2.0) * (k + 3.0)) - log_e1
    terms = []
    if k >= 3:
        terms.append(uk / xm1 ** 2 * math.exp(pre + log_exp_partial_sum(3, k, delta)))
    else:
        terms.append(uk / xm1 ** 2 * signed_exp_partial_sum(3, k, delta) * math.exp(pre))
    terms.append(-delta * uk / (2.0 * x) * math.exp(pre))
    poly = x * x + (k + 2.0) * x + (k + 1.0) * (k + 3.0)
    log_tail = pre + (k + 1) * math.log(delta) - math.lgamma(k + 4.0)
    terms.append(poly / xm1 ** 2 * math.exp(log_tail))
    return math.fsum(terms)


def combine_second_moments(delta: float, a: float, d_plus: float, d_minus: float) -> tuple[float, float]:
    """Integrate the first Schur entry out of the codiagonalised transfer product.

    The product of transfer matrices is ``U^t diag(d_plus, d_minus) U`` with
    ``U = [[a, -1], [1, a]] / sqrt(1 + a^2)``; the squared modulus of the
    rescaled first entry is exponential with mean ``1/delta``.
    """
    s1 = 1.0 / delta
    s2 = 2.0 / delta ** 2
    c = 1.0 / (1.0 + a * a)
    p11 = c * (a * a * d_plus + d_minus)
    p12 = c * a * (d_minus - d_plus)
    p22 = c * (d_plus + a * a * d_minus)
    off = p11 * s2 + p12 * (s1 + s2)
    diag = p12 * (s1 + s2) + p22 * (1.0 + 2.0 * s1 + s2)
    return off, diag


def second_moment_exact_origin(N: int, z) -> tuple[float, float]:
    """``(E(|O_12|^2), E(O_11 O_22))`` given ``lambda_1 = 0, lambda_2 = z``."""
    N = int(N)
    if N < 2:
        raise ValueError("N must be at least 2")
    geo = PairGeometry.from_delta(N * abs(complex(z)) ** 2)
    k = N - 2
    d_plus = d_k(k, geo.a, geo.delta, geo.a_minus_1)
    d_minus = d_k(k, geo.b, geo.delta)
    return combine_second_moments(geo.delta, geo.a, d_plus, d_minus)


def second_moment_asymptotic(N: int, z1, z2) -> tuple[float, float]:
    """Microscopic-scale approximation of ``(E|O_12|^2, E O_11 O_22)``.

    Both equal ``N^2 (1-|z1|^2)(1-|z2|^2) / |w|^4`` times ``1`` and
    ``(1 + |w|^4 - e^{-|w|^2}) / (1 - e^{-|w|^2})`` respectively.
    """
    z1 = complex(z1)
    z2 = complex(z2)
    u = N * abs(z1 - z2) ** 2
    if u <= 0.0:
        raise DeltaDegenerate("the two eigenvalues coincide")
    base = N * N * (1 - abs(z1) ** 2) * (1 - abs(z2) ** 2) / u ** 2
    factor = 1.0 + u * u / (-math.expm1(-u))
    return base, base * factor


# ---------------------------------------------------------------------------
# Recurrence coefficients for the second-moment determinant


def g_closed_form(k: int, a: float, delta: float) -> float:
    """Closed-form normalised determinant ``g_k`` at parameter ``a``.

    ``a`` must satisfy ``a - 1/a = delta``.
    """
    k = int(k)
    uk = u_k(k, a)
    ratio = (a + 1.0) / (a - 1.0)
    e3 = signed_exp_partial_sum(3, k, delta)
    tail = (a + (k + 2.0) + (k + 1.0) * (k + 3.0) / a) * math.exp((k - 1) * math.log(delta) - math.lgamma(k + 4.0))
    return math.fsum([6 * uk * ratio * e3 / (a * delta ** 2), -3 * uk / a, 6 * ratio * tail])


def g_recurrence(kmax: int, a: float, delta: float) -> np.ndarray:
    """``g_0..g_kmax`` from the three-term recurrence."""
    g = np.empty(kmax + 1)
    g[0] = 1.0
    if kmax >= 1:
        g[1] = 1.0 + delta / 4.0 + (1.0 - 1.0 / a) / 4.0
    for k in range(2, kmax + 1):
        m1, m2 = g_recurrence_coefficients(k, a, delta)
        g[k] = m1 * g[k - 1] - m2 * g[k - 2]
    return g


def g_recurrence_coefficients(k: int, a: float, delta: float) -> tuple[float, float]:
    m1 = 1.0 + delta / (k + 3.0) + (1.0 - 1.0 / a) / (k * (k + 3.0))
    m2 = delta * (k + 1.0) ** 2 / (k * (k + 2.0) * (k + 3.0))
    return m1, m2


# ---------------------------------------------------------------------------
# Limit laws


def inv_gamma2_density(t):
    """Density ``e^{-1/t} / t^3`` of the inverse of a Gamma(2) variable."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 3
    return out[()] if out.ndim == 0 else out


def inv_gamma2_cdf(t):
    """CDF ``(1 + 1/t) e^{-1/t}``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    s = 1.0 / t[pos]
    out[pos] = (1.0 + s) * np.exp(-s)
    return out[()] if out.ndim == 0 else out


def beta_inv_finite_N_density(N: int, t):
    """Density of ``O_11 / N`` given ``lambda_1 = 0``: ``O_11`` is ``1/Beta(2, N-1)``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 1.0 / N
    tp = t[pos]
    out[pos] = (N - 1.0) / N * np.exp((N - 2) * np.log1p(-1.0 / (N * tp))) / tp ** 3
    return out[()] if out.ndim == 0 else out


def beta_inv_finite_N_cdf(N: int, t):
    """CDF of ``O_11 / N`` given ``lambda_1 = 0``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 1.0 / N
    x = 1.0 / (N * t[pos])
    log1mx = np.log1p(-x)
    out[pos] = np.exp(N * log1mx) + N * x * np.exp((N - 1) * log1mx)
    return out[()] if out.ndim == 0 else out


def angle_limit_density(t):
    """Density ``(1 - (1+t) e^{-t}) / t^2`` of the rescaled squared angle at the origin."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    small = (t >= 0) & (t < 1e-3)
    ts = t[small]
    out[small] = 0.5 - ts / 3.0 + ts ** 2 / 8.0 - ts ** 3 / 30.0
    big = t >= 1e-3
    tb = t[big]
    out[big] = (-np.expm1(-tb) - tb * np.exp(-tb)) / tb ** 2
    return out[()] if out.ndim == 0 else out


def angle_limit_cdf(t):
    """CDF ``1 - (1 - e^{-t}) / t`` of the same law."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    small = (t > 0) & (t < 1e-3)
    ts = t[small]
    out[small] = ts / 2.0 - ts ** 2 / 6.0 + ts ** 3 / 24.0 - ts ** 4 / 120.0
    big = t >= 1e-3
    tb = t[big]
    out[big] = 1.0 + np.expm1(-tb) / tb
    return out[()] if out.ndim == 0 else out


def angle_finite_N_cdf(N: int, t):
    """CDF of ``N Beta(1, K)`` with ``K`` uniform on ``{2, ..., N}``."""
    t = np.asarray(t, dtype=float)
    x = np.clip(t / N, 0.0, 1.0)
    k = np.arange(2, N + 1, dtype=float)
    shape = x.shape
    xf = x.reshape(-1, 1)
    with np.errstate(divide="ignore"):
        surv = np.exp(k[None, :] * np.log1p(-xf))
    out = 1.0 - surv.mean(axis=1)
    out = out.reshape(shape)
    return out[()] if out.ndim == 0 else out


def frechet_cdf(y):
    """Limit law ``exp(-1/(6 y^2))`` of the largest bulk overlap over ``N^{3/2}``."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    out[pos] = np.exp(-1.0 / (6.0 * y[pos] ** 2))
    return out[()] if out.ndim == 0 else out


def ginibre_kernel(N: int, z, w) -> complex:
    """Correlation kernel ``(N/pi) e^{-N(|z|^2+|w|^2)/2} sum_{k<N} (N z conj(w))^k / k!``."""
    z = complex(z)
    w = complex(w)
    damp = -N * (abs(z) ** 2 + abs(w) ** 2) / 2.0
    u = N * z * w.conjugate()
    k = np.arange(N, dtype=float)
    if u == 0:
        return complex(N / math.pi * math.exp(damp))
    logs = k * np.log(complex(u)) - gammaln(k + 1.0) + damp
    return complex(N / math.pi * np.sum(np.exp(logs)))


def pseudospectrum_prediction(N: int, center, radius: float, eps: float) -> float:
    """``eps^2 N^2`` times the integral of ``1 - |z|^2`` over a disk."""
    c2 = abs(complex(center)) ** 2
    integral = math.pi * radius ** 2 * (1.0 - c2) - math.pi * radius ** 4 / 2.0
    return eps ** 2 * N ** 2 * integral
