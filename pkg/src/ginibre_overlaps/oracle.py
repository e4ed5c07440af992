"""Independent numerical references for the closed forms.

Nothing here calls the closed-form expressions in ``formulas``; references are
built from exact Gaussian moments, quadrature on the plane, and explicit
matrix products, so agreement between the two is a genuine cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import roots_laguerre, roots_legendre

from .errors import ArgumentTooLarge, ToleranceNotReached

_LOG_MAX = math.log(np.finfo(float).max)

# ---------------------------------------------------------------------------
# Tridiagonal determinants


def tridiag_det(diag, lower, upper) -> float:
    """Determinant of a tridiagonal matrix by the three-term recurrence.

    ``lower[i]`` is entry ``(i+1, i)`` and ``upper[i]`` entry ``(i, i+1)``.
    The running pair is rescaled at each step so long chains neither
    overflow nor underflow.
    """
    diag = np.asarray(diag)
    lower = np.asarray(lower)
    upper = np.asarray(upper)
    n = diag.size
    if n == 0:
        return 1.0
    if lower.size != n - 1 or upper.size != n - 1:
        raise ValueError("off-diagonals must have length n - 1")
    prev, cur = 1.0, diag[0]
    log_scale = 0.0
    for i in range(1, n):
        prev, cur = cur, diag[i] * cur - lower[i - 1] * upper[i - 1] * prev
        m = max(abs(prev), abs(cur))
        if m > 0 and (m > 1e100 or m < 1e-100):
            prev /= m
            cur /= m
            log_scale += math.log(m)
    if cur != 0 and log_scale + math.log(abs(cur)) > _LOG_MAX:
        raise ArgumentTooLarge("determinant overflows a double")
    return cur * math.exp(log_scale)


def weight_moment_tridiag(weight: dict, k: int, row_shift: int):
    """Entries of ``f_ij = c_i int lambda^{i-1} conj(lambda)^{j-1} P dmu`` for a polynomial weight.

    The measure is the standard complex Gaussian (``N = 1``), for which
    ``int lambda^p conj(lambda)^q dmu = p! [p == q]``.  ``weight`` maps
    ``(p, q)`` to the coefficient of ``lambda^p conj(lambda)^q``; only
    ``|p - q| <= 1`` is allowed so the matrix is tridiagonal.  Rows are
    normalised by ``1/(i + row_shift)!``.
    """
    f = np.zeros((k, k), dtype=complex)
    for (p, q), c in weight.items():
        if abs(p - q) > 1:
            raise ValueError("weight must keep the matrix tridiagonal")
        for i in range(1, k + 1):
            j = i + p - q
            if 1 <= j <= k:
                f[i - 1, j - 1] += c * math.factorial(i - 1 + p)
    for i in range(1, k + 1):
        f[i - 1] /= math.factorial(i + row_shift)
    return np.diagonal(f).copy(), np.diagonal(f, -1).copy(), np.diagonal(f, 1).copy()


def _abs2_shift(z: complex) -> dict:
    """Monomial expansion of ``|z - lambda|^2``."""
    return {(0, 0): abs(z) ** 2, (0, 1): -z, (1, 0): -z.conjugate(), (1, 1): 1.0}


def _poly_mul(p1: dict, p2: dict) -> dict:
    out: dict = {}
    for (a, b), c in p1.items():
        for (d, e), c2 in p2.items():
            out[(a + d, b + e)] = out.get((a + d, b + e), 0.0) + c * c2
    return out


def _poly_add(*ps: dict) -> dict:
    out: dict = {}
    for p in ps:
        for key, c in p.items():
            out[key] = out.get(key, 0.0) + c
    return out


def family_weight(family: str, x: float) -> tuple[dict, int]:
    """Polynomial weight and row normalisation for a named determinant family.

    Families (with ``z = sqrt(x)``):

    ``cond1``       one eigenvalue at ``z``, no extra factor
    ``meandiag``    one eigenvalue at ``z``, factor ``1 + 1/|z - lambda|^2``
    ``meandiag2``   eigenvalues at 0 and ``z``, factor ``1 - 1/(lambda conj(z - lambda))``
    ``plus``/``minus``  eigenvalues at 0 and ``z`` (``delta = x``), factor
                    ``(1 + 1/|lambda|^2)(1 + 1/|z - lambda|^2) - r/(|lambda|^2 |z - lambda|^2)``
                    with ``r = a`` or ``b``.
    """
    z = complex(math.sqrt(x))
    shift = _abs2_shift(z)
    mod2 = {(1, 1): 1.0}
    if family == "cond1":
        return shift, 0
    if family == "meandiag":
        return _poly_add(shift, {(0, 0): 1.0}), 0
    pair = _poly_mul(mod2, shift)
    if family == "meandiag2":
        # |lambda|^2 |z-lambda|^2 - conj(lambda) (z - lambda)
        return _poly_add(pair, {(0, 1): -z, (1, 1): 1.0}), 1
    if family in ("plus", "minus"):
        root = math.sqrt(1.0 + x * x / 4.0)
        r = x / 2.0 + root if family == "plus" else x / 2.0 - root
        return _poly_add(pair, mod2, shift, {(0, 0): 1.0 - r}), 1
    raise ValueError(f"unknown family {family!r}")


def family_determinants(family: str, x: float, kmax: int) -> np.ndarray:
    """``a_0..a_kmax`` for a family, each a ``k x k`` tridiagonal determinant."""
    weight, shift = family_weight(family, x)
    d, lo, up = weight_moment_tridiag(weight, kmax, shift)
    out = np.empty(kmax + 1)
    out[0] = 1.0
    for k in range(1, kmax + 1):
        out[k] = np.real(tridiag_det(d[:k], lo[:k - 1], up[:k - 1]))
    return out


def verify_ak_closed_forms(kmax: int = 50, xs: Sequence[float] = (0.1, 1.0, 5.0, 20.0)) -> dict:
    """Largest relative gap between determinant families and their closed forms.

    Returns ``{family: max_rel_error}``.
    """
    from . import formulas as F

    def closed(family, x, k):
        if family == "cond1":
            return F.exp_partial_sum(0, k, x)
        if family == "meandiag":
            return (k + 1) * F.exp_partial_sum(0, k + 1, x) - x * F.exp_partial_sum(0, k, x)
        if family == "meandiag2":
            return (k + 2) * F.exp_partial_sum(2, k + 2, x) / x ** 2
        geo = F.PairGeometry.from_delta(x)
        if family == "plus":
            return F.g_closed_form(k, geo.a, x) * (k + 2) * (k + 3) / 6.0
        return F.d_k(k, geo.b, x) * F.exp_partial_sum(1, k + 1, x) / x

    report = {}
    for family in ("cond1", "meandiag", "meandiag2", "plus", "minus"):
        worst = 0.0
        for x in xs:
            dets = family_determinants(family, x, kmax)
            for k in range(1, kmax + 1):
                ref = closed(family, x, k)
                worst = max(worst, abs(dets[k] - ref) / abs(ref))
        report[family] = worst
    return report


# ---------------------------------------------------------------------------
# Quadrature on the plane


@dataclass(frozen=True)
class PlaneGrid:
    """Nodes and weights with ``sum w f(z) ~ int f dmu_N``.

    ``mu_N`` is the Gaussian measure ``(N/pi) e^{-N|z|^2} dm``.  Radially
    Gauss-Laguerre in ``s = N r^2``, angularly the periodic trapezoid rule;
    exact for ``lambda^p conj(lambda)^q`` whenever ``|p - q| < n_angle`` and
    ``min(p, q) < 2 n_radial - max(p - q, 0)``.
    """

    nodes: np.ndarray
    weights: np.ndarray


def gaussian_grid(N: float, n_radial: int = 40, n_angle: int = 64) -> PlaneGrid:
    s, ws = roots_laguerre(n_radial)
    theta = 2 * np.pi * np.arange(n_angle) / n_angle
    r = np.sqrt(s / N)
    nodes = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
    weights = np.repeat(ws / n_angle, n_angle)
    return PlaneGrid(nodes, weights)


def _allowed_arcs(r: float, exclusions) -> list | None:
    """Angular intervals of the circle ``|z| = r`` outside every exclusion disk.

    Returns ``None`` when the full circle is allowed.
    """
    cuts = []
    for c, eps in exclusions:
        rc = abs(c)
        if rc + r <= eps:
            return []
        if rc < 1e-15 or r <= rc - eps or r >= rc + eps:
            continue
        cos_h = (r * r + rc * rc - eps * eps) / (2 * r * rc)
        h = math.acos(min(1.0, max(-1.0, cos_h)))
        phase = math.atan2(c.imag, c.real)
        cuts.append((phase - h, phase + h))
    if not cuts:
        return None
    # Work on [start, start + 2pi) with start at the first cut's end.
    cuts.sort()
    start = cuts[0][1]
    norm = []
    for lo, hi in cuts:
        lo_n = start + (lo - start) % (2 * np.pi)
        norm.append((lo_n, lo_n + (hi - lo)))
    norm.sort()
    arcs, pos = [], start
    for lo, hi in norm:
        if lo > pos:
            arcs.append((pos, lo))
        pos = max(pos, hi)
    end = start + 2 * np.pi
    if pos < end:
        arcs.append((pos, end))
    return arcs


def _disk_rule(f, radius, exclusions, n):
    breaks = {0.0, radius}
    for c, eps in exclusions:
        rc = abs(c)
        for b in (rc - eps, rc + eps, eps - rc):
            if 0.0 < b < radius:
                breaks.add(b)
    breaks = sorted(breaks)
    u, wu = roots_legendre(n)
    tu, twu = roots_legendre(n)
    total = 0.0 + 0.0j
    m_trap = 2 * n
    theta_trap = 2 * np.pi * np.arange(m_trap) / m_trap
    for r0, r1 in zip(breaks[:-1], breaks[1:]):
        mid, half = (r0 + r1) / 2, (r1 - r0) / 2
        # r = mid + half sin(pi u / 2) clusters nodes at both ends and removes
        # square-root endpoint behaviour of the arc lengths.
        ang = np.pi * u / 2
        rs = mid + half * np.sin(ang)
        jac = half * np.cos(ang) * np.pi / 2 * wu
        for r, wr in zip(rs, jac):
            arcs = _allowed_arcs(r, exclusions)
            if arcs is None:
                vals = f(r * np.exp(1j * theta_trap))
                total += wr * r * np.sum(vals) * 2 * np.pi / m_trap
                continue
            for a0, a1 in arcs:
                th = (a0 + a1) / 2 + (a1 - a0) / 2 * tu
                vals = f(r * np.exp(1j * th))
                total += wr * r * np.sum(vals * twu) * (a1 - a0) / 2
    return total


def disk_integral(f: Callable, radius: float = 1.0, exclusions: Iterable = (), tol: float = 1e-10,
                  max_level: int = 6) -> complex:
    """``int f dm`` over ``{|z| < radius}`` minus disjoint exclusion disks.

    ``exclusions`` is a list of ``(center, eps)``.  Polar coordinates about the
    origin with radial breakpoints at every exclusion boundary; the rule is
    refined (node count doubled) until two successive levels agree to
    ``tol`` relative to ``max(1, |I|)``.
    """
    excl = [(complex(c), float(e)) for c, e in exclusions]
    n = 16
    prev = _disk_rule(f, radius, excl, n)
    for _ in range(max_level):
        n *= 2
        cur = _disk_rule(f, radius, excl, n)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise ToleranceNotReached(f"disk integral did not settle: last change {abs(cur - prev):.3e}")


def integral_pair_reference(l1, l2, eps: float | None = None, tol: float = 1e-10) -> complex:
    """``(1/pi) int_D dm(z) / ((l1 - z) conj(l2 - z))`` with the two poles cut out.

    The integrand averages to zero over any small circle centred at either
    pole, so removing the disks does not change the value.
    """
    l1, l2 = complex(l1), complex(l2)
    if eps is None:
        eps = min(abs(l1 - l2) / 3, (1 - max(abs(l1), abs(l2))) / 2)
    val = disk_integral(lambda z: 1.0 / ((l1 - z) * np.conj(l2 - z)), 1.0, [(l1, eps), (l2, eps)], tol)
    return val / math.pi


def integral_log_difference(z, eps: float = 0.1, tol: float = 1e-10) -> float:
    """``(1/pi)[int_{D - D_z} dm/|z-l|^2 - int_{D - D_0} dm/|l|^2]`` with radius-``eps`` cut-outs."""
    z = complex(z)
    a = disk_integral(lambda l: 1.0 / np.abs(z - l) ** 2, 1.0, [(z, eps)], tol)
    b = disk_integral(lambda l: 1.0 / np.abs(l) ** 2, 1.0, [(0.0, eps)], tol)
    return float(np.real(a - b) / math.pi)


def kernel_trace(N: int, radius: float = 4.0, tol: float = 1e-10) -> float:
    """``int K_N(z, z) dm`` over a large disk (should be ``N``)."""
    from .formulas import ginibre_kernel

    def f(z):
        return np.array([ginibre_kernel(N, v, v).real for v in np.ravel(z)]).reshape(np.shape(z))

    return float(np.real(disk_integral(f, radius, (), tol)))


# ---------------------------------------------------------------------------
# Andreief determinants


@dataclass(frozen=True)
class AndreiefResult:
    matrix: np.ndarray
    log_normaliser: float
    value: float


def andreief_moment_matrix(g: Callable, N: int, conditioning: str = "none", z=0.0,
                           n_radial: int = 40, n_angle: int = 64) -> AndreiefResult:
    """``E prod g(lambda_k)`` over the free eigenvalues as one determinant.

    ``conditioning`` is ``"none"`` (all ``N`` eigenvalues free), ``"point"``
    (one eigenvalue fixed at ``z``) or ``"pair"`` (eigenvalues fixed at 0 and
    ``z``).  The moment entries are computed by quadrature against the
    Gaussian measure; normalisations are the partition functions of the
    corresponding conditioned ensembles.
    """
    if not 1 <= N <= 6:
        raise ValueError("N must be between 1 and 6")
    z = complex(z)
    grid = gaussian_grid(N, n_radial, n_angle)
    lam = grid.nodes
    x = N * abs(z) ** 2
    from .formulas import log_exp_partial_sum

    if conditioning == "none":
        m, w = N, np.ones_like(lam)
        colnorm = [1.0 / math.factorial(j) for j in range(m)]
        rownorm = [1.0] * m
        log_z = -N * (N - 1) / 2 * math.log(N)
    elif conditioning == "point":
        m, w = N - 1, np.abs(z - lam) ** 2
        colnorm = [1.0 / math.factorial(j + 1) for j in range(m)]
        rownorm = [1.0] * m
        log_z = -N * (N - 1) / 2 * math.log(N) + log_exp_partial_sum(0, N - 1, x)
    elif conditioning == "pair":
        if N < 2 or x == 0:
            raise ValueError("pair conditioning needs N >= 2 and z != 0")
        m, w = N - 2, np.abs(lam) ** 2 * np.abs(z - lam) ** 2
        colnorm = [1.0] * m
        rownorm = [1.0 / math.factorial(i + 2) for i in range(m)]
        log_z = -(N - 2) * (N + 1) / 2 * math.log(N) + log_exp_partial_sum(1, N - 1, x) - math.log(x)
    else:
        raise ValueError(f"unknown conditioning {conditioning!r}")
    vals = grid.weights * w * np.asarray(g(lam))
    powers = lam[None, :] ** np.arange(m)[:, None]
    f = (powers * vals[None, :]) @ powers.conj().T
    f *= np.outer(rownorm, colnorm)
    det = np.linalg.det(f) if m > 0 else 1.0
    return AndreiefResult(f, log_z, float(np.real(det) / math.exp(log_z)))


def smallN_second_moment_oracle(N: int, z, n_radial: int = 20, n_angle: int = 24) -> tuple[float, float]:
    """``(E|O_12|^2, E O_11 O_22)`` given ``lambda_1 = 0, lambda_2 = z`` for ``N`` in {3, 4}.

    Brute-force quadrature over the free eigenvalues of the explicit
    transfer-matrix product, weighted by the conditioned Ginibre density.
    After multiplying by the density every integrand is a polynomial, so the
    product Gauss rule is exact up to rounding.
    """
    if N not in (3, 4):
        raise ValueError("oracle is implemented for N = 3 and N = 4")
    z = complex(z)
    delta = N * abs(z) ** 2
    grid = gaussian_grid(N, n_radial, n_angle)
    lam = grid.nodes
    rho = grid.weights * np.abs(lam) ** 2 * np.abs(z - lam) ** 2
    g1 = 1.0 / (math.sqrt(N) * (0.0 - lam))
    g2 = 1.0 / (math.sqrt(N) * (z - lam))
    c = np.abs(g1 * g2) ** 2
    M = np.empty((lam.size, 2, 2))
    M[:, 0, 0] = np.abs(1.0 + g1 * np.conj(g2)) ** 2
    M[:, 0, 1] = M[:, 1, 0] = c
    M[:, 1, 1] = (1.0 + np.abs(g1) ** 2) * (1.0 + np.abs(g2) ** 2)
    if N == 3:
        P = np.einsum("a,aij->ij", rho, M) / rho.sum()
    else:
        vdm = np.abs(lam[:, None] - lam[None, :]) ** 2
        pair_w = rho[:, None] * rho[None, :] * vdm
        P = np.einsum("ab,aij,bjk->ik", pair_w, M, M) / pair_w.sum()
    s1, s2 = 1.0 / delta, 2.0 / delta ** 2
    off = P[0, 0] * s2 + P[0, 1] * (s1 + s2)
    diag = P[1, 0] * (s1 + s2) + P[1, 1] * (1.0 + 2.0 * s1 + s2)
    return float(off), float(diag)
