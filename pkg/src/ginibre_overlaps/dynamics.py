"""Ornstein-Uhlenbeck matrix flow ``dG = dB/sqrt(N) - G dt/2`` and eigenvalue tracking.

Eigenvalues of the flow are martingales up to the drift ``-lambda dt/2``,
with ``d<lambda_i, conj(lambda_j)> = O_ij dt / N``; in the complex case
``d<lambda_i, lambda_j> = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CollisionDetected, DecompositionFailed, InsufficientSteps, OverlapError
from .rand_ensembles import RandomSource, as_generator, sample_standard_complex_gaussian
from .spectral import eigendecompose, overlaps

MIN_BRACKET_STEPS = 100


@dataclass(frozen=True)
class FlowConfig:
    N: int
    dt: float
    steps: int
    kind: str = "complex"
    seed: int = 0
    method: str = "euler"
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("complex", "real"):
            raise ValueError("kind must be 'complex' or 'real'")
        if self.method not in ("euler", "exact"):
            raise ValueError("method must be 'euler' or 'exact'")
        if self.dt <= 0 or self.steps < 1 or self.N < 1:
            raise ValueError("need dt > 0, steps >= 1, N >= 1")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")


def _noise(gen, cfg: FlowConfig, var: float) -> np.ndarray:
    shape = (cfg.N, cfg.N)
    if cfg.kind == "complex":
        return sample_standard_complex_gaussian(gen, shape) * math.sqrt(var)
    return gen.standard_normal(shape) * math.sqrt(var)


def iter_ou(G0, cfg: FlowConfig, rng: RandomSource) -> Iterator[np.ndarray]:
    """Yield ``G(0), G(dt), ..., G(steps dt)``.

    ``method="euler"`` is Euler-Maruyama, ``G <- G (1 - dt/2) + dB / sqrt(N)``
    with ``E|dB_ij|^2 = dt``; ``method="exact"`` samples the Gaussian
    transition ``G e^{-dt/2} + sqrt((1 - e^{-dt})/N) X``.  The noise is
    multiplied by ``cfg.noise_scale`` (0 gives the deterministic flow).
    """
    gen = as_generator(rng)
    G = np.array(G0, dtype=complex if cfg.kind == "complex" else float)
    yield G.copy()
    if cfg.method == "euler":
        decay, var = 1.0 - cfg.dt / 2.0, cfg.dt / cfg.N
    else:
        decay, var = math.exp(-cfg.dt / 2.0), -math.expm1(-cfg.dt) / cfg.N
    var *= cfg.noise_scale ** 2
    for _ in range(cfg.steps):
        G = G * decay + _noise(gen, cfg, var)
        yield G.copy()


def evolve_ou(G0, cfg: FlowConfig, rng: RandomSource) -> np.ndarray:
    """All states of the flow stacked into shape ``(steps + 1, N, N)``."""
    return np.stack(list(iter_ou(G0, cfg, rng)))


@dataclass
class EigenPath:
    """Eigenvalue trajectories with consistent labels.

    ``matched[s]`` is False when the step from ``s`` to ``s + 1`` was
    ambiguous; ``first_unmatched`` is the index of the last trustworthy state.
    """

    times: np.ndarray
    eigenvalues: np.ndarray
    overlaps: Optional[np.ndarray]
    matched: np.ndarray
    X: Optional[np.ndarray] = None
    Y: Optional[np.ndarray] = None

    @property
    def first_unmatched(self) -> int:
        bad = np.flatnonzero(~self.matched)
        return int(bad[0]) if bad.size else self.matched.size

    def truncated(self) -> "EigenPath":
        stop = self.first_unmatched + 1
        def cut(a):
            return None if a is None else a[:stop]
        return EigenPath(self.times[:stop], self.eigenvalues[:stop], cut(self.overlaps), self.matched[:stop - 1],
                         cut(self.X), cut(self.Y))


def match_eigenvalues(prev: np.ndarray, new: np.ndarray, ratio: float = 1.5) -> tuple[np.ndarray, bool]:
    """Permutation ``p`` with ``new[p]`` aligned to ``prev``, and whether it was unambiguous.

    Greedy nearest neighbour; if any nearest distance is not beaten by a
    factor ``ratio`` by the second nearest, or the greedy choice is not a
    permutation, falls back to the optimal assignment and reports ambiguity.
    """
    dist = np.abs(prev[:, None] - new[None, :])
    if prev.size == 1:
        return np.array([0]), True
    part = np.partition(dist, 1, axis=1)
    nearest, second = part[:, 0], part[:, 1]
    greedy = np.argmin(dist, axis=1)
    clear = bool(np.all(second > ratio * nearest)) and np.unique(greedy).size == greedy.size
    if clear:
        return greedy, True
    _, cols = linear_sum_assignment(dist)
    return cols, False


def track_eigenvalue_paths(matrices: Sequence[np.ndarray], dt: float, ratio: float = 1.5,
                           store: str = "full") -> EigenPath:
    """Decompose each state and label eigenvalues continuously.

    ``store`` is ``"full"`` (overlap matrices), ``"diag"`` (diagonal only),
    ``"vectors"`` (full overlaps plus aligned ``X`` and ``Y``) or ``"none"``.
    """
    eig_list, O_list, X_list, Y_list, matched = [], [], [], [], []
    prev = None
    for step, G in enumerate(matrices):
        try:
            if store == "none":
                lam = np.linalg.eigvals(G)
                X = Y = None
            else:
                es = eigendecompose(G, tol=1e-8)
                lam, X, Y = es.eigenvalues, es.X, es.Y
        except (OverlapError, np.linalg.LinAlgError) as exc:
            raise DecompositionFailed(f"step {step}: {exc}") from exc
        if prev is not None:
            perm, ok = match_eigenvalues(prev, lam, ratio)
            matched.append(ok)
            lam = lam[perm]
            if X is not None:
                X, Y = X[:, perm], Y[perm, :]
        eig_list.append(lam)
        if store in ("full", "vectors"):
            O_list.append(overlaps(X, Y))
            if store == "vectors":
                X_list.append(X)
                Y_list.append(Y)
        elif store == "diag":
            O_list.append(np.real(np.sum(np.abs(X) ** 2, axis=0) * np.sum(np.abs(Y) ** 2, axis=1)))
        prev = lam
    eigs = np.array(eig_list)
    O = np.array(O_list) if O_list else None
    Xs = np.array(X_list) if X_list else None
    Ys = np.array(Y_list) if Y_list else None
    return EigenPath(dt * np.arange(eigs.shape[0]), eigs, O, np.array(matched, dtype=bool), Xs, Ys)


@dataclass(frozen=True)
class BracketEstimate:
    """Realised and predicted quadratic covariations over a path."""

    realized: np.ndarray
    realized_nonconj: np.ndarray
    predicted: np.ndarray
    steps: int

    def diagonal_ratio(self) -> float:
        return float(np.sum(np.real(np.diagonal(self.realized))) / np.sum(np.real(np.diagonal(self.predicted))))

    def nonconj_fraction(self) -> float:
        return float(np.sum(np.abs(np.diagonal(self.realized_nonconj))) /
                     np.sum(np.real(np.diagonal(self.realized))))


def empirical_brackets(path: EigenPath, dt: float, N: Optional[int] = None, remove_drift: bool = True) -> BracketEstimate:
    """``sum dl_i conj(dl_j)`` and ``sum dl_i dl_j`` against ``sum O_ij dt / N``.

    Uses the path up to its first ambiguous step; overlaps are taken at the
    left end of each increment.
    """
    path = path.truncated()
    if path.overlaps is None or path.overlaps.ndim != 3:
        raise ValueError("path must carry full overlap matrices")
    steps = path.eigenvalues.shape[0] - 1
    if steps < MIN_BRACKET_STEPS:
        raise InsufficientSteps(f"{steps} steps, need at least {MIN_BRACKET_STEPS}")
    lam = path.eigenvalues
    N = lam.shape[1] if N is None else N
    inc = np.diff(lam, axis=0)
    if remove_drift:
        inc = inc + lam[:-1] * dt / 2.0
    conj = inc.T @ inc.conj()
    conj = (conj + conj.conj().T) / 2.0
    nonconj = inc.T @ inc
    predicted = np.sum(path.overlaps[:-1], axis=0) * dt / N
    return BracketEstimate(conj, nonconj, predicted, steps)


def ball_integral_one_minus_mod2(center, radius: float) -> float:
    """``(1/pi) int_ball (1 - |z|^2) dm`` for a disk inside the unit disk."""
    c2 = abs(complex(center)) ** 2
    return radius ** 2 * (1.0 - c2) - radius ** 4 / 2.0


def diffusive_msd(paths: Sequence[EigenPath], center, radius: float, step: int) -> tuple[float, float]:
    """Mean squared displacement up to ``times[step]`` of eigenvalues starting in a ball.

    Returns ``(empirical, predicted)`` where ``empirical`` averages over paths
    ``(1/N) sum_{lambda_i(0) in ball} |lambda_i(t) - lambda_i(0)|^2`` and
    ``predicted = t (1/pi) int_ball (1 - |z|^2) dm``.
    """
    vals = []
    t = None
    for p in paths:
        lam0 = p.eigenvalues[0]
        mask = np.abs(lam0 - complex(center)) < radius
        disp = np.abs(p.eigenvalues[step] - lam0) ** 2
        vals.append(np.sum(disp[mask]) / lam0.size)
        t = p.times[step]
    return float(np.mean(vals)), float(t * ball_integral_one_minus_mod2(center, radius))


def neighbour_cross_ratio(paths: Sequence[EigenPath], center, radius: float, step: int, a: float = 0.25) -> float:
    """Cross displacement of close eigenvalues relative to the own displacement.

    Returns ``sum Re((l_i(t) - l_i(0)) conj(l_j(t) - l_j(0)))`` over ordered
    pairs with ``l_i(0)`` in the ball and ``|l_i(0) - l_j(0)| < N^{-a}``,
    divided by ``sum |l_i(t) - l_i(0)|^2`` over the same ``i`` and by the
    mean number of such neighbours, i.e. the covariance per close pair in
    units of the variance.  Summed over all neighbours the ratio is near -1
    because overlap rows sum to one.
    """
    cross = own = 0.0
    pairs = centres = 0
    for p in paths:
        lam0 = p.eigenvalues[0]
        disp = p.eigenvalues[step] - lam0
        first = np.flatnonzero(np.abs(lam0 - complex(center)) < radius)
        close = np.abs(lam0[first][:, None] - lam0[None, :]) < lam0.size ** (-a)
        close[np.arange(first.size), first] = False
        cross += float(np.sum(np.real(disp[first][:, None] * np.conj(disp[None, :]))[close]))
        own += float(np.sum(np.abs(disp[first]) ** 2))
        pairs += int(close.sum())
        centres += first.size
    return cross / own / (pairs / centres)


# ---------------------------------------------------------------------------
# Real flow


def transpose_overlaps(X, Y) -> np.ndarray:
    """``O_{k conj(l)} = (X^t X)_{lk} (Y Y^t)_{kl}``, the overlaps entering real-noise brackets."""
    return (X.T @ X).T * (Y @ Y.T)


def perturbative_drift(X, Y, eigenvalues, N: int) -> np.ndarray:
    """Second-order Ito drift ``(1/N) sum_{l != k} O_{k conj(l)} / (lambda_k - lambda_l)`` for real noise."""
    lam = np.asarray(eigenvalues)
    Ot = transpose_overlaps(X, Y)
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, np.inf)
    return np.sum(Ot / diff, axis=1) / N


@dataclass(frozen=True)
class RealFlowReport:
    steps: int
    residual_zscore: np.ndarray
    realized_nonconj: np.ndarray
    predicted_nonconj: np.ndarray
    max_imag_increment_real: float
    max_imag_drift_real: float
    collision_step: Optional[int]


def real_flow_drift_check(path: EigenPath, dt: float, raise_on_collision: bool = False) -> RealFlowReport:
    """Compare real-flow increments with the predicted drift and brackets.

    ``path`` must come from ``track_eigenvalue_paths(..., store="vectors")``.
    The check stops at the first step where a non-real eigenvalue
    has ``|Im lambda| < 10 sqrt(dt O_kk / N)``.
    """
    if path.X is None:
        raise ValueError("path must carry eigenvectors (store='vectors')")
    path = path.truncated()
    lam = path.eigenvalues
    N = lam.shape[1]
    steps = lam.shape[0] - 1
    res_sum = np.zeros(N, dtype=complex)
    scale_sum = np.zeros(N)
    realized = np.zeros((N, N), dtype=complex)
    predicted = np.zeros((N, N), dtype=complex)
    max_im_inc = 0.0
    max_im_drift = 0.0
    collision = None
    used = 0
    for s in range(steps):
        X, Y = path.X[s], path.Y[s]
        l0, l1 = lam[s], lam[s + 1]
        Okk = np.sum(np.abs(X) ** 2, axis=0) * np.sum(np.abs(Y) ** 2, axis=1)
        nonreal = np.abs(l0.imag) > 0
        if np.any(np.abs(l0.imag[nonreal]) < 10 * np.sqrt(dt * Okk[nonreal] / N)):
            collision = s
            if raise_on_collision:
                raise CollisionDetected(f"conjugate pair near the real axis at step {s}")
            break
        drift = perturbative_drift(X, Y, l0, N) - l0 / 2.0
        inc = l1 - l0
        real = ~nonreal
        if real.any():
            max_im_inc = max(max_im_inc, float(np.max(np.abs(inc.imag[real]))))
            max_im_drift = max(max_im_drift, float(np.max(np.abs(drift.imag[real]) / np.maximum(np.abs(drift[real]), 1e-300))))
        res_sum += inc - drift * dt
        scale_sum += Okk * dt / N
        realized += np.outer(inc, inc)
        predicted += transpose_overlaps(X, Y) * dt / N
        used += 1
    z = np.abs(res_sum) / np.sqrt(np.maximum(scale_sum, 1e-300))
    return RealFlowReport(used, z, realized, predicted, max_im_inc, max_im_drift, collision)
