"""Experiment runners shared by the command line and the acceptance tests.

Every random trial ``k`` draws from ``RngStream(seed, k)``, so results do not
depend on how trials are split across worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from . import formulas as F
from .angles import angle_distribution_test, microscopic_pair_angles, sample_angle_at_origin
from .dynamics import (FlowConfig, diffusive_msd, empirical_brackets, iter_ou, neighbour_cross_ratio,
                       track_eigenvalue_paths)
from .errors import DegenerateSpectrum, NonConvergence
from .estimators import (AnnulusWindow, Ball, DiagAccumulator, KSReport, extremes_scan, ks_distance,
                         pseudospectrum_volume)
from .oracle import (integral_log_difference, integral_pair_reference, kernel_trace,
                     smallN_second_moment_oracle, verify_ak_closed_forms)
from .rand_ensembles import EnsembleSpec, RngStream, sample_matrix, sample_schur_T
from .schur_chain import (chain_overlaps_batch, chain_overlaps_from_T, quenched_diag_origin_samples,
                          quenched_offdiag_expectation, quenched_second_moments)
from .spectral import eigendecompose, overlaps

MAX_RESAMPLES = 10


@dataclass
class Check:
    name: str
    value: float
    threshold: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.6g} ({self.threshold})"


@dataclass
class ExperimentResult:
    name: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    trial_ranges: list = field(default_factory=list)
    rejections: int = 0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# ---------------------------------------------------------------------------
# Trial distribution


def split_ranges(n_trials: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous ``[start, stop)`` trial ranges, one per worker."""
    workers = max(1, min(int(workers), max(1, n_trials)))
    bounds = np.linspace(0, n_trials, workers + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _run_range(fn: Callable, seed: int, rng_range: tuple[int, int]) -> list:
    return [fn(RngStream(seed, k)) for k in range(*rng_range)]


def map_trials(fn: Callable, n_trials: int, seed: int, workers: int = 1) -> tuple[list, list]:
    """Apply ``fn(RngStream(seed, k))`` for ``k < n_trials``; returns results in trial order and ranges."""
    ranges = split_ranges(n_trials, workers)
    if len(ranges) <= 1:
        return _run_range(fn, seed, (0, n_trials)), ranges
    with ProcessPoolExecutor(max_workers=len(ranges)) as pool:
        parts = list(pool.map(partial(_run_range, fn, seed), ranges))
    return [r for part in parts for r in part], ranges


def decomposed_matrix(kind: str, N: int, stream: RngStream, full: bool = False) -> dict:
    """Draw and decompose one matrix, redrawing from child streams on failure."""
    for attempt in range(MAX_RESAMPLES):
        source = stream if attempt == 0 else stream.child(attempt)
        G = sample_matrix(EnsembleSpec(kind, N), source)
        try:
            es = eigendecompose(G, tol=1e-8)
        except (DegenerateSpectrum, NonConvergence):
            continue
        out = {"eigenvalues": es.eigenvalues, "rejections": attempt}
        if full:
            out["O"] = overlaps(es.X, es.Y)
            out["diag"] = np.real(np.diagonal(out["O"])).copy()
            out["X"] = es.X
        else:
            out["diag"] = np.sum(np.abs(es.X) ** 2, axis=0) * np.sum(np.abs(es.Y) ** 2, axis=1)
        return out
    raise NonConvergence(f"no usable matrix after {MAX_RESAMPLES} draws")


# ---------------------------------------------------------------------------
# Diagonal overlaps


def _quenched_chunk(N: int, size: int, stream: RngStream) -> np.ndarray:
    return quenched_diag_origin_samples(N, stream, size)


def quenched_origin_samples(N: int, trials: int, seed: int, workers: int = 1, chunk: int = 1000):
    """``trials`` samples of ``O_11`` at the origin, drawn in fixed-size chunks."""
    n_chunks = math.ceil(trials / chunk)
    parts, ranges = map_trials(partial(_quenched_chunk, N, chunk), n_chunks, seed, workers)
    ranges = [(min(a * chunk, trials), min(b * chunk, trials)) for a, b in ranges]
    return np.concatenate(parts)[:trials], ranges


def quenched_origin_ks(N: int, trials: int, seed: int, workers: int = 1) -> dict:
    """KS distances of quenched origin samples against the exact and limit laws."""
    o11, ranges = quenched_origin_samples(N, trials, seed, workers)
    finite = ks_distance(1.0 / o11, lambda x: _beta2_cdf(x, N - 1))
    limit = ks_distance(o11 / N, F.inv_gamma2_cdf)
    return {"samples": o11, "ks_finite": finite, "ks_limit": limit, "ranges": ranges}


def _beta2_cdf(x, m):
    """CDF of Beta(2, m): ``1 - (1-x)^{m+1} - (m+1) x (1-x)^m``."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    l1 = np.log1p(-np.minimum(x, 1 - 1e-300))
    return 1.0 - np.exp((m + 1) * l1) - (m + 1) * x * np.exp(m * l1)


def _diag_trial(kind: str, N: int, stream: RngStream) -> dict:
    return decomposed_matrix(kind, N, stream)


def diag_matrices(kind: str, N: int, matrices: int, seed: int, workers: int = 1):
    return map_trials(partial(_diag_trial, kind, N), matrices, seed, workers)


def windowed_diag_mean(N: int, z: float, matrices: int, seed: int, workers: int = 1) -> dict:
    """Full-matrix mean of ``O_ii`` for ``|lambda_i|`` within ``0.3/sqrt(N)`` of ``|z|``."""
    mats, ranges = diag_matrices("complex_gaussian", N, matrices, seed, workers)
    acc = DiagAccumulator(AnnulusWindow(abs(z), 0.3 / math.sqrt(N)), N)
    for m in mats:
        acc.add(m["eigenvalues"], m["diag"])
    est = acc.raw.estimate()
    return {"estimate": est, "normalised": acc.normalised.estimate(), "ratio": est.mean / F.mean_diag_exact(N, z),
            "ranges": ranges, "rejections": sum(m["rejections"] for m in mats)}


def exact_mean_agreement(N: int, zs=(0.0, 0.3, 0.5)) -> float:
    return max(abs(F.mean_diag_exact(N, z) / F.mean_diag_asymptotic(N, z) - 1.0) for z in zs)


def run_diag_distribution(n=50, trials=100000, seed=1, workers=1, matrices=0, z=0.5, **_) -> ExperimentResult:
    res = ExperimentResult("diag-distribution")
    ks = quenched_origin_ks(n, trials, seed, workers)
    res.trial_ranges = ks["ranges"]
    res.checks.append(Check(f"ks_inverse_beta_N{n}", ks["ks_finite"], "< 0.01", ks["ks_finite"] < 0.01))
    ks_rows = [KSReport("inverse_beta_finite_N", trials, ks["ks_finite"], 0.01).row()]
    if n >= 1000:
        res.checks.append(Check(f"ks_inverse_gamma2_N{n}", ks["ks_limit"], "< 0.015", ks["ks_limit"] < 0.015))
    ks_rows.append(KSReport("inverse_gamma2_limit", trials, ks["ks_limit"], 0.015).row())
    rel = exact_mean_agreement(500)
    res.checks.append(Check("mean_exact_vs_bulk_N500", rel, "< 1e-6", rel < 1e-6))
    o = ks["samples"]
    diag_rows = [{"z_re": 0.0, "z_im": 0.0, "n": o.size, "mean": float(o.mean()),
                  "stderr": float(o.std(ddof=1) / math.sqrt(o.size))}]
    if matrices > 0:
        w = windowed_diag_mean(n, z, matrices, seed + 1, workers)
        e = w["estimate"]
        res.rejections += w["rejections"]
        diag_rows.append({"z_re": float(z), "z_im": 0.0, "n": e.count, "mean": e.mean, "stderr": e.std_error})
        ok = abs(w["ratio"] - 1.0) < 0.1 and e.count >= 1000
        res.checks.append(Check(f"windowed_mean_ratio_N{n}_z{z}", w["ratio"], "within 10%, >= 1000 hits", ok))
    res.tables["diag"] = diag_rows
    res.tables["ks"] = ks_rows
    t = np.linspace(0.05, 5.0, 100)
    hist, edges = np.histogram(o / n, bins=np.append(t - 0.025, 5.025), density=False)
    res.figures["diag_density"] = (
        np.column_stack([t, hist / (o.size * 0.05), F.beta_inv_finite_N_density(n, t), F.inv_gamma2_density(t)]),
        {"columns": ["t", "empirical_density", "finite_N_density", "limit_density"],
         "description": "density of O11/N conditioned on an eigenvalue at the origin", "N": n, "samples": o.size})
    res.summary = {"ks_finite": ks["ks_finite"], "ks_limit": ks["ks_limit"], "mean_O11": float(o.mean())}
    return res


# ---------------------------------------------------------------------------
# Schur chain


def chain_vs_eigendecomposition(N: int, count: int, seed: int) -> float:
    """Largest relative discrepancy between chain and dense-eigensolver overlaps on shared Schur forms."""
    worst = 0.0
    for k in range(count):
        stream = RngStream(seed, k)
        lam = np.linalg.eigvals(sample_matrix(EnsembleSpec("complex_gaussian", N), stream.child(0)))
        T = sample_schur_T(lam, stream.child(1))
        c11, c12, c22 = chain_overlaps_from_T(T)
        es = eigendecompose(T, tol=1e-8)
        i = int(np.argmin(np.abs(es.eigenvalues - T[0, 0])))
        j = int(np.argmin(np.abs(es.eigenvalues - T[1, 1])))
        O = overlaps(es.X, es.Y)
        for a, b in ((c11, O[i, i]), (c12, O[i, j]), (c22, O[j, j])):
            worst = max(worst, abs(a - b) / abs(b))
    return worst


def fixed_spectrum(N: int, seed: int) -> np.ndarray:
    """A Ginibre spectrum reordered so its first two entries are the closest bulk pair."""
    lam = np.linalg.eigvals(sample_matrix(EnsembleSpec("complex_gaussian", N), RngStream(seed, 0)))
    d = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(d, np.inf)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    rest = [k for k in range(N) if k not in (i, j)]
    return lam[[i, j] + rest]


def chain_offdiag_mc(spectrum, trials: int, seed: int, batch: int = 10000) -> dict:
    vals = []
    for k in range(math.ceil(trials / batch)):
        m = min(batch, trials - k * batch)
        _, o12, _ = chain_overlaps_batch(spectrum, RngStream(seed, k), m)
        vals.append(o12)
    o12 = np.concatenate(vals)
    ref = quenched_offdiag_expectation(spectrum)
    return {"mean": complex(o12.mean()), "stderr": float(np.std(o12) / math.sqrt(o12.size)),
            "expected": ref, "rel": abs(o12.mean() - ref) / abs(ref), "samples": o12}


def run_offdiag_mean(n=10, trials=100000, seed=1, **_) -> ExperimentResult:
    res = ExperimentResult("offdiag-mean")
    lam = fixed_spectrum(n, seed)
    mc = chain_offdiag_mc(lam, trials, seed + 1)
    res.checks.append(Check(f"chain_O12_mean_N{n}", mc["rel"], "< 5%", mc["rel"] < 0.05))
    big = 500
    z2 = 2.0 / math.sqrt(big)
    exact = F.mean_offdiag_exact_origin(big, z2)
    asym = F.mean_offdiag_asymptotic(big, 0.0, z2).real
    rel = abs(exact / asym - 1.0)
    res.checks.append(Check("offdiag_exact_vs_asymptotic_N500_w2", rel, "< 1%", rel < 0.01))
    omega = math.sqrt(n) * abs(lam[0] - lam[1])
    s = mc["samples"]
    res.tables["pair"] = [{"omega_lo": omega, "omega_hi": omega, "n": s.size, "reO12": float(s.real.mean()),
                           "imO12": float(s.imag.mean()), "absO12sq": float(np.mean(np.abs(s) ** 2)),
                           "O11O22": float("nan")}]
    w = np.linspace(0.1, 4.0, 80)
    curve = np.column_stack([w, [F.mean_offdiag_exact_origin(big, x / math.sqrt(big)) for x in w],
                             [F.mean_offdiag_asymptotic(big, 0.0, x / math.sqrt(big)).real for x in w]])
    res.figures["offdiag_mean"] = (curve, {"columns": ["omega", "exact_origin", "asymptotic"], "N": big,
                                           "description": "E(O12 | 0, omega/sqrt(N))"})
    res.summary = {"mc_mean": [mc["mean"].real, mc["mean"].imag], "expected": [mc["expected"].real, mc["expected"].imag],
                   "stderr": mc["stderr"], "spectrum_omega": omega}
    return res


def second_moment_checks() -> list[Check]:
    out = []
    for delta in (1.0, 4.0):
        z = math.sqrt(delta / 3.0)
        ref = smallN_second_moment_oracle(3, z)
        got = F.second_moment_exact_origin(3, z)
        rel = max(abs(g / r - 1.0) for g, r in zip(got, ref))
        out.append(Check(f"second_moment_closed_vs_oracle_N3_delta{delta:g}", rel, "< 1e-6", rel < 1e-6))
    N = 10000
    z2 = 2.0 / math.sqrt(N)
    exact = F.second_moment_exact_origin(N, z2)
    asym = F.second_moment_asymptotic(N, 0.0, z2)
    rel = max(abs(e / a - 1.0) for e, a in zip(exact, asym))
    out.append(Check("second_moment_exact_vs_asymptotic_N1e4_w2", rel, "< 2%", rel < 0.02))
    return out


def run_second_moments(n=8, trials=100000, seed=1, **_) -> ExperimentResult:
    res = ExperimentResult("second-moments")
    res.checks.extend(second_moment_checks())
    lam = fixed_spectrum(n, seed)
    off, dia = [], []
    for k in range(math.ceil(trials / 10000)):
        m = min(10000, trials - k * 10000)
        o11, o12, o22 = chain_overlaps_batch(lam, RngStream(seed + 1, k), m)
        off.append(np.abs(o12) ** 2)
        dia.append(o11 * o22)
    e_off, e_dia = quenched_second_moments(lam)
    m_off, m_dia = float(np.mean(np.concatenate(off))), float(np.mean(np.concatenate(dia)))
    rel = max(abs(m_off / e_off - 1), abs(m_dia / e_dia - 1))
    res.checks.append(Check(f"quenched_second_moments_mc_N{n}", rel, "< 5%", rel < 0.05))
    N = 10000
    w = np.linspace(0.2, 4.0, 39)
    rows = []
    for x in w:
        ex = F.second_moment_exact_origin(N, x / math.sqrt(N))
        asym = F.second_moment_asymptotic(N, 0.0, x / math.sqrt(N))
        rows.append([x, ex[0], ex[1], asym[0], asym[1]])
    res.figures["second_moments"] = (np.array(rows), {"columns": ["omega", "E|O12|^2", "E O11O22",
                                                                  "asym E|O12|^2", "asym E O11O22"], "N": N})
    res.summary = {"mc": [m_off, m_dia], "quenched": [e_off, e_dia]}
    return res


# ---------------------------------------------------------------------------
# Oracle suite and invariants


def oracle_suite() -> list[Check]:
    checks = []
    ak = verify_ak_closed_forms(50, (0.1, 1.0, 5.0, 20.0))
    for fam, err in ak.items():
        checks.append(Check(f"ak_{fam}_k50", err, "< 1e-10", err < 1e-10))
    worst_u = 0.0
    worst_rec = 0.0
    worst_g = 0.0
    for a in np.linspace(1.05, 50.0, 25):
        delta = a - 1.0 / a
        g = [F.g_closed_form(k, a, delta) for k in range(101)]
        for k in range(2, 101):
            m1, m2 = F.g_recurrence_coefficients(k, a, delta)
            worst_rec = max(worst_rec, abs(g[k] - (m1 * g[k - 1] - m2 * g[k - 2])) / abs(g[k]))
            u = F.u_k(k, a)
            worst_u = max(worst_u, abs(u - (m1 * F.u_k(k - 1, a) - m2 * F.u_k(k - 2, a))) / abs(u))
    for delta in (0.1, 1.0, 5.0, 20.0):
        geo = F.PairGeometry.from_delta(delta)
        g = F.g_recurrence(60, geo.a, delta)
        for k in range(61):
            worst_g = max(worst_g, abs(g[k] - F.g_closed_form(k, geo.a, delta)) / abs(g[k]))
    checks.append(Check("u_k_recurrence", worst_u, "< 1e-10", worst_u < 1e-10))
    checks.append(Check("g_k_closed_form_recurrence", worst_rec, "< 1e-10", worst_rec < 1e-10))
    checks.append(Check("g_k_iteration_vs_closed", worst_g, "< 1e-8", worst_g < 1e-8))
    v1 = integral_log_difference(0.5)
    e1 = abs(v1 - math.log(0.75))
    checks.append(Check("disk_integral_log_difference", e1, "< 1e-6", e1 < 1e-6))
    l1, l2 = 0.3, 0.5j
    v2 = integral_pair_reference(l1, l2)
    e2 = abs(v2 - np.log((1 - l1 * np.conj(l2)) / abs(l1 - l2) ** 2))
    checks.append(Check("disk_integral_pair_log", e2, "< 1e-6", e2 < 1e-6))
    kt = kernel_trace(5)
    checks.append(Check("kernel_trace_N5", abs(kt - 5.0), "< 1e-6", abs(kt - 5.0) < 1e-6))
    return checks


def run_verify(**_) -> ExperimentResult:
    res = ExperimentResult("verify")
    res.checks.extend(oracle_suite())
    res.checks.extend(second_moment_checks())
    res.summary = {c.name: {"value": c.value, "pass": c.passed} for c in res.checks}
    return res


def invariance_suite(N: int = 30, draws: int = 50, seed: int = 8) -> dict:
    """Worst deviations of the row-sum, rescaling and unitary-invariance identities."""
    rows = resc = unit = 0.0
    for k in range(draws):
        stream = RngStream(seed, k)
        G = sample_matrix(EnsembleSpec("complex_gaussian", N), stream)
        es = eigendecompose(G)
        O = overlaps(es.X, es.Y)
        scale = np.abs(O).max()
        rows = max(rows, float(np.max(np.abs(O.sum(axis=1) - 1.0)) / scale))
        c = np.exp(1j * stream.generator.uniform(0, 2 * np.pi, N)) * stream.generator.uniform(0.1, 10, N)
        O2 = overlaps(es.X * c[None, :], es.Y / c[:, None])
        resc = max(resc, float(np.max(np.abs(O2 - O)) / scale))
        Z = stream.generator.standard_normal((N, N)) + 1j * stream.generator.standard_normal((N, N))
        Q, R = np.linalg.qr(Z)
        Q = Q * (np.diagonal(R) / np.abs(np.diagonal(R)))[None, :]
        es2 = eigendecompose(Q @ G @ Q.conj().T)
        perm = [int(np.argmin(np.abs(es2.eigenvalues - l))) for l in es.eigenvalues]
        O3 = overlaps(es2.X, es2.Y)[np.ix_(perm, perm)]
        unit = max(unit, float(np.max(np.abs(O3 - O) / np.abs(O))))
    return {"row_sums": rows, "rescaling": resc, "unitary": unit}


# ---------------------------------------------------------------------------
# Dynamics


def _bracket_trial(N: int, dt: float, steps: int, stream: RngStream) -> dict:
    cfg = FlowConfig(N, dt, steps)
    G0 = sample_matrix(EnsembleSpec("complex_gaussian", N), stream.child(0))
    path = track_eigenvalue_paths(iter_ou(G0, cfg, stream.child(1)), dt)
    b = empirical_brackets(path, dt)
    return {"conj": float(np.real(np.trace(b.realized))), "pred": float(np.real(np.trace(b.predicted))),
            "nonconj": float(np.sum(np.abs(np.diagonal(b.realized_nonconj)))), "steps": b.steps,
            "offdiag_real": b.realized[0, 1], "offdiag_pred": b.predicted[0, 1],
            "path": path if stream.stream_index == 0 else None}


def bracket_check(N: int, dt: float, steps: int, paths: int, seed: int, workers: int = 1) -> dict:
    out, ranges = map_trials(partial(_bracket_trial, N, dt, steps), paths, seed, workers)
    conj = sum(o["conj"] for o in out)
    pred = sum(o["pred"] for o in out)
    nonconj = sum(o["nonconj"] for o in out)
    return {"diag_ratio": conj / pred, "nonconj_fraction": nonconj / conj, "ranges": ranges,
            "steps_used": [o["steps"] for o in out], "first_path": out[0]["path"]}


def _msd_trial(N: int, t: float, steps: int, stream: RngStream):
    cfg = FlowConfig(N, t / steps, steps, method="exact")
    G0 = sample_matrix(EnsembleSpec("complex_gaussian", N), stream.child(0))
    return track_eigenvalue_paths(iter_ou(G0, cfg, stream.child(1)), cfg.dt, store="none")


def msd_check(N: int, t: float, paths: int, seed: int, workers: int = 1, steps: int = 50,
              center=0.0, radius: float = 1.0) -> dict:
    out, ranges = map_trials(partial(_msd_trial, N, t, steps), paths, seed, workers)
    emp, pred = diffusive_msd(out, center, radius, steps)
    cross = neighbour_cross_ratio(out, center, radius, steps)
    return {"empirical": emp, "predicted": pred, "ratio": emp / pred, "ranges": ranges, "cross_ratio": cross,
            "ambiguous_steps": int(sum((~p.matched).sum() for p in out))}


def run_dynamics(n=20, dt=1e-5, steps=2000, paths=20, seed=1, workers=1, t=0.01, **_) -> ExperimentResult:
    res = ExperimentResult("dynamics")
    b = bracket_check(n, dt, steps, paths, seed, workers)
    res.trial_ranges = b["ranges"]
    res.checks.append(Check(f"bracket_diag_ratio_N{n}", b["diag_ratio"], "within 10%", abs(b["diag_ratio"] - 1) < 0.1))
    res.checks.append(Check("bracket_nonconj_fraction", b["nonconj_fraction"], "< 10%", b["nonconj_fraction"] < 0.1))
    m = msd_check(n, t, paths, seed + 1, workers)
    res.checks.append(Check(f"msd_ratio_N{n}_t{t:g}", m["ratio"], "within 20%", abs(m["ratio"] - 1) < 0.2))
    path = b["first_path"]
    rows = []
    for s in range(0, path.eigenvalues.shape[0], max(1, path.eigenvalues.shape[0] // 200)):
        for k in range(n):
            lam = path.eigenvalues[s, k]
            rows.append({"t": float(path.times[s]), "k": k, "re": float(lam.real), "im": float(lam.imag),
                         "O_kk": float(np.real(path.overlaps[s, k, k]))})
    res.tables["paths"] = rows
    res.summary = {"bracket_diag_ratio": b["diag_ratio"], "nonconj_fraction": b["nonconj_fraction"],
                   "steps_used": b["steps_used"], "msd_empirical": m["empirical"], "msd_predicted": m["predicted"],
                   "msd_ambiguous_steps": m["ambiguous_steps"]}
    return res


# ---------------------------------------------------------------------------
# Angles


def _angle_trial(N: int, lo: float, hi: float, stream: RngStream) -> tuple:
    m = decomposed_matrix("complex_gaussian", N, stream, full=True)
    a, w = microscopic_pair_angles(m["eigenvalues"], m["X"], N, lo, hi)
    return a, w, m["rejections"]


def angle_pair_samples(N: int, pairs: int, seed: int, lo: float = 1.0, hi: float = 2.0, batch: int = 10):
    angles, omegas, rej, k = [], [], 0, 0
    count = 0
    while count < pairs:
        out, _ = map_trials(partial(_angle_trial, N, lo, hi), batch, seed + 7919 * k)
        for a, w, r in out:
            angles.append(a)
            omegas.append(w)
            rej += r
            count += a.size
        k += 1
    a = np.concatenate(angles)[:pairs]
    w = np.concatenate(omegas)[:pairs]
    return a, w, rej


def run_angles(n=100, trials=10000, seed=1, omega_min=1.0, omega_max=2.0, **_) -> ExperimentResult:
    res = ExperimentResult("angles")
    a, w, rej = angle_pair_samples(n, trials, seed, omega_min, omega_max)
    res.rejections = rej
    rep = angle_distribution_test(a, n, w, threshold=0.05)
    res.checks.append(Check(f"angle_pair_ks_N{n}", rep.distance, "< 0.05", rep.passed))
    s = sample_angle_at_origin(1000, RngStream(seed + 1, 0), 100000)
    rep0 = angle_distribution_test(s, 1000, mode="origin", threshold=0.02)
    res.checks.append(Check("angle_origin_ks_N1000", rep0.distance, "< 0.02", rep0.passed))
    res.tables["angles"] = [{"omega": f"[{omega_min},{omega_max}]", "n": rep.n, "ks": rep.distance, "pass": rep.passed},
                            {"omega": "origin", "n": rep0.n, "ks": rep0.distance, "pass": rep0.passed}]
    t = np.linspace(0.02, 6.0, 120)
    hist, _ = np.histogram(s, bins=np.append(t - 0.025, t[-1] + 0.025))
    res.figures["angle_origin"] = (np.column_stack([t, hist / (s.size * 0.05), F.angle_limit_density(t)]),
                                   {"columns": ["t", "empirical_density", "limit_density"], "N": 1000})
    return res


# ---------------------------------------------------------------------------
# Pseudospectrum, universality, extremes


def pseudospectrum_check(N: int, matrices: int, seed: int, radius: float = 0.3, eps: float = 1e-6,
                         workers: int = 1, mats=None) -> dict:
    if mats is None:
        mats, _ = diag_matrices("complex_gaussian", N, matrices, seed, workers)
    ball = Ball(0.0, radius)
    emp = [pseudospectrum_volume(m["eigenvalues"], m["diag"], ball, eps)[0] for m in mats[:matrices]]
    pred = F.pseudospectrum_prediction(N, 0.0, radius, eps)
    return {"ratio": float(np.mean(emp) / pred), "per_matrix": np.array(emp) / pred}


def run_pseudospectrum(n=500, trials=50, seed=1, workers=1, radius=0.3, eps=1e-6, **_) -> ExperimentResult:
    res = ExperimentResult("pseudospectrum")
    mats, ranges = diag_matrices("complex_gaussian", n, trials, seed, workers)
    res.trial_ranges = ranges
    res.rejections = sum(m["rejections"] for m in mats)
    p = pseudospectrum_check(n, trials, seed, radius, eps, mats=mats)
    res.checks.append(Check(f"pseudospectrum_ratio_N{n}", p["ratio"], "in [0.9, 1.1]", 0.9 <= p["ratio"] <= 1.1))
    res.figures["pseudospectrum"] = (np.column_stack([np.arange(trials), p["per_matrix"]]),
                                     {"columns": ["matrix", "empirical_over_predicted"], "N": n, "radius": radius,
                                      "eps": eps})
    res.summary = {"ratio": p["ratio"]}
    return res


UNIVERSALITY_THRESHOLDS = {"complex_gaussian": 0.02, "complex_bernoulli": 0.05, "complex_uniform_disk": 0.05}


def universality_check(kind: str, N: int, matrices: int, seed: int, bulk_radius: float = 0.8,
                       workers: int = 1) -> dict:
    mats, ranges = diag_matrices(kind, N, matrices, seed, workers)
    vals = []
    for m in mats:
        lam = m["eigenvalues"]
        mask = np.abs(lam) < bulk_radius
        vals.append(m["diag"][mask] / (N * (1 - np.abs(lam[mask]) ** 2)))
    v = np.concatenate(vals)
    return {"ks": ks_distance(v, F.inv_gamma2_cdf), "n": v.size, "ranges": ranges, "samples": v,
            "rejections": sum(m["rejections"] for m in mats)}


def run_universality(n=200, trials=50, seed=1, workers=1, bulk_radius=0.8, ensemble=None, **_) -> ExperimentResult:
    res = ExperimentResult("universality")
    kinds = list(UNIVERSALITY_THRESHOLDS) if ensemble is None else [ensemble]
    rows = []
    t = np.linspace(0.05, 5.0, 100)
    for idx, kind in enumerate(kinds):
        thr = UNIVERSALITY_THRESHOLDS.get(kind, 0.05)
        u = universality_check(kind, n, trials, seed + idx, bulk_radius, workers)
        res.rejections += u["rejections"]
        res.trial_ranges = u["ranges"]
        res.checks.append(Check(f"universality_ks_{kind}_N{n}", u["ks"], f"< {thr}", u["ks"] < thr))
        rows.append(KSReport(f"universality_{kind}", u["n"], u["ks"], thr).row())
        v = u["samples"]
        hist, _ = np.histogram(v, bins=np.append(t - 0.025, t[-1] + 0.025))
        res.figures[f"universality_{kind}"] = (
            np.column_stack([t, hist / (v.size * 0.05), F.inv_gamma2_density(t)]),
            {"columns": ["t", "empirical_density", "inverse_gamma2_density"], "N": n, "matrices": trials,
             "ensemble": kind, "bulk_radius": bulk_radius,
             "description": "normalised diagonal overlaps O_ii / (N (1 - |lambda_i|^2)) of bulk eigenvalues"})
    res.tables["ks"] = rows
    return res


def extremes_check(N: int, trials: int, seed: int, eps: float = 0.2, bulk_radius: float = 0.8,
                   workers: int = 1, mats=None) -> dict:
    if mats is None:
        mats, _ = diag_matrices("complex_gaussian", N, trials, seed, workers)
    reports = [extremes_scan(m["eigenvalues"], m["diag"], bulk_radius, eps) for m in mats[:trials]]
    maxima = np.array([r.max_overlap for r in reports]) / N ** 1.5
    # Decorrelation: normalised overlaps of the eigenvalues nearest to two distant bulk points.
    a, b = [], []
    for m in mats[:trials]:
        lam = m["eigenvalues"]
        norm = m["diag"] / (N * (1 - np.abs(lam) ** 2))
        a.append(norm[np.argmin(np.abs(lam - 0.4))])
        b.append(norm[np.argmin(np.abs(lam + 0.4))])
    corr = float(np.corrcoef(np.log(a), np.log(b))[0, 1])
    return {"lower_violations": sum(r.lower_violated for r in reports),
            "upper_violations": sum(r.upper_violated for r in reports),
            "lower_bound": reports[0].lower_bound, "upper_bound": reports[0].upper_bound,
            "min_overlaps": np.array([r.min_overlap for r in reports]), "maxima": maxima,
            "frechet_ks": ks_distance(maxima, F.frechet_cdf), "log_corr_distant": corr}


def run_extremes(n=500, trials=100, seed=1, workers=1, eps=0.2, bulk_radius=0.8, **_) -> ExperimentResult:
    res = ExperimentResult("extremes")
    mats, ranges = diag_matrices("complex_gaussian", n, trials, seed, workers)
    res.trial_ranges = ranges
    e = extremes_check(n, trials, seed, eps, bulk_radius, mats=mats)
    lim = max(1, trials // 100)
    res.checks.append(Check(f"upper_bound_violations_N{n}", e["upper_violations"], f"<= {lim} of {trials}",
                            e["upper_violations"] <= lim))
    res.checks.append(Check(f"lower_bound_violations_N{n}", e["lower_violations"], f"<= {lim} of {trials}",
                            e["lower_violations"] <= lim))
    res.figures["extremes"] = (np.column_stack([np.arange(trials), e["min_overlaps"], e["maxima"]]),
                               {"columns": ["trial", "min_bulk_overlap", "max_bulk_overlap_over_N^1.5"], "N": n})
    res.summary = {k: v for k, v in e.items() if not isinstance(v, np.ndarray)}
    return res


# ---------------------------------------------------------------------------
# Formula tables


def run_formulas(n=500, **_) -> ExperimentResult:
    res = ExperimentResult("formulas")
    rows = []
    for r in np.linspace(0.0, 1.2, 25):
        row = {"N": n, "z": float(r), "mean_diag_exact": F.mean_diag_exact(n, r),
               "mean_diag_asymptotic": F.mean_diag_asymptotic(n, r)}
        if r > 0:
            row["mean_offdiag_exact_origin"] = F.mean_offdiag_exact_origin(n, r / math.sqrt(n))
            row["mean_offdiag_asymptotic"] = F.mean_offdiag_asymptotic(n, 0.0, r / math.sqrt(n)).real
            off, dia = F.second_moment_exact_origin(n, r / math.sqrt(n))
            row["second_moment_offdiag"] = off
            row["second_moment_diag"] = dia
        rows.append(row)
    res.tables["formulas"] = rows
    rel = exact_mean_agreement(n)
    res.checks.append(Check(f"mean_exact_vs_bulk_N{n}", rel, "< 1e-6" if n >= 500 else "info", rel < 1e-6 or n < 500))
    return res


EXPERIMENTS: dict[str, Callable[..., ExperimentResult]] = {
    "diag-distribution": run_diag_distribution,
    "offdiag-mean": run_offdiag_mean,
    "second-moments": run_second_moments,
    "pseudospectrum": run_pseudospectrum,
    "dynamics": run_dynamics,
    "angles": run_angles,
    "extremes": run_extremes,
    "formulas": run_formulas,
    "verify": run_verify,
    "universality": run_universality,
}
