import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from ginibre_overlaps.errors import GapTooSmall
from ginibre_overlaps.formulas import PairGeometry
from ginibre_overlaps.rand_ensembles import EnsembleSpec, RngStream, sample_matrix, sample_schur_T
from ginibre_overlaps.schur_chain import (chain_overlaps, chain_overlaps_batch, chain_overlaps_from_T,
                                          diag_martingale_ratios, quenched_diag_expectation,
                                          quenched_diag_origin_samples, quenched_diag_sample,
                                          quenched_offdiag_expectation, quenched_second_moments,
                                          quenched_second_moments_direct)
from ginibre_overlaps.spectral import eigendecompose, overlaps


def spectrum(N, seed):
    return np.linalg.eigvals(sample_matrix(EnsembleSpec("complex_gaussian", N), RngStream(seed)))


def test_two_by_two_chain():
    T = np.array([[0.0, 0.3 - 0.4j], [0.0, 1.0]])
    o11, o12, o22 = chain_overlaps_from_T(T)
    assert np.isclose(o11, 1.25) and np.isclose(o12, -0.25) and np.isclose(o22, 1.25)


def test_two_routes_same_stream():
    lam = spectrum(12, 1)
    a = chain_overlaps(lam, RngStream(5))
    T = sample_schur_T(lam, RngStream(5))
    es = eigendecompose(T)
    O = overlaps(es.X, es.Y)
    i = int(np.argmin(np.abs(es.eigenvalues - lam[0])))
    j = int(np.argmin(np.abs(es.eigenvalues - lam[1])))
    for x, y in zip(a, (O[i, i], O[i, j], O[j, j])):
        assert abs(x - y) <= 1e-8 * abs(y)


def test_monotone_in_n():
    lam = spectrum(15, 2)
    T = sample_schur_T(lam, RngStream(3))
    vals = [chain_overlaps_from_T(T[:n, :n])[0] for n in range(2, 16)]
    assert np.all(np.diff(vals) >= -1e-12)


def test_gap_floor():
    with pytest.raises(GapTooSmall):
        chain_overlaps([0.0, 1e-14, 0.5], RngStream(0))


def test_quenched_diag_expectation_values():
    assert np.isclose(quenched_diag_expectation([0.0, 1.0]), 1.5)
    N, w = 2, 0.7
    assert np.isclose(quenched_diag_expectation([0.0, w / math.sqrt(N)]), 1 + 1 / w ** 2)
    assert np.isclose(quenched_diag_expectation([0.0, 1e8, 2e8j]), 1.0)


def test_quenched_diag_mc():
    lam = spectrum(20, 4)
    s = quenched_diag_sample(lam, RngStream(5), 200000)
    assert abs(np.mean(s) / quenched_diag_expectation(lam) - 1) < 0.05
    assert isinstance(quenched_diag_sample(lam, RngStream(6)), float)


def test_chain_diag_mean():
    lam = spectrum(10, 7)
    o11, _, _ = chain_overlaps_batch(lam, RngStream(8), 10000)
    assert abs(o11.mean() / quenched_diag_expectation(lam) - 1) < 0.05


def test_origin_product_law():
    N = 30
    s = quenched_diag_origin_samples(N, RngStream(9), 100000)
    assert stats.kstest(1 / s, stats.beta(2, N - 1).cdf).statistic < 0.01


def test_offdiag_expectation_values():
    N, z, w = 3, 0.4 + 0.1j, -0.2 + 0.5j
    assert np.isclose(quenched_offdiag_expectation([0.0, z]), -1 / (2 * abs(z) ** 2))
    expected = -1 / (N * abs(z) ** 2) * (1 + 1 / (N * (0 - w) * np.conj(z - w)))
    assert np.isclose(quenched_offdiag_expectation([0.0, z, w]), expected)


def test_chain_offdiag_mc():
    lam = spectrum(10, 10)
    _, o12, _ = chain_overlaps_batch(lam, RngStream(11), 100000)
    ref = quenched_offdiag_expectation(lam)
    assert abs(o12.mean() - ref) / abs(ref) < 0.05


def test_second_moments_two_points():
    for delta in (0.5, 2.0, 7.0):
        z = math.sqrt(delta / 2)
        off, dia = quenched_second_moments([0.0, z])
        assert np.isclose(off, 2 / delta ** 2) and np.isclose(dia, 1 + 2 / delta + 2 / delta ** 2)


def test_second_moments_mc():
    lam = spectrum(8, 12)
    o11, o12, o22 = chain_overlaps_batch(lam, RngStream(13), 100000)
    off, dia = quenched_second_moments(lam)
    assert abs(np.mean(np.abs(o12) ** 2) / off - 1) < 0.05
    assert abs(np.mean(o11 * o22) / dia - 1) < 0.05


@given(st.integers(3, 25), st.integers(0, 10 ** 6))
def test_second_moment_routes_and_cauchy_schwarz(N, seed):
    lam = spectrum(N, seed)
    off, dia = quenched_second_moments(lam)
    off2, dia2 = quenched_second_moments_direct(lam)
    assert np.isclose(off, off2, rtol=1e-8) and np.isclose(dia, dia2, rtol=1e-8)
    assert dia >= abs(quenched_offdiag_expectation(lam)) ** 2
    assert off >= abs(quenched_offdiag_expectation(lam)) ** 2


def test_martingale_ratios():
    lam = spectrum(12, 14)
    r = diag_martingale_ratios(lam, RngStream(15), 50000)
    m = r.mean(axis=0)
    se = r.std(axis=0) / math.sqrt(r.shape[0])
    assert np.all(np.abs(m - 1) < 4 * se + 1e-12)


@given(st.floats(-6, 6))
def test_pair_geometry(logd):
    delta = 10.0 ** logd
    g = PairGeometry.from_delta(delta)
    assert g.a >= 1
    assert abs(g.a * (-g.b) - 1) < 1e-12
    assert abs(g.a - 1 / g.a - delta) <= 1e-12 * max(1, delta)
    assert abs(g.a_minus_1 - (g.a - 1)) <= 1e-12 * g.a
