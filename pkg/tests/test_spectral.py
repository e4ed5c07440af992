import numpy as np
import pytest
from hypothesis import given, strategies as st

from ginibre_overlaps.errors import DegenerateSpectrum, NonConvergence
from ginibre_overlaps.rand_ensembles import EnsembleSpec, RngStream, sample_matrix
from ginibre_overlaps.spectral import (condition_numbers, diagonal_overlaps, eigendecompose, min_gap, overlaps,
                                       sample_overlaps)


def ginibre(N, seed):
    return sample_matrix(EnsembleSpec("complex_gaussian", N), RngStream(seed))


def test_diagonal_input():
    es = eigendecompose(np.diag([1.0, 2j]))
    assert set(np.round(es.eigenvalues, 12)) == {1, 2j}
    assert np.allclose(np.abs(es.X), np.abs(es.X) @ np.eye(2))
    assert np.allclose(es.X @ es.Y, np.eye(2))
    assert np.allclose(overlaps(es.X, es.Y), np.eye(2))


def test_sorted_lexicographically():
    es = eigendecompose(ginibre(30, 1))
    lam = es.eigenvalues
    keys = list(zip(lam.real, lam.imag))
    assert keys == sorted(keys)


def test_jordan_like_rejected():
    with pytest.raises(DegenerateSpectrum):
        eigendecompose(np.array([[0.0, 1.0], [0.0, 1e-15]]))


def test_nonfinite_rejected():
    with pytest.raises(NonConvergence):
        eigendecompose(np.array([[np.nan, 0], [0, 1.0]]))
    with pytest.raises(ValueError):
        eigendecompose(np.ones((2, 3)))


def test_residual_small():
    G = ginibre(50, 2)
    es = eigendecompose(G)
    assert es.residual_bound < 1e-10 * np.linalg.norm(G, 2)
    assert np.isclose(es.spectrum.min_gap, min_gap(es.eigenvalues))


def test_one_by_one():
    es = eigendecompose(np.array([[0.7j]]))
    assert np.allclose(overlaps(es.X, es.Y), [[1.0]])
    assert min_gap([1.0]) == np.inf


def test_normal_matrix_overlaps_identity():
    Q, _ = np.linalg.qr(ginibre(8, 3))
    G = Q @ np.diag(np.arange(8) + 1j) @ Q.conj().T
    es = eigendecompose(G)
    assert np.allclose(overlaps(es.X, es.Y), np.eye(8), atol=1e-10)


def test_two_by_two_schur():
    for t, d in ((1.0, 1.0), (0.3 + 0.4j, 0.5j)):
        T = np.array([[0.2, t], [0, 0.2 - d]])
        es = eigendecompose(T)
        O = overlaps(es.X, es.Y)
        i = int(np.argmin(np.abs(es.eigenvalues - 0.2)))
        assert np.isclose(O[i, i].real, 1 + abs(t) ** 2 / abs(d) ** 2)
    es = eigendecompose(np.array([[0.0, 1.0], [0.0, -1.0]]))
    assert np.allclose(condition_numbers(overlaps(es.X, es.Y)), np.sqrt(2))


def test_condition_numbers_values():
    assert np.allclose(condition_numbers(np.diag([1.0, 4.0])), [1, 2])


@given(st.integers(2, 30), st.integers(0, 10 ** 6))
def test_row_sums_and_kappa(N, seed):
    es = eigendecompose(ginibre(N, seed))
    O = overlaps(es.X, es.Y)
    scale = np.abs(O).max(axis=1)
    assert np.all(np.abs(O.sum(axis=1) - 1) <= 1e-8 * scale)
    assert np.all(np.abs(O.sum(axis=0) - 1) <= 1e-8 * np.abs(O).max(axis=0))
    assert np.all(condition_numbers(O) >= 1 - 1e-10)
    assert np.allclose(np.diagonal(O).real, diagonal_overlaps(es.X, es.Y))
    assert np.allclose(O, O.conj().T)


@given(st.integers(2, 20), st.integers(0, 10 ** 6))
def test_rescaling_invariance(N, seed):
    es = eigendecompose(ginibre(N, seed))
    rng = np.random.default_rng(seed)
    c = (rng.uniform(0.1, 10, N)) * np.exp(1j * rng.uniform(0, 2 * np.pi, N))
    O1 = overlaps(es.X, es.Y)
    O2 = overlaps(es.X * c, es.Y / c[:, None])
    assert np.allclose(O1, O2, rtol=1e-12, atol=1e-12 * np.abs(O1).max())


@given(st.integers(2, 20), st.integers(0, 10 ** 6))
def test_unitary_invariance(N, seed):
    G = ginibre(N, seed)
    Z = ginibre(N, seed + 1)
    Q, R = np.linalg.qr(Z)
    es1 = eigendecompose(G)
    es2 = eigendecompose(Q.conj().T @ G @ Q)
    perm = [int(np.argmin(np.abs(es2.eigenvalues - l))) for l in es1.eigenvalues]
    O1 = overlaps(es1.X, es1.Y)
    O2 = overlaps(es2.X, es2.Y)[np.ix_(perm, perm)]
    assert np.all(np.abs(O2 - O1) <= 1e-6 * np.abs(O1))


def test_sample_overlaps():
    s = sample_overlaps(EnsembleSpec("complex_gaussian", 10), RngStream(0), full=True)
    assert s.full.shape == (10, 10) and np.allclose(np.diagonal(s.full).real, s.diag)
    t = sample_overlaps(EnsembleSpec("complex_gaussian", 10), RngStream(0))
    assert t.full is None and np.allclose(t.diag, s.diag)
