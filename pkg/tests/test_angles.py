import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ginibre_overlaps.angles import (angle_distribution_test, eigenvector_angle, microscopic_pair_angles,
                                     pair_angles, phi_inverse, phi_map, sample_angle_at_origin)
from ginibre_overlaps.errors import InsufficientSamples
from ginibre_overlaps.experiments import angle_pair_samples
from ginibre_overlaps.rand_ensembles import EnsembleSpec, RngStream, sample_matrix
from ginibre_overlaps.spectral import eigendecompose

finite = st.floats(-50, 50, allow_nan=False)


def test_angle_bounds_and_identity():
    es = eigendecompose(sample_matrix(EnsembleSpec("complex_gaussian", 20), RngStream(1)))
    i, j = np.triu_indices(20, 1)
    a = pair_angles(es.X, i, j)
    assert np.all(np.abs(a) <= 1 + 1e-12)
    assert math.isclose(abs(eigenvector_angle(es.X, 3, 3)), 1.0, rel_tol=1e-12)
    assert np.isclose(pair_angles(es.X, np.array([4]), np.array([7]))[0], eigenvector_angle(es.X, 4, 7))


def test_orthogonal_columns():
    assert eigenvector_angle(np.eye(3, dtype=complex), 0, 2) == 0


@given(finite, finite)
def test_two_by_two_angle(re, im):
    b = complex(re, im)
    lam1, lam2 = 0.3 + 0.1j, -0.5j
    T = np.array([[lam1, b * (lam2 - lam1)], [0, lam2]])
    # second eigenvector of T is (b, 1) up to scale; first is e_1
    X = np.array([[1, b], [0, 1]], dtype=complex)
    assert np.allclose(T @ X, X @ np.diag([lam1, lam2]))
    a = eigenvector_angle(X, 0, 1)
    assert math.isclose(abs(a), abs(b) / math.sqrt(1 + abs(b) ** 2), abs_tol=1e-12)
    assert np.isclose(a, phi_map(b))


def test_phi_values():
    assert phi_map(0) == 0
    assert math.isclose(abs(phi_map(1.0)), 1 / math.sqrt(2))


@given(finite, finite)
def test_phi_roundtrip(re, im):
    z = complex(re, im)
    assert np.isclose(phi_inverse(phi_map(z)), z, rtol=1e-9, atol=1e-12)
    assert abs(phi_map(z)) < 1


@given(st.floats(0, 2 * math.pi))
def test_phase_invariance(theta):
    es = eigendecompose(sample_matrix(EnsembleSpec("complex_gaussian", 8), RngStream(2)))
    X2 = es.X * np.exp(1j * theta * np.arange(8))
    assert math.isclose(abs(eigenvector_angle(X2, 1, 5)), abs(eigenvector_angle(es.X, 1, 5)), rel_tol=1e-10)


def test_self_consistency_ks():
    gen = np.random.default_rng(3)
    n = 5000
    omega = gen.uniform(1, 2, n)
    X = (gen.standard_normal(n) + 1j * gen.standard_normal(n)) / math.sqrt(2)
    rep = angle_distribution_test(phi_map(X / omega), 100, omega, threshold=1.63 / math.sqrt(n))
    assert rep.passed


def test_origin_finite_N_law():
    s = sample_angle_at_origin(50, RngStream(4), 20000)
    rep = angle_distribution_test(s, 50, mode="origin", finite_N=True, threshold=1.63 / math.sqrt(20000))
    assert rep.passed


def test_pair_small_run():
    a, w, _ = angle_pair_samples(60, 2000, 5)
    assert np.all((w >= 1) & (w <= 2))
    assert angle_distribution_test(a, 60, w, threshold=0.06).passed


def test_mesoscopic_concentration():
    N = 200
    es = eigendecompose(sample_matrix(EnsembleSpec("complex_gaussian", N), RngStream(6)))
    a, w = microscopic_pair_angles(es.eigenvalues, es.X, N, 9.0, 11.0, bulk_radius=0.9)
    assert a.size > 100
    assert np.median(np.abs(a)) < 0.15
    scaled = np.mean(np.abs(w * phi_inverse(a)) ** 2)
    assert 0.6 < scaled < 1.6


def test_insufficient_samples():
    with pytest.raises(InsufficientSamples):
        angle_distribution_test(np.zeros(10), 10, mode="origin")
    with pytest.raises(ValueError):
        angle_distribution_test(np.zeros(2000), 10)
    with pytest.raises(ValueError):
        angle_distribution_test(np.zeros(2000), 10, mode="bogus")
