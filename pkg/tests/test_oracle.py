import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ginibre_overlaps import formulas as F
from ginibre_overlaps.errors import ArgumentTooLarge, ToleranceNotReached
from ginibre_overlaps.oracle import (_disk_rule, andreief_moment_matrix, disk_integral, family_determinants,
                                     gaussian_grid, integral_log_difference, integral_pair_reference,
                                     kernel_trace, smallN_second_moment_oracle, tridiag_det,
                                     verify_ak_closed_forms)
from ginibre_overlaps.rand_ensembles import EnsembleSpec, RngStream, sample_matrix


def test_tridiag_small():
    assert tridiag_det(np.ones(4), np.zeros(3), np.zeros(3)) == 1.0
    assert math.isclose(tridiag_det([2.0, 5.0], [3.0], [7.0]), 2 * 5 - 3 * 7)
    assert tridiag_det([], [], []) == 1.0
    with pytest.raises(ValueError):
        tridiag_det([1.0, 2.0], [1.0, 1.0], [1.0])


@given(st.integers(1, 12), st.integers(0, 10 ** 6))
def test_tridiag_matches_dense(k, seed):
    rng = np.random.default_rng(seed)
    d, lo, up = rng.normal(size=k), rng.normal(size=k - 1), rng.normal(size=k - 1)
    A = np.diag(d) + np.diag(lo, -1) + np.diag(up, 1)
    ref = np.linalg.det(A)
    assert abs(tridiag_det(d, lo, up) - ref) <= 1e-12 * max(1.0, abs(ref)) * 10


def test_tridiag_long_chain_no_overflow():
    with pytest.raises(ArgumentTooLarge):
        tridiag_det(np.full(400, 10.0), np.zeros(399), np.zeros(399))
    assert tridiag_det(np.full(100, 10.0), np.zeros(99), np.zeros(99)) == pytest.approx(1e100, rel=1e-12)


def test_family_examples():
    a = family_determinants("cond1", 2.0, 10)
    assert math.isclose(a[10], F.exp_partial_sum(0, 10, 2.0), rel_tol=1e-10)
    x = 1.3
    assert math.isclose(family_determinants("meandiag", x, 1)[1], x + 2, rel_tol=1e-12)
    assert math.isclose(family_determinants("meandiag2", x, 1)[1], 1.5 + x / 2, rel_tol=1e-12)
    with pytest.raises(ValueError):
        family_determinants("nope", x, 2)


def test_all_families_closed_forms():
    report = verify_ak_closed_forms(50, (0.1, 1.0, 5.0, 20.0))
    assert set(report) == {"cond1", "meandiag", "meandiag2", "plus", "minus"}
    assert max(report.values()) < 1e-10


def test_disk_integrals():
    assert abs(disk_integral(lambda z: np.ones_like(z, dtype=float)) / math.pi - 1) < 1e-12
    val = integral_pair_reference(0.3, 0.5j)
    ref = np.log((1 - 0.3 * np.conj(0.5j)) / abs(0.3 - 0.5j) ** 2)
    assert abs(val - ref) < 1e-6
    assert abs(integral_log_difference(0.5) - math.log(0.75)) < 1e-6


def test_disk_rule_convergence_order():
    f = lambda z: np.exp(np.real(z)) * (1 + np.abs(z) ** 2)
    ref = disk_integral(f, tol=1e-14, max_level=8)
    errs = [abs(_disk_rule(f, 1.0, [], n) - ref) for n in (2, 4)]
    assert errs[1] <= errs[0] / 4


def test_disk_integral_tolerance_failure():
    with pytest.raises(ToleranceNotReached):
        disk_integral(lambda z: 1.0 / np.abs(z - 0.5) ** 1.9, tol=1e-15, max_level=1)


def test_grid_integrates_one_and_moments():
    g = gaussian_grid(3.0, 20, 24)
    assert abs(g.weights.sum() - 1) < 1e-10
    assert abs(np.sum(g.weights * np.abs(g.nodes) ** 4) - 2 / 9) < 1e-12


def test_kernel_trace():
    assert abs(kernel_trace(5) - 5) < 1e-6


@pytest.mark.parametrize("conditioning,z", [("none", 0.0), ("point", 0.4), ("pair", 0.7)])
def test_andreief_normalisation(conditioning, z):
    res = andreief_moment_matrix(lambda l: np.ones_like(l), 4, conditioning, z)
    assert abs(res.value - 1) < 1e-10


def test_andreief_kostlan_product():
    N = 4
    res = andreief_moment_matrix(lambda l: 1 + np.abs(l) ** 2, N)
    assert abs(res.value - np.prod([1 + k / N for k in range(1, N + 1)])) < 1e-6


def test_andreief_transfer_factor_matches_closed_form():
    N, delta = 3, 1.0
    z = math.sqrt(delta / N)
    geo = F.PairGeometry.from_delta(delta)

    def lam_plus(l):
        g1 = 1 / (N * np.abs(l) ** 2)
        g2 = 1 / (N * np.abs(z - l) ** 2)
        return (1 + g1) * (1 + g2) - g1 * g2 * geo.a

    res = andreief_moment_matrix(lam_plus, N, "pair", z)
    assert abs(res.value / F.d_k(1, geo.a, delta, geo.a_minus_1) - 1) < 1e-6


def test_andreief_against_monte_carlo():
    g = lambda l: 1 + np.real(l) + np.abs(l) ** 2
    ref = andreief_moment_matrix(g, 2).value
    vals = []
    for k in range(40000):
        lam = np.linalg.eigvals(sample_matrix(EnsembleSpec("complex_gaussian", 2), RngStream(31, k)))
        vals.append(np.prod(g(lam)))
    vals = np.array(vals)
    assert abs(vals.mean() - ref) < 4 * vals.std() / math.sqrt(vals.size)


def test_andreief_bad_args():
    with pytest.raises(ValueError):
        andreief_moment_matrix(lambda l: l, 7)
    with pytest.raises(ValueError):
        andreief_moment_matrix(lambda l: l, 3, "triple")


@pytest.mark.parametrize("N,delta", [(3, 1.0), (3, 4.0), (4, 1.0), (4, 4.0)])
def test_second_moment_oracle(N, delta):
    z = math.sqrt(delta / N)
    ref = smallN_second_moment_oracle(N, z)
    got = F.second_moment_exact_origin(N, z)
    assert all(abs(g / r - 1) < 1e-6 for g, r in zip(got, ref))


def test_second_moment_oracle_small_delta():
    z = math.sqrt(1e-3 / 3)
    ref = smallN_second_moment_oracle(3, z)
    got = F.second_moment_exact_origin(3, z)
    assert all(abs(g / r - 1) < 1e-4 for g, r in zip(got, ref))
    with pytest.raises(ValueError):
        smallN_second_moment_oracle(5, z)
