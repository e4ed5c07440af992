import math

import numpy as np
import pytest

from ginibre_overlaps.dynamics import (FlowConfig, ball_integral_one_minus_mod2, diffusive_msd, empirical_brackets,
                                       evolve_ou, iter_ou, match_eigenvalues, neighbour_cross_ratio,
                                       perturbative_drift, real_flow_drift_check, track_eigenvalue_paths,
                                       transpose_overlaps)
from ginibre_overlaps.errors import CollisionDetected, DecompositionFailed, InsufficientSteps
from ginibre_overlaps.rand_ensembles import EnsembleSpec, RngStream, sample_matrix
from ginibre_overlaps.spectral import eigendecompose, overlaps


def ginibre(N, seed, kind="complex_gaussian"):
    return sample_matrix(EnsembleSpec(kind, N), RngStream(seed))


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(5, 0.0, 10)
    with pytest.raises(ValueError):
        FlowConfig(5, 0.1, 10, kind="quaternion")
    with pytest.raises(ValueError):
        FlowConfig(5, 0.1, 10, method="rk4")
    with pytest.raises(ValueError):
        FlowConfig(5, 0.1, 10, noise_scale=-1)


def test_zero_noise_flow():
    G0 = ginibre(6, 1)
    dt, steps = 1e-3, 1000
    Gs = evolve_ou(G0, FlowConfig(6, dt, steps, noise_scale=0.0), RngStream(2))
    assert Gs.shape == (steps + 1, 6, 6)
    assert np.allclose(Gs[-1], math.exp(-dt * steps / 2) * G0, atol=dt)
    Ge = evolve_ou(G0, FlowConfig(6, dt, steps, method="exact", noise_scale=0.0), RngStream(2))
    assert np.allclose(Ge[-1], math.exp(-dt * steps / 2) * G0, atol=1e-12)


def test_one_step_variance():
    N, dt = 30, 0.01
    G1 = np.stack([evolve_ou(np.zeros((N, N)), FlowConfig(N, dt, 1), RngStream(3, k))[1] for k in range(50)])
    v = np.mean(np.abs(G1) ** 2)
    assert abs(v / (dt / N) - 1) < 0.03


def test_stationarity():
    N = 10
    var = np.zeros(11)
    count = 300
    for k in range(count):
        Gs = evolve_ou(ginibre(N, 100 + k), FlowConfig(N, 0.1, 10, method="exact"), RngStream(4, k))
        var += np.mean(np.abs(Gs) ** 2, axis=(1, 2))
    var /= count
    se = math.sqrt(1.0 / (count * N * N)) / N
    assert np.all(np.abs(var - 1 / N) < 4 * se)


def test_match_constant_and_swap():
    lam = np.array([0.0, 1.0, 2.0j])
    perm, ok = match_eigenvalues(lam, lam.copy())
    assert ok and np.array_equal(perm, [0, 1, 2])
    perm, ok = match_eigenvalues(lam, lam[[2, 0, 1]])
    assert ok and np.allclose(lam[[2, 0, 1]][perm], lam)
    prev = np.array([0.0, 0.1])
    new = np.array([0.05, 0.051])
    perm, ok = match_eigenvalues(prev, new)
    assert not ok and sorted(perm) == [0, 1]


def test_tracking_constant_sequence():
    G = ginibre(5, 5)
    path = track_eigenvalue_paths([G] * 4, 0.1)
    assert path.matched.all() and path.first_unmatched == 3
    assert np.allclose(np.diff(path.eigenvalues, axis=0), 0)
    assert path.overlaps.shape == (4, 5, 5)
    assert track_eigenvalue_paths([G] * 2, 0.1, store="diag").overlaps.shape == (2, 5)
    assert track_eigenvalue_paths([G] * 2, 0.1, store="none").overlaps is None


def test_tracking_failure():
    with pytest.raises(DecompositionFailed):
        track_eigenvalue_paths([np.array([[0.0, 1.0], [0.0, 1e-16]])], 0.1)


def test_small_dt_continuity():
    N, dt = 10, 1e-6
    G0 = ginibre(N, 6)
    path = track_eigenvalue_paths(iter_ou(G0, FlowConfig(N, dt, 200), RngStream(7)), dt)
    assert path.matched.all()
    disp = np.abs(np.diff(path.eigenvalues, axis=0))
    omax = np.max(np.real(np.diagonal(path.overlaps, axis1=1, axis2=2)), axis=1)[:-1]
    bound = 10 * np.sqrt(dt * omax / N)
    assert np.mean(np.all(disp < bound[:, None], axis=1)) >= 0.99


def test_truncation():
    path = track_eigenvalue_paths([ginibre(4, 8)] * 5, 0.1)
    path.matched[2] = False
    t = path.truncated()
    assert t.eigenvalues.shape[0] == 3 and t.matched.all()


def test_brackets_symmetry_and_deterministic():
    N, dt = 6, 1e-4
    G0 = ginibre(N, 9)
    path = track_eigenvalue_paths(iter_ou(G0, FlowConfig(N, dt, 150), RngStream(10)), dt)
    b = empirical_brackets(path, dt)
    assert np.array_equal(b.realized, b.realized.conj().T)
    det = track_eigenvalue_paths(iter_ou(G0, FlowConfig(N, dt, 150, noise_scale=0.0), RngStream(10)), dt)
    bd = empirical_brackets(det, dt)
    assert np.max(np.abs(bd.realized)) < 1e-20 and np.max(np.abs(bd.realized_nonconj)) < 1e-20
    with pytest.raises(InsufficientSteps):
        empirical_brackets(track_eigenvalue_paths([G0] * 20, dt), dt)


def test_brackets_small_run():
    N, dt = 8, 1e-5
    ratios = []
    for k in range(6):
        G0 = ginibre(N, 200 + k)
        path = track_eigenvalue_paths(iter_ou(G0, FlowConfig(N, dt, 600), RngStream(11, k)), dt)
        ratios.append(empirical_brackets(path, dt))
    conj = sum(np.trace(b.realized).real for b in ratios)
    pred = sum(np.trace(b.predicted).real for b in ratios)
    assert abs(conj / pred - 1) < 0.15


def _msd_paths(N, t, paths, seed, steps=20):
    out = []
    for k in range(paths):
        cfg = FlowConfig(N, t / steps, steps, method="exact")
        out.append(track_eigenvalue_paths(iter_ou(ginibre(N, seed + k), cfg, RngStream(seed, k)), cfg.dt,
                                          store="none"))
    return out


def test_msd_linear_and_edge_slower():
    N = 30
    paths = _msd_paths(N, 0.02, 60, 300)
    emp = [diffusive_msd(paths, 0.0, 0.9, s)[0] for s in (5, 10, 20)]
    t = np.array([0.005, 0.01, 0.02])
    slope = np.polyfit(t, emp, 1)
    assert abs(slope[1]) < 0.2 * emp[0]
    assert abs(emp[2] / emp[1] - 2) < 0.3
    centre = diffusive_msd(paths, 0.0, 0.3, 20)
    edge = diffusive_msd(paths, 0.8, 0.15, 20)
    assert ball_integral_one_minus_mod2(0.8, 0.15) / 0.15 ** 2 < ball_integral_one_minus_mod2(0.0, 0.3) / 0.3 ** 2
    slope_centre = centre[0] / (math.pi * 0.09)
    slope_edge = edge[0] / (math.pi * 0.15 ** 2)
    assert slope_edge < slope_centre
    assert -1.0 < neighbour_cross_ratio(paths, 0.0, 0.9, 20) < 0.0


def test_ball_integral_closed_form():
    assert math.isclose(ball_integral_one_minus_mod2(0.0, 1.0), 0.5)
    assert math.isclose(ball_integral_one_minus_mod2(0.5, 0.1), 0.01 * 0.75 - 0.0001 / 2)


def test_conjugate_pair_attraction():
    G = ginibre(8, 12, "real_gaussian")
    es = eigendecompose(G)
    lam = es.eigenvalues
    Ot = transpose_overlaps(es.X, es.Y)
    O = overlaps(es.X, es.Y)
    for k in np.flatnonzero(lam.imag > 1e-8):
        l = int(np.argmin(np.abs(lam - lam[k].conjugate())))
        assert np.isclose(Ot[k, l], O[k, k])
        assert (Ot[k, l] / (lam[k] - lam[l])).imag < 0


def test_real_flow():
    N, dt = 10, 1e-4
    zs = []
    for k in range(6):
        G0 = ginibre(N, 400 + k, "real_gaussian")
        cfg = FlowConfig(N, dt, 300, kind="real")
        path = track_eigenvalue_paths(iter_ou(G0, cfg, RngStream(13, k)), dt, store="vectors")
        counts = np.sum(np.abs(path.eigenvalues.imag) == 0, axis=1)
        assert np.all(np.diff(counts) % 2 == 0)
        rep = real_flow_drift_check(path, dt)
        assert rep.max_imag_increment_real < 1e-8
        zs.append(rep.residual_zscore[: rep.steps and N])
    assert np.mean(np.concatenate(zs)) < 1.5


def test_real_flow_requires_vectors():
    G0 = ginibre(4, 14, "real_gaussian")
    path = track_eigenvalue_paths([G0] * 3, 0.1)
    with pytest.raises(ValueError):
        real_flow_drift_check(path, 0.1)


def test_real_flow_collision_flag():
    G = np.array([[0.0, 1e-6], [-1e-6, 0.0]]) + np.diag([0.0, 0.0])
    G = np.array([[0.3, 1.0, 0.0], [-1e-6, 0.3, 0.0], [0.0, 0.0, -0.5]])
    path = track_eigenvalue_paths([G, G], 1e-2, store="vectors")
    rep = real_flow_drift_check(path, 1e-2)
    assert rep.collision_step == 0
    with pytest.raises(CollisionDetected):
        real_flow_drift_check(path, 1e-2, raise_on_collision=True)


def test_perturbative_drift_real_for_real_matrix():
    G = ginibre(7, 15, "real_gaussian")
    es = eigendecompose(G)
    d = perturbative_drift(es.X, es.Y, es.eigenvalues, 7)
    real = np.abs(es.eigenvalues.imag) == 0
    assert np.all(np.abs(d[real].imag) <= 1e-10 * np.abs(d[real]) + 1e-14)
