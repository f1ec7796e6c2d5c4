import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degeneig.assembly import assemble_system
from degeneig.eigen import SpectralCluster, cluster_eigenvalues
from degeneig.errors import (ClusterTrackingFailure, InvalidArgument, PreconditionViolation)
from degeneig.mesh import build_unit_square_mesh
from degeneig.perturbation import (PotentialField, first_order_rates, interaction_matrix,
                                   isolation_interval, lipschitz_check, openness_radius,
                                   product_potential, random_potential_pairs, simplify_spectrum,
                                   split_cluster, validate_openness)
from degeneig.weights import WeightSpec

# int u2^2 u3^2 for u2 = 2 sin(2 pi x) sin(pi y), u3 = 2 sin(pi x) sin(2 pi y): 16 (1/4)^2
CROSS_TERM = 1.0


@pytest.fixture(scope="module")
def lap16():
    s = assemble_system(build_unit_square_mesh(16), WeightSpec.constant())
    return s, s.solve(k=8)


def test_potential_field():
    p = PotentialField([1.0, -3.0, 2.0])
    assert p.sup_norm == 3.0
    assert (p - p).sup_norm == 0.0
    np.testing.assert_array_equal((p + 1.0).values, [2.0, -2.0, 3.0])
    with pytest.raises(InvalidArgument):
        PotentialField([1.0, np.inf])
    with pytest.raises(ValueError):
        p.values[0] = 5.0


def test_lipschitz_trivial_cases(corner16):
    s, _ = corner16
    rho = PotentialField(np.sin(5 * s.mesh.vertices[:, 0]))
    same = lipschitz_check(s, rho, rho, 6)
    np.testing.assert_array_equal(same.lambdas1, same.lambdas2)
    c = 3.75
    shift = lipschitz_check(s, rho, rho + c, 6)
    np.testing.assert_allclose(shift.lambdas2, shift.lambdas1 + c, rtol=1e-8)
    assert shift.passed


def test_lipschitz_random_pairs(corner16):
    s, _ = corner16
    pairs = random_potential_pairs(s.mesh, 6, np.random.default_rng(4), max_diff=10.0)
    for r1, r2 in pairs:
        assert (r1 - r2).sup_norm <= 10.0 + 1e-12
        assert lipschitz_check(s, r1, r2, 8).passed


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 31), scale=st.floats(0.01, 50.0))
def test_lipschitz_property(seed, scale):
    s = assemble_system(build_unit_square_mesh(8), WeightSpec.point(1.5))
    rng = np.random.default_rng(seed)
    r1 = PotentialField(scale * rng.uniform(-1, 1, s.mesh.nv))
    r2 = PotentialField(scale * rng.uniform(-1, 1, s.mesh.nv))
    assert lipschitz_check(s, r1, r2, 5).max_violation <= 0


def test_interaction_matrix(lap32):
    s, d = lap32
    c = cluster_eigenvalues(d)[1]
    np.testing.assert_allclose(interaction_matrix(s, d, c, 2.5), 2.5 * np.eye(2), atol=1e-12)
    sigma = product_potential(s, d, 1, 2)
    S = interaction_matrix(s, d, c, sigma)
    np.testing.assert_array_equal(S, S.T)
    np.testing.assert_allclose(S[0, 1], CROSS_TERM, rtol=0.01)
    np.testing.assert_allclose(np.diag(S), 0, atol=1e-10)
    with pytest.raises(InvalidArgument):
        interaction_matrix(s, d, SpectralCluster(7, 9, 0.0), sigma)


def test_isolation_interval(lap16):
    _, d = lap16
    cl = cluster_eigenvalues(d)
    lo, hi = isolation_interval(d.lambdas, cl[1], cl)
    assert d.lambdas[0] < lo < d.lambdas[1] and d.lambdas[2] < hi < d.lambdas[3]
    assert isolation_interval(d.lambdas, cl[0], cl)[0] == -np.inf
    with pytest.raises(ClusterTrackingFailure):
        isolation_interval(d.lambdas, cl[-1], cl)


def test_rates_constant_sigma(lap16):
    s, d = lap16
    c = cluster_eigenvalues(d)[1]
    r = first_order_rates(s, 0.0, c, 1.5, [0.2, 0.1], base=d)
    np.testing.assert_allclose(r.slopes_at_tau, 1.5, rtol=1e-8)
    assert r.exact and np.isnan(r.order_estimate)


def test_rates_degenerate_cluster(lap16):
    s, d = lap16
    c = cluster_eigenvalues(d)[1]
    sigma = product_potential(s, d, 1, 2)
    r = first_order_rates(s, 0.0, c, sigma, [0.4, 0.2, 0.1, 0.05], base=d)
    # distinct slopes symmetric about the mean diagonal entry
    assert r.predicted[0] < 0 < r.predicted[1]
    np.testing.assert_allclose(r.predicted.sum(), 0, atol=1e-10)
    np.testing.assert_allclose(r.errors[1:] / r.errors[:-1], 0.5, rtol=0.05)
    assert 0.8 <= r.order_estimate <= 1.2


def test_rates_arguments(lap16):
    s, d = lap16
    c = cluster_eigenvalues(d)[1]
    for taus in ([0.1, 0.2], [0.1, 1e-7], [], [0.1, 0.1]):
        with pytest.raises(InvalidArgument):
            first_order_rates(s, 0.0, c, 1.0, taus, base=d)
    with pytest.raises(InvalidArgument):
        first_order_rates(s, 0.0, SpectralCluster(1, 2, d.lambdas[1]), 1.0, [0.1], base=d)


def test_rates_tracking_failure(lap16):
    s, d = lap16
    c = cluster_eigenvalues(d)[1]
    # a shift larger than the window moves the whole cluster out of it
    with pytest.raises(ClusterTrackingFailure):
        first_order_rates(s, 0.0, c, 100.0, [1.0], base=d)


def test_split_cluster(lap16):
    s, d = lap16
    c = cluster_eigenvalues(d)[1]
    eps = 0.1
    rep = split_cluster(s, 0.0, c, eps, base=d)
    assert rep.perturbation_norm < eps
    np.testing.assert_allclose((rep.rho_after - PotentialField.zero(s.mesh)).sup_norm, rep.perturbation_norm)
    assert rep.gap_after > 1e-6 * d.lambdas[1]
    assert rep.count_in_window == 2
    np.testing.assert_allclose(rep.S_matrix, rep.S_matrix.T, atol=1e-12)
    # first-order prediction of the new gap
    np.testing.assert_allclose(rep.gap_after, rep.tau * np.ptp(rep.predicted_slopes), rtol=0.05)


def test_split_rejects_simple_cluster(lap16):
    s, d = lap16
    with pytest.raises(PreconditionViolation):
        split_cluster(s, 0.0, cluster_eigenvalues(d)[0], 0.1, base=d)
    with pytest.raises(InvalidArgument):
        split_cluster(s, 0.0, cluster_eigenvalues(d)[1], 0.0, base=d)


def test_simplify_already_simple(lap16):
    s, _ = lap16
    t = simplify_spectrum(s, 0.0, 1, 0.1)
    assert t.steps == [] and t.total_perturbation == 0
    np.testing.assert_array_equal(t.rho_final.values, 0)


def test_simplify_four(lap16):
    s, _ = lap16
    t = simplify_spectrum(s, 0.0, 4, 0.1)
    assert len(t.steps) == 1
    assert t.total_perturbation < 0.1
    assert (t.rho_final - t.rho_initial).sup_norm < 0.1
    lam = t.lambdas_final
    assert np.all(np.diff(lam) > 1e-6 * lam[:-1])


def test_simplify_straddling_cluster(lap16):
    # n = 2 cuts through {lambda2, lambda3}; the gap to lambda3 must open too
    s, _ = lap16
    t = simplify_spectrum(s, 0.0, 2, 0.1)
    assert len(t.steps) == 1 and t.min_gap_final > 1e-6 * t.lambdas_final[1]


def test_openness(lap16):
    s, d = lap16
    with pytest.raises(PreconditionViolation):
        openness_radius(d, 3)
    with pytest.raises(InvalidArgument):
        openness_radius(d, d.k)
    t = simplify_spectrum(s, 0.0, 3, 0.1)
    d2 = s.solve(t.rho_final.values, k=4)
    r = openness_radius(d2, 3)
    np.testing.assert_allclose(r, 0.5 * np.diff(d2.lambdas).min())
    shifted = s.solve(t.rho_final.values + (r - 1e-6), k=4)
    np.testing.assert_allclose(np.diff(shifted.lambdas), np.diff(d2.lambdas), atol=1e-9)
    rep = validate_openness(s, t.rho_final, 3, samples=6, seed=2)
    assert rep.passed and rep.violations == 0
    assert max(rep.sup_norms) < rep.radius
