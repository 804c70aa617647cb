import math

import numpy as np
import pytest

from fflsim.datagen import gen_ridge_scenario
from fflsim.dpffl import (ClusterPartition, DpConfig, SecureAggregator, calibrate_noise,
                          cluster_models, partition_clusters, plan_L_theorem3, plan_tradeoff_prop9,
                          run_dpffl, secure_aggregate)
from fflsim.model import ConstantsCertificate, max_feature_sq_norm
from fflsim.oracle import vcg_payments_exact
from fflsim.rng import stream

CC = ConstantsCertificate(mu=0.1, l_g=1.0, l_ell=1.0, l_f=1.0)


def dp_config(sc, **kw):
    l_g = sc.loss.smoothness(max_feature_sq_norm(sc))
    base = dict(alpha=1.0, beta=0.01, num_clusters=sc.K, eta1=1 / l_g, eta2=1 / l_g, t1=80,
                t2=20, epsilon=0.1, seed=0, l_f=100.0)
    base.update(kw)
    return DpConfig(**base)


def test_noise_worked_example():
    cal = calibrate_noise(1.0, 10, 100, 80, 20, 0.1, 0.01)
    assert cal.sigma_sq == pytest.approx(16 * 280 * math.log(100) / (100 * 1e4 * 0.01), rel=1e-12)
    assert cal.sigma_sq == pytest.approx(2.0631, abs=5e-5)
    assert cal.sigma_p_sq == pytest.approx(7.3683, abs=5e-5)


def test_noise_vanishes_as_alpha_grows():
    cal = calibrate_noise(1.0, 10, 100, 80, 20, 1e9, 0.01)
    assert cal.sigma_sq < 1e-15 and cal.sigma_p_sq < 1e-15


def test_zcdp_budget_recovers_alpha():
    for alpha in (0.05, 0.7, 3.0):
        cal = calibrate_noise(2.0, 7, 55, 40, 9, alpha, 0.003)
        assert cal.alpha_approx == pytest.approx(alpha, rel=1e-12)
        assert cal.alpha_from_rho > alpha


def test_partition_eighteen_into_four():
    part = partition_clusters(18, 4, seed=0)
    assert sorted(len(c) for c in part.clusters) == [4, 4, 5, 5]
    assert sorted(k for c in part.clusters for k in c) == list(range(18))


def test_partition_degenerate():
    assert all(len(c) == 1 for c in partition_clusters(6, 6, 1).clusters)
    assert partition_clusters(6, 1, 1).clusters == (tuple(range(6)),)
    with pytest.raises(ValueError):
        partition_clusters(3, 4, 0)
    with pytest.raises(ValueError):
        ClusterPartition(((0, 1, 2), (3,)))


def test_partition_seeded():
    assert partition_clusters(20, 3, 5) == partition_clusters(20, 3, 5)
    assert partition_clusters(20, 3, 5) != partition_clusters(20, 3, 6)


def test_plan_L_examples():
    assert plan_L_theorem3(CC, 10, 0.5) == 10
    assert plan_L_theorem3(ConstantsCertificate(mu=1.0, l_g=1.0, l_ell=1.0, l_f=1.0), 101, 2.0) == 5
    assert plan_L_theorem3(CC, 10, 1e9) == 1


def test_secure_aggregate_noiseless():
    r = [np.array([1.0, 2.0]), np.array([3.0, -1.0])]
    assert np.allclose(secure_aggregate(r, [0.25, 0.75], 0.0, None), [2.5, -0.25])


def test_secure_aggregate_reproducible():
    r = [np.ones(3)]
    a = secure_aggregate(r, [1.0], 0.5, stream(4, "agg"))
    b = secure_aggregate(r, [1.0], 0.5, stream(4, "agg"))
    assert np.array_equal(a, b)


def test_secure_aggregate_noise_variance():
    sd = 1.7
    agg = SecureAggregator(sd, stream(9, "var"))
    draws = np.array([agg.aggregate([lambda: np.zeros(4)] * 3, [0.2, 0.3, 0.5]) for _ in range(10_000)])
    assert agg.draws == 10_000
    assert np.all(np.abs(draws.var(axis=0, ddof=1) / sd ** 2 - 1) < 0.05)


def test_noiseless_limit_matches_vcg():
    sc = gen_ridge_scenario(4, [20, 30, 40, 50], seed=2)
    run = run_dpffl(sc, None, dp_config(sc, alpha=1e12, t1=1500, t2=1500))
    assert np.allclose(run.payments, vcg_payments_exact(sc).payments, atol=1e-6)


def test_ten_agent_low_alpha_run_completes():
    sc = gen_ridge_scenario(10, 100, seed=4)
    run = run_dpffl(sc, None, dp_config(sc, alpha=0.1, l_f=50.0, clip=True))
    assert run.payments.shape == (10,) and np.all(np.isfinite(run.payments))
    assert len(cluster_models(run)) == 10
    assert run.noise["sigma"] > 0


def test_dp_run_deterministic_and_thread_safe():
    sc = gen_ridge_scenario(6, 30, seed=5)
    a = run_dpffl(sc, None, dp_config(sc, alpha=50.0, num_clusters=3, seed=11))
    b = run_dpffl(sc, None, dp_config(sc, alpha=50.0, num_clusters=3, seed=11, threads=3))
    c = run_dpffl(sc, None, dp_config(sc, alpha=50.0, num_clusters=3, seed=12))
    assert np.array_equal(a.payments, b.payments)
    assert not np.array_equal(a.payments, c.payments)


def test_dp_cluster_validation():
    sc = gen_ridge_scenario(4, 20, seed=0)
    with pytest.raises(ValueError, match="cluster complement empty"):
        run_dpffl(sc, None, dp_config(sc, num_clusters=1))
    with pytest.raises(ValueError):
        run_dpffl(sc, None, dp_config(sc, num_clusters=5))


def test_prop9_contraction_constant():
    assert plan_tradeoff_prop9(CC, 10, 100, 1.0, 0.01, 0.1, 0.1, 2).C == pytest.approx(0.91)


def test_prop9_plan_minimizes_bound():
    plan = plan_tradeoff_prop9(CC, 10, 100, 1.0, 0.01, 0.1, 0.1, 2)
    f = lambda t: plan.A * t + plan.B * plan.C ** t + 0.1
    assert f(plan.t_raw) == pytest.approx(plan.bound, rel=1e-12)
    grid = np.linspace(0, 5 * plan.t_raw, 2001)
    assert f(plan.t_raw) <= min(f(t) for t in grid) + 1e-12


def test_prop9_small_alpha_clamps():
    plan = plan_tradeoff_prop9(CC, 10, 100, 1e-6, 0.01, 0.1, 0.1, 2)
    assert plan.clamped and plan.t1 == plan.t2 == 0
    assert plan.bound == pytest.approx(plan.B + 0.1)


def test_prop9_bound_grows_as_alpha_shrinks():
    alphas = [0.01, 0.05, 0.2, 1.0, 5.0]
    bounds = [plan_tradeoff_prop9(CC, 10, 100, a, 0.01, 0.1, 0.1, 2).bound for a in alphas]
    assert all(x >= y for x, y in zip(bounds, bounds[1:]))


def test_prop9_scenario_two_direction():
    # eta2 / alpha^2 fixed while eta2 grows: bound does not increase
    alphas = np.linspace(0.2, 1.0, 9)
    eta2s = 0.1 * (alphas / alphas[-1]) ** 2
    bounds = [plan_tradeoff_prop9(CC, 10, 100, a, 0.01, e, 0.1, 2).bound for a, e in zip(alphas, eta2s)]
    assert all(x >= y - 1e-12 for x, y in zip(bounds, bounds[1:]))


def test_prop9_step_precondition():
    with pytest.raises(ValueError):
        plan_tradeoff_prop9(CC, 10, 100, 1.0, 0.01, 0.2, 0.1, 2)
