import math

import numpy as np
import pytest

from fflsim.bounds import (DistScenario, bound_cluster_rb, bound_corollary1, bound_dp_risk,
                           bound_federated_social, bound_local_social, bound_participation,
                           bound_phi, bound_prop1, bound_prop2, bound_prop3,
                           participation_slack, write_bound_reports)
from fflsim.datagen import TwoAgentRegressionSpec, sample_truncated_normal
from fflsim.dists import KnownDistribution, TruncNormal, l1_distance, mixture
from fflsim.model import ConstantsCertificate
from fflsim.rng import stream

CC = ConstantsCertificate(mu=0.1, l_g=1.0, l_ell=1.0, l_f=1.0)


def two_agent(mean, n1=50, n2=400):
    dists = TwoAgentRegressionSpec(mean=mean).distributions()
    n = np.array([n1, n2], dtype=float)
    return DistScenario(list(dists), n / n.sum(), n, d=1, reg=0.1)


def noise_dist(mean):
    return KnownDistribution(TruncNormal(mean, 2.0, -3.0, 3.0))


def test_l1_identical_is_zero():
    assert l1_distance(noise_dist(0.3), noise_dist(0.3)) == pytest.approx(0.0, abs=1e-12)


def test_l1_disjoint_supports_is_two():
    a = KnownDistribution(TruncNormal(0.0, 1.0, -1.0, 1.0), x_lo=0.0, x_hi=1.0)
    b = KnownDistribution(TruncNormal(0.0, 1.0, -1.0, 1.0), x_lo=2.0, x_hi=3.0)
    assert l1_distance(a, b) == pytest.approx(2.0, abs=1e-5)


def test_l1_matches_monte_carlo():
    p, q = noise_dist(0.1), noise_dist(0.0)
    # E_p |1 - q/p| over draws from p; the x marginal cancels
    k = sample_truncated_normal(0.1, 2.0, -3.0, 3.0, stream(0, "l1mc"), size=10_000_000)
    mc = float(np.mean(np.abs(1 - q.noise.pdf(k) / p.noise.pdf(k))))
    exact = l1_distance(p, q)
    assert exact > 0
    assert abs(exact - mc) < 1e-3


def test_l1_general_path_agrees_with_residual_path():
    p, q = noise_dist(1.0), noise_dist(0.0)
    shifted = KnownDistribution(TruncNormal(0.0, 2.0, -3.0, 3.0), intercept=1.0 + 1e-12)
    # a tiny intercept change forces the nested quadrature
    assert l1_distance(p, shifted) == pytest.approx(l1_distance(p, q), abs=1e-4)


def test_prop1_weight_reduction():
    n = np.array([50, 400, 120])
    p = n / n.sum()
    fac = CC.l_ell ** 2 * 1 * math.log(2 / 0.01) / (4 * CC.mu)
    assert bound_prop1(CC, p, n, 1, 0.01).value == pytest.approx(fac / n.sum(), rel=1e-12)


def test_prop1_worked_value():
    v = bound_prop1(CC, [50 / 450, 400 / 450], [50, 400], 1, 0.01).value
    assert v == pytest.approx(math.log(200) / (0.4 * 450), rel=1e-12)
    assert v == pytest.approx(0.02944, abs=5e-6)


def test_prop1_single_agent_is_corollary():
    assert bound_prop1(CC, [1.0], [75], 2, 0.05).value == pytest.approx(
        bound_corollary1(CC, 75, 2, 0.05).value, rel=1e-14)


def test_prop2_equal_distributions():
    s = two_agent(0.0)
    assert bound_prop2(CC, s, 0, 0.01).value == pytest.approx(
        bound_prop1(CC, s.weights, s.sample_counts, 1, 0.01).value, abs=1e-12)


def test_prop2_grows_with_heterogeneity():
    assert bound_prop2(CC, two_agent(2.0), 0, 0.01).value > bound_prop2(CC, two_agent(0.1), 0, 0.01).value


def test_prop3_limits():
    s = two_agent(2.0)
    assert bound_prop3(CC, s, 0, 1.0, 0.01).value == bound_prop2(CC, s, 0, 0.01).value
    assert bound_prop3(CC, s, 0, 1e6, 0.01).value == pytest.approx(
        bound_corollary1(CC, 50, 1, 0.01).value, abs=1e-3)


def test_prop3_small_heterogeneity_prefers_gamma_above_one():
    s = two_agent(0.1)
    grid = np.arange(0.25, 8.01, 0.25)
    vals = [bound_prop3(CC, s, 0, g, 0.01).value for g in grid]
    best = grid[int(np.argmin(vals))]
    assert 1.0 < best <= 3.0


def test_cluster_bound_specializations():
    s = two_agent(2.0)
    sing = bound_cluster_rb(CC, s, [[0], [1]], 0.01).value
    assert sing == pytest.approx(bound_local_social(CC, s, 0.01).value, rel=1e-12)
    whole = bound_cluster_rb(CC, s, [[0, 1]], 0.01).value
    assert whole == pytest.approx(bound_federated_social(CC, s, 0.01).value, rel=1e-12)


def test_local_vs_federated_gap_identical_agents():
    K, m, d, delta = 4, 30, 1, 0.01
    dist = noise_dist(0.0)
    s = DistScenario([dist] * K, np.full(K, 1 / K), np.full(K, m), d=d, reg=0.1)
    fed = bound_federated_social(CC, s, delta)
    gap = bound_local_social(CC, s, delta).value - fed.value
    n = K * m
    assert gap == pytest.approx((K - 1) * d * math.log(2 * K * d / delta) / (4 * CC.mu * n), rel=1e-12)
    assert fed.parts["distance"] == pytest.approx(0.0, abs=1e-12)


def test_participation_identical_two_agents():
    s = DistScenario([noise_dist(0.0)] * 2, np.array([0.5, 0.5]), np.array([100, 100]), d=1, reg=0.1)
    rb_l, rb_f = bound_participation(CC, s, 0, 0.01)
    assert rb_f.note == "approximate per paper"
    slack = participation_slack(CC, 0.1, 2, 200, 1.0)
    assert rb_f.value <= rb_l.value + slack


def test_participation_single_agent_is_corollary():
    s = DistScenario([noise_dist(0.0)], np.array([1.0]), np.array([80]), d=1, reg=0.1)
    _, rb_f = bound_participation(CC, s, 0, 0.01)
    assert rb_f.value == pytest.approx(bound_corollary1(CC, 80, 1, 0.01).value, abs=1e-10)


def test_participation_heterogeneous_regime():
    rb_l, rb_f = bound_participation(CC, two_agent(2.0), 0, 0.01)
    assert rb_l.value < rb_f.parts["distance"]


def test_phi_limits():
    big = bound_phi(CC, [0.5, 0.5], [100, 100], 1, 0.01, 10_000, 1.0, epsilon=0.1)
    assert big.parts["optimization"] < 1e-200
    assert big.value == pytest.approx(big.parts["estimation"])
    assert big.parts["epsilon_tilde"] == pytest.approx(0.2 + 2 * big.value)
    a = bound_phi(CC, [1.0], [10], 1, 0.01, 20, 1.0).parts["optimization"]
    b = bound_phi(CC, [1.0], [10], 1, 0.01, 40, 1.0).parts["optimization"]
    geo = 2 * CC.l_g / CC.mu
    assert b / geo == pytest.approx((a / geo) ** 2, rel=1e-12)


def test_dp_risk_terms():
    K, n = 5, np.array([100, 120, 90, 100, 150])
    rep = bound_dp_risk(CC, K, 90, 1.0, 0.01, 2, 0.01, n)
    assert rep.note == "up to unspecified constant"
    prop1 = bound_prop1(CC, np.full(K, 1 / K), n, 2, 0.01).value
    assert rep.parts["estimation"] == pytest.approx(2 * prop1, rel=1e-12)
    assert bound_dp_risk(CC, K, 90, 1e9, 0.01, 2, 0.01, n).parts["privacy"] < 1e-15
    r = bound_dp_risk(CC, K, 180, 1.0, 0.01, 2, 0.01, n).parts["privacy"] / rep.parts["privacy"]
    assert r == pytest.approx(0.25 * math.log(K * 180) / math.log(K * 90))


def test_bound_validation():
    with pytest.raises(ValueError):
        bound_prop1(CC, [1.0], [10], 1, 1.5)
    with pytest.raises(ValueError):
        bound_prop3(CC, two_agent(0.1), 0, 0.0, 0.01)
    with pytest.raises(ValueError):
        mixture([0.0, 0.0], [noise_dist(0.0)] * 2)


def test_write_bound_reports(tmp_path):
    reps = [bound_prop1(CC, [1.0], [10], 1, 0.01), bound_corollary1(CC, 10, 1, 0.01)]
    write_bound_reports(reps, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "bound,inputs,value,note" and len(lines) == 3
