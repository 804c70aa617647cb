import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fflsim.model import (ConstantsCertificate, DataPoint, DimensionError, EmptyDatasetError,
                          LocalDataset, LocalObjective, LossModel, Scenario, UnboundedFeaturesError,
                          certify_constants, local_empirical_risk, per_sample_grad, per_sample_loss)

RIDGE = LossModel("ridge_regression", 0.1, 1)


def fd_grad(f, w, h=1e-6):
    g = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2 * h)
    return g


@pytest.mark.parametrize("w, x, y, expected", [
    ([0.0, 0.0], [1.0], 0.0, 0.0),
    ([1.0, 0.0], [0.0], 0.0, 0.05),
    ([2.0, 0.0], [0.5], 1.0, 0.2),
])
def test_ridge_loss_values(w, x, y, expected):
    assert per_sample_loss(RIDGE, np.array(w), DataPoint(x, y)) == pytest.approx(expected, abs=1e-15)


def test_ridge_gradient_values():
    assert np.allclose(per_sample_grad(RIDGE, np.zeros(2), DataPoint([1.0], 0.0)), 0.0)
    assert np.allclose(per_sample_grad(RIDGE, np.array([1.0, 0.0]), DataPoint([0.0], 0.0)), [0.1, 0.0])


@pytest.mark.parametrize("kind, classes", [("ridge_regression", 0), ("l2_logistic", 2), ("l2_softmax", 4)])
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_gradient_matches_finite_differences(kind, classes, seed):
    rng = np.random.default_rng(seed)
    model = LossModel(kind, 0.1, 3, num_classes=classes or 1)
    w = rng.normal(size=model.dim)
    x = rng.normal(size=3)
    y = float(rng.integers(0, classes)) if classes else float(rng.normal())
    pt = DataPoint(x, y)
    g = per_sample_grad(model, w, pt)
    num = fd_grad(lambda v: per_sample_loss(model, v, pt), w)
    assert np.allclose(g, num, rtol=1e-6, atol=1e-7)


def test_risk_gradient_and_hessian_finite_differences(rng):
    model = LossModel("l2_softmax", 0.05, 2, num_classes=3)
    X = rng.normal(size=(15, 2))
    y = rng.integers(0, 3, size=15)
    w = rng.normal(size=model.dim)
    v, g = local_empirical_risk(model, LocalDataset(0, X, y), w)
    assert np.allclose(g, fd_grad(lambda u: model.risk(u, X, y), w), rtol=1e-6, atol=1e-8)
    H = model.risk_hessian(w, X, y)
    Hn = np.array([fd_grad(lambda u: model.risk_grad(u, X, y)[i], w) for i in range(model.dim)])
    assert np.allclose(H, Hn, atol=1e-5)


def test_dataset_mean_semantics():
    pt = DataPoint([0.3], 1.2)
    w = np.array([0.7, -0.2])
    one = LocalDataset(0, [[0.3]], [1.2])
    two = LocalDataset(0, [[0.3], [0.3]], [1.2, 1.2])
    assert RIDGE.risk(w, one.X, one.y) == pytest.approx(per_sample_loss(RIDGE, w, pt), rel=1e-14)
    assert RIDGE.risk(w, two.X, two.y) == pytest.approx(RIDGE.risk(w, one.X, one.y), rel=1e-14)


def test_ridge_objective_matches_generic_risk(rng):
    X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    model = LossModel("ridge_regression", 0.2, 2)
    obj = LocalObjective(model, LocalDataset(0, X, y))
    w = rng.normal(size=3)
    assert obj.value(w) == pytest.approx(model.risk(w, X, y), rel=1e-12)
    assert np.allclose(obj.grad(w), model.risk_grad(w, X, y))


def test_smoothness_constants():
    assert LossModel("ridge_regression", 0.1, 1).smoothness(1.0) == pytest.approx(1.1)
    assert LossModel("l2_logistic", 0.1, 1).smoothness(4.0) == pytest.approx(2.1)


def test_smoothness_dominates_hessian(rng):
    model = LossModel("l2_logistic", 0.1, 3)
    X = rng.normal(size=(40, 3))
    y = rng.integers(0, 2, size=40)
    sq = float(np.max(np.sum(X ** 2, axis=1) + 1))
    for _ in range(5):
        H = model.risk_hessian(rng.normal(size=4) * 3, X, y)
        assert np.linalg.eigvalsh(H).max() <= model.smoothness(sq) + 1e-12
        assert np.linalg.eigvalsh(H).min() >= model.reg - 1e-12


def test_certified_mu_is_regularizer(ridge5):
    cc = certify_constants(ridge5.loss, ridge5, l_f=1.0)
    assert cc.mu == 0.1
    assert cc.l_g >= cc.mu


def test_validation_errors():
    with pytest.raises(EmptyDatasetError):
        LocalDataset(0, np.zeros((0, 1)), [])
    with pytest.raises(DimensionError):
        LocalDataset(0, [[1.0], [2.0]], [1.0])
    with pytest.raises(ValueError):
        DataPoint([np.nan], 1.0)
    with pytest.raises(ValueError):
        LossModel("ridge_regression", 0.0, 1)
    ds = LocalDataset(0, [[1.0]], [1.0])
    with pytest.raises(ValueError):
        Scenario((ds, ds), [0.6, 0.6], RIDGE)
    with pytest.raises(DimensionError):
        Scenario((ds,), [1.0], LossModel("ridge_regression", 0.1, 2))
    with pytest.raises(ValueError):
        Scenario((LocalDataset(0, [[1.0]], [2.0]),), [1.0], LossModel("l2_logistic", 0.1, 1))


def test_unbounded_features_rejected():
    sc = Scenario((LocalDataset(0, [[1e8]], [1.0]),), [1.0], RIDGE)
    with pytest.raises(UnboundedFeaturesError):
        certify_constants(RIDGE, sc, l_f=1.0)


def test_scenario_global_quantities(ridge5):
    w = np.array([0.3, -0.1, 0.2])
    p = ridge5.weights
    assert ridge5.global_loss(w) == pytest.approx(sum(p[k] * ridge5.local_value(k, w) for k in range(5)))
    assert np.allclose(ridge5.global_grad(w), fd_grad(ridge5.global_loss, w), atol=1e-7)
    assert ridge5.n_total == 200 and ridge5.n_min == 20


def test_constants_certificate_validation():
    with pytest.raises(ValueError):
        ConstantsCertificate(mu=1.0, l_g=0.5, l_ell=1.0, l_f=1.0)
