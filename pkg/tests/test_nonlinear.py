import numpy as np
import pytest

from dynamo.data import build_lagged, series_from_array
from dynamo.kernel import KernelSpec, local_weights
from dynamo.linear import FitError, SolverConfig
from dynamo.nonlinear import (NetworkParams, NonlinearFitResult, TargetNetwork, fit_at_nonlinear, forward,
                              init_params, nonlinear_objective_and_gradient, threshold_adjacency)


def _params(d=4, p=4, m=3, seed=0):
    return init_params(d, p, SolverConfig.nonlinear(seed=seed, hidden_units=m))


def test_forward_ignores_target_input():
    net = _params().networks()[2]
    x = np.random.default_rng(1).standard_normal(4)
    y = np.random.default_rng(2).standard_normal(4)
    x2 = x.copy()
    x2[2] = 1e6
    assert forward(net, x, y) == forward(net, x2, y)
    with pytest.raises(ValueError):
        forward(net, x[:3], y)


def test_stacked_predict_matches_forward():
    params = _params()
    rng = np.random.default_rng(3)
    X, Y = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
    P = params.predict(X, Y)
    for n, net in enumerate(params.networks()):
        for r in range(5):
            assert P[r, n] == pytest.approx(forward(net, X[r], Y[r]), abs=1e-12)
    back = NetworkParams.from_networks(params.networks())
    assert np.array_equal(back.C, params.C)


def test_adjacency_is_group_norm():
    params = _params()
    W, A = params.adjacency()
    assert np.allclose(np.diag(W), 0)
    assert W[1, 3] == pytest.approx(np.linalg.norm(params.C[3, :, 1]))
    assert A[0, 2] == pytest.approx(np.linalg.norm(params.G[2, :, 0]))


def test_seed_required():
    with pytest.raises(FitError):
        init_params(3, 3, SolverConfig.nonlinear(seed=None))


def test_gradient_finite_differences():
    rng = np.random.default_rng(4)
    lag = build_lagged(series_from_array(rng.standard_normal((40, 3))), 1)
    w = local_weights(KernelSpec("epanechnikov", 0.5), 20, 40)
    cfg = SolverConfig.nonlinear(seed=1, hidden_units=3, lambda1=0.1, lambda2=0.1)
    p = _params(3, 3, 3, seed=1)
    p = NetworkParams(p.C * 4, p.G * 4, p.B1, p.W2 * 4, p.B2 + 0.3)
    nets = p.networks()
    _, g = nonlinear_objective_and_gradient(nets, lag, w, cfg, rho=5.0, alpha=1.0)
    eps = 1e-6
    for arr, gar in ((p.C, g.C), (p.G, g.G), (p.W2, g.W2), (p.B1, g.B1), (p.B2, g.B2)):
        for idx in np.ndindex(arr.shape):
            if arr is p.C and idx[0] == idx[2]:
                continue
            old = arr[idx]
            arr[idx] = old + eps
            fp, _ = nonlinear_objective_and_gradient(p.networks(), lag, w, cfg, 5.0, 1.0)
            arr[idx] = old - eps
            fm, _ = nonlinear_objective_and_gradient(p.networks(), lag, w, cfg, 5.0, 1.0)
            arr[idx] = old
            assert gar[idx] == pytest.approx((fp - fm) / (2 * eps), rel=1e-5, abs=1e-7)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_white_noise_gives_empty_graphs_with_group_lasso(seed):
    # at the 0.005 default a 10-unit network can profit from fitting noise; 0.05 zeros every group
    X = np.random.default_rng(seed).standard_normal((500, 3))
    lag = build_lagged(series_from_array(X), 1)
    cfg = SolverConfig.nonlinear(seed=seed, lambda1=0.05, lambda2=0.05)
    res = fit_at_nonlinear(250, lag, KernelSpec("epanechnikov", 0.5), cfg)
    W, A = threshold_adjacency(res, 0.05)
    assert not W.any() and not A.any()
    assert res.converged and res.eta < cfg.eta_tol
    back = NonlinearFitResult.from_dict(res.to_dict())
    x, y = lag.aligned_targets[:2], lag.rows[:2]
    assert np.allclose(back.predict(x, y), res.predict(x, y))
    assert len(res.per_target_loss) == 3


def test_fit_is_deterministic_given_seed():
    X = np.random.default_rng(7).standard_normal((80, 3))
    lag = build_lagged(series_from_array(X), 1)
    cfg = SolverConfig.nonlinear(seed=3, hidden_units=3, max_outer=3)
    a = fit_at_nonlinear(40, lag, KernelSpec("epanechnikov", 0.5), cfg)
    b = fit_at_nonlinear(40, lag, KernelSpec("epanechnikov", 0.5), cfg)
    assert np.array_equal(a.W_derived, b.W_derived) and a.loss == b.loss


def test_zero_parameters_give_zero_loss_on_zero_data():
    lag = build_lagged(series_from_array(np.zeros((10, 3))), 1)
    p = NetworkParams(np.zeros((3, 2, 3)), np.zeros((3, 2, 3)), np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(3))
    cfg = SolverConfig.nonlinear(lambda1=0.0, lambda2=0.0, l2=0.0, hidden_units=2)
    value, _ = nonlinear_objective_and_gradient(p.networks(), lag, np.ones(10), cfg, rho=1.0, alpha=0.0)
    assert value == 0.0
    net = p.networks()[0]
    assert forward(net, np.ones(3), np.ones(3)) == forward(net, -np.ones(3), np.zeros(3))


def test_identity_activation_is_affine():
    net = TargetNetwork(1, np.array([[2.0, 9.0, -1.0]]), np.array([[0.5, 0.0, 3.0]]),
                        np.array([0.25]), np.array([2.0]), 1.0)
    x, y = np.array([1.0, 100.0, 2.0]), np.array([4.0, 1.0, -1.0])
    # 2*(2*1 - 1*2 + 0.5*4 + 3*(-1) + 0.25) + 1
    assert forward(net, x, y, activation=lambda u: u) == pytest.approx(2 * (-0.75) + 1.0)


def test_two_cycle_group_raises_objective():
    rng = np.random.default_rng(5)
    lag = build_lagged(series_from_array(rng.standard_normal((30, 2))), 1)
    cfg = SolverConfig.nonlinear(seed=0, hidden_units=2)
    p = init_params(2, 2, cfg)
    p.C[1, :, 0] = 0.5  # edge 0 -> 1
    p.C[0, :, 1] = 0.3  # edge 1 -> 0
    base, _ = nonlinear_objective_and_gradient(p.networks(), lag, np.ones(29), cfg, rho=100.0, alpha=1.0)
    p.C[0, :, 1] = 0.6
    bigger, _ = nonlinear_objective_and_gradient(p.networks(), lag, np.ones(29), cfg, rho=100.0, alpha=1.0)
    assert bigger > base


def test_network_validation():
    with pytest.raises(ValueError):
        TargetNetwork(5, np.zeros((2, 3)), np.zeros((2, 3)), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        TargetNetwork(0, np.zeros((2, 3)), np.zeros((3, 3)), np.zeros(2), np.zeros(2))
