import numpy as np
import pytest

from dynamo.bandwidth import BandwidthError, CVConfig, cv_losses, make_folds, select_bandwidth
from dynamo.data import build_lagged
from dynamo.linear import SolverConfig
from dynamo.simulate import generate, make_process


@pytest.fixture(scope="module")
def lagged():
    series, _ = generate(make_process(d=4, T=200, seed=11))
    return build_lagged(series, 1)


def test_folds_partition_and_seed():
    folds = make_folds(53, 5, seed=2)
    allidx = np.sort(np.concatenate(folds))
    assert np.array_equal(allidx, np.arange(53))
    assert max(len(f) for f in folds) - min(len(f) for f in folds) <= 1
    assert all(np.array_equal(a, b) for a, b in zip(folds, make_folds(53, 5, seed=2)))
    with pytest.raises(BandwidthError):
        make_folds(7, 5, 0)


def test_training_never_sees_test_rows(lagged):
    seen = []

    def hook(h, k, train_w, test):
        assert np.all(train_w[test] == 0)
        seen.append((h, k))

    cfg = CVConfig(grid=(0.3, 0.6), K=3, seed=1)
    select_bandwidth(100, lagged, cfg, SolverConfig.simulation(), train_hook=hook)
    assert len(seen) == 6


def test_same_folds_for_every_bandwidth(lagged):
    tests = {}

    def hook(h, k, train_w, test):
        tests.setdefault(k, []).append(tuple(test))

    cv_losses(100, lagged, CVConfig(grid=(0.3, 0.6, 0.9), K=3), SolverConfig.simulation(), hook)
    assert all(len(set(v)) == 1 for v in tests.values())


def test_ties_go_to_larger_bandwidth(lagged, monkeypatch):
    import dynamo.bandwidth as bw
    monkeypatch.setattr(bw, "cv_losses", lambda *a, **k: ({0.2: 1.0, 0.5: 1.0, 0.8: 2.0}, []))
    assert bw.select_bandwidth(50, lagged, CVConfig(grid=(0.2, 0.5, 0.8)), SolverConfig()).bandwidth == 0.5


def test_singleton_grid_short_circuits(lagged):
    assert select_bandwidth(50, lagged, CVConfig(grid=(0.4,)), SolverConfig()).bandwidth == 0.4


def test_config_validation():
    with pytest.raises(BandwidthError):
        CVConfig(grid=())
    with pytest.raises(BandwidthError):
        CVConfig(K=1)
    with pytest.raises(BandwidthError):
        CVConfig(test_weighting="cosine")
    with pytest.raises(ValueError):
        CVConfig(grid=(1.5,))
    assert CVConfig().test_weighting == "kernel"


def test_unweighted_held_out_loss_prefers_widest_window():
    # documents why held-out points are kernel weighted by default
    series, _ = generate(make_process(d=5, T=500, seed=3))
    lag = build_lagged(series, 1)
    plain = select_bandwidth(60, lag, CVConfig(grid=(0.2, 0.5, 0.9), test_weighting="none"),
                             SolverConfig.simulation())
    assert plain.bandwidth == 0.9
