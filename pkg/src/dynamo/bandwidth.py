"""Quasi k-fold cross-validation of the kernel bandwidth at one time point."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import LaggedView
from .kernel import KernelSpec, local_weights
from .linear import FitError, SolverConfig, fit_weighted

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))
TEST_WEIGHTINGS = ("none", "kernel")


class BandwidthError(ValueError):
    pass


@dataclass(frozen=True)
class CVConfig:
    """Cross-validation settings.

    ``test_weighting`` is "none" for the plain held-out squared error or
    "kernel" to weight each held-out point by its kernel weight at t.
    """

    grid: tuple[float, ...] = DEFAULT_GRID
    K: int = 5
    seed: int = 0
    model: str = "linear"
    family: str = "epanechnikov"
    test_weighting: str = "kernel"

    def __post_init__(self):
        grid = tuple(float(h) for h in self.grid)
        if not grid:
            raise BandwidthError("bandwidth grid is empty")
        for h in grid:
            KernelSpec(self.family, h)
        object.__setattr__(self, "grid", grid)
        if self.K < 2:
            raise BandwidthError(f"need at least 2 folds, got {self.K}")
        if self.model not in ("linear", "nonlinear"):
            raise BandwidthError(f"unknown model {self.model!r}")
        if self.test_weighting not in TEST_WEIGHTINGS:
            raise BandwidthError(f"test_weighting must be one of {TEST_WEIGHTINGS}")


@dataclass
class CVResult:
    t: int
    bandwidth: float
    losses: dict[float, float]
    excluded: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"t": self.t, "bandwidth": self.bandwidth,
                "cv_losses": {repr(h): v for h, v in self.losses.items()},
                "excluded": self.excluded}


def make_folds(n: int, K: int, seed: int) -> list[np.ndarray]:
    """Seeded random partition of range(n) into K nearly equal folds."""
    if n < 2 * K:
        raise BandwidthError(f"{n} usable time points cannot fill {K} folds of size >= 2")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, K)]


def _linear_fold_fit(lagged, train_w, solver, t, h, family):
    res = fit_weighted(lagged, train_w, solver, t=t, bandwidth=h, kernel=family)
    X, Y = lagged.aligned_targets, lagged.rows

    def residual(idx):
        return X[idx] - res.predict(X[idx], Y[idx])
    return res, residual


def _nonlinear_fold_fit(lagged, train_w, solver, t, h, family):
    from .nonlinear import fit_weighted_nonlinear

    res = fit_weighted_nonlinear(lagged, train_w, solver, t=t, bandwidth=h, kernel=family)
    X, Y = lagged.aligned_targets, lagged.rows

    def residual(idx):
        return X[idx] - res.predict(X[idx], Y[idx])
    return res, residual


def cv_losses(t: int, lagged: LaggedView, cfg: CVConfig, solver: SolverConfig,
              train_hook=None) -> tuple[dict[float, float], list[float]]:
    """Summed held-out loss per bandwidth, plus the bandwidths that failed.

    ``train_hook(h, k, train_weights, test_idx)`` is called before each fold
    fit; tests use it to check held-out rows carry no training weight.
    """
    lagged.row_of(t)
    folds = make_folds(lagged.n, cfg.K, cfg.seed)
    fold_fit = _linear_fold_fit if cfg.model == "linear" else _nonlinear_fold_fit
    losses: dict[float, float] = {}
    excluded: list[float] = []
    for h in cfg.grid:
        kernel = KernelSpec(cfg.family, h)
        full_w = local_weights(kernel, t, lagged.T)[lagged.L:]
        total = 0.0
        ok = True
        for k, test in enumerate(folds):
            train_w = full_w.copy()
            train_w[test] = 0.0
            if train_hook is not None:
                train_hook(h, k, train_w, test)
            try:
                res, residual = fold_fit(lagged, train_w, solver, t, h, cfg.family)
            except (FitError, FloatingPointError, OverflowError, np.linalg.LinAlgError) as exc:
                log.debug("bandwidth %s fold %d failed: %s", h, k, exc)
                ok = False
                break
            r = residual(test)
            per_point = np.sum(r * r, axis=1)
            if cfg.test_weighting == "kernel":
                per_point = per_point * full_w[test]
            fold_loss = float(per_point.sum())
            if not np.isfinite(fold_loss):
                ok = False
                break
            total += fold_loss
        if ok:
            losses[h] = total
        else:
            excluded.append(h)
            warnings.warn(f"bandwidth {h} excluded: fits failed or diverged", RuntimeWarning)
    if not losses:
        raise BandwidthError("every bandwidth in the grid failed")
    return losses, excluded


def select_bandwidth(t: int, lagged: LaggedView, cfg: CVConfig, solver: SolverConfig,
                     train_hook=None) -> CVResult:
    """Grid bandwidth minimizing the summed held-out loss; ties go to the larger h."""
    if len(cfg.grid) == 1:
        return CVResult(t=t, bandwidth=cfg.grid[0], losses={cfg.grid[0]: float("nan")})
    losses, excluded = cv_losses(t, lagged, cfg, solver, train_hook)
    best = min(losses.values())
    chosen = max(h for h, v in losses.items() if v == best)
    return CVResult(t=t, bandwidth=chosen, losses=losses, excluded=excluded)


def select_bandwidths(times: Sequence[int], lagged: LaggedView, cfg: CVConfig,
                      solver: SolverConfig) -> list[CVResult]:
    return [select_bandwidth(int(t), lagged, cfg, solver) for t in times]
