"""Graph recovery scores, lag-order choice and one-step prediction error."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .data import LaggedView

COMPONENTS = ("instantaneous", "lagged")


@dataclass(frozen=True)
class MetricsReport:
    shd: int
    precision: float
    recall: float
    f1: float
    component: str
    n_est: int = 0
    n_true: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def binarize(M: np.ndarray, tau: float = 0.05) -> np.ndarray:
    """Edge pattern |M| >= tau, matching the thresholding used on fits."""
    return np.abs(np.asarray(M, dtype=float)) >= tau


def _as_bool(a, b):
    a = np.asarray(a) != 0
    b = np.asarray(b) != 0
    if a.shape != b.shape:
        raise ValueError(f"graph shapes differ: {a.shape} vs {b.shape}")
    return a, b


def shd(est, truth, component: str = "instantaneous") -> int:
    """Structural Hamming distance.

    For the square instantaneous graph every unordered node pair whose edge
    state differs costs one, so a reversed edge counts once.  Lagged edges have
    no reverse, so there SHD is the number of differing entries.
    """
    E, T = _as_bool(est, truth)
    if component == "lagged":
        return int(np.sum(E != T))
    if E.shape[0] != E.shape[1]:
        raise ValueError("instantaneous graphs must be square")
    differs = (E != T) | (E.T != T.T)
    return int(np.sum(np.triu(differs, k=1)))


def f1(est, truth, component: str = "instantaneous") -> MetricsReport:
    E, T = _as_bool(est, truth)
    n_est, n_true = int(E.sum()), int(T.sum())
    tp = int(np.sum(E & T))
    if n_est == 0 and n_true == 0:
        p = r = score = 1.0
    else:
        p = tp / n_est if n_est else 0.0
        r = tp / n_true if n_true else 0.0
        score = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return MetricsReport(shd=shd(E, T, component), precision=p, recall=r, f1=score,
                         component=component, n_est=n_est, n_true=n_true)


def evaluate_graphs(W_est, A_est, W_true, A_true, tau: float = 0.05) -> dict[str, MetricsReport]:
    """Score both components after thresholding estimates and truth at tau."""
    Wb = binarize(W_est, tau)
    np.fill_diagonal(Wb, False)
    return {
        "instantaneous": f1(Wb, np.asarray(W_true) != 0, "instantaneous"),
        "lagged": f1(binarize(A_est, tau), np.asarray(A_true) != 0, "lagged"),
    }


def split_lags(A: np.ndarray, d: int) -> list[np.ndarray]:
    A = np.asarray(A, dtype=float)
    if A.shape[0] % d:
        raise ValueError(f"lag matrix with {A.shape[0]} rows is not a multiple of d={d}")
    return [A[k * d:(k + 1) * d] for k in range(A.shape[0] // d)]


def select_lag(lagged_fits: Sequence[np.ndarray] | np.ndarray, threshold: float = 0.05,
               d: int | None = None) -> int:
    """Number of leading lag slices with some entry above threshold.

    Accepts a list of per-lag d x d slices, or one (L*d) x d matrix with ``d``.
    Scanning stops at the first slice that is entirely below threshold.
    """
    if isinstance(lagged_fits, np.ndarray) and lagged_fits.ndim == 2 and d is not None:
        slices = split_lags(lagged_fits, d)
    else:
        slices = [np.asarray(s, dtype=float) for s in lagged_fits]
    L = 0
    for s in slices:
        if s.size and np.max(np.abs(s)) > threshold:
            L += 1
        else:
            break
    return L


def predict_mse(fits: Sequence, lagged: LaggedView, target: int, times: Sequence[int] | None = None) -> float:
    """Mean squared one-step error of ``target`` using each fit at its own time.

    Each fit's structural equation is evaluated at the observed regressors of
    its time point.  When ``times`` is given every listed t must have a fit.
    """
    by_t = {int(f.t): f for f in fits}
    if times is None:
        times = sorted(by_t)
    if not times:
        raise ValueError("no time points to predict")
    if not 0 <= target < lagged.d:
        raise ValueError(f"target index {target} outside [0, {lagged.d})")
    errs = []
    for t in times:
        if int(t) not in by_t:
            raise KeyError(f"no fit for time point {t}")
        k = lagged.row_of(int(t))
        x = lagged.aligned_targets[k:k + 1]
        y = lagged.rows[k:k + 1]
        pred = np.asarray(by_t[int(t)].predict(x, y)).reshape(-1)[target]
        errs.append((x[0, target] - pred) ** 2)
    return float(np.mean(errs))
