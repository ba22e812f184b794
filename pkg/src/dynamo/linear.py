"""Linear DYNAMO: kernel-weighted least squares with an acyclicity constraint.

At a time point t the estimator minimizes

    sum_l w_l ||x_l - W^T x_l - A^T y_l||^2 + lambda1 |W|_1 + lambda2 |A|_1
        + rho/2 H(W)^2 + alpha H(W)

with w_l the kernel weights centred at t.  The augmented Lagrangian loop
raises rho until H(W) shrinks by the factor ``c`` per outer step and then
performs a dual ascent step on alpha.  Each inner problem is solved with
L-BFGS-B on the split W = W+ - W-, A = A+ - A- so the l1 terms become linear.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.optimize as sopt

from .acyclicity import h_value, h_value_and_gradient
from .data import LaggedView
from .kernel import KernelSpec, local_weights

log = logging.getLogger(__name__)


class FitError(RuntimeError):
    """Raised when a local fit cannot be attempted."""


@dataclass(frozen=True)
class SolverConfig:
    lambda1: float = 0.05
    lambda2: float = 0.05
    rho0: float = 1.0
    alpha0: float = 0.0
    rho_max: float = 1e16
    eta_tol: float = 1e-5
    c: float = 0.25
    q: float = 10.0
    max_outer: int = 100
    inner_tol: float = 1e-6
    inner_max_iter: int = 500
    inner_ftol: float = 1e-10
    memory: int = 10
    init: str = "zero"
    seed: int | None = None
    # nonlinear-only knobs; ignored by the linear solver
    hidden_units: int = 10
    l2: float = 1e-4

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("penalties must be nonnegative")
        if not self.rho0 > 0 or not self.rho0 < self.rho_max:
            raise ValueError("need 0 < rho0 < rho_max")
        if not self.eta_tol > 0:
            raise ValueError("eta_tol must be positive")
        if not 0 < self.c < 1 or not self.q > 1:
            raise ValueError("need 0 < c < 1 and q > 1")
        if self.init not in ("zero", "random"):
            raise ValueError("init must be 'zero' or 'random'")

    @classmethod
    def real_data(cls, **kw) -> "SolverConfig":
        return cls(**{"eta_tol": 1e-5, **kw})

    @classmethod
    def simulation(cls, **kw) -> "SolverConfig":
        return cls(**{"eta_tol": 1e-3, **kw})

    @classmethod
    def nonlinear(cls, **kw) -> "SolverConfig":
        return cls(**{"lambda1": 0.005, "lambda2": 0.01, "eta_tol": 1e-10,
                      "init": "random", "seed": 0, **kw})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LinearParams:
    W: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        A = np.asarray(self.A, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"W must be square, got {W.shape}")
        if A.ndim != 2 or A.shape[1] != W.shape[0] or A.shape[0] % W.shape[0]:
            raise ValueError(f"A must be (L*d) x d, got {A.shape} for d={W.shape[0]}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "A", A)

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def L(self) -> int:
        return self.A.shape[0] // self.d

    @classmethod
    def zeros(cls, d: int, L: int) -> "LinearParams":
        return cls(np.zeros((d, d)), np.zeros((L * d, d)))


@dataclass
class FitResult:
    params: LinearParams
    t: int
    bandwidth: float
    loss: float
    eta: float
    outer_iterations: int
    converged: bool
    kernel: str = "epanechnikov"
    history: list = field(default_factory=list, repr=False)

    def predict(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Structural-equation prediction x W + y A for rows of x and y."""
        return np.asarray(x) @ self.params.W + np.asarray(y) @ self.params.A

    def to_dict(self) -> dict:
        return {
            "model": "linear",
            "t": self.t,
            "bandwidth": self.bandwidth,
            "kernel": self.kernel,
            "W": self.params.W.tolist(),
            "A": self.params.A.tolist(),
            "loss": self.loss,
            "eta": self.eta,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FitResult":
        return cls(
            params=LinearParams(np.array(obj["W"], dtype=float), np.array(obj["A"], dtype=float)),
            t=int(obj["t"]), bandwidth=float(obj["bandwidth"]), loss=float(obj["loss"]),
            eta=float(obj["eta"]), outer_iterations=int(obj.get("outer_iterations", 0)),
            converged=bool(obj["converged"]), kernel=obj.get("kernel", "epanechnikov"),
        )


def aligned_weights(weights: np.ndarray, lagged: LaggedView) -> np.ndarray:
    """Accept weights over all T time points or over the T-L usable rows."""
    w = np.asarray(weights, dtype=float)
    if w.shape == (lagged.T,):
        return w[lagged.L:]
    if w.shape == (lagged.n,):
        return w
    raise ValueError(f"weights of length {w.shape} match neither T={lagged.T} nor T-L={lagged.n}")


def _check_shapes(params: LinearParams, lagged: LaggedView) -> None:
    if params.d != lagged.d or params.A.shape[0] != lagged.rows.shape[1]:
        raise ValueError(
            f"parameter shapes W{params.W.shape}, A{params.A.shape} do not match "
            f"d={lagged.d}, L={lagged.L}")


def objective_and_gradient(params: LinearParams, lagged: LaggedView, weights: np.ndarray,
                           cfg: SolverConfig, rho: float, alpha: float):
    """Augmented objective and its gradient with respect to (W, A).

    The l1 terms contribute ``lambda * sign(.)`` (zero at zero); the solver
    itself avoids the kink through the nonnegative split.
    """
    _check_shapes(params, lagged)
    w = aligned_weights(weights, lagged)
    X, Y = lagged.aligned_targets, lagged.rows
    W, A = params.W, params.A
    R = X - X @ W - Y @ A
    wR = w[:, None] * R
    fit = float(np.sum(wR * R))
    h, gh = h_value_and_gradient(W)
    value = (fit + cfg.lambda1 * np.abs(W).sum() + cfg.lambda2 * np.abs(A).sum()
             + 0.5 * rho * h * h + alpha * h)
    gW = -2.0 * X.T @ wR + (rho * h + alpha) * gh + cfg.lambda1 * np.sign(W)
    gA = -2.0 * Y.T @ wR + cfg.lambda2 * np.sign(A)
    return value, (gW, gA)


def weighted_squared_error(params: LinearParams, lagged: LaggedView, weights: np.ndarray) -> float:
    w = aligned_weights(weights, lagged)
    R = lagged.aligned_targets - lagged.aligned_targets @ params.W - lagged.rows @ params.A
    return float(np.sum(w[:, None] * R * R))


# returned for line-search trial points where exp(W * W) overflows, so the
# search backtracks instead of aborting the fit
_OVERFLOW_VALUE = np.inf


class _RecastProblem:
    """Augmented Lagrangian in the split variables z = [W+, W-, A+, A-].

    The data term only needs the weighted Gram matrix of [X, Y], so each
    evaluation costs O((d + Ld)^2 d) regardless of the series length.
    """

    def __init__(self, lagged: LaggedView, w: np.ndarray, cfg: SolverConfig):
        self.d = lagged.d
        self.p = lagged.rows.shape[1]
        self.cfg = cfg
        keep = w > 0
        Z = np.hstack([lagged.aligned_targets[keep], lagged.rows[keep]])
        self.gram = Z.T @ (w[keep, None] * Z)
        d, p = self.d, self.p
        self.nw, self.na = d * d, p * d
        diag = np.eye(d, dtype=bool).ravel()
        wb = [(0.0, 0.0) if on else (0.0, None) for on in diag]
        ab = [(0.0, None)] * self.na
        self.bounds = wb + wb + ab + ab
        self.rho = cfg.rho0
        self.alpha = cfg.alpha0

    def unpack(self, z: np.ndarray) -> LinearParams:
        nw, na, d = self.nw, self.na, self.d
        W = (z[:nw] - z[nw:2 * nw]).reshape(d, d)
        A = (z[2 * nw:2 * nw + na] - z[2 * nw + na:]).reshape(self.p, d)
        return LinearParams(W, A)

    def smooth(self, params: LinearParams):
        d = self.d
        B = np.vstack([np.eye(d) - params.W, -params.A])
        GB = self.gram @ B
        fit = float(np.sum(B * GB))
        h, gh = h_value_and_gradient(params.W)
        gW = -2.0 * GB[:d] + (self.rho * h + self.alpha) * gh
        gA = -2.0 * GB[d:]
        return fit, h, gW, gA

    def __call__(self, z: np.ndarray):
        params = self.unpack(z)
        try:
            fit, h, gW, gA = self.smooth(params)
        except OverflowError:
            return _OVERFLOW_VALUE, np.zeros_like(z)
        nw = self.nw
        l1w = self.cfg.lambda1 * z[:2 * nw].sum()
        l1a = self.cfg.lambda2 * z[2 * nw:].sum()
        value = fit + l1w + l1a + 0.5 * self.rho * h * h + self.alpha * h
        gw, ga = gW.ravel(), gA.ravel()
        grad = np.concatenate([gw + self.cfg.lambda1, -gw + self.cfg.lambda1,
                               ga + self.cfg.lambda2, -ga + self.cfg.lambda2])
        return value, grad

    def penalized_loss(self, z: np.ndarray) -> float:
        params = self.unpack(z)
        fit = self.smooth(params)[0]
        return fit + self.cfg.lambda1 * np.abs(params.W).sum() + self.cfg.lambda2 * np.abs(params.A).sum()


def _initial_point(problem: _RecastProblem, cfg: SolverConfig) -> np.ndarray:
    n = 2 * (problem.nw + problem.na)
    if cfg.init == "zero":
        return np.zeros(n)
    rng = np.random.default_rng(cfg.seed)
    z = rng.uniform(0.0, 0.1, size=n)
    for k, (lo, hi) in enumerate(problem.bounds):
        if hi == 0.0:
            z[k] = 0.0
    return z


def augmented_lagrangian(problem, z0: np.ndarray, cfg: SolverConfig, eta_of):
    """Outer loop shared by the linear and nonlinear estimators.

    ``problem`` is a callable returning (value, grad) with mutable ``rho`` and
    ``alpha`` attributes and optional ``bounds``; ``eta_of(z)`` gives H at z.
    Returns (z, eta, outer_iterations, history).
    """
    z, eta = z0, np.inf
    history = []
    outer = 0
    options = {"maxcor": cfg.memory, "gtol": cfg.inner_tol, "ftol": cfg.inner_ftol,
               "maxiter": cfg.inner_max_iter}
    bounds = getattr(problem, "bounds", None)
    for outer in range(1, cfg.max_outer + 1):
        z_new, eta_new = z, eta
        while problem.rho < cfg.rho_max:
            sol = sopt.minimize(problem, z, jac=True, method="L-BFGS-B", bounds=bounds, options=options)
            z_new = sol.x
            eta_new = eta_of(z_new)
            if eta_new > cfg.c * eta:
                problem.rho *= cfg.q
            else:
                break
        z, eta = z_new, eta_new
        problem.alpha += problem.rho * eta
        history.append({"outer": outer, "rho": problem.rho, "alpha": problem.alpha, "eta": eta})
        if eta < cfg.eta_tol or problem.rho >= cfg.rho_max:
            break
    return z, eta, outer, history


def fit_weighted(lagged: LaggedView, weights: np.ndarray, cfg: SolverConfig,
                 t: int = 0, bandwidth: float = float("nan"), kernel: str = "custom") -> FitResult:
    """Minimize the augmented objective for an arbitrary nonnegative weight vector."""
    w = aligned_weights(weights, lagged)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise FitError("weights must be finite and nonnegative")
    if np.count_nonzero(w) < lagged.d:
        raise FitError(f"only {np.count_nonzero(w)} time points carry weight; "
                       f"need at least d={lagged.d} (increase the bandwidth)")
    problem = _RecastProblem(lagged, w, cfg)
    z0 = _initial_point(problem, cfg)
    z, eta, outer, history = augmented_lagrangian(
        problem, z0, cfg, lambda z: h_value(problem.unpack(z).W))
    params = problem.unpack(z)
    return FitResult(
        params=params, t=t, bandwidth=bandwidth, loss=problem.penalized_loss(z),
        eta=float(eta), outer_iterations=outer, converged=bool(eta < cfg.eta_tol),
        kernel=kernel, history=history,
    )


def fit_at(t: int, lagged: LaggedView, kernel: KernelSpec, cfg: SolverConfig) -> FitResult:
    """Local linear fit at time t (1-based, L+1 <= t <= T)."""
    lagged.row_of(t)
    weights = local_weights(kernel, t, lagged.T)
    return fit_weighted(lagged, weights, cfg, t=t, bandwidth=kernel.bandwidth, kernel=kernel.family)


def _fit_one(args):
    t, lagged, kernel, cfg, fitter = args
    try:
        return fitter(t, lagged, kernel, cfg)
    except Exception as exc:
        raise FitError(f"fit at t={t} failed: {exc}") from exc


def fit_path(times: Sequence[int], lagged: LaggedView, kernel: KernelSpec, cfg: SolverConfig,
             jobs: int = 1, fitter=None) -> list:
    """Independent local fits at every requested time point, in input order."""
    fitter = fitter or fit_at
    tasks = [(int(t), lagged, kernel, cfg, fitter) for t in times]
    if jobs <= 1 or len(tasks) <= 1:
        return [_fit_one(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_fit_one, tasks))


def threshold(params: LinearParams, tau: float) -> LinearParams:
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    W = np.where(np.abs(params.W) < tau, 0.0, params.W)
    A = np.where(np.abs(params.A) < tau, 0.0, params.A)
    return LinearParams(W, A)


def with_threshold(result: FitResult, tau: float) -> FitResult:
    return replace(result, params=threshold(result.params, tau))
