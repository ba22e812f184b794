"""Nonlinear DYNAMO: one small sigmoid network per target variable.

Network j predicts x^[j] from the other contemporaneous variables and all
lagged inputs.  The first-layer weights feeding from input i form a group;
the group's Euclidean norm is the (i, j) entry of the derived adjacency, so a
group at zero means "no edge".  Training minimizes the kernel-weighted squared
error plus group-lasso penalties and the augmented acyclicity terms on the
derived instantaneous adjacency.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .acyclicity import h_from_squares
from .data import LaggedView
from .kernel import KernelSpec, local_weights
from .linear import _OVERFLOW_VALUE, FitError, SolverConfig, aligned_weights, augmented_lagrangian


def sigmoid(u):
    return expit(u)


@dataclass
class TargetNetwork:
    """Parameters of the network predicting variable ``target``.

    ``contemp`` is m x d with column ``target`` held at zero and never used;
    ``lagged`` is m x (L*d).
    """

    target: int
    contemp: np.ndarray
    lagged: np.ndarray
    hidden_bias: np.ndarray
    out_weight: np.ndarray
    out_bias: float = 0.0

    def __post_init__(self):
        self.contemp = np.asarray(self.contemp, dtype=float)
        self.lagged = np.asarray(self.lagged, dtype=float)
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=float)
        self.out_weight = np.asarray(self.out_weight, dtype=float)
        m, d = self.contemp.shape
        if m < 1:
            raise ValueError("need at least one hidden unit")
        if self.lagged.shape[0] != m or self.hidden_bias.shape != (m,) or self.out_weight.shape != (m,):
            raise ValueError("inconsistent hidden-layer sizes")
        if not 0 <= self.target < d:
            raise ValueError(f"target {self.target} outside [0, {d})")
        self.contemp[:, self.target] = 0.0

    @property
    def m(self) -> int:
        return self.contemp.shape[0]

    @property
    def d(self) -> int:
        return self.contemp.shape[1]

    def inputs_excluding_target(self) -> np.ndarray:
        return np.array([i for i in range(self.d) if i != self.target], dtype=int)


def forward(net: TargetNetwork, x_contemp: np.ndarray, y_lagged: np.ndarray,
            activation: Callable = sigmoid) -> float:
    """Prediction of x^[target]; the target's own value is never read."""
    x = np.asarray(x_contemp, dtype=float)
    y = np.asarray(y_lagged, dtype=float)
    if x.shape != (net.d,) or y.shape != (net.lagged.shape[1],):
        raise ValueError(f"expected inputs of length {net.d} and {net.lagged.shape[1]}, "
                         f"got {x.shape} and {y.shape}")
    keep = net.inputs_excluding_target()
    pre = net.contemp[:, keep] @ x[keep] + net.lagged @ y + net.hidden_bias
    return float(net.out_weight @ activation(pre) + net.out_bias)


@dataclass
class NetworkParams:
    """All d networks stacked: C[j, k, i] is the weight from contemporaneous input i
    to hidden unit k of network j; G likewise for lagged inputs."""

    C: np.ndarray
    G: np.ndarray
    B1: np.ndarray
    W2: np.ndarray
    B2: np.ndarray

    @property
    def d(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[1]

    def networks(self) -> list[TargetNetwork]:
        return [TargetNetwork(j, self.C[j].copy(), self.G[j].copy(), self.B1[j].copy(),
                              self.W2[j].copy(), float(self.B2[j])) for j in range(self.d)]

    @classmethod
    def from_networks(cls, nets: list[TargetNetwork]) -> "NetworkParams":
        return cls(
            C=np.stack([n.contemp for n in nets]),
            G=np.stack([n.lagged for n in nets]),
            B1=np.stack([n.hidden_bias for n in nets]),
            W2=np.stack([n.out_weight for n in nets]),
            B2=np.array([n.out_bias for n in nets], dtype=float),
        )

    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """Derived (W, A): group norms of the first-layer weights, indexed [input, target]."""
        W = np.sqrt(np.sum(self.C * self.C, axis=1)).T
        A = np.sqrt(np.sum(self.G * self.G, axis=1)).T
        return W, A

    def predict(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        d, m = self.d, self.m
        pre = X @ self.C.reshape(d * m, d).T + Y @ self.G.reshape(d * m, -1).T + self.B1.ravel()
        S = expit(pre).reshape(-1, d, m)
        return np.einsum("njk,jk->nj", S, self.W2) + self.B2


class _NetworkLayout:
    """Packing between the flat optimizer vector and NetworkParams."""

    def __init__(self, d: int, p: int, m: int):
        self.d, self.p, self.m = d, p, m
        mask = np.ones((d, m, d), dtype=bool)
        for j in range(d):
            mask[j, :, j] = False
        self.mask = mask
        self.sizes = [int(mask.sum()), d * m * p, d * m, d * m, d]
        self.offsets = np.cumsum([0] + self.sizes)

    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    def unpack(self, z: np.ndarray) -> NetworkParams:
        d, p, m = self.d, self.p, self.m
        o = self.offsets
        C = np.zeros((d, m, d))
        C[self.mask] = z[o[0]:o[1]]
        return NetworkParams(
            C=C,
            G=z[o[1]:o[2]].reshape(d, m, p).copy(),
            B1=z[o[2]:o[3]].reshape(d, m).copy(),
            W2=z[o[3]:o[4]].reshape(d, m).copy(),
            B2=z[o[4]:o[5]].copy(),
        )

    def pack(self, params: NetworkParams) -> np.ndarray:
        return np.concatenate([params.C[self.mask], params.G.ravel(), params.B1.ravel(),
                               params.W2.ravel(), params.B2.ravel()])


def _group_norm_grad(T: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """d/dT of sum of group norms over axis 1; zero for groups at zero."""
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms[:, None, :] > 0, T / safe[:, None, :], 0.0)


class _NetworkProblem:
    def __init__(self, lagged: LaggedView, w: np.ndarray, cfg: SolverConfig, rho=None, alpha=None):
        keep = w > 0
        self.X = np.ascontiguousarray(lagged.aligned_targets[keep])
        self.Y = np.ascontiguousarray(lagged.rows[keep])
        self.w = w[keep]
        self.cfg = cfg
        self.layout = _NetworkLayout(lagged.d, lagged.rows.shape[1], cfg.hidden_units)
        self.rho = cfg.rho0 if rho is None else rho
        self.alpha = cfg.alpha0 if alpha is None else alpha

    def terms(self, params: NetworkParams):
        """Weighted squared error per target, its gradient pieces, and the activations."""
        X, Y, w = self.X, self.Y, self.w
        d, m = params.d, params.m
        pre = X @ params.C.reshape(d * m, d).T + Y @ params.G.reshape(d * m, -1).T + params.B1.ravel()
        S = expit(pre).reshape(-1, d, m)
        out = np.einsum("njk,jk->nj", S, params.W2) + params.B2
        R = X - out
        per_target = np.einsum("n,nj->j", w, R * R)
        return per_target, R, S

    def evaluate(self, z: np.ndarray, with_grad: bool = True):
        cfg = self.cfg
        params = self.layout.unpack(z)
        d, m = params.d, params.m
        per_target, R, S = self.terms(params)
        fit = float(per_target.sum())

        normC = np.sqrt(np.sum(params.C * params.C, axis=1))  # [j, i]
        normG = np.sqrt(np.sum(params.G * params.G, axis=1))
        h, dh_dsq = h_from_squares((normC * normC).T)
        ridge = 0.5 * cfg.l2 * (np.sum(params.B1 ** 2) + np.sum(params.W2 ** 2) + np.sum(params.B2 ** 2))
        value = (fit + cfg.lambda1 * normC.sum() + cfg.lambda2 * normG.sum() + ridge
                 + 0.5 * self.rho * h * h + self.alpha * h)
        if not with_grad:
            return value

        dout = -2.0 * self.w[:, None] * R
        gW2 = np.einsum("nj,njk->jk", dout, S) + cfg.l2 * params.W2
        gB2 = dout.sum(axis=0) + cfg.l2 * params.B2
        dpre = (dout[:, :, None] * params.W2[None]) * S * (1.0 - S)
        dpre = dpre.reshape(-1, d * m)
        gC = (dpre.T @ self.X).reshape(d, m, d)
        gG = (dpre.T @ self.Y).reshape(d, m, -1)
        gB1 = dpre.sum(axis=0).reshape(d, m) + cfg.l2 * params.B1

        gC += cfg.lambda1 * _group_norm_grad(params.C, normC)
        gG += cfg.lambda2 * _group_norm_grad(params.G, normG)
        # H depends on C through the squared group norms: dS[i, j] / dC[j, k, i] = 2 C[j, k, i]
        gC += (self.rho * h + self.alpha) * 2.0 * params.C * dh_dsq.T[:, None, :]
        grad = self.layout.pack(NetworkParams(gC, gG, gB1, gW2, gB2))
        return value, grad

    def __call__(self, z):
        try:
            return self.evaluate(z)
        except OverflowError:
            return _OVERFLOW_VALUE, np.zeros_like(z)

    def eta(self, z: np.ndarray) -> float:
        W, _ = self.layout.unpack(z).adjacency()
        return h_from_squares(W * W)[0]


@dataclass
class NonlinearFitResult:
    networks: list[TargetNetwork]
    W_derived: np.ndarray
    A_derived: np.ndarray
    loss: float
    eta: float
    converged: bool
    t: int
    bandwidth: float
    per_target_loss: list[float] = field(default_factory=list)
    outer_iterations: int = 0
    kernel: str = "epanechnikov"
    history: list = field(default_factory=list, repr=False)

    @property
    def stacked(self) -> NetworkParams:
        return NetworkParams.from_networks(self.networks)

    def predict(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return self.stacked.predict(np.atleast_2d(X), np.atleast_2d(Y))

    def to_dict(self) -> dict:
        return {
            "model": "nonlinear",
            "t": self.t,
            "bandwidth": self.bandwidth,
            "kernel": self.kernel,
            "W": self.W_derived.tolist(),
            "A": self.A_derived.tolist(),
            "loss": self.loss,
            "per_target_loss": self.per_target_loss,
            "eta": self.eta,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "networks": [
                {"target": n.target, "contemp": n.contemp.tolist(), "lagged": n.lagged.tolist(),
                 "hidden_bias": n.hidden_bias.tolist(), "out_weight": n.out_weight.tolist(),
                 "out_bias": n.out_bias}
                for n in self.networks
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "NonlinearFitResult":
        nets = [TargetNetwork(n["target"], np.array(n["contemp"]), np.array(n["lagged"]),
                              np.array(n["hidden_bias"]), np.array(n["out_weight"]), float(n["out_bias"]))
                for n in obj["networks"]]
        return cls(networks=nets, W_derived=np.array(obj["W"]), A_derived=np.array(obj["A"]),
                   loss=float(obj["loss"]), eta=float(obj["eta"]), converged=bool(obj["converged"]),
                   t=int(obj["t"]), bandwidth=float(obj["bandwidth"]),
                   per_target_loss=list(obj.get("per_target_loss", [])),
                   outer_iterations=int(obj.get("outer_iterations", 0)),
                   kernel=obj.get("kernel", "epanechnikov"))


def nonlinear_objective_and_gradient(nets: list[TargetNetwork], lagged: LaggedView, weights: np.ndarray,
                                     cfg: SolverConfig, rho: float, alpha: float):
    """Augmented objective over all networks and its gradient as NetworkParams."""
    d = lagged.d
    if len(nets) != d or any(n.d != d or n.lagged.shape[1] != lagged.rows.shape[1] for n in nets):
        raise ValueError("networks do not match the data dimensions")
    if any(n.m != cfg.hidden_units for n in nets):
        cfg = _with_hidden(cfg, nets[0].m)
    w = aligned_weights(weights, lagged)
    problem = _NetworkProblem(lagged, w, cfg, rho=rho, alpha=alpha)
    params = NetworkParams.from_networks(nets)
    value, grad = problem.evaluate(problem.layout.pack(params))
    return value, problem.layout.unpack(grad)


def _with_hidden(cfg: SolverConfig, m: int) -> SolverConfig:
    from dataclasses import replace
    return replace(cfg, hidden_units=m)


def init_params(d: int, p: int, cfg: SolverConfig) -> NetworkParams:
    if cfg.seed is None:
        raise FitError("the nonlinear model needs an explicit seed")
    layout = _NetworkLayout(d, p, cfg.hidden_units)
    rng = np.random.default_rng(cfg.seed)
    return layout.unpack(rng.uniform(-0.1, 0.1, size=layout.size))


def fit_weighted_nonlinear(lagged: LaggedView, weights: np.ndarray, cfg: SolverConfig,
                           t: int = 0, bandwidth: float = float("nan"),
                           kernel: str = "custom") -> NonlinearFitResult:
    w = aligned_weights(weights, lagged)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise FitError("weights must be finite and nonnegative")
    if np.count_nonzero(w) < lagged.d:
        raise FitError(f"only {np.count_nonzero(w)} time points carry weight; "
                       f"need at least d={lagged.d} (increase the bandwidth)")
    problem = _NetworkProblem(lagged, w, cfg)
    z0 = problem.layout.pack(init_params(lagged.d, lagged.rows.shape[1], cfg))
    z, eta, outer, history = augmented_lagrangian(problem, z0, cfg, problem.eta)
    params = problem.layout.unpack(z)
    W, A = params.adjacency()
    per_target, _, _ = problem.terms(params)
    penalty = cfg.lambda1 * W.sum() + cfg.lambda2 * A.sum()
    return NonlinearFitResult(
        networks=params.networks(), W_derived=W, A_derived=A,
        loss=float(per_target.sum() + penalty), eta=float(eta),
        converged=bool(eta < cfg.eta_tol), t=t, bandwidth=bandwidth,
        per_target_loss=per_target.tolist(), outer_iterations=outer, kernel=kernel,
        history=history,
    )


def fit_at_nonlinear(t: int, lagged: LaggedView, kernel: KernelSpec, cfg: SolverConfig) -> NonlinearFitResult:
    lagged.row_of(t)
    weights = local_weights(kernel, t, lagged.T)
    return fit_weighted_nonlinear(lagged, weights, cfg, t=t, bandwidth=kernel.bandwidth, kernel=kernel.family)


def threshold_adjacency(result: NonlinearFitResult, tau: float) -> tuple[np.ndarray, np.ndarray]:
    W = np.where(result.W_derived < tau, 0.0, result.W_derived)
    A = np.where(result.A_derived < tau, 0.0, result.A_derived)
    return W, A
