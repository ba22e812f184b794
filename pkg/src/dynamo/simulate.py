"""Synthetic non-stationary causal processes with known per-time graphs.

Base supports come from Erdos-Renyi graphs.  Every supported edge carries a
phase offset and its weight at time t is

    w(t) = cos((offset + t / Phi) * pi),  kept only where it exceeds gamma,

so edges fade in and out and the graph itself changes over time.  All
randomness comes from numpy's PCG64 generator seeded explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .data import TimeSeriesMatrix

MODES = ("linear", "nonlinear")
NOISES = ("gaussian", "uniform")
STABLE_RADIUS = 0.95


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_er_dag(d: int, mean_degree: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean d x d DAG: ER skeleton oriented along a random node order."""
    if not 0 < mean_degree < d:
        raise ValueError(f"mean degree must lie in (0, {d}), got {mean_degree}")
    p = min(1.0, mean_degree / (d - 1))
    upper = np.triu(rng.random((d, d)) < p, k=1)
    perm = rng.permutation(d)
    # node perm[i] precedes perm[j] whenever i < j
    B = np.zeros((d, d), dtype=bool)
    B[np.ix_(perm, perm)] = upper
    return B


def sample_lagged_support(d: int, L: int, mean_degree: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean (L*d) x d lag support, one independent ER bipartite slice per lag.

    A slice has 2d nodes, so ``mean_degree`` fixes the expected edge count at
    ``d * mean_degree`` and each entry is on with probability mean_degree / d.
    """
    p = min(1.0, mean_degree / d)
    return np.vstack([rng.random((d, d)) < p for _ in range(L)])


@dataclass(frozen=True)
class GroundTruthProcess:
    d: int
    T: int
    L: int
    support_w: np.ndarray
    support_a: np.ndarray
    offset_w: np.ndarray
    offset_a: np.ndarray
    gamma: float = 0.05
    phi: float = 250.0
    mode: str = "linear"
    noise: str = "gaussian"
    seed: int = 0
    lag_damping: np.ndarray | None = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.phi <= 0:
            raise ValueError(f"Phi must be positive, got {self.phi}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.noise not in NOISES:
            raise ValueError(f"noise must be one of {NOISES}")
        if self.lag_damping is not None:
            damp = np.asarray(self.lag_damping, dtype=float)
            if damp.shape != (self.T,) or np.any(damp <= 0) or np.any(damp > 1):
                raise ValueError("lag_damping must hold T factors in (0, 1]")
            object.__setattr__(self, "lag_damping", damp)
        if self.support_w.shape != (self.d, self.d) or self.support_a.shape != (self.L * self.d, self.d):
            raise ValueError("support shapes do not match d and L")

    def topological_order(self) -> list[int]:
        return topological_order(self.support_w)

    def to_dict(self) -> dict:
        return {
            "d": self.d, "T": self.T, "L": self.L,
            "gamma": self.gamma, "phi": self.phi,
            "mode": self.mode, "noise": self.noise, "seed": self.seed,
            "lag_damping": None if self.lag_damping is None else self.lag_damping.tolist(),
            "support_w": self.support_w.astype(int).tolist(),
            "support_a": self.support_a.astype(int).tolist(),
            "offset_w": self.offset_w.tolist(),
            "offset_a": self.offset_a.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GroundTruthProcess":
        return cls(
            d=int(obj["d"]), T=int(obj["T"]), L=int(obj["L"]),
            support_w=np.array(obj["support_w"], dtype=bool),
            support_a=np.array(obj["support_a"], dtype=bool).reshape(int(obj["L"]) * int(obj["d"]), int(obj["d"])),
            offset_w=np.array(obj["offset_w"], dtype=float),
            offset_a=np.array(obj["offset_a"], dtype=float).reshape(int(obj["L"]) * int(obj["d"]), int(obj["d"])),
            gamma=float(obj["gamma"]), phi=float(obj["phi"]),
            mode=obj["mode"], noise=obj["noise"], seed=int(obj["seed"]),
            lag_damping=None if obj.get("lag_damping") is None else np.array(obj["lag_damping"]),
        )


def default_phi(T: int, mode: str, speed: str = "default") -> float:
    """Changing-speed constant: 0.5T / 0.9T normally, 0.3T / 0.5T when fast."""
    table = {("linear", "default"): 0.5, ("nonlinear", "default"): 0.9,
             ("linear", "fast"): 0.3, ("nonlinear", "fast"): 0.5}
    try:
        return table[(mode, speed)] * T
    except KeyError:
        raise ValueError(f"unknown mode/speed {mode!r}/{speed!r}") from None


def make_process(d: int = 5, T: int = 500, L: int = 1, mode: str = "linear",
                 noise: str = "gaussian", seed: int = 0, gamma: float = 0.05,
                 phi: float | None = None, speed: str = "default",
                 w_degree: float = 4.0, a_degree: float = 2.0,
                 stabilize: bool = True) -> GroundTruthProcess:
    rng = make_rng(seed)
    # clip so small d still yields a valid ER probability (d=5 with degree 4 is complete)
    S_W = sample_er_dag(d, min(w_degree, d - 1e-9), rng)
    S_A = sample_lagged_support(d, L, a_degree, rng)
    off_w = np.where(S_W, rng.random((d, d)), 0.0)
    off_a = np.where(S_A, rng.random((L * d, d)), 0.0)
    gt = GroundTruthProcess(
        d=d, T=T, L=L, support_w=S_W, support_a=S_A, offset_w=off_w, offset_a=off_a,
        gamma=gamma, phi=default_phi(T, mode, speed) if phi is None else float(phi),
        mode=mode, noise=noise, seed=seed,
    )
    if stabilize and mode == "linear":
        gt = replace(gt, lag_damping=stabilizing_lag_damping(gt))
    return gt


def _cosine_weights(support: np.ndarray, offset: np.ndarray, t: float, phi: float,
                    gamma: float, amplitude: float = 1.0) -> np.ndarray:
    c = amplitude * np.cos((offset + t / phi) * np.pi)
    return np.where(support & (c > gamma), c, 0.0)


def weights_at_time(gt: GroundTruthProcess, t: float) -> tuple[np.ndarray, np.ndarray]:
    """True (W, A) at time t."""
    W = _cosine_weights(gt.support_w, gt.offset_w, t, gt.phi, gt.gamma)
    A = _cosine_weights(gt.support_a, gt.offset_a, t, gt.phi, gt.gamma, _damping_at(gt, t))
    return W, A


def _damping_at(gt: GroundTruthProcess, t: float) -> float:
    if gt.lag_damping is None or t != int(t) or not 1 <= t <= gt.T:
        return 1.0
    return float(gt.lag_damping[int(t) - 1])


def transition_radius(W: np.ndarray, A: np.ndarray) -> float:
    """Spectral radius of the lag companion matrix of x_t = x_t W + y_t A + e_t."""
    d = W.shape[0]
    L = A.shape[0] // d
    inv = np.linalg.inv(np.eye(d) - W)
    blocks = [(A[k * d:(k + 1) * d] @ inv).T for k in range(L)]
    C = np.zeros((L * d, L * d))
    C[:d] = np.hstack(blocks)
    if L > 1:
        C[d:, :-d] = np.eye((L - 1) * d)
    return float(np.max(np.abs(np.linalg.eigvals(C))))


def stabilizing_lag_damping(gt: GroundTruthProcess, target: float = STABLE_RADIUS) -> np.ndarray:
    """Per-time lag amplitude in (0, 1] keeping every transition radius <= target.

    With instantaneous weights near one the lagged feedback of the linear
    process can exceed unit radius and the series diverges.  At such time
    points the lag weights are shrunk (before the gamma cut) by the largest
    factor that restores stability; elsewhere the factor is exactly 1.  All
    weights are nonnegative, so the radius is monotone in the factor and
    bisection applies.
    """
    undamped = replace(gt, lag_damping=None)
    factors = np.ones(gt.T)
    for t in range(1, gt.T + 1):
        W, _ = weights_at_time(undamped, t)
        radius_at = lambda a: transition_radius(
            W, _cosine_weights(gt.support_a, gt.offset_a, t, gt.phi, gt.gamma, a))
        r1 = radius_at(1.0)
        if r1 <= target:
            continue
        # exact for L = 1, where the radius is linear in the factor
        guess = target / r1
        if radius_at(guess) <= target and (gt.L == 1 or radius_at(min(1.0, guess * 1.01)) > target):
            factors[t - 1] = guess
            continue
        lo, hi = 0.0, 1.0
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            if radius_at(mid) <= target:
                lo = mid
            else:
                hi = mid
        factors[t - 1] = max(lo, 1e-12)
    return factors


def topological_order(support: np.ndarray) -> list[int]:
    B = np.asarray(support) != 0
    indeg = B.sum(axis=0)
    order = []
    ready = sorted(np.flatnonzero(indeg == 0).tolist())
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in np.flatnonzero(B[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(int(j))
        ready.sort()
    if len(order) != B.shape[0]:
        raise ValueError("support contains a cycle")
    return order


def _noise(gt: GroundTruthProcess, rng: np.random.Generator) -> np.ndarray:
    if gt.noise == "gaussian":
        return rng.standard_normal((gt.T, gt.d))
    return rng.uniform(-0.5, 0.5, size=(gt.T, gt.d))


def generate(gt: GroundTruthProcess, return_noise: bool = False):
    """Simulate the process.

    Returns the T x d series and a list of T ``(W, A)`` pairs.  The first L
    rows are pure noise.  With ``return_noise`` the drawn noise matrix is
    appended to the result.
    """
    rng = make_rng(gt.seed + 1_000_003)
    eps = _noise(gt, rng)
    d, L, T = gt.d, gt.L, gt.T
    X = np.zeros((T, d))
    X[:L] = eps[:L]
    order = gt.topological_order()
    graphs = [weights_at_time(gt, t) for t in range(1, T + 1)]
    for k in range(L, T):
        W, A = graphs[k]
        y = X[k - L:k][::-1].ravel()
        row = X[k]
        for j in order:
            p = row @ W[:, j] + y @ A[:, j]
            if gt.mode == "linear":
                row[j] = p + eps[k, j]
            else:
                row[j] = np.tanh(p) + expit(p) + eps[k, j]
    series = TimeSeriesMatrix(X, tuple(f"v{i + 1}" for i in range(d)))
    if return_noise:
        return series, graphs, eps
    return series, graphs
