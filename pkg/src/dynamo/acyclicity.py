"""Trace-exponential acyclicity measure and a small matrix exponential."""
from __future__ import annotations

import numpy as np

TAYLOR_ORDER = 12
_SCALE_TARGET = 0.5


def matrix_exp(M: np.ndarray) -> np.ndarray:
    """exp(M) by scaling and squaring a degree-12 Taylor polynomial.

    The input is scaled by 2**-s so its 1-norm is at most 0.5, the truncated
    series is summed in Horner form and the result squared s times.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix_exp input has non-finite entries")
    n = M.shape[0]
    norm = np.abs(M).sum(axis=0).max() if n else 0.0
    s = 0
    if norm > _SCALE_TARGET:
        s = int(np.ceil(np.log2(norm / _SCALE_TARGET)))
    A = M / (2.0 ** s)
    eye = np.eye(n)
    E = eye.copy()
    for k in range(TAYLOR_ORDER, 0, -1):
        E = eye + (A @ E) / k
    with np.errstate(over="raise", invalid="raise"):
        try:
            for _ in range(s):
                E = E @ E
        except FloatingPointError:
            raise OverflowError("matrix exponential overflowed") from None
    if not np.all(np.isfinite(E)):
        raise OverflowError("matrix exponential overflowed")
    return E


def _check_square(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {W.shape}")
    return W


def h_value(W: np.ndarray) -> float:
    """tr(exp(W * W)) - d, zero exactly when the support of W is acyclic."""
    W = _check_square(W)
    return float(np.trace(matrix_exp(W * W)) - W.shape[0])


def h_gradient(W: np.ndarray) -> np.ndarray:
    W = _check_square(W)
    return matrix_exp(W * W).T * (2.0 * W)


def h_value_and_gradient(W: np.ndarray) -> tuple[float, np.ndarray]:
    W = _check_square(W)
    E = matrix_exp(W * W)
    return float(np.trace(E) - W.shape[0]), E.T * (2.0 * W)


def h_from_squares(S: np.ndarray) -> tuple[float, np.ndarray]:
    """H evaluated on an already-squared nonnegative matrix S = W * W.

    Returns the value and dH/dS = exp(S).T, used when W is itself a norm.
    """
    S = _check_square(S)
    E = matrix_exp(S)
    return float(np.trace(E) - S.shape[0]), E.T


def has_cycle(adjacency: np.ndarray) -> bool:
    """Depth-first search for a directed cycle in the nonzero pattern."""
    B = np.asarray(adjacency) != 0
    n = B.shape[0]
    state = [0] * n  # 0 unvisited, 1 on stack, 2 done
    for root in range(n):
        if state[root]:
            continue
        stack = [(root, iter(np.flatnonzero(B[root])))]
        state[root] = 1
        while stack:
            node, children = stack[-1]
            for child in children:
                if state[child] == 1:
                    return True
                if state[child] == 0:
                    state[child] = 1
                    stack.append((child, iter(np.flatnonzero(B[child]))))
                    break
            else:
                state[node] = 2
                stack.pop()
    return False
