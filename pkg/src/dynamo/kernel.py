"""Localizing kernels and the per-time-point observation weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("epanechnikov", "gaussian", "boxcar")
_SQRT_2PI = np.sqrt(2.0 * np.pi)


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    family: str = "epanechnikov"
    bandwidth: float = 0.5

    def __post_init__(self):
        family = self.family.lower()
        if family not in FAMILIES:
            raise KernelError(f"unknown kernel {self.family!r}; choose from {FAMILIES}")
        object.__setattr__(self, "family", family)
        h = float(self.bandwidth)
        if not np.isfinite(h) or h <= 0:
            raise KernelError(f"bandwidth must be positive, got {self.bandwidth}")
        if family != "gaussian" and h > 1:
            raise KernelError(f"{family} bandwidth must lie in (0, 1], got {h}")
        object.__setattr__(self, "bandwidth", h)


def evaluate(spec: KernelSpec, u):
    """K(u) for the kernel family; works elementwise on arrays."""
    u = np.asarray(u, dtype=float)
    if spec.family == "epanechnikov":
        out = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    elif spec.family == "gaussian":
        out = np.exp(-0.5 * u * u) / _SQRT_2PI
    else:
        out = np.where(np.abs(u) <= 1.0, 0.5, 0.0)
    return out if out.ndim else float(out)


def local_weights(spec: KernelSpec, t: int, T: int) -> np.ndarray:
    """Weights ``K((tau_l - tau_t) / h) / (T h)`` for l = 1..T.

    No renormalization is applied, so weighted sums keep the ``1/(Th)``
    scaling of the local loss.  The boxcar at h = 1 gives every point
    ``1/(2T)``, half the uniform ``1/T`` weight of a stationary fit.
    """
    if not 1 <= t <= T:
        raise KernelError(f"time index {t} outside [1, {T}]")
    h = spec.bandwidth
    # integer offsets keep u exactly +-1 at the support edge
    u = (np.arange(1, T + 1) - t) / T / h
    w = evaluate(spec, u) / (T * h)
    if not np.any(w > 0):
        raise KernelError(f"bandwidth {h} leaves no observation with positive weight; use a larger h")
    return w
