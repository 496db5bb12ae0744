"""Central finite-difference gradient verification."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .errors import GradientError
from .tensor import Tensor, no_grad


def _rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    return float(err.max())


def _analytic(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    for p in params.values():
        p.grad = None
    out = loss_fn()
    if not np.all(np.isfinite(out.data)):
        raise GradientError("non-finite function value at the check point")
    if out.tape_node is not None:
        out.backward()
    grads = {}
    for name, p in params.items():
        grads[name] = p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
        p.grad = None
    return grads


def _numeric(loss_fn: Callable[[], Tensor], p: Tensor, h: float) -> np.ndarray:
    num = np.zeros_like(p.data)
    base = p.data
    with no_grad():
        for i in range(base.size):
            bumped = base.copy()
            bumped.flat[i] += h
            p.data = bumped
            fp = loss_fn().item()
            bumped = base.copy()
            bumped.flat[i] -= h
            p.data = bumped
            fm = loss_fn().item()
            if not (np.isfinite(fp) and np.isfinite(fm)):
                p.data = base
                raise GradientError(f"non-finite function value while perturbing coordinate {i}")
            num.flat[i] = (fp - fm) / (2.0 * h)
    p.data = base
    return num


def gradcheck(fn: Callable[[Tensor], Tensor], point: Tensor, h: float = 1e-5) -> float:
    """Max over coordinates of |analytic - numeric| / max(1, |analytic|) for scalar ``fn``."""
    if not point.requires_grad:
        point = Tensor(point.data, requires_grad=True)
    return gradcheck_params(lambda: fn(point), {"point": point}, h)[0]


def gradcheck_params(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor],
                     h: float = 1e-5) -> tuple[float, dict[str, float]]:
    """Check every tensor in ``params`` against a zero-argument scalar loss.

    Returns the overall max relative error and the per-parameter breakdown.
    """
    analytic = _analytic(loss_fn, params)
    per = {name: _rel_error(analytic[name], _numeric(loss_fn, p, h)) for name, p in params.items()}
    worst = max(per.values()) if per else 0.0
    return worst, per
