"""Finite-difference verification of analytic gradients.

Every differentiable op in this package must agree with a central
difference at 64-bit precision.  ``gradient_check`` rebuilds the forward
graph from scratch for each probe so that op-internal caches cannot leak
between evaluations.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor

DEFAULT_STEP = 1e-5
DEFAULT_RTOL = 1e-4
DEFAULT_ATOL = 1e-7


class GradientMismatch(AssertionError):
    pass


def gradient_check(build_loss: Callable[[], Tensor],
                   tensors: Mapping[str, Tensor],
                   *,
                   step: float = DEFAULT_STEP,
                   rtol: float = DEFAULT_RTOL,
                   atol: float = DEFAULT_ATOL) -> float:
    """Compare analytic gradients of a scalar loss against finite differences.

    ``build_loss`` must construct the loss from the leaf ``tensors`` anew on
    every call (their ``.data`` is perturbed in place between calls).
    Returns the worst absolute deviation seen; raises ``GradientMismatch``
    if any entry violates ``|analytic - numeric| <= atol + rtol * max(|a|, |n|)``.
    """
    for t in tensors.values():
        t.zero_grad()
    loss = build_loss()
    if loss.data.size != 1:
        raise ValueError("gradient_check needs a scalar loss")
    loss.backward()
    analytic = {
        name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
        for name, t in tensors.items()
    }

    worst = 0.0
    for name, t in tensors.items():
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            up = float(build_loss().data)
            flat[i] = saved - step
            down = float(build_loss().data)
            flat[i] = saved
            numeric = (up - down) / (2.0 * step)
            a = float(analytic[name].reshape(-1)[i])
            err = abs(a - numeric)
            worst = max(worst, err)
            if err > atol + rtol * max(abs(a), abs(numeric)):
                raise GradientMismatch(
                    f"{name}[{i}]: analytic {a:.10g} vs numeric {numeric:.10g} "
                    f"(|diff| {err:.3g})")
    for t in tensors.values():
        t.zero_grad()
    return worst
