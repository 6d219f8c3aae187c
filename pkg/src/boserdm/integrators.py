"""Fixed-step classical Runge-Kutta with step-halving refinement."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError

Rhs = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(f: Rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + h / 2, y + (h / 2) * k1)
    k3 = f(t + h / 2, y + (h / 2) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_interval(f: Rhs, t0: float, y0: np.ndarray, t1: float, steps: int) -> np.ndarray:
    h = (t1 - t0) / steps
    y = y0
    for k in range(steps):
        y = rk4_step(f, t0 + k * h, y, h)
    return y


def integrate(
    f: Rhs,
    y0: np.ndarray,
    times: Sequence[float],
    max_step: float,
    tol: float | None = None,
    max_halvings: int = 12,
) -> list[np.ndarray]:
    """Integrate ``y' = f(t, y)`` and return snapshots at ``times``.

    Each output interval is covered by equal RK4 steps no longer than
    ``max_step``.  With ``tol`` set, the step count is doubled until two
    successive solutions on the interval differ by less than ``tol`` (max
    abs entry); the finer one is kept.
    """
    if max_step <= 0 or not math.isfinite(max_step):
        raise NumericalError(f"invalid step size {max_step}")
    out = [np.array(y0, dtype=complex)]
    y = out[0]
    for t0, t1 in zip(times[:-1], times[1:]):
        span = t1 - t0
        steps = max(1, math.ceil(abs(span) / max_step - 1e-12))
        coarse = rk4_interval(f, t0, y, t1, steps)
        if tol is not None:
            for _ in range(max_halvings):
                steps *= 2
                fine = rk4_interval(f, t0, y, t1, steps)
                change = float(np.max(np.abs(fine - coarse)))
                coarse = fine
                if change < tol:
                    break
            else:
                raise NumericalError(
                    f"step halving did not converge on [{t0}, {t1}] (change {change:.3e})"
                )
        if not np.all(np.isfinite(coarse)):
            raise NumericalError(f"integration produced non-finite values at t={t1}")
        y = coarse
        out.append(y)
    return out
