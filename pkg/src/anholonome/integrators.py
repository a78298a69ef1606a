"""Fixed-step explicit integrators on flat state vectors."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import AnholonomeError, DynamicsError

Rhs = Callable[[np.ndarray], np.ndarray]


def rk4_step(rhs: Rhs, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_step(rhs: Rhs, y: np.ndarray, h: float) -> np.ndarray:
    return y + h * rhs(y)


STEPPERS = {"rk4": rk4_step, "euler": euler_step}


def time_grid(h: float, T: float) -> np.ndarray:
    """Uniform grid on ``[0, T]`` whose spacing is ``h`` rounded so it divides ``T``."""
    if not h > 0:
        raise ValueError("step h must be positive")
    if T < 0:
        raise ValueError("final time T must be non-negative")
    steps = int(round(T / h))
    if T > 0 and steps == 0:
        steps = 1
    return np.linspace(0.0, T, steps + 1)


def stepper(method: str):
    try:
        return STEPPERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(STEPPERS)}") from None


def integrate_fixed(rhs: Rhs, y0: np.ndarray, times: np.ndarray, method: str = "rk4") -> np.ndarray:
    """States at every grid time; failures re-raise as :class:`DynamicsError`."""
    step = stepper(method)
    ys = np.empty((len(times), len(y0)))
    ys[0] = y0
    for k in range(1, len(times)):
        t = times[k - 1]
        try:
            y = step(rhs, ys[k - 1], times[k] - t)
        except AnholonomeError as exc:
            raise DynamicsError(str(exc), float(t)) from exc
        if not np.all(np.isfinite(y)):
            raise DynamicsError("non-finite state", float(times[k]))
        ys[k] = y
    return ys
