"""Forward-mode second-order jets for functions on a tangent-bundle chart.

A :class:`Jet` carries a value, its gradient with respect to ``N`` seeded
variables, and a *partial* Hessian: only the rows belonging to a contiguous
block of "second-order" variables are propagated.  For a function
``f(x, u)`` on a chart of ``TQ`` the velocity block ``u`` is second order,
which yields exactly the ``(u, u)`` and ``(u, x)`` blocks; the ``(x, x)``
block is never formed.

Evaluators are ordinary Python callables written with ``+ - * / **`` and
the primitives exported here (:func:`sin`, :func:`cos`, :func:`exp`,
:func:`log`, :func:`sqrt`).  The same callable runs on plain floats for
cheap value-only evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, EvaluationError


def _finite(v: float) -> float:
    if not math.isfinite(v):
        raise EvaluationError(f"non-finite intermediate value {v!r}")
    return v


class Jet:
    """Truncated second-order Taylor number.

    ``hess[a, j]`` holds the mixed partial with respect to second-order
    variable ``lo + a`` and variable ``j``.  Instances are never mutated.
    """

    __slots__ = ("val", "grad", "hess", "lo")

    def __init__(self, val: float, grad: np.ndarray, hess: np.ndarray, lo: int):
        self.val = val
        self.grad = grad
        self.hess = hess
        self.lo = lo

    @property
    def _g2(self) -> np.ndarray:
        return self.grad[self.lo:self.lo + self.hess.shape[0]]

    def _chain(self, f0: float, f1: float, f2: float) -> "Jet":
        _finite(f0)
        _finite(f1)
        _finite(f2)
        hess = f1 * self.hess
        if f2 != 0.0:
            hess = hess + f2 * self._g2[:, None] * self.grad
        return Jet(f0, f1 * self.grad, hess, self.lo)

    @classmethod
    def compose(cls, value: float, partials: Sequence[float], inputs: Sequence) -> "Jet | float":
        """First-order chain rule ``value + sum_i partials[i] * d(inputs[i])``.

        Curvature of the outer map is dropped; callers use this only where
        that curvature is multiplied by an identically vanishing factor.
        """
        jets = [(p, z) for p, z in zip(partials, inputs) if isinstance(z, Jet)]
        if not jets:
            return value
        _, z0 = jets[0]
        grad = np.zeros_like(z0.grad)
        hess = np.zeros_like(z0.hess)
        for p, z in jets:
            grad = grad + p * z.grad
            hess = hess + p * z.hess
        return cls(_finite(value), grad, hess, z0.lo)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(_finite(self.val + other.val), self.grad + other.grad, self.hess + other.hess, self.lo)
        return Jet(_finite(self.val + other), self.grad, self.hess, self.lo)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess, self.lo)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(_finite(self.val - other.val), self.grad - other.grad, self.hess - other.hess, self.lo)
        return Jet(_finite(self.val - other), self.grad, self.hess, self.lo)

    def __rsub__(self, other):
        return Jet(_finite(other - self.val), -self.grad, -self.hess, self.lo)

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self, other
            hess = (a.val * b.hess + b.val * a.hess
                    + a._g2[:, None] * b.grad + b._g2[:, None] * a.grad)
            return Jet(_finite(a.val * b.val), a.val * b.grad + b.val * a.grad, hess, a.lo)
        return Jet(_finite(self.val * other), other * self.grad, other * self.hess, self.lo)

    __rmul__ = __mul__

    def _reciprocal(self) -> "Jet":
        v = self.val
        if v == 0.0:
            raise EvaluationError("division by zero in evaluator")
        inv = 1.0 / v
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other._reciprocal()
        if other == 0:
            raise EvaluationError("division by zero in evaluator")
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return other * self._reciprocal()

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        v = self.val
        if p == 0:
            return 1.0
        if p == 1:
            return self
        if p == 2:
            return self._chain(v * v, 2.0 * v, 2.0)
        try:
            f0 = v ** p
            f1 = p * v ** (p - 1)
            f2 = p * (p - 1) * v ** (p - 2)
        except (ZeroDivisionError, OverflowError) as exc:
            raise EvaluationError(f"pole in power {v!r}**{p!r}") from exc
        if isinstance(f0, complex):
            raise EvaluationError(f"negative base {v!r} for fractional power {p!r}")
        return self._chain(f0, f1, f2)

    def __rpow__(self, base):
        if base <= 0:
            raise EvaluationError(f"non-positive base {base!r} for jet exponent")
        return exp(self * math.log(base))

    def __float__(self) -> float:
        return float(self.val)

    def __repr__(self) -> str:
        return f"Jet({self.val!r}, grad={self.grad!r})"


def value_of(z) -> float:
    """Plain float value of a jet or number."""
    return z.val if isinstance(z, Jet) else float(z)


def _unary(name: str, fn, d1, d2):
    def prim(a):
        if isinstance(a, Jet):
            try:
                f0 = fn(a.val)
                return a._chain(f0, d1(a.val, f0), d2(a.val, f0))
            except (ValueError, ZeroDivisionError, OverflowError) as exc:
                raise EvaluationError(f"{name}({a.val!r}) is undefined") from exc
        try:
            return _finite(fn(a))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvaluationError(f"{name}({a!r}) is undefined") from exc

    prim.__name__ = name
    prim.__doc__ = f"Jet-aware ``{name}``; falls back to :mod:`math` on floats."
    return prim


sin = _unary("sin", math.sin, lambda v, f: math.cos(v), lambda v, f: -f)
cos = _unary("cos", math.cos, lambda v, f: -math.sin(v), lambda v, f: -f)
exp = _unary("exp", math.exp, lambda v, f: f, lambda v, f: f)
log = _unary("log", math.log, lambda v, f: 1.0 / v, lambda v, f: -1.0 / (v * v))
sqrt = _unary("sqrt", math.sqrt, lambda v, f: 0.5 / f, lambda v, f: -0.25 / (f * f * f))


def seed(values: Sequence[float], offset: int, n_total: int, so_lo: int, so_size: int) -> list[Jet]:
    """Independent-variable jets ``values[i]`` placed at index ``offset + i``."""
    zero_h = np.zeros((so_size, n_total))
    out = []
    for i, v in enumerate(values):
        g = np.zeros(n_total)
        g[offset + i] = 1.0
        out.append(Jet(_finite(float(v)), g, zero_h, so_lo))
    return out


@dataclass(frozen=True)
class Jet2:
    """Value and derivative blocks of a scalar function on a chart of ``TQ``.

    ``d_uu[i, j] = d2f/du_i du_j``; ``d_ux[i, j] = d2f/du_i dx_j``.
    """

    value: float
    d_x: np.ndarray
    d_u: np.ndarray
    d_uu: np.ndarray
    d_ux: np.ndarray


class ScalarOnTQ:
    """A scalar function ``f(x, u)`` on a chart of a tangent bundle.

    ``fn`` receives two sequences (chart coordinates and fibre coordinates)
    whose entries are floats or :class:`Jet` objects and must be built from
    the jet primitives.  ``fibre_dim`` defaults to ``dim``; it differs only
    for functions on reduced spaces.
    """

    def __init__(self, dim: int, fn: Callable, fibre_dim: int | None = None, label: str = ""):
        if dim < 0 or (fibre_dim is not None and fibre_dim < 0):
            raise DimensionError("dimensions must be non-negative")
        self.dim = int(dim)
        self.fibre_dim = int(dim if fibre_dim is None else fibre_dim)
        self.fn = fn
        self.label = label

    def __call__(self, x: Sequence[float], u: Sequence[float]) -> float:
        self._check(x, u)
        try:
            return _finite(float(value_of(self.fn(tuple(float(c) for c in x), tuple(float(c) for c in u)))))
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvaluationError(str(exc)) from exc

    def _check(self, x, u) -> None:
        if len(x) != self.dim or len(u) != self.fibre_dim:
            raise DimensionError(
                f"expected x of length {self.dim} and u of length {self.fibre_dim}, got {len(x)} and {len(u)}")

    def _combine(self, other, op, label):
        if isinstance(other, ScalarOnTQ):
            if (other.dim, other.fibre_dim) != (self.dim, self.fibre_dim):
                raise DimensionError("cannot combine functions on different charts")
            return ScalarOnTQ(self.dim, lambda x, u: op(self.fn(x, u), other.fn(x, u)), self.fibre_dim, label)
        return ScalarOnTQ(self.dim, lambda x, u: op(self.fn(x, u), other), self.fibre_dim, label)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b, f"({self.label}+)")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b, f"({self.label}-)")

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b, f"({self.label}*)")

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarOnTQ(self.dim, lambda x, u: -self.fn(x, u), self.fibre_dim, f"-{self.label}")


def eval_jet(f: ScalarOnTQ, x: Sequence[float], u: Sequence[float]) -> Jet2:
    """Value, gradient and the ``(u,u)``/``(u,x)`` Hessian blocks of ``f`` at ``(x, u)``."""
    f._check(x, u)
    nx, nu = f.dim, f.fibre_dim
    N = nx + nu
    xs = seed(x, 0, N, nx, nu)
    us = seed(u, nx, N, nx, nu)
    try:
        out = f.fn(tuple(xs), tuple(us))
    except (ZeroDivisionError, ValueError, OverflowError) as exc:
        raise EvaluationError(str(exc)) from exc
    if not isinstance(out, Jet):
        _finite(float(out))
        return Jet2(float(out), np.zeros(nx), np.zeros(nu), np.zeros((nu, nu)), np.zeros((nu, nx)))
    if not (np.all(np.isfinite(out.grad)) and np.all(np.isfinite(out.hess))):
        raise EvaluationError("non-finite derivative")
    return Jet2(float(out.val), out.grad[:nx].copy(), out.grad[nx:].copy(),
                out.hess[:, nx:].copy(), out.hess[:, :nx].copy())


def fd_check(f: ScalarOnTQ, x: Sequence[float], u: Sequence[float], h: float = 1e-5) -> float:
    """Largest discrepancy between jet derivatives and central differences.

    First derivatives are compared with central differences of the value;
    the ``(u,u)`` and ``(u,x)`` blocks with central differences of the jet
    gradient ``d_u``.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    j = eval_jet(f, x, u)
    worst = 0.0
    for k in range(f.dim):
        e = np.zeros(f.dim)
        e[k] = h
        fd = (f(x + e, u) - f(x - e, u)) / (2 * h)
        worst = max(worst, abs(fd - j.d_x[k]))
        fd_col = (eval_jet(f, x + e, u).d_u - eval_jet(f, x - e, u).d_u) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd_col - j.d_ux[:, k]), initial=0.0)))
    for k in range(f.fibre_dim):
        e = np.zeros(f.fibre_dim)
        e[k] = h
        fd = (f(x, u + e) - f(x, u - e)) / (2 * h)
        worst = max(worst, abs(fd - j.d_u[k]))
        fd_col = (eval_jet(f, x, u + e).d_u - eval_jet(f, x, u - e).d_u) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd_col - j.d_uu[:, k]), initial=0.0)))
    return worst
