"""Vector fields, anholonomic frames, brackets and lifts on a chart of ``Q``.

Index conventions used throughout the package:

* ``E[i, j] = X_i^j`` is the frame matrix (row ``i`` is the field ``X_i``),
  so natural velocities are ``u = E.T @ v``.
* ``J[i, j, k] = dX_i^j / dx^k`` stacks the field Jacobians.
* ``R[i, j, k]`` is the coefficient of ``X_k`` in ``[X_i, X_j]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import DimensionError, EvaluationError, SingularFrameError
from .jets import Jet, ScalarOnTQ, eval_jet, seed, value_of

DET_TOL = 1e-10


class VectorField:
    """A vector field ``X = X^j d/dx^j`` given by closed-form coefficients.

    ``fn(x)`` returns the ``dim`` components; it must use jet primitives so
    that Jacobians (and Hessians, for Jacobi checks) come out exact.
    """

    def __init__(self, dim: int, fn: Callable, label: str = ""):
        self.dim = int(dim)
        self.fn = fn
        self.label = label

    def _raw(self, xs) -> list:
        comps = list(self.fn(xs))
        if len(comps) != self.dim:
            raise DimensionError(f"field {self.label!r} returned {len(comps)} components, expected {self.dim}")
        return comps

    def components(self, xs: Sequence) -> list:
        """Components at ``xs`` (floats or jets), passed straight through ``fn``."""
        return self._raw(tuple(xs))

    def coeffs(self, x: Sequence[float]) -> np.ndarray:
        _check_dim(self.dim, x)
        try:
            out = np.array([value_of(c) for c in self._raw(tuple(float(c) for c in x))], dtype=float)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvaluationError(str(exc)) from exc
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"non-finite coefficients of {self.label!r}")
        return out

    def coeffs_and_jacobian(self, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        _check_dim(self.dim, x)
        n = self.dim
        comps = self._raw(tuple(seed(x, 0, n, 0, 0)))
        c = np.empty(n)
        J = np.zeros((n, n))
        for j, comp in enumerate(comps):
            if isinstance(comp, Jet):
                c[j] = comp.val
                J[j] = comp.grad
            else:
                c[j] = float(comp)
        return c, J

    def jacobian(self, x: Sequence[float]) -> np.ndarray:
        return self.coeffs_and_jacobian(x)[1]

    def hessian(self, x: Sequence[float]) -> np.ndarray:
        """``H[j, k, l] = d2 X^j / dx^k dx^l``."""
        _check_dim(self.dim, x)
        n = self.dim
        comps = self._raw(tuple(seed(x, 0, n, 0, n)))
        H = np.zeros((n, n, n))
        for j, comp in enumerate(comps):
            if isinstance(comp, Jet):
                H[j] = comp.hess
        return H


class BracketField(VectorField):
    """The Lie bracket ``[X, Y]`` as a field, with a jet-exact Jacobian."""

    def __init__(self, X: VectorField, Y: VectorField):
        _check_pair(X, Y)
        super().__init__(X.dim, None, f"[{X.label},{Y.label}]")
        self.X, self.Y = X, Y

    def coeffs(self, x):
        return bracket(self.X, self.Y, x)

    def coeffs_and_jacobian(self, x):
        X, JX = self.X.coeffs_and_jacobian(x)
        Y, JY = self.Y.coeffs_and_jacobian(x)
        HX = self.X.hessian(x)
        HY = self.Y.hessian(x)
        c = JY @ X - JX @ Y
        J = (JY @ JX + np.einsum("j,kjl->kl", X, HY)
             - JX @ JY - np.einsum("j,kjl->kl", Y, HX))
        return c, J

    def components(self, xs):
        raise NotImplementedError("bracket fields cannot be re-evaluated on jets")

    def hessian(self, x):
        raise NotImplementedError("bracket fields carry first derivatives only")


def _check_dim(n: int, x) -> None:
    if len(x) != n:
        raise DimensionError(f"expected a point of dimension {n}, got {len(x)}")


def _check_pair(X: VectorField, Y: VectorField) -> None:
    if X.dim != Y.dim:
        raise DimensionError(f"fields of dimension {X.dim} and {Y.dim}")


def bracket(X: VectorField, Y: VectorField, x: Sequence[float]) -> np.ndarray:
    """Components of ``[X, Y]`` at ``x``: ``X^j dY^k/dx^j - Y^j dX^k/dx^j``."""
    _check_pair(X, Y)
    cx, JX = X.coeffs_and_jacobian(x)
    cy, JY = Y.coeffs_and_jacobian(x)
    return JY @ cx - JX @ cy


def jacobi_residual(X: VectorField, Y: VectorField, Z: VectorField, x: Sequence[float]) -> float:
    """Max component of ``[[X,Y],Z] + [[Y,Z],X] + [[Z,X],Y]`` at ``x``."""
    total = (bracket(BracketField(X, Y), Z, x)
             + bracket(BracketField(Y, Z), X, x)
             + bracket(BracketField(Z, X), Y, x))
    return float(np.max(np.abs(total)))


def jacobian_fd_check(X: VectorField, x: Sequence[float], h: float = 1e-6) -> float:
    """Discrepancy between the jet Jacobian of ``X`` and central differences."""
    x = np.asarray(x, dtype=float)
    J = X.jacobian(x)
    worst = 0.0
    for k in range(X.dim):
        e = np.zeros(X.dim)
        e[k] = h
        col = (X.coeffs(x + e) - X.coeffs(x - e)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(col - J[:, k]))))
    return worst


class Frame:
    """``n`` vector fields forming a pointwise basis on an open chart region."""

    def __init__(self, fields: Sequence[VectorField], det_tol: float = DET_TOL, domain: str = ""):
        fields = tuple(fields)
        if not fields:
            raise DimensionError("a frame needs at least one field")
        n = fields[0].dim
        if len(fields) != n or any(f.dim != n for f in fields):
            raise DimensionError(f"a frame on an {n}-chart needs {n} fields of dimension {n}")
        self.fields = fields
        self.n = n
        self.det_tol = det_tol
        self.domain = domain

    @property
    def labels(self) -> list[str]:
        return [f.label or str(i) for i, f in enumerate(self.fields)]

    def _check_det(self, E: np.ndarray, x) -> None:
        d = np.linalg.det(E)
        if not abs(d) > self.det_tol:
            raise SingularFrameError(f"frame matrix has |det|={abs(d):.3e} at x={list(map(float, x))}")

    def matrix(self, x: Sequence[float]) -> np.ndarray:
        _check_dim(self.n, x)
        E = np.array([f.coeffs(x) for f in self.fields])
        self._check_det(E, x)
        return E

    def matrix_and_jacobians(self, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        _check_dim(self.n, x)
        pairs = [f.coeffs_and_jacobian(x) for f in self.fields]
        E = np.array([p[0] for p in pairs])
        self._check_det(E, x)
        return E, np.array([p[1] for p in pairs])


@dataclass(frozen=True)
class AdaptedFrame:
    """A frame whose first ``m`` fields span the constraint distribution."""

    frame: Frame
    m: int

    def __post_init__(self):
        if not 1 <= self.m <= self.frame.n:
            raise DimensionError(f"adapted rank m={self.m} outside [1, {self.frame.n}]")

    @property
    def n(self) -> int:
        return self.frame.n


def structure_functions(F: Frame, x: Sequence[float]) -> np.ndarray:
    """Object of anholonomity ``R[i, j, k]`` with ``[X_i, X_j] = R[i, j, k] X_k``."""
    E, J = F.matrix_and_jacobians(x)
    n = F.n
    R = np.zeros((n, n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if not pairs:
        return R
    # [X_i, X_j]^l = J_j[l, k] X_i^k - J_i[l, k] X_j^k
    B = np.array([J[j] @ E[i] - J[i] @ E[j] for i, j in pairs]).T
    coeffs = linalg.solve(E.T, B, what="frame matrix", error=SingularFrameError)
    for col, (i, j) in enumerate(pairs):
        R[i, j] = coeffs[:, col]
        R[j, i] = -coeffs[:, col]
    return R


def quasi_from_natural(F: Frame, x: Sequence[float], u: Sequence[float]) -> np.ndarray:
    """Quasi-velocities ``v`` with ``u^j = v^i X_i^j(x)``."""
    _check_dim(F.n, u)
    E = F.matrix(x)
    return linalg.solve(E.T, np.asarray(u, dtype=float), what="frame matrix", error=SingularFrameError)


def natural_from_quasi(F: Frame, x: Sequence[float], v: Sequence[float]) -> np.ndarray:
    """Natural velocity ``u^j = v^i X_i^j(x)``."""
    _check_dim(F.n, v)
    E = np.array([f.coeffs(x) for f in F.fields])
    return E.T @ np.asarray(v, dtype=float)


def lift_apply(X: VectorField, f: ScalarOnTQ, x: Sequence[float], u: Sequence[float],
               mode: str = "complete") -> float:
    """Apply the vertical or complete lift of ``X`` to ``f`` at ``(x, u)``."""
    if X.dim != f.dim or f.dim != f.fibre_dim:
        raise DimensionError("lift requires a field and a function on the same chart")
    jet = eval_jet(f, x, u)
    if mode == "vertical":
        return float(X.coeffs(x) @ jet.d_u)
    if mode == "complete":
        c, J = X.coeffs_and_jacobian(x)
        return float(c @ jet.d_x + (J @ np.asarray(u, dtype=float)) @ jet.d_u)
    raise ValueError(f"unknown lift mode {mode!r}")


def _solve_objects(A: list[list], b: list) -> list:
    """Gaussian elimination with partial pivoting on jet-valued entries."""
    n = len(b)
    A = [row[:] for row in A]
    b = b[:]
    for col in range(n):
        p = max(range(col, n), key=lambda r: abs(value_of(A[r][col])))
        if abs(value_of(A[p][col])) <= linalg.PIVOT_TOL:
            raise SingularFrameError("singular frame matrix in quasi-velocity function")
        A[col], A[p] = A[p], A[col]
        b[col], b[p] = b[p], b[col]
        for r in range(col + 1, n):
            factor = A[r][col] / A[col][col]
            for c in range(col, n):
                A[r][c] = A[r][c] - factor * A[col][c]
            b[r] = b[r] - factor * b[col]
    out = [0.0] * n
    for r in range(n - 1, -1, -1):
        acc = b[r]
        for c in range(r + 1, n):
            acc = acc - A[r][c] * out[c]
        out[r] = acc / A[r][r]
    return out


def quasi_velocity_function(F: Frame, j: int) -> ScalarOnTQ:
    """The quasi-velocity ``v^j`` as a function of natural ``(x, u)``."""

    def fn(x, u):
        E = [F.fields[i].components(x) for i in range(F.n)]
        ET = [[E[i][k] for i in range(F.n)] for k in range(F.n)]
        return _solve_objects(ET, list(u))[j]

    return ScalarOnTQ(F.n, fn, label=f"v^{F.labels[j]}")
