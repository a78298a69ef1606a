"""Lagrange-d'Alembert dynamics on the constraint submanifold in Hamel form.

States on ``C`` are stored as ``(x, v)`` with ``v`` the ``m`` quasi-velocities
along the constraint block of an adapted frame, so the constraint
``v^a = 0`` holds by construction.  The quasi-accelerations come from

    M f = X^C_a(L) - dp_a/dx . u - dp_a/du . (v^g dX_g/dx u),   p_a = X^V_a(L),

and are cross-checked by :func:`multiplier_oracle`, which solves the
classical saddle-point system in natural coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import linalg
from .errors import DimensionError, RegularityError
from .frames import AdaptedFrame, VectorField
from .integrators import integrate_fixed, time_grid
from .jets import Jet2, ScalarOnTQ, eval_jet


@dataclass(frozen=True)
class ConstrainedSystem:
    """Lagrangian ``L`` on an ``n``-chart with constraint distribution spanned by
    the first ``m`` fields of ``adapted``."""

    name: str
    L: ScalarOnTQ
    adapted: AdaptedFrame
    coord_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.L.dim != self.adapted.n or self.L.fibre_dim != self.adapted.n:
            raise DimensionError("Lagrangian and frame live on different charts")
        if not self.coord_labels:
            object.__setattr__(self, "coord_labels", tuple(f"x{j + 1}" for j in range(self.dim)))
        if len(self.coord_labels) != self.dim:
            raise DimensionError("one coordinate label per chart coordinate")

    @property
    def dim(self) -> int:
        return self.adapted.n

    @property
    def m(self) -> int:
        return self.adapted.m

    @property
    def frame(self):
        return self.adapted.frame

    @property
    def velocity_labels(self) -> list[str]:
        return self.frame.labels[: self.m]


@dataclass(frozen=True)
class CState:
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))


class _Local(NamedTuple):
    E: np.ndarray
    J: np.ndarray
    u: np.ndarray
    jet: Jet2


def _check_state(sys: ConstrainedSystem, s: CState) -> None:
    if s.x.shape != (sys.dim,) or s.v.shape != (sys.m,):
        raise DimensionError(f"state shapes {s.x.shape}, {s.v.shape} do not fit {sys.name}")


def _local(sys: ConstrainedSystem, s: CState) -> _Local:
    _check_state(sys, s)
    E, J = sys.frame.matrix_and_jacobians(s.x)
    u = E[: sys.m].T @ s.v
    return _Local(E, J, u, eval_jet(sys.L, s.x, u))


def natural_velocity(sys: ConstrainedSystem, s: CState) -> np.ndarray:
    _check_state(sys, s)
    E = np.array([f.coeffs(s.x) for f in sys.frame.fields[: sys.m]])
    return E.T @ s.v


def mass_matrix(sys: ConstrainedSystem, s: CState) -> np.ndarray:
    """``M_ab = X_a^i X_b^j d2L/du^i du^j`` at the constrained state."""
    loc = _local(sys, s)
    Xa = loc.E[: sys.m]
    M = Xa @ loc.jet.d_uu @ Xa.T
    return 0.5 * (M + M.T)


def _quasi_accelerations(sys: ConstrainedSystem, s: CState, loc: _Local) -> tuple[np.ndarray, np.ndarray]:
    m = sys.m
    Xa, Ja = loc.E[:m], loc.J[:m]
    jet, u = loc.jet, loc.u
    Ju = Ja @ u
    complete = Xa @ jet.d_x + Ju @ jet.d_u
    dp_dx = np.einsum("aik,i->ak", Ja, jet.d_u) + Xa @ jet.d_ux
    dp_du = Xa @ jet.d_uu
    drift = s.v @ Ju
    M = dp_du @ Xa.T
    b = complete - dp_dx @ u - dp_du @ drift
    f = linalg.solve(0.5 * (M + M.T), b, what=f"mass matrix of {sys.name}")
    return f, drift


def constrained_dynamics(sys: ConstrainedSystem, s: CState) -> np.ndarray:
    """Quasi-accelerations ``f^a`` of the dynamical field ``v^a X^C_a + f^a X^V_a``."""
    return _quasi_accelerations(sys, s, _local(sys, s))[0]


def natural_acceleration(sys: ConstrainedSystem, s: CState) -> np.ndarray:
    """Pushforward of :func:`constrained_dynamics` to natural accelerations ``du/dt``."""
    loc = _local(sys, s)
    f, drift = _quasi_accelerations(sys, s, loc)
    return loc.E[: sys.m].T @ f + drift


def multiplier_solve(sys: ConstrainedSystem, x: Sequence[float], u: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Natural acceleration and multipliers from the saddle-point system.

    Solves ``d/dt(dL/du) - dL/dx = A^T lam`` together with the differentiated
    constraint ``A a = -(dA/dt) u``; ``A`` holds the annihilator rows of the
    frame, i.e. the last ``n - m`` rows of the inverse frame matrix.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n, m = sys.dim, sys.m
    E, J = sys.frame.matrix_and_jacobians(x)
    jet = eval_jet(sys.L, x, u)
    W = np.linalg.inv(E)
    A = W[:, m:].T
    Edot = J @ u
    Adot = (-W @ Edot @ W)[:, m:].T
    force = jet.d_x - jet.d_ux @ u
    K = np.zeros((n + n - m, n + n - m))
    K[:n, :n] = jet.d_uu
    K[:n, n:] = -A.T
    K[n:, :n] = A
    rhs = np.concatenate([force, -Adot @ u])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise RegularityError(f"singular saddle system for {sys.name}") from exc
    return sol[:n], sol[n:]


def multiplier_oracle(sys: ConstrainedSystem, s: CState) -> np.ndarray:
    return multiplier_solve(sys, s.x, natural_velocity(sys, s))[0]


def energy(sys: ConstrainedSystem, s: CState) -> float:
    """``E = u . dL/du - L``."""
    u = natural_velocity(sys, s)
    jet = eval_jet(sys.L, s.x, u)
    return float(u @ jet.d_u - jet.value)


def energy_rate(sys: ConstrainedSystem, s: CState) -> float:
    """Derivative of the energy along the dynamical field, from jets only."""
    loc = _local(sys, s)
    f, drift = _quasi_accelerations(sys, s, loc)
    a = loc.E[: sys.m].T @ f + drift
    jet, u = loc.jet, loc.u
    dE_dx = u @ jet.d_ux - jet.d_x
    dE_du = jet.d_uu @ u
    return float(dE_dx @ u + dE_du @ a)


def vertical_momentum(sys: ConstrainedSystem, X: VectorField, s: CState) -> float:
    u = natural_velocity(sys, s)
    return float(X.coeffs(s.x) @ eval_jet(sys.L, s.x, u).d_u)


def constraint_residual(sys: ConstrainedSystem, x: Sequence[float], u: Sequence[float]) -> float:
    """Largest annihilated quasi-velocity ``|v^a|`` of a natural velocity."""
    if sys.m == sys.dim:
        return 0.0
    E = sys.frame.matrix(x)
    v = np.linalg.solve(E.T, np.asarray(u, dtype=float))
    return float(np.max(np.abs(v[sys.m:])))


@dataclass
class Trajectory:
    """Sampled solution with per-sample diagnostics.

    ``coords`` holds the configuration columns and ``velocities`` the
    quasi-velocity columns; ``momenta`` maps labels to arrays and ``extra``
    holds any further per-sample diagnostics.
    """

    times: np.ndarray
    coords: np.ndarray
    velocities: np.ndarray
    energy: np.ndarray
    coord_labels: list[str]
    velocity_labels: list[str]
    momenta: dict[str, np.ndarray] = field(default_factory=dict)
    residual: np.ndarray | None = None
    reduced: bool = False
    meta: dict = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def states(self) -> list[CState]:
        return [CState(x, v) for x, v in zip(self.coords, self.velocities)]


def integrate(sys: ConstrainedSystem, s0: CState, h: float, T: float, method: str = "rk4",
              momenta: Sequence[tuple[str, VectorField]] = ()) -> Trajectory:
    """Fixed-step integration of ``dx/dt = u(x, v)``, ``dv/dt = f(x, v)``."""
    _check_state(sys, s0)
    n, m = sys.dim, sys.m
    times = time_grid(h, T)

    def rhs(y):
        s = CState(y[:n], y[n:])
        loc = _local(sys, s)
        f, _ = _quasi_accelerations(sys, s, loc)
        return np.concatenate([loc.u, f])

    ys = integrate_fixed(rhs, np.concatenate([s0.x, s0.v]), times, method)
    states = [CState(y[:n], y[n:]) for y in ys]
    E = np.array([energy(sys, s) for s in states])
    P = {label: np.array([vertical_momentum(sys, X, s) for s in states]) for label, X in momenta}
    res = np.array([constraint_residual(sys, s.x, natural_velocity(sys, s)) for s in states])
    return Trajectory(times, ys[:, :n], ys[:, n:], E, list(sys.coord_labels), sys.velocity_labels,
                      momenta=P, residual=res, meta={"system": sys.name, "h": h, "T": T, "method": method})


def integrate_natural(sys: ConstrainedSystem, x0: Sequence[float], u0: Sequence[float], h: float, T: float,
                      method: str = "rk4") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate the multiplier formulation in natural coordinates ``(x, u)``.

    Nothing keeps this flow on ``C``; it exists to compare against the
    structural integration.
    """
    n = sys.dim
    times = time_grid(h, T)

    def rhs(y):
        a, _ = multiplier_solve(sys, y[:n], y[n:])
        return np.concatenate([y[n:], a])

    ys = integrate_fixed(rhs, np.concatenate([np.asarray(x0, float), np.asarray(u0, float)]), times, method)
    return times, ys[:, :n], ys[:, n:]
