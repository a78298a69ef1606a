"""Symmetry reduction of invariant constrained systems in an adapted invariant frame.

The frame of the system is split into four blocks of frame indices:

* ``rho``   vertical fields inside ``D`` (they span ``S = D n V``),
* ``kappa`` transverse fields inside ``D``,
* ``c``     vertical fields outside ``D``,
* ``k``     transverse fields outside ``D``.

``vertical = rho + c`` indexes the group-valued block ("r" indices) and
``transverse = kappa + k`` the base block ("I" indices).  Reduced arrays
put lower indices first and the upper index last, matching
:func:`anholonome.frames.structure_functions`:

* ``upsilon[I, r, s]`` connection coefficients,
* ``cbar[r, s, t]``   structure constants in the moving basis,
* ``curvature[I, J, r]`` (``K``),
* ``rbase[I, J, K]``  anholonomity of the projected base frame.

The quotient is realised in a product chart: ``base_coords`` are kept,
``group_coords`` are dropped, and the section sits at ``identity``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .dynamics import (ConstrainedSystem, CState, Trajectory, _local, _quasi_accelerations,
                       constrained_dynamics)
from .errors import DimensionError, InconsistencyError, ModelError, SingularFrameError
from .frames import VectorField, bracket, lift_apply, quasi_from_natural, structure_functions
from .integrators import integrate_fixed, time_grid
from .jets import Jet, ScalarOnTQ, eval_jet, seed

ADAPTATION_TOL = 1e-8


@dataclass(frozen=True)
class GroupModel:
    """Lie algebra data of the acting group.

    ``structure_constants[r, s, t] = C^t_{rs}``; the fundamental fields obey
    ``[E_r, E_s] = -C^t_{rs} E_t``.
    """

    structure_constants: np.ndarray
    fundamental: tuple[VectorField, ...]

    def __post_init__(self):
        C = np.asarray(self.structure_constants, dtype=float)
        object.__setattr__(self, "structure_constants", C)
        object.__setattr__(self, "fundamental", tuple(self.fundamental))
        k = len(self.fundamental)
        if C.shape != (k, k, k):
            raise ModelError(f"structure constants must have shape {(k, k, k)}, got {C.shape}")
        if np.max(np.abs(C + C.transpose(1, 0, 2)), initial=0.0) > 1e-12:
            raise ModelError("structure constants are not antisymmetric")
        if self.jacobi_residual() > 1e-12:
            raise ModelError("structure constants violate the Jacobi identity")

    @property
    def k(self) -> int:
        return len(self.fundamental)

    @property
    def labels(self) -> list[str]:
        return [f.label or f"E{r + 1}" for r, f in enumerate(self.fundamental)]

    def jacobi_residual(self) -> float:
        C = self.structure_constants
        # C^u_{rs} C^w_{ut} + cyclic(r, s, t)
        t1 = np.einsum("rsu,utw->rstw", C, C)
        total = t1 + t1.transpose(1, 2, 0, 3) + t1.transpose(2, 0, 1, 3)
        return float(np.max(np.abs(total), initial=0.0))

    def bracket_residual(self, x: Sequence[float]) -> float:
        """Max deviation of ``[E_r, E_s] + C^t_{rs} E_t`` from zero at ``x``."""
        coeffs = np.array([E.coeffs(x) for E in self.fundamental])
        worst = 0.0
        for r in range(self.k):
            for s in range(self.k):
                lhs = bracket(self.fundamental[r], self.fundamental[s], x)
                worst = max(worst, float(np.max(np.abs(lhs + self.structure_constants[r, s] @ coeffs))))
        return worst


@dataclass(frozen=True)
class InvariantFrameSplit:
    """Invariant adapted frame of ``system`` split into the four blocks.

    ``vertical_coeffs(xs)`` returns the ``k x k`` matrix ``X_r^s`` with
    ``X_r = X_r^s E_s`` for ``r`` in ``rho + c`` (row order), written with
    jet primitives.
    """

    system: ConstrainedSystem
    group: GroupModel
    rho: tuple[int, ...]
    kappa: tuple[int, ...]
    c: tuple[int, ...]
    k: tuple[int, ...]
    vertical_coeffs: Callable
    base_coords: tuple[int, ...]
    group_coords: tuple[int, ...]
    identity: tuple[float, ...] = ()
    domain: Callable[[np.ndarray], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("rho", "kappa", "c", "k", "base_coords", "group_coords"):
            object.__setattr__(self, name, tuple(int(i) for i in getattr(self, name)))
        if not self.identity:
            object.__setattr__(self, "identity", (0.0,) * len(self.group_coords))
        n, m, kg = self.system.dim, self.system.m, self.group.k
        if len(self.rho) + len(self.c) != kg:
            raise ModelError(f"|rho|+|c| = {len(self.rho) + len(self.c)} but the group has dimension {kg}")
        if sorted(self.rho + self.kappa) != list(range(m)):
            raise ModelError("rho and kappa must partition the constraint block 0..m-1")
        if sorted(self.c + self.k) != list(range(m, n)):
            raise ModelError("c and k must partition the complement block m..n-1")
        if sorted(self.base_coords + self.group_coords) != list(range(n)):
            raise ModelError("base and group coordinates must partition the chart")
        if len(self.base_coords) != len(self.transverse):
            raise ModelError("base dimension must equal the number of transverse fields")
        if len(self.identity) != len(self.group_coords):
            raise ModelError("one identity value per group coordinate")
        if any(E.dim != n for E in self.group.fundamental):
            raise DimensionError("fundamental fields live on a different chart")

    @property
    def vertical(self) -> tuple[int, ...]:
        return self.rho + self.c

    @property
    def transverse(self) -> tuple[int, ...]:
        return self.kappa + self.k

    @property
    def base_dim(self) -> int:
        return len(self.base_coords)

    def vertical_matrix(self, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """``Xv[r, s] = X_r^s`` and ``dXv[r, s, l] = d X_r^s / dx^l`` at ``x``."""
        n, kg = self.system.dim, self.group.k
        rows = self.vertical_coeffs(tuple(seed(x, 0, n, 0, 0)))
        Xv = np.zeros((kg, kg))
        dXv = np.zeros((kg, kg, n))
        if len(rows) != kg or any(len(r) != kg for r in rows):
            raise DimensionError(f"vertical coefficients must be {kg}x{kg}")
        for r, row in enumerate(rows):
            for s, entry in enumerate(row):
                if isinstance(entry, Jet):
                    Xv[r, s] = entry.val
                    dXv[r, s] = entry.grad
                else:
                    Xv[r, s] = float(entry)
        return Xv, dXv

    def section(self, base: Sequence) -> list:
        """Full chart point over ``base`` (floats or jets) with group coordinates at identity."""
        xs: list = [0.0] * self.system.dim
        for j, b in zip(self.base_coords, base):
            xs[j] = b
        for j, g in zip(self.group_coords, self.identity):
            xs[j] = g
        return xs

    def in_domain(self, x: np.ndarray) -> bool:
        return True if self.domain is None else bool(self.domain(x))

    @cached_property
    def reduced_lagrangian(self) -> ScalarOnTQ:
        """``l(x^I, v)``: the Lagrangian along the section in full quasi-velocities."""
        sys = self.system
        n = sys.dim
        fields = sys.frame.fields

        def fn(base, v):
            xs = tuple(self.section(base))
            E = [f.components(xs) for f in fields]
            u = []
            for j in range(n):
                acc = 0.0
                for i in range(n):
                    if isinstance(v[i], Jet) or v[i] != 0.0:
                        acc = acc + v[i] * E[i][j]
                u.append(acc)
            return sys.L.fn(xs, tuple(u))

        return ScalarOnTQ(self.base_dim, fn, fibre_dim=n, label=f"l[{sys.name}]")


@dataclass(frozen=True)
class ReducedState:
    base: np.ndarray
    v_rho: np.ndarray
    v_kappa: np.ndarray

    def __post_init__(self):
        for name in ("base", "v_rho", "v_kappa"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.base, self.v_rho, self.v_kappa])


@dataclass(frozen=True)
class ReducedCoefficients:
    upsilon: np.ndarray
    cbar: np.ndarray
    curvature: np.ndarray
    rbase: np.ndarray


def _vertical_inverse(Xv: np.ndarray) -> np.ndarray:
    if Xv.shape[0] == 0:
        return Xv.copy()
    return linalg.solve(Xv, np.eye(Xv.shape[0]), what="vertical coefficient matrix", error=SingularFrameError)


def _coefficients(split: InvariantFrameSplit, x: np.ndarray) -> tuple[ReducedCoefficients, np.ndarray]:
    sys, group = split.system, split.group
    E, J = sys.frame.matrix_and_jacobians(x)
    Xv, dXv = split.vertical_matrix(x)
    Xbar = _vertical_inverse(Xv)
    T = list(split.transverse)
    kg, nI = group.k, len(T)

    cbar = np.einsum("ru,sv,uvw,wt->rst", Xv, Xv, group.structure_constants, Xbar)
    upsilon = np.einsum("Il,rtl->Irt", E[T], dXv) @ Xbar if nI else np.zeros((0, kg, kg))

    # Curvature and base anholonomity: decompose [X_I, X_J] on {E_s} + {X_I}.
    basis = np.vstack([np.array([Ef.coeffs(x) for Ef in group.fundamental]).reshape(kg, -1), E[T]])
    curvature = np.zeros((nI, nI, kg))
    rbase = np.zeros((nI, nI, nI))
    for a in range(nI):
        for b in range(a + 1, nI):
            br = J[T[b]] @ E[T[a]] - J[T[a]] @ E[T[b]]
            w = linalg.solve(basis.T, br, what="vertical/transverse basis", error=SingularFrameError)
            K_ab = -(w[:kg] @ Xbar)
            curvature[a, b], curvature[b, a] = K_ab, -K_ab
            rbase[a, b], rbase[b, a] = w[kg:], -w[kg:]
    return ReducedCoefficients(upsilon, cbar, curvature, rbase), structure_functions(sys.frame, x)


def reduced_coefficients(split: InvariantFrameSplit, x: Sequence[float]) -> ReducedCoefficients:
    """Reduced coefficient arrays at ``x`` from their defining formulas.

    Raises :class:`InconsistencyError` when the full frame violates
    ``R^I_{ir} = 0``, i.e. the supplied split is not invariant/adapted.
    """
    coef, R = _coefficients(split, np.asarray(x, dtype=float))
    adapt = _adaptation_residual(split, R)
    if adapt > ADAPTATION_TOL:
        raise InconsistencyError(f"R^I_ir = {adapt:.3e} != 0: frame split is not invariant")
    return coef


def _adaptation_residual(split: InvariantFrameSplit, R: np.ndarray) -> float:
    V, T = list(split.vertical), list(split.transverse)
    if not V or not T:
        return 0.0
    return float(np.max(np.abs(R[:, V][:, :, T])))


def crossvalidate(split: InvariantFrameSplit, x: Sequence[float]) -> dict[str, float]:
    """Discrepancies between the defining formulas and structure-function blocks."""
    coef, R = _coefficients(split, np.asarray(x, dtype=float))
    V, T = list(split.vertical), list(split.transverse)

    def gap(a, b):
        return float(np.max(np.abs(a - b), initial=0.0))

    return {
        "upsilon": gap(coef.upsilon, R[np.ix_(T, V, V)]),
        "cbar": gap(coef.cbar, R[np.ix_(V, V, V)]),
        "curvature": gap(coef.curvature, -R[np.ix_(T, T, V)]),
        "rbase": gap(coef.rbase, R[np.ix_(T, T, T)]),
        "adaptation": _adaptation_residual(split, R),
    }


def project_state(split: InvariantFrameSplit, s: CState) -> ReducedState:
    """Drop group coordinates; the invariant quasi-velocities pass through."""
    if not split.in_domain(s.x):
        raise InconsistencyError(f"state x={s.x.tolist()} lies outside the trivialization")
    return ReducedState(s.x[list(split.base_coords)], s.v[list(split.rho)], s.v[list(split.kappa)])


def _reduced_terms(split: InvariantFrameSplit, rs: ReducedState):
    sys = split.system
    n = sys.dim
    if rs.base.shape != (split.base_dim,) or rs.v_rho.shape != (len(split.rho),) \
            or rs.v_kappa.shape != (len(split.kappa),):
        raise DimensionError("reduced state does not fit the split")
    vfull = np.zeros(n)
    vfull[list(split.rho)] = rs.v_rho
    vfull[list(split.kappa)] = rs.v_kappa
    jet = eval_jet(split.reduced_lagrangian, rs.base, vfull)
    xs = np.array(split.section(rs.base), dtype=float)
    E = sys.frame.matrix(xs)
    T = list(split.transverse)
    Y = E[np.ix_(T, list(split.base_coords))]
    return vfull, jet, xs, Y


def reduced_rhs(split: InvariantFrameSplit, rs: ReducedState) -> tuple[np.ndarray, np.ndarray]:
    """Accelerations ``(f_rho, f_kappa)`` of the reduced dynamics on ``C/G``."""
    vfull, jet, xs, Y = _reduced_terms(split, rs)
    coef = reduced_coefficients(split, xs)
    V, T = list(split.vertical), list(split.transverse)
    nr, nk = len(split.rho), len(split.kappa)
    vr = vfull[V]
    vI = vfull[T]
    l_r = jet.d_u[V]
    l_I = jet.d_u[T]
    xdot = vI[:nk] @ Y[:nk]

    b = np.empty(nr + nk)
    for p in range(nr):
        moving = vI @ coef.upsilon[:, p, :] - vr @ coef.cbar[p]
        b[p] = moving @ l_r - jet.d_ux[split.rho[p]] @ xdot
    for q in range(nk):
        gyro = vI @ coef.curvature[q] - vr @ coef.upsilon[q]
        b[nr + q] = (Y[q] @ jet.d_x - vI @ coef.rbase[q] @ l_I + gyro @ l_r
                     - jet.d_ux[split.kappa[q]] @ xdot)
    D = list(split.rho) + list(split.kappa)
    M = jet.d_uu[np.ix_(D, D)]
    f = linalg.solve(0.5 * (M + M.T), b, what="reduced mass matrix")
    return f[:nr], f[nr:]


def reduced_base_velocity(split: InvariantFrameSplit, rs: ReducedState) -> np.ndarray:
    xs = np.array(split.section(rs.base), dtype=float)
    E = split.system.frame.matrix(xs)
    Y = E[np.ix_(list(split.kappa), list(split.base_coords))]
    return rs.v_kappa @ Y


def reduced_energy(split: InvariantFrameSplit, rs: ReducedState) -> float:
    vfull = np.zeros(split.system.dim)
    vfull[list(split.rho)] = rs.v_rho
    vfull[list(split.kappa)] = rs.v_kappa
    jet = eval_jet(split.reduced_lagrangian, rs.base, vfull)
    return float(vfull @ jet.d_u - jet.value)


def momentum_and_residual(split: InvariantFrameSplit, s: CState) -> tuple[np.ndarray, np.ndarray]:
    """Nonholonomic momentum ``P_rho = X^V_rho(L)`` and the residual of its
    moving-basis balance law along the dynamics."""
    sys = split.system
    loc = _local(sys, s)
    f, drift = _quasi_accelerations(sys, s, loc)
    a = loc.E[: sys.m].T @ f + drift
    jet, u = loc.jet, loc.u
    V, T = list(split.vertical), list(split.transverse)
    P_all = loc.E[V] @ jet.d_u
    coef = reduced_coefficients(split, s.x)

    vfull = np.zeros(sys.dim)
    vfull[: sys.m] = s.v
    vI, vr = vfull[T], vfull[V]
    nr = len(split.rho)
    P = P_all[:nr]
    res = np.empty(nr)
    for p, i in enumerate(split.rho):
        dP_dx = loc.J[i].T @ jet.d_u + loc.E[i] @ jet.d_ux
        dP_du = loc.E[i] @ jet.d_uu
        rate = dP_dx @ u + dP_du @ a
        moving = vI @ coef.upsilon[:, p, :] - vr @ coef.cbar[p]
        res[p] = rate - moving @ P_all
    return P, res


def integrate_reduced(split: InvariantFrameSplit, rs0: ReducedState, h: float, T: float,
                      method: str = "rk4") -> Trajectory:
    nb, nr = split.base_dim, len(split.rho)
    times = time_grid(h, T)

    def unpack(y):
        return ReducedState(y[:nb], y[nb:nb + nr], y[nb + nr:])

    def rhs(y):
        rs = unpack(y)
        f_rho, f_kappa = reduced_rhs(split, rs)
        return np.concatenate([reduced_base_velocity(split, rs), f_rho, f_kappa])

    ys = integrate_fixed(rhs, rs0.as_vector(), times, method)
    labels = split.system.frame.labels
    states = [unpack(y) for y in ys]
    energies = np.array([reduced_energy(split, rs) for rs in states])
    momenta = {}
    if nr:
        P = np.array([_reduced_momenta(split, rs) for rs in states])
        momenta = {labels[i]: P[:, p] for p, i in enumerate(split.rho)}
    coord_labels = [split.system.coord_labels[j] for j in split.base_coords]
    vel_labels = [labels[i] for i in split.rho + split.kappa]
    return Trajectory(times, ys[:, :nb], ys[:, nb:], energies, coord_labels, vel_labels, momenta=momenta,
                      residual=np.zeros(len(times)), reduced=True,
                      meta={"system": split.system.name, "h": h, "T": T, "method": method})


def _reduced_momenta(split: InvariantFrameSplit, rs: ReducedState) -> np.ndarray:
    vfull = np.zeros(split.system.dim)
    vfull[list(split.rho)] = rs.v_rho
    vfull[list(split.kappa)] = rs.v_kappa
    return eval_jet(split.reduced_lagrangian, rs.base, vfull).d_u[list(split.rho)]


@dataclass
class InvarianceReport:
    """Per-sample residuals of each invariance check and their maxima."""

    tol: float
    per_sample: list[dict[str, float]]

    @property
    def maxima(self) -> dict[str, float]:
        keys = self.per_sample[0].keys() if self.per_sample else []
        return {k: max(row[k] for row in self.per_sample) for k in keys}

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.maxima.values())


def verify_invariance(split: InvariantFrameSplit, samples: Sequence[Sequence[float]], tol: float = 1e-6,
                      rng: np.random.Generator | None = None, fd_step: float = 1e-5) -> InvarianceReport:
    """Numerical checks that ``L``, the frame and the dynamics are ``G``-invariant."""
    if len(samples) == 0:
        raise ValueError("need at least one sample point")
    rng = np.random.default_rng(0) if rng is None else rng
    sys, group = split.system, split.group
    frame = sys.frame
    rows = []
    for x in samples:
        x = np.asarray(x, dtype=float)
        u = rng.uniform(-2.0, 2.0, sys.dim)
        v = rng.uniform(-2.0, 2.0, sys.m)
        lag = max((abs(lift_apply(Ef, sys.L, x, u, "complete")) for Ef in group.fundamental), default=0.0)
        frm = max((float(np.max(np.abs(bracket(Ef, X, x)))) for Ef in group.fundamental for X in frame.fields),
                  default=0.0)
        Xv, _ = split.vertical_matrix(x)
        fund = np.array([Ef.coeffs(x) for Ef in group.fundamental]).reshape(group.k, -1)
        vert = np.array([frame.fields[i].coeffs(x) for i in split.vertical]).reshape(group.k, -1)
        consistency = float(np.max(np.abs(Xv @ fund - vert), initial=0.0))
        rows.append({
            "lagrangian": lag,
            "frame": frm,
            "fundamental": group.bracket_residual(x),
            "vertical_consistency": consistency,
            "dynamics": _dynamics_invariance(sys, group, x, v, fd_step),
        })
    return InvarianceReport(tol, rows)


def _dynamics_invariance(sys: ConstrainedSystem, group: GroupModel, x: np.ndarray, v: np.ndarray,
                         eps: float) -> float:
    u = sys.frame.matrix(x)[: sys.m].T @ v
    worst = 0.0
    for Ef in group.fundamental:
        c, Jc = Ef.coeffs_and_jacobian(x)
        vals = []
        for sgn in (1.0, -1.0):
            xs = x + sgn * eps * c
            us = u + sgn * eps * (Jc @ u)
            vs = quasi_from_natural(sys.frame, xs, us)[: sys.m]
            vals.append(constrained_dynamics(sys, CState(xs, vs)))
        worst = max(worst, float(np.max(np.abs(vals[0] - vals[1]))) / (2 * eps))
    return worst
