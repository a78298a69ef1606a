"""Routh reduction for constrained systems with horizontal symmetries.

The working frame is ``{X_kappa, E_rho, E_c}``: the invariant transverse
constraint fields followed by the fundamental fields, the horizontal ones
(``E_rho`` in ``D``) first.  On ``C`` the quasi-velocities along ``E_c``
vanish, and on the momentum level set ``N_mu`` the ``E_rho`` quasi-velocities
are eliminated through ``E^V_rho(L) = mu_rho``.  Points of ``N_mu`` are
therefore coordinatised by ``(x, v^kappa)``, where the tangency corrections
to the lifted fields are automatic and never need to be formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linalg
from .dynamics import CState, Trajectory, natural_velocity
from .errors import ConvergenceError, DimensionError, ModelError, RegularityError
from .frames import Frame, quasi_from_natural, structure_functions
from .integrators import integrate_fixed, time_grid
from .jets import Jet, ScalarOnTQ, eval_jet, value_of
from .reduction import InvariantFrameSplit

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50


@dataclass(frozen=True)
class HorizontalSymmetryModel:
    """An ideal ``h`` of the symmetry algebra whose fundamental fields lie in ``D``.

    ``h_indices`` are indices into the group basis; they must span the same
    space as the ``rho`` block of the split.
    """

    split: InvariantFrameSplit
    h_indices: tuple[int, ...]
    check_points: int = 5

    def __post_init__(self):
        object.__setattr__(self, "h_indices", tuple(int(i) for i in self.h_indices))
        split, group = self.split, self.split.group
        if len(set(self.h_indices)) != len(self.h_indices) or \
                any(not 0 <= i < group.k for i in self.h_indices):
            raise ModelError(f"bad horizontal indices {self.h_indices}")
        if len(self.h_indices) != len(split.rho):
            raise ModelError("horizontal symmetries must match the rho block in size")
        if split.k:
            raise ModelError("Routh reduction here requires V + D = TQ (empty k block)")
        C = group.structure_constants
        others = self.c_indices
        if others and self.h_indices:
            leak = np.abs(C[np.ix_(self.h_indices, range(group.k), others)])
            if leak.max() > 0.0:
                raise ModelError("horizontal symmetries do not form an ideal: C^c_{rho r} != 0")
        sys = split.system
        rng = np.random.default_rng(12345)
        for _ in range(self.check_points):
            x = rng.uniform(-1.0, 1.0, sys.dim)
            for i in self.h_indices:
                v = quasi_from_natural(sys.frame, x, group.fundamental[i].coeffs(x))
                if sys.m < sys.dim and np.max(np.abs(v[sys.m:])) > 1e-10:
                    raise ModelError(f"fundamental field {group.labels[i]} is not in D")
            self.frame.matrix(x)

    @property
    def c_indices(self) -> tuple[int, ...]:
        return tuple(r for r in range(self.split.group.k) if r not in self.h_indices)

    @property
    def nk(self) -> int:
        return len(self.split.kappa)

    @property
    def nh(self) -> int:
        return len(self.h_indices)

    @cached_property
    def frame(self) -> Frame:
        sys, group = self.split.system, self.split.group
        fields = [sys.frame.fields[i] for i in self.split.kappa]
        fields += [group.fundamental[r] for r in self.h_indices + self.c_indices]
        return Frame(fields, domain=sys.frame.domain)

    def _fields_at(self, x):
        sys, group = self.split.system, self.split.group
        Ek = np.array([sys.frame.fields[i].coeffs(x) for i in self.split.kappa]).reshape(self.nk, sys.dim)
        Eh = np.array([group.fundamental[r].coeffs(x) for r in self.h_indices]).reshape(self.nh, sys.dim)
        return Ek, Eh


@dataclass(frozen=True)
class MomentumLevel:
    mu: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if not np.all(np.isfinite(mu)):
            raise ValueError("momentum level must be finite")
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class RouthState:
    x: np.ndarray
    v_kappa: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v_kappa", np.asarray(self.v_kappa, dtype=float))


def _mu(model: HorizontalSymmetryModel, mu) -> np.ndarray:
    arr = mu.mu if isinstance(mu, MomentumLevel) else np.atleast_1d(np.asarray(mu, dtype=float))
    if arr.shape != (model.nh,):
        raise DimensionError(f"momentum level needs {model.nh} components")
    return arr


def _solve_level(model: HorizontalSymmetryModel, mu: np.ndarray, x: np.ndarray, v_kappa: np.ndarray,
                 guess=None):
    """Newton solve of the momentum equations; returns ``iota`` and the jet of
    ``L`` at the solution."""
    L = model.split.system.L
    Ek, Eh = model._fields_at(x)
    base_u = v_kappa @ Ek
    iota = np.zeros(model.nh) if guess is None else np.asarray(guess, dtype=float).copy()
    tol = NEWTON_TOL * max(1.0, np.max(np.abs(mu), initial=0.0))

    def residual(iota):
        jet = eval_jet(L, x, base_u + iota @ Eh)
        return Eh @ jet.d_u - mu, jet

    r, jet = residual(iota)
    for _ in range(NEWTON_MAXITER):
        if np.max(np.abs(r), initial=0.0) <= tol:
            return iota, jet
        g = Eh @ jet.d_uu @ Eh.T
        step = linalg.solve(g, r, what="momentum matrix g_rho_sigma")
        t = 1.0
        while True:
            trial = iota - t * step
            r_new, jet_new = residual(trial)
            if np.linalg.norm(r_new) < np.linalg.norm(r) or t < 1e-4:
                break
            t *= 0.5
        iota, r, jet = trial, r_new, jet_new
    raise ConvergenceError(f"momentum solve did not converge (residual {np.max(np.abs(r)):.3e})")


def momentum_solve(model: HorizontalSymmetryModel, mu, x: Sequence[float], v_kappa: Sequence[float],
                   guess: Sequence[float] | None = None) -> np.ndarray:
    """Solve ``E^V_rho(L) = mu_rho`` for the horizontal quasi-velocities.

    Damped Newton from ``guess`` (zero by default); quadratic Lagrangians
    converge after a single update.
    """
    mu = _mu(model, mu)
    return _solve_level(model, mu, np.asarray(x, dtype=float), np.asarray(v_kappa, dtype=float), guess)[0]


def _natural(model, x, v_kappa, iota):
    Ek, Eh = model._fields_at(x)
    return np.asarray(v_kappa, dtype=float) @ Ek + iota @ Eh


def routhian(model: HorizontalSymmetryModel, mu, x: Sequence[float], v_kappa: Sequence[float]) -> float:
    """``R = L - v^rho mu_rho`` on ``C`` intersected with the level set."""
    mu = _mu(model, mu)
    iota = momentum_solve(model, mu, x, v_kappa)
    u = _natural(model, x, v_kappa, iota)
    return float(model.split.system.L(x, u) - iota @ mu)


def _iota_sensitivities(model, x, v_kappa, iota, jet):
    """Implicit derivatives of the eliminated velocities w.r.t. ``x`` and ``v^kappa``.

    ``jet`` is the jet of ``L`` at the solved state.
    """
    sys, group = model.split.system, model.split.group
    n = sys.dim
    kap = [sys.frame.fields[i].coeffs_and_jacobian(x) for i in model.split.kappa]
    hor = [group.fundamental[r].coeffs_and_jacobian(x) for r in model.h_indices]
    Ek = np.array([c for c, _ in kap]).reshape(model.nk, n)
    Eh = np.array([c for c, _ in hor]).reshape(model.nh, n)
    du_dx = np.zeros((n, n))
    for a in range(model.nk):
        du_dx += v_kappa[a] * kap[a][1]
    for b in range(model.nh):
        du_dx += iota[b] * hor[b][1]
    dp_dx = np.array([hor[b][1].T @ jet.d_u + Eh[b] @ (jet.d_ux + jet.d_uu @ du_dx)
                      for b in range(model.nh)]).reshape(model.nh, n)
    dp_dv = Eh @ jet.d_uu @ Ek.T
    g = Eh @ jet.d_uu @ Eh.T
    return -linalg.solve(g, np.hstack([dp_dx, dp_dv]), what="momentum matrix g_rho_sigma")


def _routhian_fn(model: HorizontalSymmetryModel, mu: np.ndarray, solved=None):
    sys, group = model.split.system, model.split.group
    Kfields = [sys.frame.fields[i] for i in model.split.kappa]
    Hfields = [group.fundamental[r] for r in model.h_indices]
    n = sys.dim

    def fn(x, vk):
        xv = np.array([value_of(c) for c in x])
        vkv = np.array([value_of(c) for c in vk])
        if solved is not None and np.array_equal(solved[0], xv) and np.array_equal(solved[1], vkv):
            iota_v, jet = solved[2], solved[3]
        else:
            iota_v, jet = _solve_level(model, mu, xv, vkv)
        if any(isinstance(c, Jet) for c in (*x, *vk)):
            sens = _iota_sensitivities(model, xv, vkv, iota_v, jet)
            inputs = list(x) + list(vk)
            iota = [Jet.compose(iota_v[b], sens[b], inputs) for b in range(model.nh)]
        else:
            iota = list(iota_v)
        Ek = [f.components(x) for f in Kfields]
        Eh = [f.components(x) for f in Hfields]
        u = []
        for j in range(n):
            acc = 0.0
            for a in range(model.nk):
                acc = acc + vk[a] * Ek[a][j]
            for b in range(model.nh):
                acc = acc + iota[b] * Eh[b][j]
            u.append(acc)
        out = sys.L.fn(tuple(x), tuple(u))
        for b in range(model.nh):
            out = out - iota[b] * mu[b]
        return out

    return ScalarOnTQ(n, fn, fibre_dim=model.nk, label=f"Routhian[{sys.name}]")


def routhian_function(model: HorizontalSymmetryModel, mu) -> ScalarOnTQ:
    """The Routhian on ``N_mu`` as a function of ``(x, v^kappa)``.

    The eliminated velocities enter as jets carrying their implicit first
    derivatives.  Their curvature is omitted: it multiplies
    ``E^V_rho(L) - mu_rho``, which vanishes on the level set.
    """
    return _routhian_fn(model, _mu(model, mu))


def routh_rhs(model: HorizontalSymmetryModel, mu, s: RouthState) -> np.ndarray:
    """Accelerations ``f^kappa`` of the Routh equations on ``N_mu``."""
    mu = _mu(model, mu)
    sys, group = model.split.system, model.split.group
    nk, nh = model.nk, model.nh
    if s.x.shape != (sys.dim,) or s.v_kappa.shape != (nk,):
        raise DimensionError("Routh state does not fit the model")
    if nk == 0:
        return np.zeros(0)
    iota, Ljet = _solve_level(model, mu, s.x, s.v_kappa)
    jet = eval_jet(_routhian_fn(model, mu, (s.x, s.v_kappa, iota, Ljet)), s.x, s.v_kappa)
    Ek, Eh = model._fields_at(s.x)
    u = s.v_kappa @ Ek + iota @ Eh
    Ec = np.array([group.fundamental[r].coeffs(s.x) for r in model.c_indices]).reshape(-1, sys.dim)
    p_c = Ec @ Ljet.d_u
    R = structure_functions(model.frame, s.x)
    v = s.v_kappa
    b = np.empty(nk)
    for q in range(nk):
        Rq = v @ R[q, :nk]  # sum over lambda in kappa; components along the whole working frame
        b[q] = (Ek[q] @ jet.d_x
                - Rq[:nk] @ jet.d_u
                - Rq[nk + nh:] @ p_c
                - Rq[nk:nk + nh] @ mu
                - jet.d_ux[q] @ u)
    return linalg.solve(0.5 * (jet.d_uu + jet.d_uu.T), b, what="Routhian mass matrix")


def routh_state(model: HorizontalSymmetryModel, s: CState) -> tuple[RouthState, np.ndarray]:
    """Routh coordinates of a constrained state, with its momentum level."""
    sys = model.split.system
    u = natural_velocity(sys, s)
    w = quasi_from_natural(model.frame, s.x, u)
    _, Eh = model._fields_at(s.x)
    mu = Eh @ eval_jet(sys.L, s.x, u).d_u
    return RouthState(s.x, w[: model.nk]), mu


def full_state(model: HorizontalSymmetryModel, mu, rs: RouthState) -> CState:
    """Constrained state on ``N_mu`` over a Routh state."""
    sys = model.split.system
    iota = momentum_solve(model, mu, rs.x, rs.v_kappa)
    u = _natural(model, rs.x, rs.v_kappa, iota)
    return CState(rs.x, quasi_from_natural(sys.frame, rs.x, u)[: sys.m])


def _routh_vector_field(model, mu, drop: Sequence[int] = ()):
    n = model.split.system.dim
    kept = [j for j in range(n) if j not in set(drop)]

    def rhs(y):
        x = np.zeros(n)
        x[kept] = y[: len(kept)]
        vk = y[len(kept):]
        iota = momentum_solve(model, mu, x, vk)
        u = _natural(model, x, vk, iota)
        return np.concatenate([u[kept], routh_rhs(model, mu, RouthState(x, vk))])

    return rhs, kept


def integrate_routh(model: HorizontalSymmetryModel, mu, rs0: RouthState, h: float, T: float,
                    method: str = "rk4") -> Trajectory:
    mu = _mu(model, mu)
    sys = model.split.system
    n = sys.dim
    times = time_grid(h, T)
    rhs, _ = _routh_vector_field(model, mu)
    ys = integrate_fixed(rhs, np.concatenate([rs0.x, rs0.v_kappa]), times, method)
    energies, routhians = [], []
    for y in ys:
        iota = momentum_solve(model, mu, y[:n], y[n:])
        u = _natural(model, y[:n], y[n:], iota)
        jet = eval_jet(sys.L, y[:n], u)
        energies.append(float(u @ jet.d_u - jet.value))
        routhians.append(float(jet.value - iota @ mu))
    labels = sys.frame.labels
    group_labels = model.split.group.labels
    momenta = {group_labels[r]: np.full(len(times), mu[b]) for b, r in enumerate(model.h_indices)}
    return Trajectory(times, ys[:, :n], ys[:, n:], np.array(energies), list(sys.coord_labels),
                      [labels[i] for i in model.split.kappa], momenta=momenta,
                      residual=np.zeros(len(times)), reduced=True,
                      meta={"system": sys.name, "h": h, "T": T, "method": method, "routh": True,
                            "mu": mu.tolist()},
                      extra={"R": np.array(routhians)})


def integrate_quotient(model: HorizontalSymmetryModel, mu, y0: Sequence[float], drop: Sequence[int],
                       h: float, T: float, method: str = "rk4") -> tuple[np.ndarray, np.ndarray]:
    """Integrate the Routh flow with the chart coordinates ``drop`` factored out.

    The dropped coordinates are pinned at zero (the section); ``y0`` holds
    the kept coordinates followed by ``v^kappa``.
    """
    mu = _mu(model, mu)
    rhs, _ = _routh_vector_field(model, mu, drop)
    times = time_grid(h, T)
    return times, integrate_fixed(rhs, np.asarray(y0, dtype=float), times, method)


def isotropy_residual(model: HorizontalSymmetryModel, mu, A: Sequence[float]) -> np.ndarray:
    """``A^r C^sigma_{r rho} mu_sigma`` for each horizontal ``rho``.

    It vanishes iff ``A`` lies in the isotropy algebra ``g_mu``; for ``A``
    supported on the horizontal indices that is the test for ``h_mu``.
    """
    mu = _mu(model, mu)
    C = model.split.group.structure_constants
    A = np.asarray(A, dtype=float)
    if A.shape != (model.split.group.k,):
        raise DimensionError("Lie algebra element has the wrong length")
    h = list(model.h_indices)
    return np.array([A @ C[:, rho, :][:, h] @ mu for rho in h])


def in_isotropy(model: HorizontalSymmetryModel, mu, A: Sequence[float], subalgebra: str = "g",
                tol: float = 1e-12) -> bool:
    """Membership of ``A`` in ``g_mu`` (``subalgebra="g"``) or ``h_mu`` (``"h"``)."""
    A = np.asarray(A, dtype=float)
    if subalgebra == "h":
        if np.max(np.abs(A[list(model.c_indices)]), initial=0.0) > tol:
            return False
    elif subalgebra != "g":
        raise ValueError("subalgebra must be 'g' or 'h'")
    return bool(np.max(np.abs(isotropy_residual(model, mu, A)), initial=0.0) <= tol)


__all__ = [
    "HorizontalSymmetryModel", "MomentumLevel", "RouthState", "momentum_solve", "routhian",
    "routhian_function", "routh_rhs", "routh_state", "full_state", "integrate_routh",
    "integrate_quotient", "isotropy_residual", "in_isotropy", "RegularityError",
]
