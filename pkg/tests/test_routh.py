from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest
import sympy as sp

from anholonome import dynamics as dyn
from anholonome import reduction as red
from anholonome import routh
from anholonome.errors import ModelError, RegularityError
from anholonome.frames import AdaptedFrame, Frame, VectorField
from anholonome.jets import ScalarOnTQ, eval_jet, exp
from anholonome.zoo import build


def model():
    return build("paper-particle").horizontal


def _unit(n, j, label):
    return VectorField(n, lambda x: tuple(float(i == j) for i in range(n)), label)


def coupled_particle():
    """Paper-particle chart with the cross term 0.3 xdot ydot and mass 2 along y."""
    base = build("paper-particle")
    L = ScalarOnTQ(3, lambda x, u: 0.5 * (u[0] ** 2 + 2 * u[1] ** 2 + u[2] ** 2) + 0.3 * u[0] * u[1])
    sysm = dyn.ConstrainedSystem("coupled", L, base.system.adapted, base.system.coord_labels)
    s = base.split
    split = red.InvariantFrameSplit(sysm, s.group, rho=s.rho, kappa=s.kappa, c=s.c, k=s.k,
                                    vertical_coeffs=s.vertical_coeffs, base_coords=s.base_coords,
                                    group_coords=s.group_coords)
    return routh.HorizontalSymmetryModel(split, (0,))


def test_momentum_solve_examples(rng):
    m = model()
    assert routh.momentum_solve(m, [2.0], [0.3, 1.0, 2.0], [0.7]) == pytest.approx([2.0])
    assert routh.momentum_solve(m, [0.0], [1.3, 0.0, 0.0], [-0.4]) == pytest.approx([0.0], abs=0)
    c = coupled_particle()
    for _ in range(20):
        mu, x, xd = rng.uniform(-2, 2, 3)
        # linear oracle: 2 ydot + 0.3 xdot = mu
        iota = np.linalg.solve([[2.0]], [mu - 0.3 * xd])
        np.testing.assert_allclose(routh.momentum_solve(c, [mu], [x, 0, 0], [xd]), iota, atol=1e-12)


def test_momentum_solve_nonquadratic_converges():
    # L = |u|^2/2 + exp(ydot)/10 needs several Newton steps
    base = build("paper-particle")
    L = ScalarOnTQ(3, lambda x, u: 0.5 * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2) + 0.1 * exp(u[1]))
    sysm = dyn.ConstrainedSystem("exp", L, base.system.adapted, base.system.coord_labels)
    s = base.split
    split = red.InvariantFrameSplit(sysm, s.group, s.rho, s.kappa, s.c, s.k, s.vertical_coeffs, s.base_coords,
                                    s.group_coords)
    m = routh.HorizontalSymmetryModel(split, (0,))
    iota = routh.momentum_solve(m, [1.5], [0.2, 0.0, 0.0], [0.4])[0]
    assert iota + 0.1 * np.exp(iota) == pytest.approx(1.5, abs=1e-12)


def test_singular_momentum_matrix():
    base = build("paper-particle")
    L = ScalarOnTQ(3, lambda x, u: 0.5 * (u[0] ** 2 + u[2] ** 2) + u[1])
    sysm = dyn.ConstrainedSystem("flat", L, base.system.adapted, base.system.coord_labels)
    s = base.split
    split = red.InvariantFrameSplit(sysm, s.group, s.rho, s.kappa, s.c, s.k, s.vertical_coeffs, s.base_coords,
                                    s.group_coords)
    m = routh.HorizontalSymmetryModel(split, (0,))
    with pytest.raises(RegularityError):
        routh.momentum_solve(m, [2.0], [0.0, 0.0, 0.0], [1.0])


def test_routhian_closed_form(rng):
    m = model()
    assert routh.routhian(m, [1.0], [0.0, 0.0, 0.0], [0.0]) == pytest.approx(-0.5)
    for _ in range(50):
        mu, x, xd = rng.uniform(-2, 2, 3)
        expect = 0.5 * ((1 + x * x) * xd * xd - mu * mu)
        assert abs(routh.routhian(m, [mu], [x, 1.0, -1.0], [xd]) - expect) <= 1e-12
    # at mu = 0 the Routhian is the restricted Lagrangian
    L = build("paper-particle").system.L
    assert routh.routhian(m, [0.0], [0.5, 0, 0], [1.2]) == pytest.approx(L([0.5, 0, 0], [1.2, 0.0, 0.6]))


def test_routhian_jet_uses_implicit_derivatives(rng):
    c = coupled_particle()
    R = routh.routhian_function(c, [0.8])
    # symbolic oracle: eliminate ydot from 2 ydot + 0.3 xdot = mu, then R = L - ydot mu
    x, xd, mu = sp.symbols("x xd mu")
    yd = (mu - sp.Rational(3, 10) * xd) / 2
    zd = x * xd
    expr = sp.Rational(1, 2) * (xd ** 2 + 2 * yd ** 2 + zd ** 2) + sp.Rational(3, 10) * xd * yd - yd * mu
    derivs = [sp.lambdify((x, xd, mu), e) for e in
              (expr, sp.diff(expr, x), sp.diff(expr, xd), sp.diff(expr, xd, 2), sp.diff(expr, xd, x))]
    for _ in range(20):
        xv, xdv = rng.uniform(-2, 2, 2)
        j = eval_jet(R, [xv, 0.5, -0.5], [xdv])
        got = (j.value, j.d_x[0], j.d_u[0], j.d_uu[0, 0], j.d_ux[0, 0])
        expect = [f(xv, xdv, 0.8) for f in derivs]
        np.testing.assert_allclose(got, expect, atol=1e-12)
        assert not np.any(j.d_x[1:])


def test_routh_rhs_examples(rng):
    m = model()
    for mu in (0.0, 1.0, 2.0):
        np.testing.assert_allclose(routh.routh_rhs(m, [mu], routh.RouthState([1.0, 0, 0], [1.0])), [-0.5],
                                   atol=1e-15)
    for _ in range(50):
        mu, x, xd = rng.uniform(-2, 2, 3)
        f = routh.routh_rhs(m, [mu], routh.RouthState([x, 0, 0], [xd]))
        assert abs(f[0] + x * xd * xd / (1 + x * x)) <= 1e-12


def test_routh_mu_zero_matches_reduced_flow(rng):
    b = build("paper-particle")
    for _ in range(20):
        x, xd = rng.uniform(-2, 2, 2)
        f = routh.routh_rhs(b.horizontal, [0.0], routh.RouthState([x, 0, 0], [xd]))
        _, f_kappa = red.reduced_rhs(b.split, red.ReducedState([x], [0.0], [xd]))
        assert abs(f[0] - f_kappa[0]) <= 1e-9


def test_routh_coupled_matches_full_dynamics(rng):
    c = coupled_particle()
    sysm = c.split.system
    for _ in range(20):
        mu, x, xd = rng.uniform(-2, 2, 3)
        rs = routh.RouthState([x, 0.0, 0.0], [xd])
        full = routh.full_state(c, [mu], rs)
        f_full = dyn.constrained_dynamics(sysm, full)
        # the working frame shares X_kappa with the constraint frame
        np.testing.assert_allclose(routh.routh_rhs(c, [mu], rs), f_full[:1], atol=1e-12)


def test_state_round_trip():
    m = model()
    s = dyn.CState([0.4, 1.0, 2.0], [0.9, 1.7])
    rs, mu = routh.routh_state(m, s)
    np.testing.assert_allclose(mu, [1.7])
    np.testing.assert_allclose(rs.v_kappa, [0.9])
    back = routh.full_state(m, mu, rs)
    np.testing.assert_allclose(back.v, s.v, atol=1e-15)


def test_level_set_preserved_by_full_flow():
    b = build("paper-particle")
    traj = dyn.integrate(b.system, dyn.CState([0.3, 0, 0], [1.0, 1.5]), 1e-3, 5.0, momenta=b.momentum_fields)
    assert np.max(np.abs(traj.momenta["y"] - 1.5)) <= 1e-10


def test_two_stage_reduction_equals_direct():
    m = model()
    mu = [1.0]
    _, direct = routh.integrate_quotient(m, mu, [0.3, 0.0, 0.0, 1.0], [], 1e-2, 2.0)
    _, stage1 = routh.integrate_quotient(m, mu, [0.3, 0.0, 1.0], [1], 1e-2, 2.0)
    _, stage2 = routh.integrate_quotient(m, mu, [0.3, 1.0], [1, 2], 1e-2, 2.0)
    assert np.max(np.abs(stage1[:, [0, 2]] - stage2)) <= 1e-9
    assert np.max(np.abs(direct[:, [0, 3]] - stage2)) <= 1e-9


def test_short_routh_trajectory_matches_full():
    b = build("paper-particle")
    for mu in (0.0, 2.0):
        s0 = dyn.CState([0.3, 0.0, 0.0], [1.0, mu])
        rs, mu_v = routh.routh_state(b.horizontal, s0)
        rt = routh.integrate_routh(b.horizontal, mu_v, rs, 1e-2, 1.0)
        full = dyn.integrate(b.system, s0, 1e-2, 1.0)
        assert np.max(np.abs(rt.coords - full.coords)) <= 1e-12
        assert np.max(np.abs(rt.velocities[:, 0] - full.velocities[:, 0])) <= 1e-12
        np.testing.assert_allclose(rt.extra["R"], 0.5 * ((1 + rt.coords[:, 0] ** 2) * rt.velocities[:, 0] ** 2
                                                          - mu * mu), atol=1e-12)


def test_ideal_condition_enforced():
    base = build("paper-particle")
    # E_0 = d/dy, E_1 = exp(-y) d/dz: [E_0, E_1] = -E_1, so C^1_{01} = 1 and h = {E_0} is no ideal
    fields = (_unit(3, 1, "y"), VectorField(3, lambda x: (0.0, 0.0, exp(-x[1])), "z"))
    C = np.zeros((2, 2, 2))
    C[0, 1, 1], C[1, 0, 1] = 1.0, -1.0
    group = red.GroupModel(C, fields)
    assert group.bracket_residual([0.1, 0.2, 0.3]) <= 1e-14
    split = red.InvariantFrameSplit(base.system, group, rho=(1,), kappa=(0,), c=(2,), k=(),
                                    vertical_coeffs=lambda x: ((1.0, 0.0), (0.0, exp(x[1]))),
                                    base_coords=(0,), group_coords=(1, 2))
    with pytest.raises(ModelError, match="ideal"):
        routh.HorizontalSymmetryModel(split, (0,))


def test_dimension_assumption_enforced():
    L = ScalarOnTQ(3, lambda x, u: 0.5 * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2))
    frame = Frame([_unit(3, 0, "x"), _unit(3, 1, "y"), _unit(3, 2, "z")])
    sysm = dyn.ConstrainedSystem("rail", L, AdaptedFrame(frame, 1), ("x", "y", "z"))
    group = red.GroupModel(np.zeros((1, 1, 1)), (_unit(3, 1, "y"),))
    split = red.InvariantFrameSplit(sysm, group, rho=(), kappa=(0,), c=(1,), k=(2,),
                                    vertical_coeffs=lambda x: ((1.0,),), base_coords=(0, 2), group_coords=(1,))
    with pytest.raises(ModelError, match="V \\+ D"):
        routh.HorizontalSymmetryModel(split, ())


def test_horizontal_fields_must_lie_in_constraint():
    b = build("nonholonomic-particle")
    with pytest.raises(ModelError, match="not in D"):
        routh.HorizontalSymmetryModel(b.split, (0,))


def test_isotropy_predicates():
    m = model()
    assert routh.in_isotropy(m, [2.0], [1.0, 0.0], "h")
    assert routh.in_isotropy(m, [2.0], [0.3, -1.0], "g")
    assert not routh.in_isotropy(m, [2.0], [0.3, -1.0], "h")
    # se(2) with every generator horizontal: only the translation along mu is isotropic
    C = build("chaplygin-sleigh").split.group.structure_constants
    fake = SimpleNamespace(nh=3, h_indices=(0, 1, 2), c_indices=(),
                           split=SimpleNamespace(group=SimpleNamespace(structure_constants=C, k=3)))
    mu = [1.0, 0.0, 0.0]
    assert routh.in_isotropy(fake, mu, [1.0, 0.0, 0.0])
    assert not routh.in_isotropy(fake, mu, [0.0, 0.0, 1.0])
    np.testing.assert_allclose(routh.isotropy_residual(fake, mu, [0.0, 0.0, 1.0]), [0.0, -1.0, 0.0])
