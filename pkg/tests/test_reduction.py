from __future__ import annotations

import numpy as np
import pytest

from anholonome import dynamics as dyn
from anholonome import reduction as red
from anholonome.errors import InconsistencyError, ModelError
from anholonome.frames import AdaptedFrame, Frame, VectorField
from anholonome.jets import ScalarOnTQ
from anholonome.zoo import ZOO, build

SYMMETRIC = [name for name, spec in ZOO.items() if not spec.negative_control]


def _unit(n, j, label):
    return VectorField(n, lambda x: tuple(float(i == j) for i in range(n)), label)


def chaplygin_particle():
    """zdot = x ydot with only the z-translation as symmetry: D and V are complementary."""
    L = ScalarOnTQ(3, lambda x, u: 0.5 * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2))
    frame = Frame([_unit(3, 0, "x"), VectorField(3, lambda x: (0.0, 1.0, x[0]), "y"), _unit(3, 2, "z")])
    sysm = dyn.ConstrainedSystem("chaplygin-particle", L, AdaptedFrame(frame, 2), ("x", "y", "z"))
    group = red.GroupModel(np.zeros((1, 1, 1)), (_unit(3, 2, "z"),))
    return red.InvariantFrameSplit(sysm, group, rho=(), kappa=(0, 1), c=(2,), k=(),
                                   vertical_coeffs=lambda x: ((1.0,),), base_coords=(0, 1), group_coords=(2,))


def test_group_model_validation():
    E = (_unit(2, 0, "a"), _unit(2, 1, "b"))
    with pytest.raises(ModelError):
        red.GroupModel(np.zeros((2, 2, 3)), E)
    C = np.zeros((2, 2, 2))
    C[0, 1, 0] = 1.0
    with pytest.raises(ModelError):
        red.GroupModel(C, E)
    bad = np.zeros((3, 3, 3))
    bad[0, 1, 2], bad[1, 0, 2] = 1.0, -1.0
    bad[1, 2, 0], bad[2, 1, 0] = 1.0, -1.0
    bad[0, 2, 0], bad[2, 0, 0] = 1.0, -1.0
    with pytest.raises(ModelError):
        red.GroupModel(bad, E + (_unit(2, 0, "c"),))


def test_split_partition_validation():
    b = build("paper-particle")
    with pytest.raises(ModelError):
        red.InvariantFrameSplit(b.system, b.split.group, rho=(0,), kappa=(1,), c=(), k=(2,),
                                vertical_coeffs=b.split.vertical_coeffs, base_coords=(0,), group_coords=(1, 2))


def test_invariance_of_worked_example_and_negative_control(rng):
    pts = [rng.uniform(-2, 2, 3) for _ in range(10)]
    good = red.verify_invariance(build("paper-particle").split, pts)
    assert good.passed and max(good.maxima.values()) <= 1e-12
    bad = red.verify_invariance(build("broken-demo").split, pts)
    assert not bad.passed
    assert bad.maxima["lagrangian"] == pytest.approx(1.0)
    assert red.GroupModel(np.zeros((2, 2, 2)), build("paper-particle").split.group.fundamental).bracket_residual(pts[0]) == 0.0


@pytest.mark.parametrize("name", SYMMETRIC)
def test_every_zoo_split_is_invariant(name, rng):
    b = build(name)
    report = red.verify_invariance(b.split, [rng.uniform(-2, 2, b.system.dim) for _ in range(20)], tol=1e-6)
    assert report.passed, report.maxima


def test_worked_example_coefficients_vanish(rng):
    split = build("paper-particle").split
    for _ in range(10):
        coef = red.reduced_coefficients(split, rng.uniform(-2, 2, 3))
        for arr in (coef.upsilon, coef.cbar, coef.curvature, coef.rbase):
            assert not np.any(arr)


def test_sleigh_frame_structure_constants():
    # [fwd, rot] = -lat and [rot, lat] = -fwd for the left-invariant frame
    coef = red.reduced_coefficients(build("chaplygin-sleigh").split, [0.3, -1.2, 0.8])
    expect = np.zeros((3, 3, 3))
    expect[0, 1, 2], expect[1, 0, 2] = -1.0, 1.0
    expect[1, 2, 0], expect[2, 1, 0] = -1.0, 1.0
    np.testing.assert_allclose(coef.cbar, expect, atol=1e-14)


@pytest.mark.parametrize("name", list(ZOO))
def test_coefficients_match_structure_functions(name, rng):
    b = build(name)
    for _ in range(50):
        gaps = red.crossvalidate(b.split, rng.uniform(-2, 2, b.system.dim))
        assert max(gaps.values()) <= 1e-8, gaps


def test_non_invariant_split_is_refused():
    base = build("paper-particle")
    # (1 + y) d/dx + x d/dz is not invariant under y-translations
    frame = Frame([VectorField(3, lambda x: (1.0 + x[1] ** 2, 0.0, x[0]), "x"), _unit(3, 1, "y"), _unit(3, 2, "z")])
    sysm = dyn.ConstrainedSystem("skew", base.system.L, AdaptedFrame(frame, 2), ("x", "y", "z"))
    split = red.InvariantFrameSplit(sysm, base.split.group, rho=(1,), kappa=(0,), c=(2,), k=(),
                                    vertical_coeffs=base.split.vertical_coeffs, base_coords=(0,), group_coords=(1, 2))
    with pytest.raises(InconsistencyError):
        red.reduced_coefficients(split, [0.5, 1.0, 0.0])


def test_reduced_rhs_worked_example():
    split = build("paper-particle").split
    for vy in (0.0, 1.7):
        f_rho, f_kappa = red.reduced_rhs(split, red.ReducedState([1.0], [vy], [1.0]))
        np.testing.assert_allclose(f_rho, [0.0], atol=1e-15)
        np.testing.assert_allclose(f_kappa, [-0.5], atol=1e-15)


def test_reduced_rhs_is_euler_lagrange_of_restricted_lagrangian(rng):
    # l_c = 1/2 ((1 + x^2) xdot^2 + ydot^2)
    split = build("paper-particle").split
    for _ in range(50):
        x, xd, yd = rng.uniform(-2, 2, 3)
        f_rho, f_kappa = red.reduced_rhs(split, red.ReducedState([x], [yd], [xd]))
        assert abs(f_rho[0]) <= 1e-12
        assert abs((1 + x * x) * f_kappa[0] + x * xd * xd) <= 1e-12


def test_rest_state_has_no_acceleration():
    for name in SYMMETRIC:
        split = build(name).split
        if name == "vertical-rolling-disk":
            continue  # the heading spring accelerates a disk at rest
        rs = red.ReducedState(np.full(split.base_dim, 0.4), np.zeros(len(split.rho)), np.zeros(len(split.kappa)))
        f_rho, f_kappa = red.reduced_rhs(split, rs)
        assert not np.any(f_rho) and not np.any(f_kappa)


def test_chaplygin_case_is_euler_lagrange_with_gyroscopic_force(rng):
    split = chaplygin_particle()
    for _ in range(50):
        x, y, xd, yd = rng.uniform(-2, 2, 4)
        f_rho, f_kappa = red.reduced_rhs(split, red.ReducedState([x, y], [], [xd, yd]))
        assert f_rho.shape == (0,)
        # l_c = 1/2 (xdot^2 + (1 + x^2) ydot^2); dl/dv^z on C is zdot = x ydot.
        # Euler-Lagrange of l_c:  xddot - x ydot^2 = F_x,  (1 + x^2) yddot + 2 x xdot ydot = F_y,
        # with the gyroscopic force F_I = K_IJ v^J p_z and K[0,1] = -1, K[1,0] = 1.
        p = x * yd
        force = np.array([-yd * p, xd * p])
        M = np.diag([1.0, 1 + x * x])
        el_terms = np.array([x * yd ** 2, -2 * x * xd * yd])
        np.testing.assert_allclose(f_kappa, np.linalg.solve(M, force + el_terms), atol=1e-12)
        # and the unreduced dynamics agree
        s = dyn.CState([x, y, 0.3], [xd, yd])
        np.testing.assert_allclose(f_kappa, dyn.constrained_dynamics(split.system, s), atol=1e-12)


def test_sleigh_has_only_momentum_block():
    split = build("chaplygin-sleigh").split
    f_rho, f_kappa = red.reduced_rhs(split, red.ReducedState([], [1.0, 0.5], []))
    assert f_rho.shape == (2,) and f_kappa.shape == (0,)


def test_momentum_examples(rng):
    b = build("paper-particle")
    P, res = red.momentum_and_residual(b.split, dyn.CState([0.4, 1.0, 2.0], [0.7, -1.3]))
    np.testing.assert_allclose(P, [-1.3])
    np.testing.assert_allclose(res, [0.0], atol=1e-15)
    P, res = red.momentum_and_residual(chaplygin_particle(), dyn.CState([0.4, 1.0, 2.0], [0.7, -1.3]))
    assert P.shape == (0,) and res.shape == (0,)
    sleigh = build("chaplygin-sleigh")
    values = []
    for _ in range(100):
        s = dyn.CState(rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 2))
        P, res = red.momentum_and_residual(sleigh.split, s)
        values.append(P)
        assert np.max(np.abs(res)) <= 1e-9
    traj = dyn.integrate(sleigh.system, dyn.CState([0, 0, 0], [1.0, 0.5]), 1e-2, 2.0, momenta=sleigh.momentum_fields)
    assert np.ptp(traj.momenta["fwd"]) > 1e-3


def test_project_state_examples():
    split = build("paper-particle").split
    rs = red.project_state(split, dyn.CState([0.3, 5.0, -2.0], [1.5, -0.5]))
    np.testing.assert_array_equal(rs.as_vector(), [0.3, -0.5, 1.5])
    disk = build("vertical-rolling-disk").split
    rs = red.project_state(disk, dyn.CState([0.0, 0.0, 0.0, 0.7], [1.0, 2.0]))
    np.testing.assert_array_equal(rs.base, [0.7])
    a = red.project_state(split, dyn.CState([0.3, 0.0, 0.0], [1.5, -0.5]))
    b = red.project_state(split, dyn.CState([0.3, 4.0, -7.5], [1.5, -0.5]))
    np.testing.assert_array_equal(a.as_vector(), b.as_vector())


@pytest.mark.parametrize("name", SYMMETRIC)
def test_projection_commutes_with_flow_short(name, rng):
    b = build(name)
    s0 = dyn.CState(rng.uniform(-1, 1, b.system.dim), rng.uniform(-1, 1, b.system.m))
    full = dyn.integrate(b.system, s0, 1e-2, 1.0)
    reduced = red.integrate_reduced(b.split, red.project_state(b.split, s0), 1e-2, 1.0)
    proj = np.array([red.project_state(b.split, s).as_vector() for s in full.states])
    assert np.max(np.abs(proj - np.hstack([reduced.coords, reduced.velocities]))) <= 1e-9
    np.testing.assert_allclose(reduced.energy, full.energy, atol=1e-12)
