from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anholonome.errors import DimensionError, EvaluationError
from anholonome.jets import ScalarOnTQ, cos, eval_jet, exp, fd_check, log, sin, sqrt

finite = st.floats(-2.0, 2.0, allow_nan=False)


def kinetic3():
    return ScalarOnTQ(3, lambda x, u: 0.5 * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2))


def test_quadratic_form_blocks():
    j = eval_jet(kinetic3(), [0.3, -1.0, 2.0], [1.0, 0.0, 2.0])
    assert j.value == pytest.approx(2.5)
    np.testing.assert_allclose(j.d_u, [1, 0, 2])
    np.testing.assert_allclose(j.d_uu, np.eye(3))
    np.testing.assert_allclose(j.d_x, 0)
    np.testing.assert_allclose(j.d_ux, 0)


def test_restricted_particle_lagrangian():
    f = ScalarOnTQ(1, lambda x, u: 0.5 * (1 + x[0] ** 2) * u[0] ** 2)
    j = eval_jet(f, [1.0], [3.0])
    assert (j.value, j.d_u[0], j.d_x[0], j.d_uu[0, 0], j.d_ux[0, 0]) == pytest.approx((9, 6, 9, 2, 6))


def test_constant_function_has_zero_blocks():
    j = eval_jet(ScalarOnTQ(2, lambda x, u: 7.0), [1.0, 2.0], [3.0, 4.0])
    assert j.value == 7.0
    for block in (j.d_x, j.d_u, j.d_uu, j.d_ux):
        assert not np.any(block)


def test_mixed_block_matches_hand_derivatives():
    f = ScalarOnTQ(2, lambda x, u: sin(x[0]) * u[0] * u[1] + exp(x[1]) * u[1] ** 2)
    x, u = np.array([0.4, -0.3]), np.array([1.5, -0.7])
    j = eval_jet(f, x, u)
    expect_ux = np.array([[math.cos(x[0]) * u[1], 0.0],
                          [math.cos(x[0]) * u[0], 2 * math.exp(x[1]) * u[1]]])
    expect_uu = np.array([[0.0, math.sin(x[0])], [math.sin(x[0]), 2 * math.exp(x[1])]])
    np.testing.assert_allclose(j.d_ux, expect_ux, atol=1e-14)
    np.testing.assert_allclose(j.d_uu, expect_uu, atol=1e-14)


def test_primitives_match_finite_differences(rng):
    f = ScalarOnTQ(2, lambda x, u: log(2.5 + sin(x[0] * u[1])) + sqrt(1.0 + u[0] ** 2) * cos(x[1])
                   + u[0] / (2.0 + x[0] ** 2) + (1.5 + u[1] ** 2) ** 1.5)
    for _ in range(20):
        assert fd_check(f, rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2)) <= 1e-6


def test_fd_check_bounds():
    quad = ScalarOnTQ(2, lambda x, u: 0.5 * (1 + x[0] ** 2) * u[0] ** 2 + x[1] * u[0] * u[1])
    assert fd_check(quad, [0.3, 1.2], [-0.5, 2.0]) <= 1e-9
    trig = ScalarOnTQ(1, lambda x, u: sin(x[0]) * u[0])
    assert fd_check(trig, [0.7], [1.3]) <= 1e-8
    assert fd_check(ScalarOnTQ(1, lambda x, u: 3.0), [0.1], [0.2], h=1e-2) <= 1e-14


@given(st.lists(finite, min_size=2, max_size=2), st.lists(finite, min_size=2, max_size=2), finite, finite)
def test_linearity(x, u, a, b):
    f = ScalarOnTQ(2, lambda x, u: sin(x[0]) * u[0] ** 2 + x[1] * u[1])
    g = ScalarOnTQ(2, lambda x, u: exp(0.3 * x[1]) * u[0] * u[1] + cos(u[0]))
    combo = eval_jet(a * f + b * g, x, u)
    jf, jg = eval_jet(f, x, u), eval_jet(g, x, u)
    for name in ("d_x", "d_u", "d_uu", "d_ux"):
        expect = a * getattr(jf, name) + b * getattr(jg, name)
        got = getattr(combo, name)
        assert np.max(np.abs(got - expect)) <= 1e-12 * max(1.0, np.max(np.abs(expect)))


@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3))
def test_d_uu_is_symmetric(x, u):
    f = ScalarOnTQ(3, lambda x, u: sin(x[0] + u[1]) * u[0] * u[2] + exp(u[1] * x[2]))
    j = eval_jet(f, x, u)
    assert np.array_equal(j.d_uu, j.d_uu.T)


def test_non_finite_intermediate_raises():
    with pytest.raises(EvaluationError):
        eval_jet(ScalarOnTQ(1, lambda x, u: log(x[0]) * u[0]), [-1.0], [1.0])
    with pytest.raises(EvaluationError):
        eval_jet(ScalarOnTQ(1, lambda x, u: u[0] / x[0]), [0.0], [1.0])
    with pytest.raises(EvaluationError):
        eval_jet(ScalarOnTQ(1, lambda x, u: exp(u[0])), [0.0], [1e4])


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        eval_jet(kinetic3(), [0.0, 0.0], [1.0, 2.0, 3.0])
