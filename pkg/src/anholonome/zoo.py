"""Built-in example systems.

Every entry documents its chart, adapted frame (constraint block first),
symmetry group and invariant split.  Reference dynamics used in tests come
from :func:`anholonome.dynamics.multiplier_oracle`, never from transcribed
formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import ConstrainedSystem
from .errors import ModelError
from .frames import AdaptedFrame, Frame, VectorField
from .jets import ScalarOnTQ, cos, sin
from .reduction import GroupModel, InvariantFrameSplit
from .routh import HorizontalSymmetryModel


@dataclass(frozen=True)
class BuiltSystem:
    system: ConstrainedSystem
    split: InvariantFrameSplit | None = None
    horizontal: HorizontalSymmetryModel | None = None

    @property
    def momentum_fields(self) -> list[tuple[str, VectorField]]:
        """``(label, X_rho)`` pairs for the nonholonomic momentum diagnostics."""
        if self.split is None:
            return []
        fields = self.system.frame.fields
        return [(fields[i].label, fields[i]) for i in self.split.rho]


@dataclass(frozen=True)
class SystemSpec:
    name: str
    description: str
    builder: Callable[[dict], BuiltSystem]
    defaults: dict[str, float] = field(default_factory=dict)
    units: dict[str, str] = field(default_factory=dict)
    initial: dict[str, float] = field(default_factory=dict)
    negative_control: bool = False

    def build(self, params: dict | None = None) -> BuiltSystem:
        params = dict(params or {})
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ModelError(f"unknown parameters for {self.name}: {sorted(unknown)}; "
                             f"expected {sorted(self.defaults)}")
        merged = {**self.defaults, **{k: float(v) for k, v in params.items()}}
        return self.builder(merged)


def _field(n: int, fn, label: str) -> VectorField:
    return VectorField(n, fn, label)


def _kinetic(x, u):
    return 0.5 * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2)


def _translations(labels=("y", "z"), coords=(1, 2), n=3) -> GroupModel:
    fields = []
    for label, j in zip(labels, coords):
        fields.append(_field(n, lambda x, j=j: tuple(1.0 if i == j else 0.0 for i in range(n)), label))
    k = len(fields)
    return GroupModel(np.zeros((k, k, k)), tuple(fields))


def _parabola_particle(params: dict, broken: bool = False) -> BuiltSystem:
    # L = |u|^2/2 on R^3, constraint zdot = x xdot; frame {d/dx + x d/dz, d/dy, d/dz}.
    if broken:
        L = ScalarOnTQ(3, lambda x, u: _kinetic(x, u) + x[1], label="L+y")
    else:
        L = ScalarOnTQ(3, _kinetic, label="L")
    X = _field(3, lambda x: (1.0, 0.0, x[0]), "x")
    Y = _field(3, lambda x: (0.0, 1.0, 0.0), "y")
    Z = _field(3, lambda x: (0.0, 0.0, 1.0), "z")
    name = "broken-demo" if broken else "paper-particle"
    sys = ConstrainedSystem(name, L, AdaptedFrame(Frame([X, Y, Z], domain="R^3"), 2), ("x", "y", "z"))
    group = _translations()
    split = InvariantFrameSplit(sys, group, rho=(1,), kappa=(0,), c=(2,), k=(),
                                vertical_coeffs=lambda x: ((1.0, 0.0), (0.0, 1.0)),
                                base_coords=(0,), group_coords=(1, 2))
    horizontal = None if broken else HorizontalSymmetryModel(split, (0,))
    return BuiltSystem(sys, split, horizontal)


def _nonholonomic_particle(params: dict) -> BuiltSystem:
    # L = |u|^2/2 on R^3, constraint zdot = x ydot; frame {d/dx, d/dy + x d/dz, d/dz}.
    L = ScalarOnTQ(3, _kinetic, label="L")
    X1 = _field(3, lambda x: (1.0, 0.0, 0.0), "x")
    X2 = _field(3, lambda x: (0.0, 1.0, x[0]), "y")
    X3 = _field(3, lambda x: (0.0, 0.0, 1.0), "z")
    sys = ConstrainedSystem("nonholonomic-particle", L, AdaptedFrame(Frame([X1, X2, X3], domain="R^3"), 2),
                            ("x", "y", "z"))
    split = InvariantFrameSplit(sys, _translations(), rho=(1,), kappa=(0,), c=(2,), k=(),
                                vertical_coeffs=lambda x: ((1.0, x[0]), (0.0, 1.0)),
                                base_coords=(0,), group_coords=(1, 2))
    return BuiltSystem(sys, split)


def _chaplygin_sleigh(params: dict) -> BuiltSystem:
    # Chart (x, y, theta) of SE(2): (x, y) is the blade contact point, the mass
    # centre sits a distance a ahead of it along the blade.
    mass, inertia, a = params["mass"], params["inertia"], params["a"]

    def lagrangian(x, u):
        th = x[2]
        xc = u[0] - a * sin(th) * u[2]
        yc = u[1] + a * cos(th) * u[2]
        return 0.5 * mass * (xc ** 2 + yc ** 2) + 0.5 * inertia * u[2] ** 2

    L = ScalarOnTQ(3, lagrangian, label="L")
    # Left-invariant frame: forward, rotation about the contact point, lateral.
    fwd = _field(3, lambda x: (cos(x[2]), sin(x[2]), 0.0), "fwd")
    rot = _field(3, lambda x: (0.0, 0.0, 1.0), "rot")
    lat = _field(3, lambda x: (-sin(x[2]), cos(x[2]), 0.0), "lat")
    sys = ConstrainedSystem("chaplygin-sleigh", L, AdaptedFrame(Frame([fwd, rot, lat], domain="SE(2)"), 2),
                            ("x", "y", "theta"))
    # Left action of SE(2) on itself: generators are right-invariant fields.
    E1 = _field(3, lambda x: (1.0, 0.0, 0.0), "tx")
    E2 = _field(3, lambda x: (0.0, 1.0, 0.0), "ty")
    E3 = _field(3, lambda x: (-x[1], x[0], 1.0), "rot")
    C = np.zeros((3, 3, 3))
    C[0, 2, 1], C[2, 0, 1] = -1.0, 1.0
    C[1, 2, 0], C[2, 1, 0] = 1.0, -1.0
    group = GroupModel(C, (E1, E2, E3))

    def vertical(x):
        th = x[2]
        return ((cos(th), sin(th), 0.0),
                (x[1], -x[0], 1.0),
                (-sin(th), cos(th), 0.0))

    split = InvariantFrameSplit(sys, group, rho=(0, 1), kappa=(), c=(2,), k=(),
                                vertical_coeffs=vertical, base_coords=(), group_coords=(0, 1, 2))
    return BuiltSystem(sys, split)


def _vertical_rolling_disk(params: dict) -> BuiltSystem:
    # Chart (x, y, theta, phi): contact point, rolling angle, heading.
    mass, radius = params["mass"], params["radius"]
    I_roll, I_turn, k_turn = params["inertia_roll"], params["inertia_turn"], params["spring_turn"]

    def lagrangian(x, u):
        return (0.5 * mass * (u[0] ** 2 + u[1] ** 2) + 0.5 * I_roll * u[2] ** 2
                + 0.5 * I_turn * u[3] ** 2 - 0.5 * k_turn * x[3] ** 2)

    L = ScalarOnTQ(4, lagrangian, label="L")
    roll = _field(4, lambda x: (radius * cos(x[3]), radius * sin(x[3]), 1.0, 0.0), "roll")
    turn = _field(4, lambda x: (0.0, 0.0, 0.0, 1.0), "turn")
    ex = _field(4, lambda x: (1.0, 0.0, 0.0, 0.0), "ex")
    ey = _field(4, lambda x: (0.0, 1.0, 0.0, 0.0), "ey")
    sys = ConstrainedSystem("vertical-rolling-disk", L,
                            AdaptedFrame(Frame([roll, turn, ex, ey], domain="R^2 x S^1 x S^1"), 2),
                            ("x", "y", "theta", "phi"))
    group = _translations(labels=("x", "y", "theta"), coords=(0, 1, 2), n=4)

    def vertical(x):
        return ((radius * cos(x[3]), radius * sin(x[3]), 1.0),
                (1.0, 0.0, 0.0),
                (0.0, 1.0, 0.0))

    split = InvariantFrameSplit(sys, group, rho=(0,), kappa=(1,), c=(2, 3), k=(),
                                vertical_coeffs=vertical, base_coords=(3,), group_coords=(0, 1, 2))
    return BuiltSystem(sys, split)


def _free_particle(params: dict) -> BuiltSystem:
    mass = params["mass"]
    L = ScalarOnTQ(3, lambda x, u: 0.5 * mass * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2), label="L")
    fields = [_field(3, lambda x, j=j: tuple(1.0 if i == j else 0.0 for i in range(3)), lab)
              for j, lab in enumerate("xyz")]
    sys = ConstrainedSystem("free-particle", L, AdaptedFrame(Frame(fields, domain="R^3"), 3), ("x", "y", "z"))
    group = _translations(labels=("x", "y"), coords=(0, 1))
    split = InvariantFrameSplit(sys, group, rho=(0, 1), kappa=(2,), c=(), k=(),
                                vertical_coeffs=lambda x: ((1.0, 0.0), (0.0, 1.0)),
                                base_coords=(2,), group_coords=(0, 1))
    return BuiltSystem(sys, split)


ZOO: dict[str, SystemSpec] = {
    spec.name: spec
    for spec in [
        SystemSpec("paper-particle",
                   "L=|u|^2/2 on R^3 with zdot = x xdot; G=R^2 translating (y, z); horizontal symmetry y",
                   _parabola_particle, initial={"x": 0.0, "y": 0.0, "z": 0.0, "v_x": 1.0, "v_y": 0.0}),
        SystemSpec("nonholonomic-particle",
                   "L=|u|^2/2 on R^3 with zdot = x ydot; G=R^2 translating (y, z)",
                   _nonholonomic_particle, initial={"x": 0.0, "y": 0.0, "z": 0.0, "v_x": 1.0, "v_y": 0.5}),
        SystemSpec("chaplygin-sleigh",
                   "knife edge on SE(2); G=SE(2) acting on the left; D inside the orbit directions",
                   _chaplygin_sleigh,
                   defaults={"mass": 1.0, "inertia": 0.5, "a": 0.5},
                   units={"mass": "kg", "inertia": "kg m^2 (about the mass centre)", "a": "m"},
                   initial={"x": 0.0, "y": 0.0, "theta": 0.0, "v_fwd": 1.0, "v_rot": 0.5}),
        SystemSpec("vertical-rolling-disk",
                   "upright disk rolling without slipping, torsional spring on the heading; G=R^2 x S^1",
                   _vertical_rolling_disk,
                   defaults={"mass": 1.0, "radius": 0.5, "inertia_roll": 0.125, "inertia_turn": 0.0625,
                             "spring_turn": 0.3},
                   units={"mass": "kg", "radius": "m", "inertia_roll": "kg m^2", "inertia_turn": "kg m^2",
                          "spring_turn": "N m / rad"},
                   initial={"x": 0.0, "y": 0.0, "theta": 0.0, "phi": 0.3, "v_roll": 1.0, "v_turn": 0.2}),
        SystemSpec("free-particle",
                   "unconstrained particle in R^3 (control case); G=R^2 translating (x, y)",
                   _free_particle, defaults={"mass": 1.0}, units={"mass": "kg"},
                   initial={"x": 0.0, "y": 0.0, "z": 0.0, "v_x": 1.0, "v_y": -0.5, "v_z": 0.25}),
        SystemSpec("broken-demo",
                   "negative control: paper-particle with L + y, which breaks the y-translation symmetry",
                   lambda p: _parabola_particle(p, broken=True), negative_control=True,
                   initial={"x": 0.0, "y": 0.0, "z": 0.0, "v_x": 1.0, "v_y": 0.0}),
    ]
}


def get_spec(name: str) -> SystemSpec:
    try:
        return ZOO[name]
    except KeyError:
        raise ModelError(f"unknown system {name!r}; available: {', '.join(ZOO)}") from None


def build(name: str, params: dict | None = None) -> BuiltSystem:
    return get_spec(name).build(params)
