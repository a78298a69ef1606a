from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from anholonome import dynamics as dyn
from anholonome.zoo import ZOO, build

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []
_TRAJECTORIES: dict = {}


def initial_state(name: str) -> dyn.CState:
    spec = ZOO[name]
    sysm = build(name).system
    x = [spec.initial.get(c, 0.0) for c in sysm.coord_labels]
    v = [spec.initial.get(f"v_{lab}", 0.0) for lab in sysm.velocity_labels]
    return dyn.CState(x, v)


def full_trajectory(name: str, h: float = 1e-3, T: float = 5.0) -> dyn.Trajectory:
    """Cached constrained trajectory from the documented initial state."""
    key = (name, h, T)
    if key not in _TRAJECTORIES:
        b = build(name)
        _TRAJECTORIES[key] = dyn.integrate(b.system, initial_state(name), h, T, momenta=b.momentum_fields)
    return _TRAJECTORIES[key]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
