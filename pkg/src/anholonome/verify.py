"""Runnable property suites for zoo systems.

Each check samples states with its own PCG64 stream derived from
``(seed, check index)``, so adding a check never perturbs the others and
reports are byte-identical across runs with the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import dynamics as dyn
from . import reduction as red
from . import routh
from .frames import jacobi_residual, jacobian_fd_check, lift_apply, quasi_velocity_function, structure_functions
from .jets import fd_check
from .zoo import ZOO, BuiltSystem, build

BOX = 2.0
DEFAULT_SEED = 0


@dataclass(frozen=True)
class CheckResult:
    check: str
    samples: int
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tol)

    def row(self) -> str:
        return f"{self.check},{self.samples},{self.max_residual:.6e},{self.tol:.1e},{'true' if self.passed else 'false'}"


HEADER = "check,samples,max_residual,tol,pass"


def format_report(results: Iterable[CheckResult]) -> str:
    return "\n".join([HEADER] + [r.row() for r in results]) + "\n"


def _states(sys: dyn.ConstrainedSystem, rng: np.random.Generator, count: int):
    for _ in range(count):
        yield dyn.CState(rng.uniform(-BOX, BOX, sys.dim), rng.uniform(-BOX, BOX, sys.m))


def _points(sys, rng, count):
    return [rng.uniform(-BOX, BOX, sys.dim) for _ in range(count)]


def check_fd(b: BuiltSystem, rng, samples=100, tol=1e-6) -> float:
    sys = b.system
    return max(fd_check(sys.L, rng.uniform(-BOX, BOX, sys.dim), rng.uniform(-BOX, BOX, sys.dim))
               for _ in range(samples))


def check_frame_jacobian(b, rng, samples=20, tol=1e-6) -> float:
    fields = b.system.frame.fields
    return max(jacobian_fd_check(X, x) for x in _points(b.system, rng, samples) for X in fields)


def check_jacobi(b, rng, samples=20, tol=1e-8) -> float:
    fields = b.system.frame.fields
    n = len(fields)
    worst = 0.0
    for x in _points(b.system, rng, samples):
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    worst = max(worst, jacobi_residual(fields[i], fields[j], fields[k], x))
    return worst


def check_lifts(b, rng, samples=20, tol=1e-8) -> float:
    """Complete lifts act on quasi-velocities through ``-R``; vertical lifts give ``delta``."""
    sys = b.system
    F = sys.frame
    n = sys.dim
    qv = [quasi_velocity_function(F, j) for j in range(n)]
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-BOX, BOX, n)
        u = rng.uniform(-BOX, BOX, n)
        R = structure_functions(F, x)
        v = np.linalg.solve(F.matrix(x).T, u)
        for i, X in enumerate(F.fields):
            for j in range(n):
                c = lift_apply(X, qv[j], x, u, "complete")
                worst = max(worst, abs(c + R[i, :, j] @ v))
                vv = lift_apply(X, qv[j], x, u, "vertical")
                worst = max(worst, abs(vv - (1.0 if i == j else 0.0)))
    return worst


def check_oracle(b, rng, samples=200, tol=1e-9) -> float:
    """Relative gap ``max|a - a_oracle| / max(1, max|a_oracle|)``."""
    sys = b.system
    worst = 0.0
    for s in _states(sys, rng, samples):
        a = dyn.natural_acceleration(sys, s)
        ref = dyn.multiplier_oracle(sys, s)
        worst = max(worst, float(np.max(np.abs(a - ref)) / max(1.0, np.max(np.abs(ref)))))
    return worst


def check_energy(b, rng, samples=200, tol=1e-10) -> float:
    sys = b.system
    return max(abs(dyn.energy_rate(sys, s)) for s in _states(sys, rng, samples))


def check_coefficients(b, rng, samples=50, tol=1e-8) -> float:
    gaps = [red.crossvalidate(b.split, x) for x in _points(b.system, rng, samples)]
    return max(max(v for k, v in g.items() if k != "adaptation") for g in gaps)


def check_adaptation(b, rng, samples=50, tol=1e-8) -> float:
    return max(red.crossvalidate(b.split, x)["adaptation"] for x in _points(b.system, rng, samples))


def check_momentum(b, rng, samples=100, tol=1e-9) -> float:
    sys = b.system
    return max(float(np.max(np.abs(red.momentum_and_residual(b.split, s)[1]), initial=0.0))
               for s in _states(sys, rng, samples))


def check_routh_mu0(b, rng, samples=20, tol=1e-9) -> float:
    """At ``mu = 0`` the Routh flow coincides with the reduced flow."""
    model, split = b.horizontal, b.split
    sys = b.system
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-BOX, BOX, sys.dim)
        x[list(split.group_coords)] = 0.0
        vk = rng.uniform(-BOX, BOX, model.nk)
        iota = routh.momentum_solve(model, np.zeros(model.nh), x, vk)
        u = routh._natural(model, x, vk, iota)
        full = np.linalg.solve(sys.frame.matrix(x).T, u)[: sys.m]
        rs = red.project_state(split, dyn.CState(x, full))
        _, f_kappa = red.reduced_rhs(split, rs)
        f_routh = routh.routh_rhs(model, np.zeros(model.nh), routh.RouthState(x, vk))
        worst = max(worst, float(np.max(np.abs(f_routh - f_kappa), initial=0.0)))
    return worst


Check = tuple[str, Callable[..., float], int, float]

BASE_CHECKS: list[Check] = [
    ("fd_check", check_fd, 100, 1e-6),
    ("frame_jacobian", check_frame_jacobian, 20, 1e-6),
    ("jacobi", check_jacobi, 20, 1e-8),
    ("lift_consistency", check_lifts, 20, 1e-8),
    ("oracle_equivalence", check_oracle, 200, 1e-9),
    ("energy_identity", check_energy, 200, 1e-10),
]
SPLIT_CHECKS: list[Check] = [
    ("coefficient_crossval", check_coefficients, 50, 1e-8),
    ("adaptation", check_adaptation, 50, 1e-8),
    ("momentum_residual", check_momentum, 100, 1e-9),
]
INVARIANCE_SAMPLES = 20
INVARIANCE_TOL = 1e-6


def verify_system(name: str, seed: int = DEFAULT_SEED, tol: float | None = None,
                  params: dict | None = None) -> list[CheckResult]:
    """Run every applicable suite on one zoo system.

    ``tol`` overrides the tolerance of the invariance checks only; the other
    checks keep their fixed thresholds.
    """
    b = build(name, params)
    results = []
    index = 0

    def run(label, fn, samples, check_tol):
        nonlocal index
        rng = np.random.default_rng([seed, index])
        index += 1
        results.append(CheckResult(label, samples, float(fn(b, rng, samples, check_tol)), check_tol))

    for check in BASE_CHECKS:
        run(*check)
    if b.split is not None:
        inv_tol = INVARIANCE_TOL if tol is None else float(tol)
        rng = np.random.default_rng([seed, index])
        index += 1
        pts = _points(b.system, rng, INVARIANCE_SAMPLES)
        report = red.verify_invariance(b.split, pts, tol=inv_tol, rng=rng)
        for key, value in report.maxima.items():
            results.append(CheckResult(f"invariance_{key}", INVARIANCE_SAMPLES, value, inv_tol))
        for check in SPLIT_CHECKS:
            if check[0] == "momentum_residual" and not b.split.rho:
                continue
            run(*check)
    if b.horizontal is not None and b.horizontal.nk:
        run("routh_mu0", check_routh_mu0, 20, 1e-9)
    return results


def verify_all(seed: int = DEFAULT_SEED, tol: float | None = None,
               include_negative: bool = False) -> list[CheckResult]:
    """Aggregate report over the zoo; check names are prefixed ``system/``.

    Negative controls are skipped unless ``include_negative`` is set, since
    they are built to fail.
    """
    out = []
    for name, spec in ZOO.items():
        if spec.negative_control and not include_negative:
            continue
        for r in verify_system(name, seed, tol):
            out.append(CheckResult(f"{name}/{r.check}", r.samples, r.max_residual, r.tol))
    return out
