"""Constrained Lagrangian mechanics in anholonomic frames, with symmetry and Routh reduction."""

from __future__ import annotations

__version__ = "0.1.0"

from .dynamics import (ConstrainedSystem, CState, Trajectory, constrained_dynamics, energy, energy_rate,
                       integrate, mass_matrix, multiplier_oracle, natural_acceleration)
from .errors import (AnholonomeError, ConvergenceError, DimensionError, DynamicsError, EvaluationError,
                     InconsistencyError, ModelError, RegularityError, SingularFrameError)
from .frames import (AdaptedFrame, Frame, VectorField, bracket, lift_apply, natural_from_quasi,
                     quasi_from_natural, structure_functions)
from .jets import Jet2, ScalarOnTQ, eval_jet, fd_check
from .reduction import (GroupModel, InvariantFrameSplit, ReducedState, crossvalidate, integrate_reduced,
                        momentum_and_residual, project_state, reduced_coefficients, reduced_rhs,
                        verify_invariance)
from .routh import (HorizontalSymmetryModel, MomentumLevel, RouthState, integrate_routh, momentum_solve,
                    routh_rhs, routhian, routhian_function)

__all__ = [name for name in dir() if not name.startswith("_")]
