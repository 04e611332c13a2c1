"""Regularized Galerkin scheme for the coupled shell/fluid problem."""
from .basis import (CoupledBasis, boundary_factor, build_coupled_basis, divergence_residual, trace_residual,
                    trace_residual_fields)
from .initial import AdaptedData, adapt_initial_data, compatibility_residual
from .model import FlowModel
from .mollify import (MollifiedDisplacement, ShellTrajectory, VelocityHistory, epsilon_one, epsilon_zero,
                      mollify_displacement, mollify_velocity)
from .problem import ProblemData, clamped_shape
from .solver import (ContinuationLevel, ContinuationResult, CoupledProblem, DecoupledResult, PicardIterate,
                     PicardResult, ResumePoint, epsilon_continuation, picard_couple, regularized_geometry,
                     physical_velocity, sample_velocity, solve_decoupled, velocity_difference)
from .stepper import LEDGER_COLUMNS, EnergyLedger, LinearizedStepper, StepState
