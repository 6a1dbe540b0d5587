"""Pontryagin-Hamiltonian dynamics for optimal control on Lie algebroids."""
from .chart import (AlgebroidChart, DualPoint, VerificationReport, anchor_compatibility_residual,
                    eval_anchor, eval_structure, jacobi_residual, sample_verify)
from .errors import (AlgctlError, DivergenceError, DomainError, IntegrationError, InvalidChartError,
                     NoConvergenceError, NoSolutionError, RegularityError, UnsupportedModelError)
from .fields import ScalarField, gradient_check
from .integrate import IntegratorConfig, SphereProjection, Trajectory, drift_report, integrate
from .models import MODEL_FACTORIES, ModelBundle, build_model
from .poisson import dirac_tensor, hamiltonian_vector_field, jacobiator, poisson_bracket, poisson_tensor
from .pontryagin import (ControlSystem, FeedbackSolverConfig, QuadraticHint, euler_poincare_residual,
                         reduced_hamiltonian, solve_stationarity, stationarity_residual_along)
from .shooting import ShootingConfig, ShootingProblem, habitat_problem, s2_problem, shoot

__all__ = [
    "AlgebroidChart", "DualPoint", "VerificationReport", "anchor_compatibility_residual", "eval_anchor",
    "eval_structure", "jacobi_residual", "sample_verify",
    "AlgctlError", "DivergenceError", "DomainError", "IntegrationError", "InvalidChartError",
    "NoConvergenceError", "NoSolutionError", "RegularityError", "UnsupportedModelError",
    "ScalarField", "gradient_check",
    "IntegratorConfig", "SphereProjection", "Trajectory", "drift_report", "integrate",
    "MODEL_FACTORIES", "ModelBundle", "build_model",
    "dirac_tensor", "hamiltonian_vector_field", "jacobiator", "poisson_bracket", "poisson_tensor",
    "ControlSystem", "FeedbackSolverConfig", "QuadraticHint", "euler_poincare_residual",
    "reduced_hamiltonian", "solve_stationarity", "stationarity_residual_along",
    "ShootingConfig", "ShootingProblem", "habitat_problem", "s2_problem", "shoot",
]
