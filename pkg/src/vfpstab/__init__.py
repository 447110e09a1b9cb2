"""Linear Vlasov-Fokker-Planck equation on [0, 1] with boundary feedback control.

Kinetic IMEX solver, drift-diffusion limit solver and the hypocoercive
stability diagnostics used to check exponential decay.
"""
__version__ = "0.1.0"

from .analysis import ap_study, boundary_layer_indicator, check_envelope, fit_decay_rate
from .boundary import (FeedbackMatrix, Theorem, boundary_functionals, check_constraints,
                       compute_cb, evaluate_I, flux_balance)
from .constants import (FieldSpec, StabilityConstants, admissible_a, compute_xi,
                        decay_envelope, validate_field)
from .grid import PhaseGrid, build_grid, norms
from .kinetic import (EnergyRecord, InitialCondition, SimConfig, compute_energy,
                      prepare_initial, run, simulate, step)
from .macro import MacroConfig, run_macro, step_macro
from .operators import (DistributionState, coercivity_check, collision_L, moments,
                        project_pi)

__all__ = [
    "FeedbackMatrix", "Theorem", "boundary_functionals", "check_constraints", "compute_cb",
    "evaluate_I", "flux_balance", "FieldSpec", "StabilityConstants", "admissible_a",
    "compute_xi", "decay_envelope", "validate_field", "PhaseGrid", "build_grid", "norms",
    "EnergyRecord", "InitialCondition", "SimConfig", "compute_energy", "prepare_initial",
    "run", "simulate", "step", "MacroConfig", "run_macro", "step_macro",
    "DistributionState", "coercivity_check", "collision_L", "moments", "project_pi",
    "ap_study", "boundary_layer_indicator", "check_envelope", "fit_decay_rate",
]
