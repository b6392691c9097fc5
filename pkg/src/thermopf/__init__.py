"""Battery-rack thermal control coupled to a LinDistFlow microgrid OPF."""

from .case import Case, ControlSettings, MixedSpec, SweepSpec, load_case, parse_case
from .control import (
    ControlEffort,
    EffortCoefficients,
    Reduction,
    apply_effort,
    compute_effort_coefficients,
    iterate_policy,
    linearization_order,
    optimal_policy,
    target_profile,
)
from .coordinator import compare, nested_mixed_spec, run_mixed, run_two_layer
from .lp import LinearProgram, SolveOutcome, solve_lp, solve_milp
from .network import DispatchSolution, EssConfig, GridCase, assemble_opf, extract_solution, solve_opf
from .thermal import (
    OperatingPoint,
    RackGeometry,
    ThermalParams,
    ThermalSystem,
    assemble_system,
    balance_residual,
    module_resistance,
    solve_steady_state,
    steady_point,
)

__version__ = "0.1.0"
