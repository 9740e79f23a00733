"""windloop: closed-loop offshore wind collection-system layout design.

Design a redundant ("sunflower petal") medium-voltage cable network for an
offshore wind farm by solving a two-stage stochastic MILP over wind-power
scenarios and N-1 cable-failure states, wrapped in a progressive contingency
incorporation loop, with recourse evaluation and Monte-Carlo validation of
the reliability costs.
"""

from .backend import BackendConfig, SolveResult, SolverError, solve
from .backend.enumeration import enumerate_optimal
from .catalog import (
    CableType,
    Catalog,
    SubType,
    expand_subtypes,
    lift_catalog,
    loss_cost_per_meter,
    wt_capacity,
)
from .evaluate import (
    ComparisonReport,
    LeafFlow,
    McEstimate,
    compare_designs,
    monte_carlo_curtailment,
    recourse_cost,
    scenario_flow,
)
from .geometry import (
    CandidateGraph,
    Point,
    build_candidate_graph,
    crossing_pairs,
    segments_cross,
)
from .instance import FarmInstance, parse_instance, save_instance, synthetic_case_instance
from .model import (
    Design,
    ModelIR,
    ModelOptions,
    build_model,
    extract_design,
    validate_design,
)
from .pci import PciConfig, PciTrace, edge_level, run_pci, solve_deterministic
from .render import render_layout
from .scenario import (
    FailureParams,
    ScenarioTree,
    SystemState,
    WindScenario,
    build_scenario_tree,
    build_system_states,
    failure_probability,
    nominal_current,
)

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "CableType",
    "CandidateGraph",
    "Catalog",
    "ComparisonReport",
    "Design",
    "FailureParams",
    "FarmInstance",
    "LeafFlow",
    "McEstimate",
    "ModelIR",
    "ModelOptions",
    "PciConfig",
    "PciTrace",
    "Point",
    "ScenarioTree",
    "SolveResult",
    "SolverError",
    "SubType",
    "SystemState",
    "WindScenario",
    "build_candidate_graph",
    "build_model",
    "build_scenario_tree",
    "build_system_states",
    "compare_designs",
    "crossing_pairs",
    "edge_level",
    "enumerate_optimal",
    "expand_subtypes",
    "extract_design",
    "failure_probability",
    "lift_catalog",
    "loss_cost_per_meter",
    "monte_carlo_curtailment",
    "nominal_current",
    "parse_instance",
    "recourse_cost",
    "render_layout",
    "run_pci",
    "save_instance",
    "scenario_flow",
    "segments_cross",
    "solve",
    "solve_deterministic",
    "synthetic_case_instance",
    "validate_design",
    "wt_capacity",
]
