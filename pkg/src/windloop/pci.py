"""Progressive contingency incorporation around the stochastic model.

The loop starts from a deterministic design (nominal wind, no failures, zero
curtailment), then repeatedly solves the stochastic program with failure
states for every edge that has ever been active at reliability level r_c,
until no new edges appear. The cumulative edge set only grows, so states stay
in the tree even after an edge drops out of the design; failing an inactive
edge cannot change any flow, which keeps those extra states harmless.

r_c filters by depth towards the OSS: level-1 edges touch the OSS (the main
feeders), level-2 edges touch a node one hop away, and so on. With r_c below
the deepest active level the model is deliberately relaxed; reports carry the
level so users can see which contingencies were in scope.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

from . import backend as backend_mod
from .backend import BackendConfig, SolveResult
from .geometry import OSS_ID, CandidateGraph, Edge
from .model import Design, ModelOptions, build_model, extract_design
from .scenario import (
    ScenarioTree,
    build_scenario_tree,
    build_system_states,
    deterministic_tree,
)


class PciError(RuntimeError):
    """A backend failure inside the PCI loop, with iteration context."""


@dataclass(frozen=True)
class PciConfig:
    r_c: int
    backend: BackendConfig
    kappa_max: int = 20

    def __post_init__(self):
        if self.r_c < 1:
            raise ValueError("r_c must be >= 1")
        if self.kappa_max < 1:
            raise ValueError("kappa_max must be >= 1")


@dataclass
class PciIteration:
    kappa: int
    active_filtered: tuple[Edge, ...]   # active edges within r_c after this solve
    cumulative: tuple[Edge, ...]        # edge set whose failure states were modeled
    n_states: int
    objective: float
    wall_time_s: float


@dataclass
class PciTrace:
    iterations: list[PciIteration] = field(default_factory=list)
    converged: bool = False

    @property
    def n_solves(self) -> int:
        return len(self.iterations)


def edge_level(design: Design, edge: Edge) -> float:
    """Depth of an active edge: 1 + min hop count from the OSS to an endpoint.

    Edges in a component not containing the OSS get infinity and are never
    selected by any finite r_c.
    """
    i, j = min(edge), max(edge)
    if (i, j) not in set(design.active_edges):
        raise ValueError(f"edge {edge} is not active in the design")
    adjacency: dict[int, list[int]] = {}
    for a, b in design.active_edges:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
    hops = {OSS_ID: 0}
    frontier = [OSS_ID]
    while frontier:
        nxt = []
        for n in frontier:
            for other in adjacency.get(n, ()):
                if other not in hops:
                    hops[other] = hops[n] + 1
                    nxt.append(other)
        frontier = nxt
    best = min(hops.get(i, math.inf), hops.get(j, math.inf))
    return 1 + best


def _filter_by_level(design: Design, r_c: int) -> tuple[Edge, ...]:
    return tuple(
        e for e in sorted(design.active_edges) if edge_level(design, e) <= r_c
    )


def _first_stage_hints(design: Design, ir) -> dict[str, float]:
    """Warm-start hints carrying only the first-stage variables."""
    graph = ir.source.graph
    hints: dict[str, float] = {}
    m = ir.maps
    active = set(design.active_edges)
    for e, edge in enumerate(graph.edges):
        hints[ir.variables[m.y_var[e]].name] = 1.0 if edge in active else 0.0
        for t in range(len(ir.source.subtypes)):
            on = edge in active and design.edge_types[edge] == t
            hints[ir.variables[m.x_var[(e, t)]].name] = 1.0 if on else 0.0
    return hints


def solve_deterministic(instance, cfg: BackendConfig) -> tuple[Design, SolveResult]:
    """Nominal-wind, base-state-only solve with curtailment pinned to zero."""
    graph = instance.candidate_graph()
    subtypes = instance.effective_types()
    tree = deterministic_tree(instance.wind_scenarios)
    opts = instance.model_options(fixed_zero_curtailment=True)
    ir = build_model(graph, subtypes, tree, opts)
    result = backend_mod.solve(ir, cfg)
    if result.status == "infeasible":
        raise PciError("deterministic problem infeasible")
    design = extract_design(ir, result.assignment)
    return design, result


def run_pci(instance, cfg: PciConfig) -> tuple[Design, PciTrace]:
    """Full progressive contingency incorporation; returns the last design
    and the per-iteration trace (kappa = 0 is the deterministic solve)."""
    graph = instance.candidate_graph()
    subtypes = instance.effective_types()
    opts_stoch = instance.model_options(fixed_zero_curtailment=False)
    omega = instance.wind_scenarios

    trace = PciTrace()
    t0 = time.perf_counter()
    try:
        design, det_result = solve_deterministic(instance, cfg.backend)
    except backend_mod.SolverError as exc:
        raise PciError(f"deterministic solve failed: {exc}") from exc
    active = _filter_by_level(design, cfg.r_c)
    trace.iterations.append(
        PciIteration(
            kappa=0,
            active_filtered=active,
            cumulative=(),
            n_states=1,
            objective=det_result.objective,
            wall_time_s=time.perf_counter() - t0,
        )
    )

    cumulative: set[Edge] = set()
    warm: Optional[dict[str, float]] = None
    last_design = design

    for kappa in range(1, cfg.kappa_max + 1):
        if set(active) <= cumulative:
            trace.converged = True
            break
        cumulative |= set(active)
        ordered = sorted(cumulative)
        states = build_system_states(
            [(e, graph.length_of(e)) for e in ordered], instance.failure
        )
        tree = build_scenario_tree(omega, states)
        ir = build_model(graph, subtypes, tree, opts_stoch)
        if warm is None:
            warm = _first_stage_hints(last_design, ir)
        t_it = time.perf_counter()
        try:
            result = backend_mod.solve(ir, cfg.backend, warm_start=warm)
        except backend_mod.SolverError as exc:
            raise PciError(f"iteration {kappa} solve failed: {exc}") from exc
        if result.status == "infeasible":
            raise PciError(f"iteration {kappa}: stochastic problem infeasible")
        last_design = extract_design(ir, result.assignment)
        active = _filter_by_level(last_design, cfg.r_c)
        warm = _first_stage_hints(last_design, ir)
        trace.iterations.append(
            PciIteration(
                kappa=kappa,
                active_filtered=active,
                cumulative=tuple(ordered),
                n_states=len(states),
                objective=result.objective,
                wall_time_s=time.perf_counter() - t_it,
            )
        )
    else:
        trace.converged = set(active) <= cumulative

    return last_design, trace


def full_contingency_solve(instance, cfg: BackendConfig) -> tuple[Design, SolveResult]:
    """Stochastic solve with a failure state for every candidate edge."""
    graph = instance.candidate_graph()
    subtypes = instance.effective_types()
    states = build_system_states(
        list(zip(graph.edges, graph.lengths)), instance.failure
    )
    tree = build_scenario_tree(instance.wind_scenarios, states)
    opts = instance.model_options(fixed_zero_curtailment=False)
    ir = build_model(graph, subtypes, tree, opts)
    result = backend_mod.solve(ir, cfg)
    if result.status == "infeasible":
        raise PciError("full-contingency problem infeasible")
    return extract_design(ir, result.assignment), result
