"""Second-stage evaluation of a fixed design.

Each scenario-tree leaf decouples once the first stage is fixed, so the
minimum-curtailment DC flow is a small LP per leaf. Closed-form evaluators for
the common structures (a loop reduced to simple paths by a failure, an intact
loop) back the LP as independent cross-checks and fast paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .catalog import SubType
from .geometry import OSS_ID, CandidateGraph, Edge
from .model import (
    THETA_BOUND,
    Design,
    ModelOptions,
    edge_susceptance,
)
from .scenario import (
    FailureParams,
    ScenarioTree,
    SystemState,
    WindScenario,
    build_scenario_tree,
    build_system_states,
    nominal_current,
)


class EvaluationError(RuntimeError):
    """Raised when a per-leaf flow problem cannot be solved (internal error)."""


@dataclass
class LeafFlow:
    """Operating point of one scenario-tree leaf."""

    omega_id: int
    state_id: int
    flows: dict[Edge, float]
    angles: dict[int, float]
    curtailments: dict[int, float]

    @property
    def curtail_total_a(self) -> float:
        return sum(self.curtailments.values())


def scenario_flow(
    design: Design,
    graph: CandidateGraph,
    subtypes: Sequence[SubType],
    opts: ModelOptions,
    omega: WindScenario,
    state: SystemState,
) -> LeafFlow:
    """Minimum total curtailment DC flow for one leaf of a fixed design.

    The failed edge (if any) may be absent from the design; failing an
    inactive edge changes nothing.
    """
    active = [e for e in design.active_edges]
    failed = None
    if state.failed_edge is not None:
        i, j = state.failed_edge
        failed = (min(i, j), max(i, j))

    wt_ids = graph.wt_ids
    node_ids = sorted(p.id for p in graph.points)
    gen = nominal_current(opts.p_n_mw, opts.v_n_kv, omega.magnitude)

    ne = len(active)
    nn = len(node_ids)
    nw = len(wt_ids)
    node_pos = {n: i for i, n in enumerate(node_ids)}
    wt_pos = {j: i for i, j in enumerate(wt_ids)}

    # Variable layout: [flows on active edges | angles | curtailments]
    n_vars = ne + nn + nw
    cost = np.zeros(n_vars)
    cost[ne + nn :] = 1.0

    lb = np.full(n_vars, -np.inf)
    ub = np.full(n_vars, np.inf)
    for idx, edge in enumerate(active):
        cap = subtypes[design.edge_types[edge]].capacity_a
        if edge == failed:
            lb[idx] = ub[idx] = 0.0
        else:
            lb[idx], ub[idx] = -cap, cap
    lb[ne : ne + nn] = -THETA_BOUND
    ub[ne : ne + nn] = THETA_BOUND
    lb[ne + nn :] = 0.0
    ub[ne + nn :] = gen

    rows = []
    rhs = []
    for j in wt_ids:
        row = np.zeros(n_vars)
        for idx, (a, b) in enumerate(active):
            if j == a:
                row[idx] = 1.0
            elif j == b:
                row[idx] = -1.0
        row[ne + nn + wt_pos[j]] = 1.0
        rows.append(row)
        rhs.append(gen)
    for idx, edge in enumerate(active):
        if edge == failed:
            continue
        a, b = edge
        s = subtypes[design.edge_types[edge]]
        bcoef = edge_susceptance(graph.length_of(edge), s, opts.v_n_kv)
        row = np.zeros(n_vars)
        row[idx] = 1.0
        row[ne + node_pos[a]] = -bcoef
        row[ne + node_pos[b]] = bcoef
        rows.append(row)
        rhs.append(0.0)

    res = linprog(
        c=cost,
        A_eq=np.array(rows),
        b_eq=np.array(rhs),
        bounds=list(zip(lb, ub)),
        method="highs",
    )
    if res.status != 0:
        raise EvaluationError(
            f"leaf (omega={omega.id}, state={state.id}) flow LP failed: {res.message}"
        )

    x = res.x
    return LeafFlow(
        omega_id=omega.id,
        state_id=state.id,
        flows={edge: float(x[idx]) for idx, edge in enumerate(active)},
        angles={n: float(x[ne + node_pos[n]]) for n in node_ids},
        curtailments={j: float(x[ne + nn + wt_pos[j]]) for j in wt_ids},
    )


def path_min_curtailment(
    injections: Sequence[float], capacities: Sequence[float]
) -> float:
    """Minimum total curtailment on a simple path hanging from the OSS.

    ``injections[p]`` is the current injected at the p-th node from the OSS;
    ``capacities[p]`` is the ampacity of the edge between node p and the OSS
    side. Edge p carries every injection at or beyond node p, so the binding
    deficit is the largest cumulative overload; curtailing at the far end
    relieves every edge between, which makes that bound achievable.
    """
    inj = list(injections)
    total_beyond = 0.0
    worst = 0.0
    for p in range(len(inj) - 1, -1, -1):
        total_beyond += inj[p]
        worst = max(worst, total_beyond - capacities[p])
    return max(0.0, worst)


def loop_base_flows(
    injections: Sequence[float], susceptances: Sequence[float]
) -> list[float]:
    """DC flows around an intact loop through the OSS with zero curtailment.

    Edge p joins position p to p+1 (positions 0 and m+1 are the OSS); flows
    are signed in that direction. The circulation follows from the phase
    consistency around the cycle: sum of flow/susceptance must vanish.
    """
    m = len(injections)
    w = [1.0 / b for b in susceptances]
    prefix = [0.0]
    for p in range(m):
        prefix.append(prefix[-1] + injections[p])
    # flow on edge p = t0 + prefix[p]
    t0 = -sum(prefix[p] * w[p] for p in range(m + 1)) / sum(w)
    return [t0 + prefix[p] for p in range(m + 1)]


def recourse_cost(
    design: Design,
    graph: CandidateGraph,
    subtypes: Sequence[SubType],
    tree: ScenarioTree,
    opts: ModelOptions,
) -> tuple[float, list[LeafFlow]]:
    """Expected curtailment cost of a fixed design over a scenario tree.

    sum over leaves of tau * psi * c_e * total curtailment, evaluating each
    leaf's minimum-curtailment flow independently.
    """
    total = 0.0
    details = []
    for w, k in tree.leaves():
        leaf = scenario_flow(design, graph, subtypes, opts, w, k)
        details.append(leaf)
        total += opts.c_e_per_ah * w.duration_h * k.probability * leaf.curtail_total_a
    return total, details


def design_tree(
    design: Design,
    graph: CandidateGraph,
    omega: Sequence[WindScenario],
    failure: FailureParams,
    edges: Optional[Sequence[Edge]] = None,
) -> ScenarioTree:
    """Scenario tree whose failure states cover ``edges``.

    Defaults to the design's active edges; pass an explicit edge list to
    evaluate several designs on a common contingency set.
    """
    chosen = tuple(edges) if edges is not None else design.active_edges
    pairs = [(e, graph.length_of(e)) for e in sorted(chosen)]
    return build_scenario_tree(tuple(omega), build_system_states(pairs, failure))


@dataclass
class DesignCosts:
    investment: float
    losses: float
    reliability: float

    @property
    def total(self) -> float:
        return self.investment + self.losses + self.reliability


@dataclass
class ComparisonReport:
    """Deterministic vs stochastic design, evaluated on a common tree.

    Percentages are (deterministic - stochastic) / stochastic * 100, so a
    positive total means the stochastic design is cheaper overall.
    """

    deterministic: DesignCosts
    stochastic: DesignCosts
    pct_total: float
    pct_investment: float
    pct_reliability: float


def _pct(det: float, stoch: float) -> float:
    if stoch == 0.0:
        return 0.0 if det == stoch else math.inf
    return (det - stoch) / stoch * 100.0


def first_stage_costs(
    design: Design, graph: CandidateGraph, subtypes: Sequence[SubType], opts: ModelOptions
) -> tuple[float, float]:
    """(investment, pre-processed losses) of a design's cable choices."""
    invest = 0.0
    losses = 0.0
    for edge, t in design.edge_types.items():
        d = graph.length_of(edge)
        invest += subtypes[t].cost_invest_per_m * d
        if opts.objective_mode == "invest_losses_reliability":
            losses += subtypes[t].cost_losses_per_m * d
    return invest, losses


def compare_designs(
    det: Design,
    stoch: Design,
    graph: CandidateGraph,
    subtypes: Sequence[SubType],
    tree: ScenarioTree,
    opts: ModelOptions,
) -> ComparisonReport:
    """Evaluate both designs' recourse on the same tree and report differences."""
    rows = []
    for design in (det, stoch):
        invest, losses = first_stage_costs(design, graph, subtypes, opts)
        reliability, _ = recourse_cost(design, graph, subtypes, tree, opts)
        rows.append(DesignCosts(invest, losses, reliability))
    det_costs, stoch_costs = rows
    return ComparisonReport(
        deterministic=det_costs,
        stochastic=stoch_costs,
        pct_total=_pct(det_costs.total, stoch_costs.total),
        pct_investment=_pct(det_costs.investment, stoch_costs.investment),
        pct_reliability=_pct(det_costs.reliability, stoch_costs.reliability),
    )


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int


def monte_carlo_curtailment(
    design: Design,
    graph: CandidateGraph,
    subtypes: Sequence[SubType],
    omega: Sequence[WindScenario],
    failure: FailureParams,
    opts: ModelOptions,
    n_samples: int,
    seed: int,
    horizon_h: Optional[float] = None,
) -> McEstimate:
    """Monte-Carlo estimate of the expected curtailment cost.

    Each trial samples a wind scenario by duration weight and a system state
    by its steady-state probability, then prices the pre-computed minimum
    curtailment of that leaf over the horizon (default: the scenarios' total
    duration). The estimator is unbiased for the analytic recourse cost over
    the design's own failure states.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    tree = design_tree(design, graph, tuple(omega), failure)
    horizon = horizon_h if horizon_h is not None else sum(w.duration_h for w in omega)

    # Leaf table: minimum curtailment per (omega, state) pair.
    delta = np.zeros((len(tree.omega), len(tree.states)))
    for wi, w in enumerate(tree.omega):
        for ki, k in enumerate(tree.states):
            delta[wi, ki] = scenario_flow(
                design, graph, subtypes, opts, w, k
            ).curtail_total_a

    rng = np.random.default_rng(seed)
    p_omega = np.array([w.duration_h for w in tree.omega])
    p_omega = p_omega / p_omega.sum()
    p_state = np.array([k.probability for k in tree.states])
    wi = rng.choice(len(tree.omega), size=n_samples, p=p_omega)
    ki = rng.choice(len(tree.states), size=n_samples, p=p_state)
    values = opts.c_e_per_ah * horizon * delta[wi, ki]
    mean = float(values.mean())
    std_error = float(values.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return McEstimate(mean=mean, std_error=std_error, n_samples=n_samples, seed=seed)
