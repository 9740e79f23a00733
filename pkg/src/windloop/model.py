"""Two-stage stochastic MILP for closed-loop collection-system design.

Builds a solver-agnostic intermediate representation: first-stage binaries
pick edges and cable sub-types, second-stage continuous variables carry a DC
power flow (current, busbar phase, curtailment) per scenario-tree leaf.

Constraint families, in emission order:

  type_link      one sub-type on each active edge
  wt_degree      every WT has exactly two active edges (closed loops)
  oss_degree     at most phi feeders at the OSS
  no_cross       crossing edge pairs mutually exclusive
  balance        per-WT current conservation, per leaf
  dc_upper/lower big-M link between current and phase difference, per leaf
  cap_upper/lower current within installed (and surviving) capacity, per leaf

Bounds: phases within +-0.1, currents within +-max capacity, curtailment
within [0, generated current] (fixed to zero in deterministic mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .catalog import SQRT3, SubType
from .geometry import OSS_ID, CandidateGraph, Edge
from .scenario import ScenarioTree, SystemState, WindScenario, nominal_current

THETA_BOUND = 0.1

OBJECTIVE_MODES = ("invest_reliability", "invest_losses_reliability")


class ModelError(ValueError):
    """Raised for inconsistent model inputs or invalid solution assignments."""


@dataclass(frozen=True)
class ModelOptions:
    """Knobs of the optimization program."""

    phi: int
    c_e_per_ah: float
    v_n_kv: float
    p_n_mw: float
    objective_mode: str = "invest_reliability"
    fixed_zero_curtailment: bool = False

    def __post_init__(self):
        if self.phi < 2:
            raise ModelError(f"phi must be >= 2 (a loop uses two OSS slots), got {self.phi}")
        if self.objective_mode not in OBJECTIVE_MODES:
            raise ModelError(f"unknown objective mode {self.objective_mode!r}")
        if self.c_e_per_ah < 0 or self.v_n_kv <= 0 or self.p_n_mw <= 0:
            raise ModelError("c_e must be >= 0 and V_n, P_n positive")


@dataclass(frozen=True)
class VarDef:
    name: str
    kind: str  # "B" binary, "C" continuous
    lb: float
    ub: float


@dataclass(frozen=True)
class Row:
    name: str
    coeffs: tuple[tuple[int, float], ...]  # (variable index, coefficient)
    sense: str  # "L" <=, "E" =, "G" >=
    rhs: float
    family: str


@dataclass
class IndexMaps:
    """Bijections between variables and their semantic indices."""

    y_var: dict[int, int]                       # edge index -> var
    x_var: dict[tuple[int, int], int]           # (edge, subtype) -> var
    flow_var: dict[tuple[int, int], int]        # (edge, leaf) -> var
    theta_var: dict[tuple[int, int], int]       # (node id, leaf) -> var
    curt_var: dict[tuple[int, int], int]        # (WT id, leaf) -> var
    leaves: tuple[tuple[int, int], ...]         # leaf -> (omega id, state id)


@dataclass
class ModelSource:
    """The inputs a model was built from, kept for extraction and validation."""

    graph: CandidateGraph
    subtypes: tuple[SubType, ...]
    tree: ScenarioTree
    opts: ModelOptions


@dataclass
class ModelIR:
    variables: list[VarDef]
    rows: list[Row]
    objective: dict[int, float]
    maps: IndexMaps
    source: ModelSource
    warm_start: Optional[dict[str, float]] = None
    minimize: bool = True

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def var_index(self, name: str) -> int:
        idx = {v.name: i for i, v in enumerate(self.variables)}
        return idx[name]

    def objective_value(self, values: Sequence[float]) -> float:
        return sum(c * values[i] for i, c in self.objective.items())

    def row_activity(self, row: Row, values: Sequence[float]) -> float:
        return sum(c * values[i] for i, c in row.coeffs)

    def family_rows(self, family: str) -> list[Row]:
        return [r for r in self.rows if r.family == family]

    def check_index_maps(self) -> None:
        """Every declared variable must appear in exactly one index map."""
        m = self.maps
        seen: list[int] = []
        for d in (m.y_var, m.x_var, m.flow_var, m.theta_var, m.curt_var):
            seen.extend(d.values())
        if sorted(seen) != list(range(len(self.variables))):
            raise ModelError("index maps are not a bijection onto the variables")


def big_m(length_m: float, s: SubType, v_n_kv: float, flow_bound_a: float) -> float:
    """Tightest constant deactivating a DC-flow row for an unused cable.

    flow bound + widest phase spread (0.2) times the edge susceptance; any
    feasible (current, phases) point then satisfies the released row.
    """
    if length_m <= 0 or s.reactance_ohm_per_m <= 0:
        raise ModelError("big-M needs positive length and reactance")
    b = 1000.0 * v_n_kv / (SQRT3 * s.reactance_ohm_per_m * length_m)
    return flow_bound_a + 2.0 * THETA_BOUND * b


def edge_susceptance(length_m: float, s: SubType, v_n_kv: float) -> float:
    """Amperes per radian of phase difference across an edge with this cable."""
    return 1000.0 * v_n_kv / (SQRT3 * s.reactance_ohm_per_m * length_m)


def build_model(
    graph: CandidateGraph,
    subtypes: Sequence[SubType],
    tree: ScenarioTree,
    opts: ModelOptions,
    warm_start: Optional[Mapping[str, float]] = None,
) -> ModelIR:
    """Assemble the full MILP over the candidate graph and scenario tree."""
    subtypes = tuple(subtypes)
    if not subtypes:
        raise ModelError("need at least one cable sub-type")
    edges = graph.edges
    n_edges = len(edges)
    wt_ids = graph.wt_ids
    node_ids = tuple(sorted(p.id for p in graph.points))
    leaves = tuple((w.id, k.id) for w, k in tree.leaves())
    if n_edges > 9999 or len(leaves) > 999 or len(subtypes) > 99 or max(node_ids) > 9999:
        raise ModelError("instance exceeds the deterministic naming capacity")

    for k in tree.states:
        if k.failed_edge is not None and not graph.has_edge(k.failed_edge):
            raise ModelError(f"system state {k.id} fails edge {k.failed_edge} absent from graph")

    omega_by_id = {w.id: w for w in tree.omega}
    state_by_id = {k.id: k for k in tree.states}
    flow_bound = max(s.capacity_a for s in subtypes)

    variables: list[VarDef] = []
    objective: dict[int, float] = {}

    def add_var(name: str, kind: str, lb: float, ub: float) -> int:
        variables.append(VarDef(name, kind, lb, ub))
        return len(variables) - 1

    y_var = {e: add_var(f"y{e:04d}", "B", 0.0, 1.0) for e in range(n_edges)}
    x_var = {
        (e, t): add_var(f"x{e:04d}{t:02d}", "B", 0.0, 1.0)
        for e in range(n_edges)
        for t in range(len(subtypes))
    }
    flow_var: dict[tuple[int, int], int] = {}
    theta_var: dict[tuple[int, int], int] = {}
    curt_var: dict[tuple[int, int], int] = {}
    for l, (w_id, _k_id) in enumerate(leaves):
        zeta = omega_by_id[w_id].magnitude
        gen = nominal_current(opts.p_n_mw, opts.v_n_kv, zeta)
        for e in range(n_edges):
            flow_var[(e, l)] = add_var(f"I{e:04d}{l:03d}", "C", -flow_bound, flow_bound)
        for n in node_ids:
            theta_var[(n, l)] = add_var(f"T{n:04d}{l:03d}", "C", -THETA_BOUND, THETA_BOUND)
        ub = 0.0 if opts.fixed_zero_curtailment else gen
        for j in wt_ids:
            curt_var[(j, l)] = add_var(f"D{j:04d}{l:03d}", "C", 0.0, ub)

    # Objective: investment (+ pre-processed losses) on x, expected curtailment on delta.
    for e in range(n_edges):
        d = graph.lengths[e]
        for t, s in enumerate(subtypes):
            coef = s.cost_invest_per_m * d
            if opts.objective_mode == "invest_losses_reliability":
                coef += s.cost_losses_per_m * d
            objective[x_var[(e, t)]] = coef
    for l, (w_id, k_id) in enumerate(leaves):
        weight = opts.c_e_per_ah * omega_by_id[w_id].duration_h * state_by_id[k_id].probability
        for j in wt_ids:
            if weight != 0.0:
                objective[curt_var[(j, l)]] = weight

    rows: list[Row] = []
    row_counter = 0

    def add_row(coeffs, sense, rhs, family) -> None:
        nonlocal row_counter
        rows.append(Row(f"R{row_counter:07d}", tuple(coeffs), sense, rhs, family))
        row_counter += 1

    # type_link: sum_t x_et - y_e = 0
    for e in range(n_edges):
        coeffs = [(x_var[(e, t)], 1.0) for t in range(len(subtypes))]
        coeffs.append((y_var[e], -1.0))
        add_row(coeffs, "E", 0.0, "type_link")

    incident = {n: [] for n in node_ids}
    for e, (i, j) in enumerate(edges):
        incident[i].append(e)
        incident[j].append(e)

    # wt_degree: every WT meets exactly two active edges
    for j in wt_ids:
        add_row([(y_var[e], 1.0) for e in incident[j]], "E", 2.0, "wt_degree")

    # oss_degree: at most phi feeders
    add_row([(y_var[e], 1.0) for e in incident[OSS_ID]], "L", float(opts.phi), "oss_degree")

    # no_cross: crossing pairs are mutually exclusive
    for a, b in sorted(graph.crossings):
        add_row([(y_var[a], 1.0), (y_var[b], 1.0)], "L", 1.0, "no_cross")

    susceptance = [
        [edge_susceptance(graph.lengths[e], s, opts.v_n_kv) for s in subtypes]
        for e in range(n_edges)
    ]
    bigm = [
        [big_m(graph.lengths[e], s, opts.v_n_kv, flow_bound) for s in subtypes]
        for e in range(n_edges)
    ]

    for l, (w_id, k_id) in enumerate(leaves):
        state = state_by_id[k_id]
        failed = graph.edge_index(state.failed_edge) if state.failed_edge else None
        gen = nominal_current(opts.p_n_mw, opts.v_n_kv, omega_by_id[w_id].magnitude)

        # balance: outflow - inflow + curtailment = generated current
        for j in wt_ids:
            coeffs = []
            for e in incident[j]:
                lo, _hi = edges[e]
                coeffs.append((flow_var[(e, l)], 1.0 if j == lo else -1.0))
            coeffs.append((curt_var[(j, l)], 1.0))
            add_row(coeffs, "E", gen, "balance")

        # dc_upper / dc_lower: current tracks phase difference when the
        # sub-type is installed and the edge survives this state.
        for e, (i, j) in enumerate(edges):
            r = 1.0 if e == failed else 0.0
            for t in range(len(subtypes)):
                b = susceptance[e][t]
                m = bigm[e][t]
                rhs = m * (1.0 + r)
                add_row(
                    [
                        (flow_var[(e, l)], 1.0),
                        (theta_var[(i, l)], -b),
                        (theta_var[(j, l)], b),
                        (x_var[(e, t)], m),
                    ],
                    "L",
                    rhs,
                    "dc_upper",
                )
                add_row(
                    [
                        (flow_var[(e, l)], -1.0),
                        (theta_var[(i, l)], b),
                        (theta_var[(j, l)], -b),
                        (x_var[(e, t)], m),
                    ],
                    "L",
                    rhs,
                    "dc_lower",
                )

        # cap_upper / cap_lower: |I| within surviving installed capacity
        for e in range(n_edges):
            alive = 0.0 if e == failed else 1.0
            xs = [(x_var[(e, t)], -subtypes[t].capacity_a * alive) for t in range(len(subtypes))]
            add_row([(flow_var[(e, l)], 1.0)] + xs, "L", 0.0, "cap_upper")
            add_row([(flow_var[(e, l)], -1.0)] + xs, "L", 0.0, "cap_lower")

        # Redundant surrogate cuts (sums of balance and capacity rows); they
        # leave the integer feasible set unchanged but tighten the LP bound.
        # Feeder aggregate: everything generated minus curtailed enters the
        # OSS through surviving feeder capacity.
        coeffs = [
            (x_var[(e, t)], subtypes[t].capacity_a * (0.0 if e == failed else 1.0))
            for e in incident[OSS_ID]
            for t in range(len(subtypes))
        ]
        coeffs += [(curt_var[(j, l)], 1.0) for j in wt_ids]
        add_row(coeffs, "G", gen * len(wt_ids), "cut_feeder")
        # Local aggregate: each WT's surviving incident capacity carries its
        # own injection net of curtailment.
        for j in wt_ids:
            coeffs = [
                (x_var[(e, t)], subtypes[t].capacity_a * (0.0 if e == failed else 1.0))
                for e in incident[j]
                for t in range(len(subtypes))
            ]
            coeffs.append((curt_var[(j, l)], 1.0))
            add_row(coeffs, "G", gen, "cut_wt")

    maps = IndexMaps(
        y_var=y_var,
        x_var=x_var,
        flow_var=flow_var,
        theta_var=theta_var,
        curt_var=curt_var,
        leaves=leaves,
    )
    ir = ModelIR(
        variables=variables,
        rows=rows,
        objective=objective,
        maps=maps,
        source=ModelSource(graph=graph, subtypes=subtypes, tree=tree, opts=opts),
        warm_start=dict(warm_start) if warm_start else None,
    )
    ir.check_index_maps()
    return ir


@dataclass(frozen=True)
class CostBreakdown:
    investment: float
    losses: float
    reliability: float

    @property
    def total(self) -> float:
        return self.investment + self.losses + self.reliability


@dataclass
class Design:
    """A first-stage decision with its second-stage operating point.

    ``edge_types`` maps active node-id pairs to sub-type indices; flows,
    angles and curtailments are keyed by (i, j, omega id, state id) /
    (node id, omega id, state id) over the tree the design was solved with.
    """

    active_edges: tuple[Edge, ...]
    edge_types: dict[Edge, int]
    leaves: tuple[tuple[int, int], ...]
    flows: dict[tuple[int, int, int, int], float]
    angles: dict[tuple[int, int, int], float]
    curtailments: dict[tuple[int, int, int], float]
    breakdown: CostBreakdown

    def curtail_total(self, w_id: int, k_id: int) -> float:
        return sum(v for (j, w, k), v in self.curtailments.items() if (w, k) == (w_id, k_id))


BINARY_TOL = 1e-6
BREAKDOWN_RTOL = 1e-6


def extract_design(ir: ModelIR, assignment: Mapping[str, float]) -> Design:
    """Turn a solver assignment into a Design, re-deriving the cost breakdown.

    The breakdown is recomputed from the rounded first stage and the raw
    second stage, then required to agree with the assignment's objective value
    to within 1e-6 relative.
    """
    values = []
    for v in ir.variables:
        if v.name not in assignment:
            raise ModelError(f"assignment missing variable {v.name}")
        values.append(float(assignment[v.name]))

    for i, v in enumerate(ir.variables):
        if v.kind == "B":
            if abs(values[i] - round(values[i])) > BINARY_TOL:
                raise ModelError(
                    f"binary {v.name} = {values[i]!r} violates integrality beyond {BINARY_TOL}"
                )
            values[i] = float(round(values[i]))

    src = ir.source
    graph, subtypes, tree, opts = src.graph, src.subtypes, src.tree, src.opts
    m = ir.maps

    active: list[Edge] = []
    edge_types: dict[Edge, int] = {}
    for e, edge in enumerate(graph.edges):
        y = values[m.y_var[e]]
        chosen = [t for t in range(len(subtypes)) if values[m.x_var[(e, t)]] > 0.5]
        if len(chosen) != int(y):
            raise ModelError(
                f"edge {edge}: y={int(y)} but {len(chosen)} sub-types selected"
            )
        if y > 0.5:
            active.append(edge)
            edge_types[edge] = chosen[0]

    omega_by_id = {w.id: w for w in tree.omega}
    state_by_id = {k.id: k for k in tree.states}

    flows = {}
    angles = {}
    curts = {}
    for l, (w_id, k_id) in enumerate(m.leaves):
        for e, (i, j) in enumerate(graph.edges):
            flows[(i, j, w_id, k_id)] = values[m.flow_var[(e, l)]]
        for n in sorted(p.id for p in graph.points):
            angles[(n, w_id, k_id)] = values[m.theta_var[(n, l)]]
        for j in graph.wt_ids:
            curts[(j, w_id, k_id)] = values[m.curt_var[(j, l)]]

    invest = 0.0
    losses = 0.0
    for edge, t in edge_types.items():
        d = graph.length_of(edge)
        invest += subtypes[t].cost_invest_per_m * d
        if opts.objective_mode == "invest_losses_reliability":
            losses += subtypes[t].cost_losses_per_m * d
    reliability = 0.0
    for (j, w_id, k_id), delta in curts.items():
        reliability += (
            opts.c_e_per_ah
            * omega_by_id[w_id].duration_h
            * state_by_id[k_id].probability
            * delta
        )
    breakdown = CostBreakdown(invest, losses, reliability)

    solver_obj = ir.objective_value(values)
    if abs(breakdown.total - solver_obj) > BREAKDOWN_RTOL * max(1.0, abs(solver_obj)):
        raise ModelError(
            f"cost breakdown {breakdown.total!r} disagrees with solver objective {solver_obj!r}"
        )

    return Design(
        active_edges=tuple(active),
        edge_types=edge_types,
        leaves=m.leaves,
        flows=flows,
        angles=angles,
        curtailments=curts,
        breakdown=breakdown,
    )


@dataclass
class ValidationReport:
    """Max numeric violation per constraint family, plus balance residuals."""

    max_violation: dict[str, float]
    balance_residuals: dict[tuple[int, int, int], float]  # (WT, omega, state)

    @property
    def worst(self) -> float:
        return max(self.max_violation.values(), default=0.0)

    def ok(self, tol: float = 1e-6) -> bool:
        return self.worst <= tol

    def failed_families(self, tol: float = 1e-6) -> list[str]:
        return sorted(f for f, v in self.max_violation.items() if v > tol)


def validate_design(
    design: Design,
    graph: CandidateGraph,
    tree: ScenarioTree,
    subtypes: Sequence[SubType],
    opts: ModelOptions,
) -> ValidationReport:
    """Numerically re-check every constraint family against a Design."""
    subtypes = tuple(subtypes)
    viol = {
        f: 0.0
        for f in (
            "type_link",
            "wt_degree",
            "oss_degree",
            "no_cross",
            "balance",
            "dc_flow",
            "capacity",
            "theta_bounds",
            "flow_bounds",
            "curtail_bounds",
        )
    }

    def bump(family: str, amount: float) -> None:
        if amount > viol[family]:
            viol[family] = amount

    active = set(design.active_edges)
    for edge in active:
        if edge not in design.edge_types:
            bump("type_link", 1.0)

    degree: dict[int, int] = {}
    for (i, j) in active:
        degree[i] = degree.get(i, 0) + 1
        degree[j] = degree.get(j, 0) + 1
    for j in graph.wt_ids:
        bump("wt_degree", abs(degree.get(j, 0) - 2))
    bump("oss_degree", max(0, degree.get(OSS_ID, 0) - opts.phi))

    for a, b in graph.crossings:
        if graph.edges[a] in active and graph.edges[b] in active:
            bump("no_cross", 1.0)

    flow_bound = max(s.capacity_a for s in subtypes)
    balance_residuals: dict[tuple[int, int, int], float] = {}
    for w, k in tree.leaves():
        gen = nominal_current(opts.p_n_mw, opts.v_n_kv, w.magnitude)
        failed = k.failed_edge
        for j in graph.wt_ids:
            net = 0.0
            for (a, b) in graph.edges:
                if j == a:
                    net += design.flows.get((a, b, w.id, k.id), 0.0)
                elif j == b:
                    net -= design.flows.get((a, b, w.id, k.id), 0.0)
            delta = design.curtailments.get((j, w.id, k.id), 0.0)
            res = abs(net + delta - gen)
            balance_residuals[(j, w.id, k.id)] = res
            bump("balance", res)
            bump("curtail_bounds", max(0.0, delta - gen, -delta))
        for (i, j) in graph.edges:
            f = design.flows.get((i, j, w.id, k.id), 0.0)
            bump("flow_bounds", abs(f) - flow_bound)
            alive = (i, j) != failed
            if (i, j) in active:
                cap = subtypes[design.edge_types[(i, j)]].capacity_a if alive else 0.0
            else:
                cap = 0.0
            bump("capacity", abs(f) - cap)
            if (i, j) in active and alive:
                s = subtypes[design.edge_types[(i, j)]]
                b = edge_susceptance(graph.length_of((i, j)), s, opts.v_n_kv)
                dtheta = design.angles.get((i, w.id, k.id), 0.0) - design.angles.get(
                    (j, w.id, k.id), 0.0
                )
                bump("dc_flow", abs(f - b * dtheta))
        for n in (p.id for p in graph.points):
            th = design.angles.get((n, w.id, k.id), 0.0)
            bump("theta_bounds", abs(th) - THETA_BOUND)

    # Clamp the bound families at zero (negative slack is fine).
    for fam in ("flow_bounds", "capacity", "theta_bounds"):
        viol[fam] = max(0.0, viol[fam])
    return ValidationReport(max_violation=viol, balance_residuals=balance_residuals)
