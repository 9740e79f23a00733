"""Exhaustive optimization oracle for desk-size instances.

Enumerates every partition of the WTs into node-disjoint cycles (loops
through the OSS, plus OSS-less cycles which the degree constraints admit at
full curtailment cost), every cycle order, and every cable assignment, and
evaluates the exact expected curtailment of each candidate. Intended as an
independent reference for the MILP path; guarded to small WT counts.

Curtailment per leaf is closed-form for the common cases (an intact loop, a
loop reduced to simple paths by one failure); assignments whose flows press
against the phase-angle box fall back to the per-leaf LP, evaluated lazily in
optimistic-cost order so the fallback almost never runs.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from ..catalog import SQRT3, SubType
from ..evaluate import scenario_flow
from ..geometry import OSS_ID, CandidateGraph
from ..model import Design, CostBreakdown, ModelIR, ModelOptions, build_model
from ..scenario import ScenarioTree, nominal_current
from . import SolveResult

MAX_ASSIGNMENTS = 400_000
SPAN_LIMIT = 0.2  # widest admissible phase spread along a path or loop


class EnumerationError(RuntimeError):
    pass


@dataclass
class _Context:
    graph: CandidateGraph
    subtypes: tuple[SubType, ...]
    tree: ScenarioTree
    opts: ModelOptions
    cap: np.ndarray          # capacity per subtype
    cost_per_m: np.ndarray   # objective cost per metre per subtype
    x_per_m: np.ndarray      # reactance per metre per subtype
    psi_by_edge: dict[int, float]
    injections: list[tuple[float, float]]  # (injected current, tau*c_e) per scenario
    zero_curtail: bool


@dataclass
class _PetalEval:
    feasible: bool
    cost: float = math.inf
    assignment: tuple[int, ...] = ()
    isolated: bool = False


def _set_partitions(elems: tuple[int, ...]) -> Iterator[list[tuple[int, ...]]]:
    """All partitions of ``elems`` into non-empty blocks (sorted tuples)."""
    if not elems:
        yield []
        return
    first, rest = elems[0], elems[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [tuple(sorted(part[i] + (first,)))] + part[i + 1 :]
        yield part + [(first,)]


def _petal_cycles(block: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """WT orders of a loop through the OSS, up to direction reversal."""
    for seq in itertools.permutations(block):
        if seq[0] < seq[-1] or len(seq) == 1:
            yield seq


def _isolated_cycles(block: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """Cyclic orders of an OSS-less cycle, up to rotation and reversal."""
    head = block[0]
    for seq in itertools.permutations(block[1:]):
        if len(seq) < 2 or seq[0] < seq[-1]:
            yield (head, *seq)


def _cycle_edges(cycle: tuple[int, ...], isolated: bool) -> list[tuple[int, int]]:
    if isolated:
        ring = list(cycle) + [cycle[0]]
    else:
        ring = [OSS_ID, *cycle, OSS_ID]
    return [
        (min(a, b), max(a, b)) for a, b in zip(ring, ring[1:])
    ]


def _petal_leaf_lp(
    ctx: _Context, edges: list[tuple[int, int]], assignment: Sequence[int],
    omega_idx: int, failed_pos: Optional[int],
) -> float:
    """Exact minimum curtailment of one petal leaf via the evaluate-module LP."""
    design = Design(
        active_edges=tuple(edges),
        edge_types={e: assignment[p] for p, e in enumerate(edges)},
        leaves=(),
        flows={},
        angles={},
        curtailments={},
        breakdown=CostBreakdown(0.0, 0.0, 0.0),
    )
    w = ctx.tree.omega[omega_idx]
    if failed_pos is None:
        state = ctx.tree.base_state
    else:
        target = edges[failed_pos]
        state = next(
            k for k in ctx.tree.states if k.failed_edge == target
        )
    leaf = scenario_flow(design, ctx.graph, ctx.subtypes, ctx.opts, w, state)
    petal_nodes = {n for e in edges for n in e if n != OSS_ID}
    return sum(v for j, v in leaf.curtailments.items() if j in petal_nodes)


def _petal_cost(ctx: _Context, cycle: tuple[int, ...], isolated: bool) -> _PetalEval:
    graph = ctx.graph
    edges = _cycle_edges(cycle, isolated)
    if any(not graph.has_edge(e) for e in edges):
        return _PetalEval(feasible=False)
    m = len(cycle)

    if isolated:
        # No route to the OSS: everything is curtailed in every state.
        if ctx.zero_curtail and any(inj > 0 for inj, _ in ctx.injections):
            return _PetalEval(feasible=False)
        t = int(np.argmin(ctx.cost_per_m))
        invest = ctx.cost_per_m[t] * sum(graph.length_of(e) for e in edges)
        curt = sum(weight * m * inj for inj, weight in ctx.injections)
        return _PetalEval(
            feasible=True,
            cost=float(invest + curt),
            assignment=tuple([t] * len(edges)),
            isolated=True,
        )

    n_pos = m + 1
    n_sub = len(ctx.subtypes)
    n_assign = n_sub**n_pos
    if n_assign > MAX_ASSIGNMENTS:
        raise EnumerationError(
            f"{n_assign} cable assignments on a {m}-WT loop exceed the "
            f"enumeration budget; reduce the catalog or the instance"
        )

    lengths = np.array([graph.length_of(e) for e in edges])
    grids = np.meshgrid(*([np.arange(n_sub)] * n_pos), indexing="ij")
    assign = np.stack([g.ravel() for g in grids], axis=1)  # (A, n_pos)
    caps = ctx.cap[assign]
    invest = (ctx.cost_per_m[assign] * lengths).sum(axis=1)
    # 1/B per position: phase radians per ampere
    w_inv = (SQRT3 * ctx.x_per_m[assign] * lengths) / (1000.0 * ctx.opts.v_n_kv)

    psi = np.array([ctx.psi_by_edge.get(graph.edge_index(e), 0.0) for e in edges])
    coef_base = 1.0 - psi.sum()

    exact = np.zeros(n_assign)          # expected curtailment cost, closed form
    optimistic = np.zeros(n_assign)     # lower bound where the closed form is unsure
    dirty_leaves: dict[int, set[tuple[int, Optional[int]]]] = {}
    infeasible = np.zeros(n_assign, dtype=bool)

    def mark_dirty(rows: np.ndarray, omega_idx: int, failed_pos: Optional[int]):
        for r in np.nonzero(rows)[0]:
            dirty_leaves.setdefault(int(r), set()).add((omega_idx, failed_pos))

    for omega_idx, (inj, weight) in enumerate(ctx.injections):
        if inj == 0.0:
            continue
        prefix = inj * np.arange(0, m + 1)  # injections absorbed before edge p

        # Intact loop: flows follow the phase-consistent split.
        t0 = -(w_inv * prefix).sum(axis=1) / w_inv.sum(axis=1)
        flows = t0[:, None] + prefix[None, :]
        cum = np.hstack([np.zeros((n_assign, 1)), -np.cumsum(flows * w_inv, axis=1)])
        span = cum.max(axis=1) - cum.min(axis=1)
        cap_ok = (np.abs(flows) <= caps + 1e-9).all(axis=1)
        span_ok = span <= SPAN_LIMIT + 1e-12
        base_bad = ~(cap_ok & span_ok)
        if ctx.zero_curtail:
            infeasible |= base_bad
        else:
            # Lower bound when curtailment is unavoidable: the feeders cap
            # what the loop can export.
            base_lb = np.maximum(0.0, m * inj - caps[:, 0] - caps[:, -1])
            optimistic += weight * coef_base * np.where(base_bad, base_lb, 0.0)
            mark_dirty(base_bad, omega_idx, None)

        # One failed edge: the loop splits into at most two simple paths.
        for p in range(n_pos):
            if psi[p] == 0.0:
                continue
            delta = np.zeros(n_assign)
            span_need = np.zeros(n_assign)
            if p > 0:
                down = inj * (p - np.arange(0, p))  # loads on edges 0..p-1
                deficit = down[None, :] - caps[:, :p]
                delta += np.maximum(0.0, deficit.max(axis=1))
                span_need = np.maximum(
                    span_need,
                    (np.minimum(down[None, :], caps[:, :p]) * w_inv[:, :p]).sum(axis=1),
                )
            if p < m:
                down = inj * (np.arange(p + 1, m + 1) - p)  # loads on edges p+1..m
                deficit = down[None, :] - caps[:, p + 1 :]
                delta += np.maximum(0.0, deficit.max(axis=1))
                span_need = np.maximum(
                    span_need,
                    (np.minimum(down[None, :], caps[:, p + 1 :]) * w_inv[:, p + 1 :]).sum(
                        axis=1
                    ),
                )
            leaf_bad = span_need > SPAN_LIMIT + 1e-12
            contrib = weight * psi[p] * delta
            if ctx.zero_curtail:
                infeasible |= delta > 1e-9
                infeasible |= leaf_bad
            else:
                exact += np.where(leaf_bad, 0.0, contrib)
                optimistic += np.where(leaf_bad, contrib, 0.0)  # closed form is a valid lb
                mark_dirty(leaf_bad, omega_idx, p)

    total = invest + exact
    clean = np.ones(n_assign, dtype=bool)
    if ctx.zero_curtail:
        clean &= ~infeasible
    for r in dirty_leaves:
        clean[r] = False

    best_cost = math.inf
    best_row = -1
    if clean.any():
        idx = int(np.argmin(np.where(clean, total, np.inf)))
        best_cost = float(total[idx])
        best_row = idx

    if not ctx.zero_curtail and dirty_leaves:
        # Resolve borderline assignments exactly, cheapest bound first.
        order = sorted(dirty_leaves, key=lambda r: total[r] + optimistic[r])
        for r in order:
            bound = float(total[r] + optimistic[r])
            if bound >= best_cost:
                break
            cost_r = float(invest[r])
            row_assign = tuple(int(v) for v in assign[r])
            # Re-add the clean closed-form part, then LP the dirty leaves.
            cost_r += float(exact[r])
            ok = True
            for omega_idx, failed_pos in sorted(dirty_leaves[r], key=str):
                d = _petal_leaf_lp(ctx, edges, row_assign, omega_idx, failed_pos)
                inj, weight = ctx.injections[omega_idx]
                share = coef_base if failed_pos is None else psi[failed_pos]
                cost_r += weight * share * d
                if not math.isfinite(d):
                    ok = False
                    break
            if ok and cost_r < best_cost:
                best_cost = cost_r
                best_row = r

    if best_row < 0:
        return _PetalEval(feasible=False)
    return _PetalEval(
        feasible=True,
        cost=best_cost,
        assignment=tuple(int(v) for v in assign[best_row]),
    )


def enumerate_optimal(
    graph: CandidateGraph,
    subtypes: Sequence[SubType],
    tree: ScenarioTree,
    opts: ModelOptions,
    max_wt: int = 8,
) -> SolveResult:
    """Globally optimal design by exhaustive search (see module docstring)."""
    ir = build_model(graph, subtypes, tree, opts)
    if graph.n_wt > max_wt:
        raise EnumerationError(f"enumeration limited to {max_wt} WTs, got {graph.n_wt}")
    return solve_by_enumeration(ir)


def solve_by_enumeration(ir: ModelIR) -> SolveResult:
    t_start = time.perf_counter()
    graph = ir.source.graph
    subtypes = ir.source.subtypes
    tree = ir.source.tree
    opts = ir.source.opts

    use_losses = opts.objective_mode == "invest_losses_reliability"
    ctx = _Context(
        graph=graph,
        subtypes=subtypes,
        tree=tree,
        opts=opts,
        cap=np.array([s.capacity_a for s in subtypes]),
        cost_per_m=np.array(
            [s.cost_total_per_m if use_losses else s.cost_invest_per_m for s in subtypes]
        ),
        x_per_m=np.array([s.reactance_ohm_per_m for s in subtypes]),
        psi_by_edge={
            graph.edge_index(k.failed_edge): k.probability
            for k in tree.states
            if k.failed_edge is not None
        },
        injections=[
            (
                nominal_current(opts.p_n_mw, opts.v_n_kv, w.magnitude),
                opts.c_e_per_ah * w.duration_h,
            )
            for w in tree.omega
        ],
        zero_curtail=opts.fixed_zero_curtailment,
    )

    wt_ids = graph.wt_ids
    max_petals = opts.phi // 2
    memo: dict[tuple, _PetalEval] = {}

    # Crossings couple the blocks, so the search keeps full cycle choices per
    # block and rejects crossing pairs on the assembled topology.
    crossing = graph.crossings

    best_cost = math.inf
    best_topology: Optional[list[tuple[tuple[int, ...], bool, _PetalEval]]] = None

    def edge_indices(cycle: tuple[int, ...], isolated: bool) -> Optional[list[int]]:
        idx = []
        for e in _cycle_edges(cycle, isolated):
            if not graph.has_edge(e):
                return None
            idx.append(graph.edge_index(e))
        return idx

    def crossings_ok(all_edges: list[int]) -> bool:
        es = sorted(all_edges)
        for a_i in range(len(es)):
            for b_i in range(a_i + 1, len(es)):
                if (es[a_i], es[b_i]) in crossing:
                    return False
        return True

    for partition in _set_partitions(wt_ids):
        if any(len(b) < 2 for b in partition):
            continue
        mode_options = []
        for block in partition:
            modes = [False]  # through the OSS
            if len(block) >= 3 and not ctx.zero_curtail:
                modes.append(True)
            mode_options.append(modes)
        for modes in itertools.product(*mode_options):
            if sum(1 for iso in modes if not iso) > max_petals:
                continue
            # Enumerate cycle choices per block lazily with cost pruning.
            choices: list[list[tuple[tuple[int, ...], bool, _PetalEval, list[int]]]] = []
            viable = True
            for block, iso in zip(partition, modes):
                opts_for_block = []
                for cycle in (_isolated_cycles(block) if iso else _petal_cycles(block)):
                    eidx = edge_indices(cycle, iso)
                    if eidx is None:
                        continue
                    ev = memo.get((cycle, "cycle", iso))
                    if ev is None:
                        ev = _petal_cost(ctx, cycle, iso)
                        memo[(cycle, "cycle", iso)] = ev
                    if ev.feasible:
                        opts_for_block.append((cycle, iso, ev, eidx))
                if not opts_for_block:
                    viable = False
                    break
                opts_for_block.sort(key=lambda c: c[2].cost)
                choices.append(opts_for_block)
            if not viable:
                continue

            def walk(level: int, acc_cost: float, acc_edges: list[int], picked):
                nonlocal best_cost, best_topology
                if acc_cost >= best_cost:
                    return
                if level == len(choices):
                    if crossings_ok(acc_edges):
                        best_cost = acc_cost
                        best_topology = [
                            (cycle, iso, ev) for cycle, iso, ev, _ in picked
                        ]
                    return
                for cand in choices[level]:
                    cost = acc_cost + cand[2].cost
                    if cost >= best_cost:
                        break  # sorted by cost
                    walk(level + 1, cost, acc_edges + cand[3], picked + [cand])

            walk(0, 0.0, [], [])

    wall = time.perf_counter() - t_start
    if best_topology is None:
        return SolveResult("infeasible", None, math.nan, math.nan, wall)

    assignment = _assemble_assignment(ir, ctx, best_topology)
    values = [assignment[v.name] for v in ir.variables]
    objective = ir.objective_value(values)
    if abs(objective - best_cost) > 1e-6 * max(1.0, abs(best_cost)):
        raise EnumerationError(
            f"assembled objective {objective!r} disagrees with the search "
            f"value {best_cost!r}"
        )
    wall = time.perf_counter() - t_start
    return SolveResult("optimal", assignment, objective, 0.0, wall)


def _assemble_assignment(
    ir: ModelIR, ctx: _Context, topology: list[tuple[tuple[int, ...], bool, _PetalEval]]
) -> dict[str, float]:
    """Full variable assignment for the chosen topology, leaves re-derived
    with the per-leaf LP so flows, angles and curtailments are consistent."""
    graph, subtypes, tree, opts = ctx.graph, ctx.subtypes, ctx.tree, ctx.opts
    edge_types: dict[tuple[int, int], int] = {}
    for cycle, iso, ev in topology:
        for pos, edge in enumerate(_cycle_edges(cycle, iso)):
            edge_types[edge] = ev.assignment[pos]
    design = Design(
        active_edges=tuple(sorted(edge_types)),
        edge_types=edge_types,
        leaves=(),
        flows={},
        angles={},
        curtailments={},
        breakdown=CostBreakdown(0.0, 0.0, 0.0),
    )

    values: dict[str, float] = {}
    m = ir.maps
    for e, edge in enumerate(graph.edges):
        active = edge in edge_types
        values[ir.variables[m.y_var[e]].name] = 1.0 if active else 0.0
        for t in range(len(subtypes)):
            chosen = active and edge_types[edge] == t
            values[ir.variables[m.x_var[(e, t)]].name] = 1.0 if chosen else 0.0

    omega_by_id = {w.id: w for w in tree.omega}
    state_by_id = {k.id: k for k in tree.states}
    for l, (w_id, k_id) in enumerate(m.leaves):
        leaf = scenario_flow(
            design, graph, subtypes, opts, omega_by_id[w_id], state_by_id[k_id]
        )
        for e, edge in enumerate(graph.edges):
            values[ir.variables[m.flow_var[(e, l)]].name] = leaf.flows.get(edge, 0.0)
        for n in sorted(p.id for p in graph.points):
            values[ir.variables[m.theta_var[(n, l)]].name] = leaf.angles.get(n, 0.0)
        for j in graph.wt_ids:
            values[ir.variables[m.curt_var[(j, l)]].name] = leaf.curtailments.get(j, 0.0)
    return values
