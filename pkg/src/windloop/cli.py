"""Command-line surface.

Subcommands: solve-det, solve-stoch, evaluate, compare, mc-validate, render,
export-mps. Exit codes: 0 success, 2 validation/usage error, 3 solver failure.
Diagnostics go to stderr; result files land in --out (default: current
directory).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import backend as backend_mod
from . import evaluate as evaluate_mod
from . import pci as pci_mod
from .backend import BackendConfig, SolverError
from .backend.mps_writer import emit_model_file
from .instance import (
    FarmInstance,
    InstanceError,
    load_design,
    parse_instance,
    save_design,
    write_report,
)
from .model import ModelError, build_model, validate_design
from .render import render_layout
from .scenario import ScenarioError, build_scenario_tree, build_system_states, deterministic_tree

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _backend_from_args(inst: FarmInstance, args) -> BackendConfig:
    cfg = inst.backend
    updates = {}
    if getattr(args, "gap", None) is not None:
        updates["gap"] = args.gap
    if getattr(args, "time_limit", None) is not None:
        updates["time_limit_s"] = args.time_limit
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out", ".") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solve_meta(result, extra=None) -> dict:
    meta = {
        "solver_status": result.status,
        "gap": result.gap,
        "wall_time_s": result.wall_time_s,
    }
    if extra:
        meta.update(extra)
    return meta


def cmd_solve_det(args) -> int:
    inst = parse_instance(args.instance)
    cfg = _backend_from_args(inst, args)
    design, result = pci_mod.solve_deterministic(inst, cfg)
    out = _out_dir(args)
    path = out / f"{inst.name}-det.design.json"
    save_design(design, inst, path, meta=_solve_meta(result, {"mode": "deterministic"}))
    print(f"objective {result.objective:.2f} status {result.status}")
    print(f"design written to {path}")
    return EXIT_OK


def cmd_solve_stoch(args) -> int:
    inst = parse_instance(args.instance)
    if args.mtbf is not None:
        inst = inst.with_mtbf(args.mtbf)
    cfg = pci_mod.PciConfig(
        r_c=inst.r_c, backend=_backend_from_args(inst, args), kappa_max=args.kappa_max
    )
    design, trace = pci_mod.run_pci(inst, cfg)
    out = _out_dir(args)
    path = out / f"{inst.name}-stoch.design.json"
    meta = {
        "mode": "stochastic-pci",
        "r_c": inst.r_c,
        "converged": trace.converged,
        "iterations": [
            {
                "kappa": it.kappa,
                "n_states": it.n_states,
                "objective": it.objective,
                "wall_time_s": it.wall_time_s,
                "cumulative_edges": [list(e) for e in it.cumulative],
            }
            for it in trace.iterations
        ],
    }
    save_design(design, inst, path, meta=meta)
    for it in trace.iterations:
        print(
            f"kappa={it.kappa} states={it.n_states} objective={it.objective:.2f} "
            f"wall={it.wall_time_s:.2f}s"
        )
    print(f"converged={trace.converged}")
    print(f"design written to {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    inst = parse_instance(args.instance)
    if args.mtbf is not None:
        inst = inst.with_mtbf(args.mtbf)
    design = load_design(args.design, inst)
    graph = inst.candidate_graph()
    subtypes = inst.effective_types()
    opts = inst.model_options()
    tree = evaluate_mod.design_tree(design, graph, inst.wind_scenarios, inst.failure)
    cost, leaves = evaluate_mod.recourse_cost(design, graph, subtypes, tree, opts)
    invest, losses = evaluate_mod.first_stage_costs(design, graph, subtypes, opts)
    print(f"investment {invest:.2f}")
    if opts.objective_mode == "invest_losses_reliability":
        print(f"losses {losses:.2f}")
    print(f"recourse {cost:.2f}")
    print(f"total {invest + losses + cost:.2f}")
    if args.out:
        rows = [
            {
                "omega": lf.omega_id,
                "state": lf.state_id,
                "curtail_total_a": lf.curtail_total_a,
            }
            for lf in leaves
        ]
        path = Path(args.out) if Path(args.out).suffix else _out_dir(args) / "recourse.tsv"
        write_report(rows, path)
        print(f"per-leaf report written to {path}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args) -> int:
    inst = parse_instance(args.instance)
    mtbf_values = [float(v) for v in args.mtbf.split(",")]
    backend_cfg = _backend_from_args(inst, args)
    graph = inst.candidate_graph()
    subtypes = inst.effective_types()
    opts = inst.model_options()

    det_design, _ = pci_mod.solve_deterministic(inst, backend_cfg)
    rows = []
    for mtbf in mtbf_values:
        variant = inst.with_mtbf(mtbf)
        cfg = pci_mod.PciConfig(r_c=variant.r_c, backend=backend_cfg, kappa_max=args.kappa_max)
        stoch_design, trace = pci_mod.run_pci(variant, cfg)
        covered = set(trace.iterations[-1].cumulative)
        covered |= {
            e
            for e in det_design.active_edges
            if pci_mod.edge_level(det_design, e) <= variant.r_c
        }
        tree = evaluate_mod.design_tree(
            stoch_design, graph, variant.wind_scenarios, variant.failure,
            edges=sorted(covered),
        )
        report = evaluate_mod.compare_designs(
            det_design, stoch_design, graph, subtypes, tree, opts
        )
        rows.append(
            {
                "mtbf_yr_km": mtbf,
                "det_investment": report.deterministic.investment,
                "det_reliability": report.deterministic.reliability,
                "det_total": report.deterministic.total,
                "stoch_investment": report.stochastic.investment,
                "stoch_reliability": report.stochastic.reliability,
                "stoch_total": report.stochastic.total,
                "pct_total": report.pct_total,
                "pct_investment": report.pct_investment,
                "pct_reliability": report.pct_reliability,
                "pci_converged": trace.converged,
            }
        )
        print(
            f"MTBF={mtbf:g}: det total {report.deterministic.total:.2f}, "
            f"stoch total {report.stochastic.total:.2f}, diff {report.pct_total:.2f}%"
        )
    out = _out_dir(args)
    path = out / f"{inst.name}-compare.tsv"
    write_report(rows, path)
    print(f"report written to {path}")
    return EXIT_OK


def cmd_mc_validate(args) -> int:
    inst = parse_instance(args.instance)
    if args.mtbf is not None:
        inst = inst.with_mtbf(args.mtbf)
    design = load_design(args.design, inst)
    graph = inst.candidate_graph()
    subtypes = inst.effective_types()
    opts = inst.model_options()
    tree = evaluate_mod.design_tree(design, graph, inst.wind_scenarios, inst.failure)
    analytic, _ = evaluate_mod.recourse_cost(design, graph, subtypes, tree, opts)
    seed = args.seed if args.seed is not None else inst.seed
    est = evaluate_mod.monte_carlo_curtailment(
        design, graph, subtypes, inst.wind_scenarios, inst.failure, opts,
        n_samples=args.samples, seed=seed,
    )
    sigma = abs(est.mean - analytic) / est.std_error if est.std_error > 0 else 0.0
    print(f"analytic {analytic:.2f}")
    print(f"monte-carlo {est.mean:.2f} +- {est.std_error:.2f} (n={est.n_samples}, seed={seed})")
    print(f"deviation {sigma:.2f} standard errors")
    return EXIT_OK


def cmd_render(args) -> int:
    inst = parse_instance(args.instance)
    design = load_design(args.design, inst)
    svg = render_layout(design, inst)
    path = Path(args.out) if args.out else Path(f"{inst.name}.svg")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg)
    print(f"svg written to {path}")
    return EXIT_OK


def cmd_export_mps(args) -> int:
    inst = parse_instance(args.instance)
    graph = inst.candidate_graph()
    subtypes = inst.effective_types()
    if args.mode == "det":
        tree = deterministic_tree(inst.wind_scenarios)
        opts = inst.model_options(fixed_zero_curtailment=True)
    else:
        states = build_system_states(list(zip(graph.edges, graph.lengths)), inst.failure)
        tree = build_scenario_tree(inst.wind_scenarios, states)
        opts = inst.model_options()
    ir = build_model(graph, subtypes, tree, opts)
    text = emit_model_file(ir, name=inst.name.upper()[:8] or "WINDLOOP")
    path = Path(args.out) if args.out else Path(f"{inst.name}-{args.mode}.mps")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"mps written to {path} ({ir.n_variables} columns, {ir.n_rows} rows)")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windloop",
        description="Closed-loop collection-system cable layout design",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, design_arg=False, single_mtbf=True):
        p.add_argument("instance", help="instance JSON file")
        if design_arg:
            p.add_argument("design", help="design JSON file")
        p.add_argument("--out", default=".", help="output directory (or file where noted)")
        p.add_argument("--gap", type=float, default=None, help="override MIP gap")
        p.add_argument("--time-limit", type=float, default=None, help="override time limit (s)")
        if single_mtbf:
            p.add_argument("--mtbf", type=float, default=None, help="override MTBF (years*km)")
        p.add_argument("--seed", type=int, default=None, help="override RNG seed")
        p.add_argument("--kappa-max", type=int, default=20, help="max PCI iterations")

    p = sub.add_parser("solve-det", help="deterministic design (no failures, no curtailment)")
    common(p)
    p.set_defaults(func=cmd_solve_det)

    p = sub.add_parser("solve-stoch", help="stochastic design via progressive contingencies")
    common(p)
    p.set_defaults(func=cmd_solve_stoch)

    p = sub.add_parser("evaluate", help="recourse cost of a stored design")
    common(p, design_arg=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="deterministic vs stochastic across MTBF values")
    common(p, single_mtbf=False)
    p.add_argument("--mtbf", default="10,20,30,40,50,178",
                   help="comma-separated MTBF values (years*km)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("mc-validate", help="Monte-Carlo check of the recourse cost")
    common(p, design_arg=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.set_defaults(func=cmd_mc_validate)

    p = sub.add_parser("render", help="SVG drawing of a stored design")
    common(p, design_arg=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export-mps", help="write the MILP as a fixed MPS file")
    common(p)
    p.add_argument("--mode", choices=("det", "stoch"), default="stoch")
    p.set_defaults(func=cmd_export_mps)

    return parser


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (InstanceError, ModelError, ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, pci_mod.PciError, backend_mod.InstanceTooLarge) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def entry() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    entry()
