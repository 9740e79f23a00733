"""Bundled MILP solver: reads an MPS file, solves with HiGHS (via scipy),
writes a plain name/value solution file.

This is the default external-solver command in environments without a
standalone MILP binary; any solver accepting MPS input can replace it through
the backend command template. Warm-start files are accepted for interface
compatibility but ignored (the underlying solver has no start-hint API).

Usage:
    python -m windloop.backend.solver_cli --mps MODEL.mps --sol OUT.sol \
        [--gap G] [--time-limit SECONDS] [--warmstart FILE]
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .mps_reader import MpsModel, read_mps

_STATUS = {0: "optimal", 1: "time-limit", 2: "infeasible", 3: "unbounded", 4: "error"}


def solve_mps_model(model: MpsModel, gap: float, time_limit: float):
    n = len(model.col_names)
    c = np.zeros(n)
    for col, coef in model.obj_coeffs.items():
        c[col] = coef
    if not model.minimize:
        c = -c

    m = len(model.row_names)
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    for r, sense in enumerate(model.row_sense):
        rhs = model.rhs.get(r, 0.0)
        if sense == "L":
            hi[r] = rhs
        elif sense == "G":
            lo[r] = rhs
        else:
            lo[r] = hi[r] = rhs

    if model.entries:
        rows, cols, vals = zip(*((r, col, v) for (r, col), v in model.entries.items()))
        a = sp.csc_matrix((vals, (rows, cols)), shape=(m, n))
    else:
        a = sp.csc_matrix((m, n))

    res = milp(
        c,
        constraints=[LinearConstraint(a, lo, hi)] if m else [],
        integrality=np.array(model.integer, dtype=int),
        bounds=Bounds(np.array(model.lower), np.array(model.upper)),
        options={"mip_rel_gap": gap, "time_limit": time_limit, "presolve": True},
    )
    return res


def write_solution(path: str, model: MpsModel, res) -> None:
    status = _STATUS.get(res.status, "error")
    objective = res.fun if res.fun is not None else math.nan
    if not model.minimize and res.fun is not None:
        objective = -objective
    gap = getattr(res, "mip_gap", None)
    gap_s = f"{gap:.17g}" if gap is not None and math.isfinite(gap) else "0"
    lines = [f"* windloop-solution status={status} objective={objective:.17g} gap={gap_s}"]
    if res.x is not None:
        for name, value in zip(model.col_names, res.x):
            lines.append(f"{name} {value:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="windloop-solver")
    parser.add_argument("--mps", required=True)
    parser.add_argument("--sol", required=True)
    parser.add_argument("--gap", type=float, default=0.0)
    parser.add_argument("--time-limit", type=float, default=3600.0)
    parser.add_argument("--warmstart", default=None, help="accepted and ignored")
    args = parser.parse_args(argv)

    try:
        with open(args.mps) as fh:
            model = read_mps(fh.read())
        res = solve_mps_model(model, gap=args.gap, time_limit=args.time_limit)
        write_solution(args.sol, model, res)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"windloop-solver: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
