"""Solving a ModelIR: external MILP solvers via file exchange, or the
exhaustive enumeration oracle for desk-size instances.

The external path writes a fixed MPS file, runs a command built from a
template, and parses the solution file the command leaves behind. The default
template invokes the bundled solver CLI as a subprocess; real solver binaries
plug in through templates such as::

    cbc {mps} -ratioGap {gap} -seconds {time_limit} solve solution {sol}
    highs --options_file= {mps} --solution_file {sol}

Warm starts are hints only: they are passed along when the template has a
{warmstart} placeholder and results must not depend on them.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from ..model import ModelIR
from .mps_writer import emit_model_file, emit_warm_start_file

DEFAULT_COMMAND = (
    "{python} -m windloop.backend.solver_cli --mps {mps} --sol {sol}"
    " --gap {gap} --time-limit {time_limit}"
)

STATUSES = ("optimal", "feasible-gap", "infeasible", "time-limit")


class SolverError(RuntimeError):
    """An external solver failed to run or returned unusable output."""


class InstanceTooLarge(ValueError):
    """The enumeration backend was asked for an instance above its size guard."""


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "external"  # "external" or "enumeration"
    gap: float = 0.0
    time_limit_s: float = 3600.0
    command: Optional[str] = None  # None -> bundled solver template
    scratch_dir: Optional[str] = None
    solution_format: str = "auto"  # auto | plain | cbc | highs
    enumeration_max_wt: int = 8

    def __post_init__(self):
        if self.kind not in ("external", "enumeration"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.gap < 0 or self.time_limit_s <= 0:
            raise ValueError("gap must be >= 0 and time limit positive")


@dataclass
class SolveResult:
    status: str
    assignment: Optional[dict[str, float]]
    objective: float
    gap: float
    wall_time_s: float = 0.0

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown solve status {self.status!r}")
        if self.status == "optimal" and not self.gap == 0.0:
            raise ValueError("optimal results must carry a zero gap")
        if self.status not in ("infeasible",) and self.assignment is None:
            raise ValueError(f"{self.status} result needs an assignment")


def solve(
    ir: ModelIR, cfg: BackendConfig, warm_start: Optional[Mapping[str, float]] = None
) -> SolveResult:
    """Solve the IR with the configured backend."""
    if cfg.kind == "enumeration":
        from .enumeration import solve_by_enumeration

        if ir.source.graph.n_wt > cfg.enumeration_max_wt:
            raise InstanceTooLarge(
                f"enumeration limited to {cfg.enumeration_max_wt} WTs, "
                f"instance has {ir.source.graph.n_wt}"
            )
        return solve_by_enumeration(ir)
    return _solve_external(ir, cfg, warm_start)


def _substitute(template: str, mapping: Mapping[str, str]) -> list[str]:
    tokens = shlex.split(template)
    out = []
    for tok in tokens:
        for key, value in mapping.items():
            tok = tok.replace("{" + key + "}", value)
        out.append(tok)
    return out


def _solve_external(
    ir: ModelIR, cfg: BackendConfig, warm_start: Optional[Mapping[str, float]]
) -> SolveResult:
    template = cfg.command or DEFAULT_COMMAND
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="windloop-", dir=cfg.scratch_dir) as scratch:
        scratch_path = Path(scratch)
        mps_path = scratch_path / "model.mps"
        sol_path = scratch_path / "model.sol"
        ws_path = scratch_path / "model.wst"
        mps_path.write_text(emit_model_file(ir))
        hints = dict(warm_start) if warm_start else (ir.warm_start or {})
        ws_path.write_text(emit_warm_start_file(hints))
        cmd = _substitute(
            template,
            {
                "python": sys.executable,
                "mps": str(mps_path),
                "sol": str(sol_path),
                "gap": f"{cfg.gap:.12g}",
                "time_limit": f"{cfg.time_limit_s:.12g}",
                "warmstart": str(ws_path),
            },
        )
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout or "").strip()[-2000:]
            raise SolverError(
                f"solver command {' '.join(cmd)!r} exited {proc.returncode}: {tail}"
            )
        if not sol_path.exists():
            raise SolverError(f"solver wrote no solution file at {sol_path}")
        status, file_obj, file_gap, values = parse_solution_file(
            sol_path.read_text(), cfg.solution_format
        )
    wall = time.perf_counter() - t0

    if status == "infeasible":
        return SolveResult("infeasible", None, math.nan, math.nan, wall)
    if status in ("unbounded", "error"):
        raise SolverError(f"solver reported status {status}")
    if values is None:
        raise SolverError("solver reported success but no variable values")

    assignment = {}
    missing = []
    for v in ir.variables:
        if v.name in values:
            assignment[v.name] = values[v.name]
        else:
            missing.append(v.name)
    if missing:
        # Solvers that print only non-zero columns leave the rest at zero.
        for name in missing:
            assignment[name] = 0.0

    objective = ir.objective_value([assignment[v.name] for v in ir.variables])
    gap = file_gap if file_gap is not None else 0.0
    if status == "time-limit":
        return SolveResult("time-limit", assignment, objective, gap, wall)
    if gap <= 1e-9:
        return SolveResult("optimal", assignment, objective, 0.0, wall)
    return SolveResult("feasible-gap", assignment, objective, gap, wall)


def parse_solution_file(text: str, fmt: str = "auto"):
    """Parse a solver solution file.

    Returns (status, objective or None, gap or None, {name: value} or None).
    Formats: 'plain' name/value pairs (with an optional ``* windloop-solution``
    header), 'cbc' and 'highs' adapters, or 'auto' to sniff.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SolverError("empty solution file")
    if fmt == "auto":
        first = lines[0]
        if first.startswith("* windloop-solution"):
            fmt = "plain"
        elif first.lstrip().startswith("Model status"):
            fmt = "highs"
        elif first.split()[0] in ("Optimal", "Infeasible", "Unbounded", "Stopped", "Integer"):
            fmt = "cbc"
        else:
            fmt = "plain"
    if fmt == "plain":
        return _parse_plain(lines)
    if fmt == "cbc":
        return _parse_cbc(lines)
    if fmt == "highs":
        return _parse_highs(lines)
    raise SolverError(f"unknown solution format {fmt!r}")


def _parse_plain(lines: list[str]):
    status, objective, gap = "optimal", None, None
    start = 0
    if lines[0].startswith("*"):
        header = lines[0]
        start = 1
        for token in header.split():
            if token.startswith("status="):
                status = token.split("=", 1)[1]
            elif token.startswith("objective="):
                value = token.split("=", 1)[1]
                objective = float(value) if value not in ("nan", "none") else None
            elif token.startswith("gap="):
                gap = float(token.split("=", 1)[1])
    values: dict[str, float] = {}
    for ln in lines[start:]:
        if ln.startswith("*"):
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise SolverError(f"malformed solution line {ln!r}")
        values[parts[0]] = float(parts[1])
    if status == "infeasible":
        return "infeasible", None, None, None
    if status not in ("optimal", "time-limit", "unbounded", "error"):
        raise SolverError(f"unknown status {status!r} in solution header")
    return status, objective, gap, values


def _parse_cbc(lines: list[str]):
    head = lines[0]
    word = head.split()[0]
    if word == "Infeasible":
        return "infeasible", None, None, None
    if word == "Unbounded":
        return "unbounded", None, None, None
    status = "optimal" if word == "Optimal" else "time-limit"
    objective = None
    if "objective value" in head:
        try:
            objective = float(head.rsplit(None, 1)[-1])
        except ValueError:
            objective = None
    values = {}
    for ln in lines[1:]:
        parts = ln.split()
        # "index name value reduced-cost"; tolerate a leading "**" marker
        if parts and parts[0] == "**":
            parts = parts[1:]
        if len(parts) >= 3:
            values[parts[1]] = float(parts[2])
    return status, objective, None, values


def _parse_highs(lines: list[str]):
    status_line = lines[0].split(":", 1)[1].strip().lower()
    if "infeasible" in status_line:
        return "infeasible", None, None, None
    if "unbounded" in status_line:
        return "unbounded", None, None, None
    status = "optimal" if "optimal" in status_line else "time-limit"
    objective = None
    values = {}
    i = 0
    while i < len(lines):
        ln = lines[i]
        if ln.lower().startswith("objective"):
            objective = float(ln.split()[-1])
        if ln.startswith("# Columns"):
            n = int(ln.split()[-1])
            for entry in lines[i + 1 : i + 1 + n]:
                name, value = entry.split()[:2]
                values[name] = float(value)
            i += n
        if ln.startswith("# Rows"):
            break
        i += 1
    return status, objective, None, values
