"""Deterministic fixed-MPS emission of a ModelIR.

Sections appear in the order NAME, OBJSENSE, ROWS, COLUMNS (with integrality
markers), RHS, BOUNDS, ENDATA. Output is byte-stable for a given IR: names
come from the IR's deterministic naming scheme, entries follow declaration
order, and numeric literals carry at most 12 significant digits.
"""

from __future__ import annotations

from ..model import ModelIR

OBJ_ROW = "COST"


def _num(v: float) -> str:
    return f"{v:.12g}"


def emit_model_file(ir: ModelIR, name: str = "WINDLOOP") -> str:
    """Serialize the IR as fixed-format MPS text."""
    seen = set()
    for v in ir.variables:
        if v.name in seen:
            raise ValueError(f"duplicate column name {v.name}")
        seen.add(v.name)

    out: list[str] = []
    out.append(f"NAME          {name}")
    out.append("OBJSENSE")
    out.append("    MIN" if ir.minimize else "    MAX")

    out.append("ROWS")
    out.append(f" N  {OBJ_ROW}")
    for row in ir.rows:
        out.append(f" {row.sense}  {row.name}")

    # Group entries by column, preserving row order within each column.
    col_entries: list[list[tuple[str, float]]] = [[] for _ in ir.variables]
    for i, coef in sorted(ir.objective.items()):
        col_entries[i].append((OBJ_ROW, coef))
    for row in ir.rows:
        for i, coef in row.coeffs:
            if coef != 0.0:
                col_entries[i].append((row.name, coef))

    out.append("COLUMNS")
    in_int = False
    for i, v in enumerate(ir.variables):
        want_int = v.kind == "B"
        if want_int and not in_int:
            out.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not want_int and in_int:
            out.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = col_entries[i]
        if not entries:
            entries = [(OBJ_ROW, 0.0)]  # keep the column declared
        for row_name, coef in entries:
            out.append(f"    {v.name:<8}  {row_name:<8}  {_num(coef)}")
    if in_int:
        out.append("    MARKER                 'MARKER'                 'INTEND'")

    out.append("RHS")
    for row in ir.rows:
        if row.rhs != 0.0:
            out.append(f"    RHS       {row.name:<8}  {_num(row.rhs)}")

    out.append("BOUNDS")
    for v in ir.variables:
        out.append(f" LO BND       {v.name:<8}  {_num(v.lb)}")
        out.append(f" UP BND       {v.name:<8}  {_num(v.ub)}")

    out.append("ENDATA")
    return "\n".join(out) + "\n"


def emit_warm_start_file(hints: dict[str, float]) -> str:
    """One 'name value' pair per line, in name order."""
    return "".join(f"{k} {_num(v)}\n" for k, v in sorted(hints.items()))
