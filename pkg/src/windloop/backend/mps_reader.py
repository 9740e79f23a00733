"""Standalone MPS parser (fixed or free field layout, whitespace separated).

Written against the MPS format definition, independently of the writer in
this package, so round-trip tests check the emitter against a second
implementation rather than against itself.

Supported sections: NAME, OBJSENSE, ROWS, COLUMNS (with INTORG/INTEND
markers), RHS, BOUNDS, ENDATA. Bound types: LO, UP, FX, FR, MI, PL, BV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class MpsFormatError(ValueError):
    pass


@dataclass
class MpsModel:
    name: str = ""
    minimize: bool = True
    objective_row: str = ""
    row_names: list[str] = field(default_factory=list)
    row_sense: list[str] = field(default_factory=list)  # parallel to row_names
    col_names: list[str] = field(default_factory=list)
    entries: dict[tuple[int, int], float] = field(default_factory=dict)  # (row, col)
    obj_coeffs: dict[int, float] = field(default_factory=dict)  # col -> coefficient
    rhs: dict[int, float] = field(default_factory=dict)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)

    def row_index(self, name: str) -> int:
        return self._rows[name]

    def col_index(self, name: str) -> int:
        return self._cols[name]

    def finish(self) -> None:
        self._rows = {n: i for i, n in enumerate(self.row_names)}
        self._cols = {n: i for i, n in enumerate(self.col_names)}


def read_mps(text: str) -> MpsModel:
    model = MpsModel()
    section = None
    rows: dict[str, int] = {}
    cols: dict[str, int] = {}
    in_integer = False

    def get_col(name: str) -> int:
        if name not in cols:
            cols[name] = len(model.col_names)
            model.col_names.append(name)
            model.lower.append(0.0)
            model.upper.append(math.inf)
            model.integer.append(in_integer)
        return cols[name]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        is_header = raw[0] not in (" ", "\t")
        tokens = raw.split()
        if is_header:
            section = tokens[0].upper()
            if section == "NAME":
                model.name = tokens[1] if len(tokens) > 1 else ""
            elif section == "ENDATA":
                break
            elif section not in ("OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES"):
                raise MpsFormatError(f"line {lineno}: unsupported section {section}")
            continue

        if section == "OBJSENSE":
            word = tokens[0].upper()
            if word in ("MIN", "MINIMIZE"):
                model.minimize = True
            elif word in ("MAX", "MAXIMIZE"):
                model.minimize = False
            else:
                raise MpsFormatError(f"line {lineno}: bad OBJSENSE {word}")

        elif section == "ROWS":
            sense, name = tokens[0].upper(), tokens[1]
            if sense == "N":
                if not model.objective_row:
                    model.objective_row = name
                continue
            if sense not in ("L", "G", "E"):
                raise MpsFormatError(f"line {lineno}: bad row sense {sense}")
            rows[name] = len(model.row_names)
            model.row_names.append(name)
            model.row_sense.append(sense)

        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                marker = tokens[2].strip("'")
                if marker == "INTORG":
                    in_integer = True
                elif marker == "INTEND":
                    in_integer = False
                else:
                    raise MpsFormatError(f"line {lineno}: unknown marker {marker}")
                continue
            if len(tokens) not in (3, 5):
                raise MpsFormatError(f"line {lineno}: malformed COLUMNS line")
            c = get_col(tokens[0])
            for off in range(1, len(tokens), 2):
                row_name, value = tokens[off], float(tokens[off + 1])
                if row_name == model.objective_row:
                    model.obj_coeffs[c] = model.obj_coeffs.get(c, 0.0) + value
                elif row_name in rows:
                    key = (rows[row_name], c)
                    model.entries[key] = model.entries.get(key, 0.0) + value
                else:
                    raise MpsFormatError(f"line {lineno}: unknown row {row_name}")

        elif section == "RHS":
            if len(tokens) not in (3, 5):
                raise MpsFormatError(f"line {lineno}: malformed RHS line")
            for off in range(1, len(tokens), 2):
                row_name, value = tokens[off], float(tokens[off + 1])
                if row_name == model.objective_row:
                    continue  # objective constant offsets are not used here
                if row_name not in rows:
                    raise MpsFormatError(f"line {lineno}: unknown row {row_name}")
                model.rhs[rows[row_name]] = value

        elif section == "RANGES":
            raise MpsFormatError("RANGES section not supported")

        elif section == "BOUNDS":
            btype = tokens[0].upper()
            if btype in ("FR", "MI", "PL", "BV"):
                if len(tokens) != 3:
                    raise MpsFormatError(f"line {lineno}: malformed BOUNDS line")
                c = get_col(tokens[2])
                if btype == "FR":
                    model.lower[c], model.upper[c] = -math.inf, math.inf
                elif btype == "MI":
                    model.lower[c] = -math.inf
                elif btype == "PL":
                    model.upper[c] = math.inf
                else:  # BV
                    model.lower[c], model.upper[c] = 0.0, 1.0
                    model.integer[c] = True
            else:
                if len(tokens) != 4:
                    raise MpsFormatError(f"line {lineno}: malformed BOUNDS line")
                c = get_col(tokens[2])
                value = float(tokens[3])
                if btype == "LO":
                    model.lower[c] = value
                elif btype == "UP":
                    model.upper[c] = value
                elif btype == "FX":
                    model.lower[c] = model.upper[c] = value
                else:
                    raise MpsFormatError(f"line {lineno}: bad bound type {btype}")

        else:
            raise MpsFormatError(f"line {lineno}: data before any section header")

    if not model.objective_row:
        raise MpsFormatError("no objective (N) row declared")
    model.finish()
    return model
