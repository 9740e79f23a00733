"""Farm instance files, design files, and report rows.

Both file kinds are JSON with an explicit schema tag. Units on disk: metres
for coordinates, Amperes for capacities, k-currency/km for cable costs
(numerically identical to currency/m, which is the internal unit), Ohm/km for
electrical data, MW, kV, hours, and years*km/failure for MTBF. Unknown keys
are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .backend import BackendConfig
from .catalog import (
    Catalog,
    CableType,
    attach_loss_costs,
    expand_subtypes,
    lift_catalog,
)
from .geometry import CandidateGraph, Point, build_candidate_graph
from .model import Design, CostBreakdown, ModelOptions, OBJECTIVE_MODES
from .scenario import FailureParams, WindScenario

INSTANCE_SCHEMA = "windloop-instance-1"
DESIGN_SCHEMA = "windloop-design-1"

HOURS_PER_YEAR = 8760.0


class InstanceError(ValueError):
    """Schema or physical-range violation in an input file."""


@dataclass(frozen=True)
class FarmInstance:
    """Everything needed to set up and solve one farm."""

    name: str
    points: tuple[Point, ...]
    catalog: Catalog
    wind_scenarios: tuple[WindScenario, ...]
    failure: FailureParams
    p_n_mw: float
    v_n_kv: float
    c_e_per_ah: float
    lifetime_years: float
    phi: int
    upsilon: int
    sigma: int
    r_c: int
    objective_mode: str = "invest_reliability"
    subtype_step: float = 1.0
    backend: BackendConfig = field(default_factory=BackendConfig)
    seed: int = 0

    @property
    def n_wt(self) -> int:
        return len(self.points) - 1

    def candidate_graph(self) -> CandidateGraph:
        return build_candidate_graph(self.points, self.upsilon, self.sigma)

    def effective_types(self):
        """The type set the model optimizes over, per objective mode."""
        if self.objective_mode == "invest_losses_reliability":
            subtypes = expand_subtypes(
                self.catalog, self.p_n_mw, self.v_n_kv, self.subtype_step
            )
            return attach_loss_costs(
                subtypes, self.wind_scenarios, self.c_e_per_ah, self.v_n_kv
            )
        return lift_catalog(self.catalog, self.p_n_mw, self.v_n_kv)

    def model_options(self, fixed_zero_curtailment: bool = False) -> ModelOptions:
        return ModelOptions(
            phi=self.phi,
            c_e_per_ah=self.c_e_per_ah,
            v_n_kv=self.v_n_kv,
            p_n_mw=self.p_n_mw,
            objective_mode=self.objective_mode,
            fixed_zero_curtailment=fixed_zero_curtailment,
        )

    def with_mtbf(self, mtbf_yr_km: float) -> "FarmInstance":
        return replace(self, failure=FailureParams(mtbf_yr_km, self.failure.mttr_h))


def _require(mapping: dict, keys: set[str], where: str) -> None:
    unknown = set(mapping) - keys
    if unknown:
        raise InstanceError(f"{where}: unknown keys {sorted(unknown)}")


def _get(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise InstanceError(f"{where}: missing key {key!r}")
    return mapping[key]


def parse_instance(path: str | Path) -> FarmInstance:
    """Load and fully validate an instance file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    return instance_from_dict(raw, where=str(path))


def instance_from_dict(raw: dict, where: str = "instance") -> FarmInstance:
    _require(
        raw,
        {
            "schema",
            "name",
            "points",
            "catalog",
            "wind_scenarios",
            "failure",
            "parameters",
            "backend",
            "seed",
        },
        where,
    )
    if _get(raw, "schema", where) != INSTANCE_SCHEMA:
        raise InstanceError(f"{where}: schema must be {INSTANCE_SCHEMA!r}")

    points = []
    for i, p in enumerate(_get(raw, "points", where)):
        ctx = f"{where}: points[{i}]"
        _require(p, {"id", "x", "y"}, ctx)
        points.append(Point(id=int(_get(p, "id", ctx)), x=float(p["x"]), y=float(p["y"])))

    types = []
    for i, t in enumerate(_get(raw, "catalog", where)):
        ctx = f"{where}: catalog[{i}]"
        _require(
            t,
            {"capacity_a", "cost_keur_per_km", "resistance_ohm_per_km", "reactance_ohm_per_km"},
            ctx,
        )
        types.append(
            CableType(
                capacity_a=float(_get(t, "capacity_a", ctx)),
                cost_per_m=float(_get(t, "cost_keur_per_km", ctx)),
                resistance_ohm_per_m=float(_get(t, "resistance_ohm_per_km", ctx)) / 1000.0,
                reactance_ohm_per_m=float(_get(t, "reactance_ohm_per_km", ctx)) / 1000.0,
            )
        )

    scenarios = []
    for i, w in enumerate(_get(raw, "wind_scenarios", where)):
        ctx = f"{where}: wind_scenarios[{i}]"
        _require(w, {"magnitude", "duration_h", "nominal"}, ctx)
        scenarios.append(
            WindScenario(
                id=i + 1,
                magnitude=float(_get(w, "magnitude", ctx)),
                duration_h=float(_get(w, "duration_h", ctx)),
                nominal=bool(w.get("nominal", False)),
            )
        )
    if sum(1 for w in scenarios if w.nominal) != 1:
        raise InstanceError(f"{where}: exactly one wind scenario must be nominal")

    fail_raw = _get(raw, "failure", where)
    _require(fail_raw, {"mtbf_yr_km", "mttr_h"}, f"{where}: failure")
    failure = FailureParams(
        mtbf_yr_km=float(_get(fail_raw, "mtbf_yr_km", f"{where}: failure")),
        mttr_h=float(_get(fail_raw, "mttr_h", f"{where}: failure")),
    )

    pr = _get(raw, "parameters", where)
    ctx = f"{where}: parameters"
    _require(
        pr,
        {
            "p_n_mw",
            "v_n_kv",
            "c_e_per_ah",
            "lifetime_years",
            "phi",
            "upsilon",
            "sigma",
            "r_c",
            "objective_mode",
            "subtype_step",
        },
        ctx,
    )
    objective_mode = pr.get("objective_mode", "invest_reliability")
    if objective_mode not in OBJECTIVE_MODES:
        raise InstanceError(f"{ctx}: objective_mode must be one of {OBJECTIVE_MODES}")
    lifetime = float(_get(pr, "lifetime_years", ctx))
    total_h = sum(w.duration_h for w in scenarios)
    expected_h = lifetime * HOURS_PER_YEAR
    if abs(total_h - expected_h) > 1e-6 * expected_h:
        raise InstanceError(
            f"{ctx}: scenario durations sum to {total_h} h, expected "
            f"lifetime {lifetime} y = {expected_h} h"
        )

    be_raw = raw.get("backend", {})
    ctx_be = f"{where}: backend"
    _require(
        be_raw,
        {"kind", "gap", "time_limit_s", "command", "scratch_dir", "solution_format"},
        ctx_be,
    )
    backend = BackendConfig(
        kind=be_raw.get("kind", "external"),
        gap=float(be_raw.get("gap", 0.0)),
        time_limit_s=float(be_raw.get("time_limit_s", 3600.0)),
        command=be_raw.get("command"),
        scratch_dir=be_raw.get("scratch_dir"),
        solution_format=be_raw.get("solution_format", "auto"),
    )

    instance = FarmInstance(
        name=str(_get(raw, "name", where)),
        points=tuple(points),
        catalog=Catalog(types=tuple(types)),
        wind_scenarios=tuple(scenarios),
        failure=failure,
        p_n_mw=float(_get(pr, "p_n_mw", ctx)),
        v_n_kv=float(_get(pr, "v_n_kv", ctx)),
        c_e_per_ah=float(_get(pr, "c_e_per_ah", ctx)),
        lifetime_years=lifetime,
        phi=int(_get(pr, "phi", ctx)),
        upsilon=int(_get(pr, "upsilon", ctx)),
        sigma=int(_get(pr, "sigma", ctx)),
        r_c=int(_get(pr, "r_c", ctx)),
        objective_mode=objective_mode,
        subtype_step=float(pr.get("subtype_step", 1.0)),
        backend=backend,
        seed=int(raw.get("seed", 0)),
    )
    # Construct the graph once here so parameter errors surface at load time.
    instance.candidate_graph()
    instance.effective_types()
    return instance


def instance_to_dict(inst: FarmInstance) -> dict:
    return {
        "schema": INSTANCE_SCHEMA,
        "name": inst.name,
        "points": [{"id": p.id, "x": p.x, "y": p.y} for p in inst.points],
        "catalog": [
            {
                "capacity_a": t.capacity_a,
                "cost_keur_per_km": t.cost_per_m,
                "resistance_ohm_per_km": t.resistance_ohm_per_m * 1000.0,
                "reactance_ohm_per_km": t.reactance_ohm_per_m * 1000.0,
            }
            for t in inst.catalog.types
        ],
        "wind_scenarios": [
            {"magnitude": w.magnitude, "duration_h": w.duration_h, "nominal": w.nominal}
            for w in inst.wind_scenarios
        ],
        "failure": {"mtbf_yr_km": inst.failure.mtbf_yr_km, "mttr_h": inst.failure.mttr_h},
        "parameters": {
            "p_n_mw": inst.p_n_mw,
            "v_n_kv": inst.v_n_kv,
            "c_e_per_ah": inst.c_e_per_ah,
            "lifetime_years": inst.lifetime_years,
            "phi": inst.phi,
            "upsilon": inst.upsilon,
            "sigma": inst.sigma,
            "r_c": inst.r_c,
            "objective_mode": inst.objective_mode,
            "subtype_step": inst.subtype_step,
        },
        "backend": {
            "kind": inst.backend.kind,
            "gap": inst.backend.gap,
            "time_limit_s": inst.backend.time_limit_s,
            "command": inst.backend.command,
            "scratch_dir": inst.backend.scratch_dir,
            "solution_format": inst.backend.solution_format,
        },
        "seed": inst.seed,
    }


def save_instance(inst: FarmInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n")


def design_to_dict(
    design: Design,
    instance: FarmInstance,
    meta: Optional[dict] = None,
) -> dict:
    leaves = []
    for w_id, k_id in design.leaves:
        leaves.append(
            {
                "omega": w_id,
                "state": k_id,
                "curtail_total_a": design.curtail_total(w_id, k_id),
            }
        )
    return {
        "schema": DESIGN_SCHEMA,
        "instance": instance.name,
        "objective_mode": instance.objective_mode,
        "edges": [
            {"i": i, "j": j, "type_index": design.edge_types[(i, j)]}
            for i, j in design.active_edges
        ],
        "breakdown": {
            "investment": design.breakdown.investment,
            "losses": design.breakdown.losses,
            "reliability": design.breakdown.reliability,
            "total": design.breakdown.total,
        },
        "leaves": leaves,
        "meta": meta or {},
    }


def save_design(design: Design, instance: FarmInstance, path: str | Path, meta=None) -> None:
    Path(path).write_text(json.dumps(design_to_dict(design, instance, meta), indent=2) + "\n")


def load_design(path: str | Path, instance: FarmInstance) -> Design:
    """Read a design file back into a Design (first stage plus breakdown).

    Per-leaf flow details are not stored on disk; evaluators recompute them.
    """
    path = Path(path)
    raw = json.loads(path.read_text())
    where = str(path)
    _require(
        raw,
        {"schema", "instance", "objective_mode", "edges", "breakdown", "leaves", "meta"},
        where,
    )
    if raw.get("schema") != DESIGN_SCHEMA:
        raise InstanceError(f"{where}: schema must be {DESIGN_SCHEMA!r}")
    n_types = len(instance.effective_types())
    edge_types = {}
    for e in raw["edges"]:
        _require(e, {"i", "j", "type_index"}, f"{where}: edges")
        i, j = int(e["i"]), int(e["j"])
        t = int(e["type_index"])
        if not (0 <= t < n_types):
            raise InstanceError(f"{where}: type_index {t} out of range")
        edge_types[(min(i, j), max(i, j))] = t
    br = raw["breakdown"]
    breakdown = CostBreakdown(
        investment=float(br["investment"]),
        losses=float(br["losses"]),
        reliability=float(br["reliability"]),
    )
    return Design(
        active_edges=tuple(sorted(edge_types)),
        edge_types=edge_types,
        leaves=(),
        flows={},
        angles={},
        curtailments={},
        breakdown=breakdown,
    )


def write_report(rows: Sequence[dict], path: str | Path) -> None:
    """Tab-separated report rows with a header line, for plotting."""
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0].keys())
    lines = ["\t".join(keys)]
    for row in rows:
        lines.append("\t".join(_fmt_cell(row[k]) for k in keys))
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}" if math.isfinite(v) else "nan"
    return str(v)


def synthetic_case_instance(backend: Optional[BackendConfig] = None) -> FarmInstance:
    """A 30-WT synthetic surrogate of a real staggered-row farm.

    The published parameter set (5 MW turbines at 33 kV, three cable sizes,
    30-year horizon) is combined with invented coordinates: four rows of 8/8/7/7
    turbines at roughly 560 m spacing with mild deterministic jitter, and the
    substation offset south of the array. The real farm's turbine coordinates
    and cable electrical data are not public; the layout and the R/X values
    (typical 33 kV XLPE figures) are synthetic stand-ins.
    """
    rows = [8, 8, 7, 7]
    spacing = 560.0
    pitch = 700.0
    points = [Point(id=1, x=1800.0, y=-900.0)]
    node = 2
    for r, count in enumerate(rows):
        offset = 0.5 * spacing if r % 2 else 0.0
        for c in range(count):
            # Deterministic jitter breaks grid symmetry (and edge-cost ties).
            jx = 23.0 * math.sin(3.7 * node + 1.3 * r)
            jy = 17.0 * math.cos(2.9 * node - 0.7 * c)
            points.append(
                Point(id=node, x=offset + c * spacing + jx, y=r * pitch + jy)
            )
            node += 1

    catalog = Catalog(
        types=(
            CableType(530.0, 450.0, 0.13e-3, 0.115e-3),
            CableType(655.0, 510.0, 0.10e-3, 0.110e-3),
            CableType(775.0, 570.0, 0.08e-3, 0.105e-3),
        )
    )
    scenarios = (
        WindScenario(id=1, magnitude=1.0, duration_h=65700.0, nominal=True),
        WindScenario(id=2, magnitude=0.5, duration_h=91980.0),
        WindScenario(id=3, magnitude=0.2, duration_h=91980.0),
        WindScenario(id=4, magnitude=0.0, duration_h=13140.0),
    )
    return FarmInstance(
        name="synthetic-30wt",
        points=tuple(points),
        catalog=catalog,
        wind_scenarios=scenarios,
        failure=FailureParams(mtbf_yr_km=10.0, mttr_h=720.0),
        p_n_mw=5.0,
        v_n_kv=33.0,
        c_e_per_ah=2.86,
        lifetime_years=30.0,
        phi=4,
        upsilon=6,
        sigma=10,
        r_c=1,
        backend=backend or BackendConfig(),
    )
