"""Cable catalog and the loss-cost pre-processing that expands it into sub-types.

Internal units: Amperes, metres, hours, plain currency. Catalog costs arrive
as k-currency/km in instance files, which is numerically identical to
currency/m, so no conversion factor is applied on load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

SQRT3 = math.sqrt(3.0)

# Joule + screen + armouring losses for the three-phase system.
LOSS_FACTOR = 3.0 * 1.5


class CatalogError(ValueError):
    """Raised for physically invalid or non-comonotonic catalogs."""


@dataclass(frozen=True)
class CableType:
    """One purchasable cable: ampacity, cost and per-metre electrical data."""

    capacity_a: float
    cost_per_m: float
    resistance_ohm_per_m: float
    reactance_ohm_per_m: float

    def __post_init__(self):
        for name in ("capacity_a", "cost_per_m", "resistance_ohm_per_m", "reactance_ohm_per_m"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise CatalogError(f"CableType.{name} must be a positive finite number, got {v!r}")


@dataclass(frozen=True)
class Catalog:
    """Cable types sorted by capacity; capacities and costs must be comonotonic."""

    types: tuple[CableType, ...]

    def __post_init__(self):
        if not self.types:
            raise CatalogError("empty catalog")
        caps = [t.capacity_a for t in self.types]
        costs = [t.cost_per_m for t in self.types]
        if any(b < a for a, b in zip(caps, caps[1:])):
            raise CatalogError("capacities must be non-decreasing")
        if any(b < a for a, b in zip(costs, costs[1:])):
            raise CatalogError("costs must be non-decreasing (comonotonic with capacity)")

    def __len__(self) -> int:
        return len(self.types)


@dataclass(frozen=True)
class SubType:
    """A capacity level of a parent cable type used by the optimization model.

    ``cost_invest_per_m`` and the electrical data are inherited from the
    parent; ``cost_losses_per_m`` is the pre-computed expected cost of
    electrical losses for a cable loaded at this level.
    """

    parent: int
    capacity_a: float
    cost_invest_per_m: float
    resistance_ohm_per_m: float
    reactance_ohm_per_m: float
    cost_losses_per_m: float = 0.0

    @property
    def cost_total_per_m(self) -> float:
        return self.cost_invest_per_m + self.cost_losses_per_m


def unit_current_a(p_n_mw: float, v_n_kv: float) -> float:
    """Current injected by one WT at rated output: P_n*1000 / (sqrt(3)*V_n)."""
    if p_n_mw <= 0 or v_n_kv <= 0:
        raise CatalogError("P_n and V_n must be positive")
    return p_n_mw * 1000.0 / (SQRT3 * v_n_kv)


def wt_capacity(t: CableType, p_n_mw: float, v_n_kv: float) -> int:
    """Number of WTs a cable can carry: floor(sqrt(3)*V_n*u_t / (P_n*1000)).

    A value that lands within 1e-9 of an integer is treated as exact so that
    capacities quoted as whole WT multiples do not round down spuriously.
    """
    v = SQRT3 * v_n_kv * t.capacity_a / (p_n_mw * 1000.0)
    if abs(v - round(v)) < 1e-9:
        return int(round(v))
    return math.floor(v)


def _capacity_levels(f_max: float, step: float) -> list[float]:
    n = int(round(f_max / step))
    return [step * k for k in range(1, n + 1)]


def expand_subtypes(
    catalog: Catalog, p_n_mw: float, v_n_kv: float, step: float = 1.0
) -> tuple[SubType, ...]:
    """Discretize the catalog into capacity sub-types of ``step`` WTs each.

    Levels run from ``step`` up to the largest type's WT capacity (rounded
    down to the step grid); each level's parent is the cheapest type whose
    capacity covers it. Loss costs are zero until attached via
    :func:`attach_loss_costs`.
    """
    if step <= 0 or step > 1:
        raise CatalogError(f"step must be in (0, 1], got {step}")
    unit = unit_current_a(p_n_mw, v_n_kv)
    f_exact = [SQRT3 * v_n_kv * t.capacity_a / (p_n_mw * 1000.0) for t in catalog.types]
    # Round each type's capacity down to the step grid (integer floor for step=1).
    f_grid = []
    for v in f_exact:
        q = v / step
        if abs(q - round(q)) < 1e-9:
            q = round(q)
        f_grid.append(math.floor(q) * step)
    if f_grid[0] < step:
        raise CatalogError("smallest cable cannot carry a single WT step; catalog rejected")
    out = []
    for level in _capacity_levels(f_grid[-1], step):
        parent = next(i for i, f in enumerate(f_grid) if f >= level - 1e-12)
        t = catalog.types[parent]
        out.append(
            SubType(
                parent=parent,
                capacity_a=level * unit,
                cost_invest_per_m=t.cost_per_m,
                resistance_ohm_per_m=t.resistance_ohm_per_m,
                reactance_ohm_per_m=t.reactance_ohm_per_m,
            )
        )
    return tuple(out)


def loss_cost_per_meter(
    s: SubType, scenarios: Iterable, c_e_per_ah: float, v_n_kv: float
) -> float:
    """Expected lifetime cost of electrical losses per metre at full loading.

    3*1.5 * R * c_e/(sqrt(3)*V_n*1000) * sum_w (u' * zeta_w)^2 * tau_w, with the
    cable assumed loaded at its capacity level scaled by each scenario's power
    magnitude.
    """
    scen = list(scenarios)
    if not scen:
        raise CatalogError("loss pre-processing needs at least one wind scenario")
    energy_price_per_wh = c_e_per_ah / (SQRT3 * v_n_kv * 1000.0)
    quad = sum((s.capacity_a * w.magnitude) ** 2 * w.duration_h for w in scen)
    return LOSS_FACTOR * s.resistance_ohm_per_m * energy_price_per_wh * quad


def attach_loss_costs(
    subtypes: Sequence[SubType], scenarios: Iterable, c_e_per_ah: float, v_n_kv: float
) -> tuple[SubType, ...]:
    """Return the sub-types with their loss-cost field populated."""
    scen = list(scenarios)
    return tuple(
        replace(s, cost_losses_per_m=loss_cost_per_meter(s, scen, c_e_per_ah, v_n_kv))
        for s in subtypes
    )


def lift_catalog(catalog: Catalog, p_n_mw: float, v_n_kv: float) -> tuple[SubType, ...]:
    """Wrap raw catalog types as sub-types (one per type, no loss costs).

    This is the type set used when electrical losses are left out of the
    objective; every type must carry at least one WT.
    """
    out = []
    for i, t in enumerate(catalog.types):
        if wt_capacity(t, p_n_mw, v_n_kv) < 1:
            raise CatalogError(f"cable type {i} cannot carry a single WT; catalog rejected")
        out.append(
            SubType(
                parent=i,
                capacity_a=t.capacity_a,
                cost_invest_per_m=t.cost_per_m,
                resistance_ohm_per_m=t.resistance_ohm_per_m,
                reactance_ohm_per_m=t.reactance_ohm_per_m,
            )
        )
    return tuple(out)
