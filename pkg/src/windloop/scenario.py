"""Two-stage scenario tree: wind-power scenarios crossed with N-1 system states.

System-state probabilities come from a two-state Markov (available/unavailable)
steady state: psi = MTTR / (MTTR + MTBF*8760/d_km). At most one cable is failed
per state; the base state takes the normalization remainder so probabilities
sum to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .catalog import SQRT3

Edge = tuple[int, int]

HOURS_PER_YEAR = 8760.0


class ScenarioError(ValueError):
    """Raised for invalid scenario or failure-model parameters."""


@dataclass(frozen=True)
class WindScenario:
    """A wind-power operating point: per-unit magnitude and duration in hours."""

    id: int
    magnitude: float
    duration_h: float
    nominal: bool = False

    def __post_init__(self):
        if not (0.0 <= self.magnitude <= 1.0):
            raise ScenarioError(f"magnitude must be in [0,1], got {self.magnitude}")
        if not (self.duration_h > 0 and math.isfinite(self.duration_h)):
            raise ScenarioError(f"duration must be positive, got {self.duration_h}")
        if self.nominal and self.magnitude != 1.0:
            raise ScenarioError("nominal scenario must have magnitude 1")


@dataclass(frozen=True)
class SystemState:
    """One N-1 system state: at most one failed edge; id 0 is the base state."""

    id: int
    failed_edge: Optional[Edge]
    probability: float

    def __post_init__(self):
        if not (0.0 <= self.probability <= 1.0):
            raise ScenarioError(f"state probability must be in [0,1], got {self.probability}")

    @property
    def is_base(self) -> bool:
        return self.failed_edge is None


@dataclass(frozen=True)
class FailureParams:
    """MTBF in years*km per failure, MTTR in hours."""

    mtbf_yr_km: float
    mttr_h: float

    def __post_init__(self):
        if self.mtbf_yr_km <= 0 or self.mttr_h <= 0:
            raise ScenarioError("MTBF and MTTR must be positive")


@dataclass(frozen=True)
class ScenarioTree:
    """Cross product of wind scenarios and system states."""

    omega: tuple[WindScenario, ...]
    states: tuple[SystemState, ...]

    def __post_init__(self):
        if not self.omega or not self.states:
            raise ScenarioError("scenario tree needs wind scenarios and system states")
        if sum(1 for w in self.omega if w.nominal) != 1:
            raise ScenarioError("exactly one nominal wind scenario required")
        if sum(1 for k in self.states if k.is_base) != 1:
            raise ScenarioError("exactly one base system state required")
        total = sum(k.probability for k in self.states)
        if abs(total - 1.0) > 1e-12:
            raise ScenarioError(f"state probabilities sum to {total!r}, expected 1")

    @property
    def nominal(self) -> WindScenario:
        return next(w for w in self.omega if w.nominal)

    @property
    def base_state(self) -> SystemState:
        return next(k for k in self.states if k.is_base)

    def leaves(self) -> Iterator[tuple[WindScenario, SystemState]]:
        for w in self.omega:
            for k in self.states:
                yield w, k

    @property
    def n_leaves(self) -> int:
        return len(self.omega) * len(self.states)


def failure_probability(p: FailureParams, d_m: float) -> float:
    """Steady-state unavailability of a cable of length ``d_m`` metres."""
    if d_m <= 0:
        raise ScenarioError(f"edge length must be positive, got {d_m}")
    d_km = d_m / 1000.0
    return p.mttr_h / (p.mttr_h + p.mtbf_yr_km * HOURS_PER_YEAR / d_km)


def nominal_current(p_n_mw: float, v_n_kv: float, zeta: float) -> float:
    """Current injected by one WT: P_n * zeta * 1000 / (sqrt(3) * V_n)."""
    if p_n_mw <= 0 or v_n_kv <= 0:
        raise ScenarioError("P_n and V_n must be positive")
    if not (0.0 <= zeta <= 1.0):
        raise ScenarioError(f"zeta must be in [0,1], got {zeta}")
    return p_n_mw * zeta * 1000.0 / (SQRT3 * v_n_kv)


def build_system_states(
    edges_with_lengths: Sequence[tuple[Edge, float]], p: FailureParams
) -> tuple[SystemState, ...]:
    """Base state plus one failure state per edge.

    The surviving cables' availability is taken as one in each failure state
    (conservative), and the base state receives the probability remainder.
    """
    if not edges_with_lengths:
        raise ScenarioError("need at least one edge to build system states")
    states = []
    total = 0.0
    for n, (edge, length) in enumerate(edges_with_lengths, start=1):
        psi = failure_probability(p, length)
        total += psi
        i, j = edge
        states.append(SystemState(id=n, failed_edge=(min(i, j), max(i, j)), probability=psi))
    if total >= 1.0:
        raise ScenarioError(
            f"failure probabilities sum to {total:.6f} >= 1; the N-1 model is "
            "invalid for these MTBF/MTTR values"
        )
    return (SystemState(id=0, failed_edge=None, probability=1.0 - total), *states)


def build_scenario_tree(
    omega: Sequence[WindScenario], states: Sequence[SystemState]
) -> ScenarioTree:
    """Assemble and validate the cross-product tree."""
    return ScenarioTree(omega=tuple(omega), states=tuple(states))


def deterministic_tree(omega: Sequence[WindScenario]) -> ScenarioTree:
    """The single-leaf tree {nominal scenario, base state}."""
    nominal = [w for w in omega if w.nominal]
    if len(nominal) != 1:
        raise ScenarioError("exactly one nominal wind scenario required")
    base = SystemState(id=0, failed_edge=None, probability=1.0)
    return ScenarioTree(omega=(nominal[0],), states=(base,))
