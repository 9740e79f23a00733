"""Candidate cable-corridor graph: bounded edge set and crossing detection.

Node ids follow the collection-system convention: id 1 is the offshore
substation (OSS), ids 2..1+n_w are wind turbines (WTs). All coordinates are
planar metres; edge lengths are Euclidean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

OSS_ID = 1

Edge = tuple[int, int]


class GeometryError(ValueError):
    """Raised for invalid point sets or graph-construction parameters."""


@dataclass(frozen=True)
class Point:
    """A node of the farm: id 1 is the OSS, higher ids are WTs."""

    id: int
    x: float
    y: float

    @property
    def is_oss(self) -> bool:
        return self.id == OSS_ID


@dataclass(frozen=True)
class CandidateGraph:
    """Bounded undirected candidate graph with lengths and crossing pairs.

    ``edges`` hold node-id pairs with i < j; ``crossings`` holds unordered
    pairs of *edge indices* (a < b), one entry per crossing pair.
    """

    points: tuple[Point, ...]
    edges: tuple[Edge, ...]
    lengths: tuple[float, ...]
    crossings: frozenset[tuple[int, int]]
    _point_by_id: dict[int, Point] = field(default_factory=dict, repr=False, compare=False)
    _edge_index: dict[Edge, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_point_by_id", {p.id: p for p in self.points})
        object.__setattr__(self, "_edge_index", {e: i for i, e in enumerate(self.edges)})

    @property
    def n_wt(self) -> int:
        return len(self.points) - 1

    @property
    def wt_ids(self) -> tuple[int, ...]:
        return tuple(sorted(p.id for p in self.points if not p.is_oss))

    def point(self, node_id: int) -> Point:
        return self._point_by_id[node_id]

    def edge_index(self, edge: Edge) -> int:
        return self._edge_index[_norm_edge(*edge)]

    def has_edge(self, edge: Edge) -> bool:
        return _norm_edge(*edge) in self._edge_index

    def length_of(self, edge: Edge) -> float:
        return self.lengths[self.edge_index(edge)]

    def incident_edges(self, node_id: int) -> list[int]:
        return [i for i, (a, b) in enumerate(self.edges) if node_id in (a, b)]


def _norm_edge(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


def _orientation(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the cross product (b-a) x (c-a): +1 left turn, -1 right, 0 collinear.

    Uses floats with an error-bound filter and falls back to exact rational
    arithmetic when the result is too close to zero to trust.
    """
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    # Max rounding error of the float expression is within a small multiple of
    # eps times the magnitude of the products involved.
    scale = abs((bx - ax) * (cy - ay)) + abs((by - ay) * (cx - ax))
    if abs(det) > 1e-12 * scale:
        return 1 if det > 0 else -1
    exact = (Fraction(bx) - Fraction(ax)) * (Fraction(cy) - Fraction(ay)) - (
        Fraction(by) - Fraction(ay)
    ) * (Fraction(cx) - Fraction(ax))
    if exact > 0:
        return 1
    if exact < 0:
        return -1
    return 0


def _within_bbox(px, py, ax, ay, bx, by) -> bool:
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def segments_cross(a: tuple[Point, Point], b: tuple[Point, Point]) -> bool:
    """True iff the closed segments meet somewhere other than a shared endpoint.

    Collinear overlap of positive length counts as a crossing (two cables in
    the same trench are a hot-spot even when they share an endpoint). Contact
    at a shared endpoint alone does not.
    """
    (p1, p2), (p3, p4) = a, b
    ax, ay, bx, by = p1.x, p1.y, p2.x, p2.y
    cx, cy, dx, dy = p3.x, p3.y, p4.x, p4.y

    o1 = _orientation(ax, ay, bx, by, cx, cy)
    o2 = _orientation(ax, ay, bx, by, dx, dy)
    o3 = _orientation(cx, cy, dx, dy, ax, ay)
    o4 = _orientation(cx, cy, dx, dy, bx, by)

    if o1 == o2 == o3 == o4 == 0:
        # Collinear: crossing iff the 1-D overlap has positive length.
        if abs(bx - ax) >= abs(by - ay):
            lo1, hi1 = sorted((ax, bx))
            lo2, hi2 = sorted((cx, dx))
        else:
            lo1, hi1 = sorted((ay, by))
            lo2, hi2 = sorted((cy, dy))
        return min(hi1, hi2) > max(lo1, lo2)

    shared = (ax, ay) in ((cx, cy), (dx, dy)) or (bx, by) in ((cx, cy), (dx, dy))
    if shared:
        return False

    if o1 != o2 and o3 != o4:
        return True
    # Touching cases: an endpoint of one segment lies strictly on the other.
    if o1 == 0 and _within_bbox(cx, cy, ax, ay, bx, by):
        return True
    if o2 == 0 and _within_bbox(dx, dy, ax, ay, bx, by):
        return True
    if o3 == 0 and _within_bbox(ax, ay, cx, cy, dx, dy):
        return True
    if o4 == 0 and _within_bbox(bx, by, cx, cy, dx, dy):
        return True
    return False


def crossing_pairs(
    points: Sequence[Point], edges: Sequence[Edge]
) -> frozenset[tuple[int, int]]:
    """All unordered index pairs of edges that cross, excluding node-sharing pairs.

    Pairwise with a bounding-box pre-filter; exact predicate decides the rest.
    """
    by_id = {p.id: p for p in points}
    segs = []
    for (i, j) in edges:
        pi, pj = by_id[i], by_id[j]
        segs.append(
            (
                pi,
                pj,
                min(pi.x, pj.x),
                max(pi.x, pj.x),
                min(pi.y, pj.y),
                max(pi.y, pj.y),
            )
        )
    out: set[tuple[int, int]] = set()
    for a in range(len(edges)):
        ia, ja = edges[a]
        pa, qa, xlo, xhi, ylo, yhi = segs[a]
        for b in range(a + 1, len(edges)):
            ib, jb = edges[b]
            if ia in (ib, jb) or ja in (ib, jb):
                continue
            pb, qb, uxlo, uxhi, uylo, uyhi = segs[b]
            if uxlo > xhi or xlo > uxhi or uylo > yhi or ylo > uyhi:
                continue
            if segments_cross((pa, qa), (pb, qb)):
                out.add((a, b))
    return frozenset(out)


def _validate_points(points: Sequence[Point]) -> list[Point]:
    ids = [p.id for p in points]
    if len(set(ids)) != len(ids):
        raise GeometryError("duplicate node ids")
    if OSS_ID not in ids:
        raise GeometryError("exactly one OSS (id 1) required")
    seen: dict[tuple[float, float], int] = {}
    for p in points:
        if not (math.isfinite(p.x) and math.isfinite(p.y)):
            raise GeometryError(f"non-finite coordinates at node {p.id}")
        key = (p.x, p.y)
        if key in seen:
            raise GeometryError(
                f"nodes {seen[key]} and {p.id} share coordinates (zero-length edge)"
            )
        seen[key] = p.id
    n_wt = len(points) - 1
    if n_wt < 2:
        raise GeometryError("need at least 2 WTs for a closed loop")
    return sorted(points, key=lambda p: p.id)


def build_candidate_graph(
    points: Iterable[Point], upsilon: int, sigma: int
) -> CandidateGraph:
    """Bounded candidate graph: per-WT nearest-neighbour edges plus OSS feeders.

    Each WT contributes edges to its ``upsilon`` nearest WTs (symmetric union,
    distance ties broken toward the lower node id), and the ``sigma`` globally
    shortest WT-OSS edges are added. ``upsilon = n_w - 1`` and ``sigma = n_w``
    give the complete graph.
    """
    pts = _validate_points(list(points))
    oss = next(p for p in pts if p.is_oss)
    wts = [p for p in pts if not p.is_oss]
    n_wt = len(wts)
    if not (0 <= upsilon < n_wt):
        raise GeometryError(f"upsilon must be in [0, n_w), got {upsilon}")
    if not (0 <= sigma <= n_wt):
        raise GeometryError(f"sigma must be in [0, n_w], got {sigma}")

    def dist(p: Point, q: Point) -> float:
        return math.hypot(p.x - q.x, p.y - q.y)

    edge_set: set[Edge] = set()
    for p in wts:
        others = sorted(
            (q for q in wts if q.id != p.id), key=lambda q: (dist(p, q), q.id)
        )
        for q in others[:upsilon]:
            edge_set.add(_norm_edge(p.id, q.id))

    feeders = sorted(wts, key=lambda q: (dist(oss, q), q.id))
    for q in feeders[:sigma]:
        edge_set.add(_norm_edge(OSS_ID, q.id))

    edges = tuple(sorted(edge_set))
    by_id = {p.id: p for p in pts}
    lengths = tuple(dist(by_id[i], by_id[j]) for i, j in edges)
    return CandidateGraph(
        points=tuple(pts),
        edges=edges,
        lengths=lengths,
        crossings=crossing_pairs(pts, edges),
    )
