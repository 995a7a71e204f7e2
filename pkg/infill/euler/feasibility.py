from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
import shapely
from shapely.strtree import STRtree

from infill.euler.complex import CellComplex, EdgeKey, edge_key
from infill.euler.exceptions import DegenerateGeometry
from infill.euler.geometry import Point2, mitered_offset

if TYPE_CHECKING:
    from infill.euler.geometry import OffsetResult, Region
    from infill.euler.slicing import PatchPlan, PrintConfig

log = logging.getLogger(__name__)

# Collisions further than this many extruder radii inside the fill region cannot be blamed on patching
DEEP_COLLISION_FACTOR = 4


class Shrinkability(Enum):
    SHRINKABLE = "shrinkable"
    TOPOLOGICAL = "shrinkable-topological"
    UNSHRINKABLE = "unshrinkable"


@dataclass(frozen=True)
class ForcedTravel:
    """A stretch of an edge that has to be crossed without extruding."""

    edge: EdgeKey
    start: Point2
    end: Point2
    arc: int | None = None

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)


@dataclass
class FeasibilityReport:
    covered_edges: list[EdgeKey] = field(default_factory=list)
    collision_pairs: list[tuple[EdgeKey, EdgeKey]] = field(default_factory=list)
    shrinkability: dict[int, Shrinkability] = field(default_factory=dict)
    forced_travel: list[ForcedTravel] = field(default_factory=list)
    unresolved: list[tuple[EdgeKey, EdgeKey]] = field(default_factory=list)

    @property
    def forced_travel_edges(self) -> list[EdgeKey]:
        return sorted({travel.edge for travel in self.forced_travel})

    @property
    def arcs_affected(self) -> int:
        return len({travel.arc for travel in self.forced_travel if travel.arc is not None})

    @property
    def travel_count(self) -> int:
        """Forced travels with one count per patch arc, an edge outside every arc counts on its own."""
        return len({travel.edge if travel.arc is None else travel.arc for travel in self.forced_travel})

    @property
    def is_empty(self) -> bool:
        return not (self.covered_edges or self.collision_pairs or self.forced_travel)

    @property
    def feasible(self) -> bool:
        return not self.unresolved

    def travel_segments(self, edge: EdgeKey) -> list[tuple[Point2, Point2]]:
        return [(travel.start, travel.end) for travel in self.forced_travel if travel.edge == edge]


def _foot(point: Point2, a: Point2, b: Point2) -> Point2:
    ab = np.subtract(b, a)
    t = float(np.clip(np.dot(np.subtract(point, a), ab) / np.dot(ab, ab), 0.0, 1.0))
    return Point2(*(np.asarray(a) + t * ab))


def _segment_distance(point: Point2, a: Point2, b: Point2) -> float:
    return math.dist(point, _foot(point, a, b))


def _collisions(K: CellComplex, r: float) -> list[tuple[EdgeKey, EdgeKey]]:
    edges = K.edges
    if not edges:
        return []

    lines = shapely.linestrings(np.asarray([K.segment(e) for e in edges], dtype=float))
    tree = STRtree(lines)
    left, right = tree.query(lines, predicate="dwithin", distance=2 * r)

    pairs = []
    for i, j in zip(left.tolist(), right.tolist()):
        if i >= j or set(edges[i]) & set(edges[j]):
            continue
        if shapely.distance(lines[i], lines[j]) < 2 * r:
            pairs.append((edges[i], edges[j]))
    return sorted(pairs)


def _split_travel(
    K: CellComplex, fid: int, result: OffsetResult, added: dict[EdgeKey, int | None]
) -> list[ForcedTravel]:
    ring = K.faces[fid].vertices
    travel = []
    for source, resulting in result.split_vertices:
        v = ring[source]
        prev, nxt = ring[source - 1], ring[(source + 1) % len(ring)]
        corner = K.vertices[v]
        for other in (prev, nxt):
            edge = edge_key(v, other)
            if edge not in added:
                continue

            a = K.vertices[other]
            near = min((result.points[vid] for vid in resulting), key=lambda p: _segment_distance(p, corner, a))
            foot = _foot(near, corner, a)
            if math.dist(foot, corner) > K.eps:
                travel.append(ForcedTravel(edge, foot, corner, added[edge]))
    return travel


def check_extruder_feasibility(
    Ktilde: CellComplex,
    cfg: PrintConfig,
    patch: PatchPlan | None = None,
    region: Region | None = None,
) -> FeasibilityReport:
    """Find where the extruder width gets in the way of printing a patched complex.

    Short edges are reported as covered by their neighbors, close nonadjacent edges as collision
    pairs. Faces along patched boundary arcs are shrunk by the extruder radius: a face that splits
    turns the stretches of its patched edges next to the split corner into travel, a face that
    vanishes turns its patched edges into travel. Travel is counted once per patch arc, which bounds
    it by half the boundary vertices. Without a patch plan every boundary edge counts as patched.
    """
    K = Ktilde
    r = cfg.extruder_radius
    report = FeasibilityReport()
    if not K.edges:
        return report

    report.covered_edges = [e for e in K.edges if K.length(e) <= 2 * r + cfg.cover_tolerance]
    report.collision_pairs = _collisions(K, r)

    if patch is not None:
        added = {e: arc for arc, edges in enumerate(patch.arc_edges) for e in edges}
    else:
        added = {e: None for e in K.boundary_edges}

    for fid in K.interior_faces:
        face = K.faces[fid]
        patched = [edge_key(a, b) for a, b in face.halfedges() if edge_key(a, b) in added]
        if not patched:
            continue

        try:
            result = mitered_offset(K.face_polygon(fid), r)
        except DegenerateGeometry:
            result = None

        if result is None or not result.rings:
            report.shrinkability[fid] = Shrinkability.UNSHRINKABLE
            for edge in patched:
                a, b = K.segment(edge)
                report.forced_travel.append(ForcedTravel(edge, a, b, added[edge]))
        elif result.topological_changed:
            report.shrinkability[fid] = Shrinkability.TOPOLOGICAL
            report.forced_travel.extend(_split_travel(K, fid, result, added))
        else:
            report.shrinkability[fid] = Shrinkability.SHRINKABLE

    # Keep one record per edge stretch
    report.forced_travel = sorted(set(report.forced_travel), key=lambda t: (t.edge, t.start, t.end))

    travelled = set(report.forced_travel_edges)
    if region is not None and not region.is_empty:
        rim = region.to_shapely().boundary
    else:
        rim = shapely.union_all(
            shapely.linestrings(np.asarray([K.segment(e) for e in K.boundary_edges], dtype=float))
        )

    depth = DEEP_COLLISION_FACTOR * r
    for e, f in report.collision_pairs:
        if e in travelled or f in travelled:
            continue
        lines = shapely.linestrings(np.asarray([K.segment(e), K.segment(f)], dtype=float))
        if np.all(shapely.distance(lines, rim) > depth):
            report.unresolved.append((e, f))

    if report.forced_travel:
        log.info(
            "%d edges of %r forced to travel across %d patched arcs",
            len(travelled),
            K,
            report.arcs_affected,
        )
    if report.unresolved:
        log.warning("%d collision pairs lie deep inside the fill region", len(report.unresolved))
    return report
