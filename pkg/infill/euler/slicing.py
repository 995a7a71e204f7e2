from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING

import networkx as nx
import numpy as np
import shapely
from shapely.geometry import LinearRing, LineString, Point
from shapely.geometry.polygon import orient
from shapely.ops import nearest_points, substring

from infill.euler.complex import CellClass, CellComplex, EdgeKey, complex_from_rings, edge_key
from infill.euler.euler import EulerComplex
from infill.euler.exceptions import ConfigError, InternalInvariantViolation, InvalidLayers
from infill.euler.geometry import (
    DEFAULT_DISK_SEGMENTS,
    Point2,
    Region,
    VertexIndex,
    inset_pieces,
    minkowski_outset,
    tolerance,
)

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

log = logging.getLogger(__name__)

MAX_PERTURBATIONS = 8


class SupportMode(Enum):
    PERIMETER = "perimeter"
    SECTIONS = "sections"


@dataclass
class PrintConfig:
    """Printing parameters shared by every layer of a job. Lengths are in millimetres."""

    extruder_radius: float = 0.2
    overhang_c: float = 0.5
    disk_segments: int = DEFAULT_DISK_SEGMENTS
    cell_size: float = 5.0
    offset: float | None = None
    cover_tolerance: float | None = None
    support_mode: SupportMode = SupportMode.PERIMETER
    extra_perimeter: bool = False
    filament_diameter: float = 1.75
    layer_height: float | None = None

    def __post_init__(self):
        if not self.extruder_radius > 0:
            raise ConfigError(f"Extruder radius must be positive: {self.extruder_radius}")
        if not 0 <= self.overhang_c <= 1:
            raise ConfigError(f"Overhang factor must be in [0, 1]: {self.overhang_c}")
        if self.disk_segments < 4 or self.disk_segments % 4:
            raise ConfigError(f"Disk segment count must be a positive multiple of 4: {self.disk_segments}")
        if not self.cell_size > 0:
            raise ConfigError(f"Cell size must be positive: {self.cell_size}")
        if self.offset is not None and not self.offset > 0:
            raise ConfigError(f"Offset must be positive: {self.offset}")
        if self.cover_tolerance is None:
            self.cover_tolerance = 0.1 * self.extruder_radius
        elif self.cover_tolerance < 0:
            raise ConfigError(f"Cover tolerance must be non-negative: {self.cover_tolerance}")
        if not self.filament_diameter > 0:
            raise ConfigError(f"Filament diameter must be positive: {self.filament_diameter}")
        if self.layer_height is not None and not self.layer_height > 0:
            raise ConfigError(f"Layer height must be positive: {self.layer_height}")

        try:
            self.support_mode = SupportMode(self.support_mode)
        except ValueError:
            raise ConfigError(f"Unknown support mode: {self.support_mode!r}")

    @property
    def epsilon(self) -> float:
        return self.overhang_c * self.extruder_radius


@dataclass(frozen=True)
class Layer:
    z: float
    polygons: tuple[Region, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "polygons", tuple(self.polygons))


@dataclass(frozen=True)
class LayerStack:
    layers: tuple[Layer, ...]
    layer_height: float

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layer_height > 0:
            raise InvalidLayers(f"Layer height must be positive: {self.layer_height}")

        for lower, upper in zip(self.layers, self.layers[1:]):
            if not upper.z > lower.z:
                raise InvalidLayers(f"Layer heights must be strictly increasing: {lower.z} followed by {upper.z}")

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self) -> Iterator[Layer]:
        return iter(self.layers)

    def __getitem__(self, idx: int) -> Layer:
        return self.layers[idx]

    def regions(self) -> Iterator[Region]:
        for layer in self.layers:
            yield from layer.polygons


@dataclass
class ContinuityReport:
    lower: int
    upper: int
    violations: list[int] = field(default_factory=list)

    @property
    def continuous(self) -> bool:
        return not self.violations


def check_epsilon_continuity(stack: LayerStack, cfg: PrintConfig) -> list[ContinuityReport]:
    """Check that every polygon of a layer rests within the epsilon outset of the layer below it."""
    if not len(stack):
        raise InvalidLayers("Empty layer stack")

    reports = []
    for i, (lower, upper) in enumerate(zip(stack.layers, stack.layers[1:])):
        report = ContinuityReport(i, i + 1)
        reports.append(report)
        if not upper.polygons:
            continue

        support = shapely.union_all(
            [minkowski_outset(region, cfg.epsilon, cfg.disk_segments) for region in lower.polygons]
        )
        eps = tolerance(p for region in upper.polygons for ring in region.rings for p in ring.ring)
        support = support.buffer(eps * 10)

        for j, region in enumerate(upper.polygons):
            if region.is_empty:
                continue
            if support.is_empty or not support.covers(region.to_shapely()):
                report.violations.append(j)

        if report.violations:
            log.warning("Layer %d is not epsilon-continuous over layer %d: polygons %s", i + 1, i, report.violations)

    return reports


def _ring_lines(region: Region) -> list[LineString]:
    """Boundary rings as closed line strings, in the region's orientation."""
    return [LineString([*ring.ring, ring.ring[0]]) for ring in region.rings]


def _ring_path(line: LineString, start: float, end: float) -> list[Point2]:
    """Points along a closed ring, walking in ring direction from distance ``start`` to ``end``."""
    if end > start:
        coords = list(substring(line, start, end).coords)
    else:
        coords = list(substring(line, start, line.length).coords) + list(substring(line, 0, end).coords)[1:]
    return [Point2(*p) for p in coords]


def _order_on_rings(points: dict[int, Point2], lines: Sequence[LineString]) -> list[list[tuple[float, int]]]:
    """Assign every point to its nearest ring and sort each ring's points by distance along it."""
    result: list[list[tuple[float, int]]] = [[] for _ in lines]
    for vid, p in points.items():
        point = Point(p)
        ring = min(range(len(lines)), key=lambda i: lines[i].distance(point))
        result[ring].append((lines[ring].project(point), vid))

    for ring in result:
        ring.sort()
    return result


@dataclass
class ClippedComplex:
    """The part of an Euler complex inside a clip region, before patching."""

    complex: CellComplex
    region: Region
    boundary_vertices: list[int] = field(default_factory=list)
    cut_vertices: list[int] = field(default_factory=list)
    component_map: dict[int, int] = field(default_factory=dict)
    simple_path_components: list[int] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.complex.edges


def _empty_complex() -> CellComplex:
    return CellComplex((), ())


def _components(K: CellComplex) -> tuple[dict[int, int], list[int]]:
    component_map = {}
    simple_paths = []
    for cid, component in enumerate(K.components):
        for v in component:
            component_map[v] = cid

        degrees = [K.degree(v) for v in component]
        if max(degrees) <= 2 and degrees.count(1) == 2:
            simple_paths.append(cid)
    return component_map, simple_paths


def _is_degenerate(K: CellComplex, shape: shapely.Geometry, eps: float) -> bool:
    boundary = shape.boundary
    points = shapely.points(np.asarray([K.vertices[v] for v in K.used_vertices], dtype=float))
    if np.any(shapely.distance(points, boundary) <= eps):
        return True

    lines = shapely.linestrings(np.asarray([K.segment(e) for e in K.edges], dtype=float))
    # Collinear overlaps come back as line pieces, crossings as points of zero length
    overlaps = shapely.intersection(lines, boundary)
    return bool(np.any(shapely.length(overlaps) > eps))


def clip(Khat: EulerComplex | CellComplex, region: Region) -> ClippedComplex:
    """Intersect a complex with a clip region.

    Cells inside the region are kept. Edges crossing the region boundary are cut at the boundary and
    the cut points become new vertices; the result may be impure and fall apart into several
    components. When the region boundary passes through a vertex or runs along an edge, the region
    is shrunk by twice the geometric tolerance and the clip is retried. A transformed complex is clipped
    in its printable form.
    """
    K = Khat.printable if isinstance(Khat, EulerComplex) else Khat
    if region.is_empty or not K.edges:
        return ClippedComplex(_empty_complex(), region)

    eps = K.eps
    shape = region.to_shapely()

    edges = K.edges
    lines = shapely.linestrings(np.asarray([K.segment(e) for e in edges], dtype=float))
    inside = shape.buffer(eps * 10)
    faces = [K.face_polygon(fid).to_shapely() for fid in K.interior_faces]
    if np.all(shapely.covers(inside, lines)) and np.all(shapely.covers(inside, faces)):
        component_map, simple_paths = _components(K)
        return ClippedComplex(K, region, component_map=component_map, simple_path_components=simple_paths)

    for _ in range(MAX_PERTURBATIONS):
        if not _is_degenerate(K, shape, eps):
            break
        log.debug("Clip boundary touches the complex, shrinking the region by %g", 2 * eps)
        shape = shape.buffer(-2 * eps, join_style="mitre")
        parts = [g for g in shapely.get_parts(shape) if g.geom_type == "Polygon"]
        if not parts:
            return ClippedComplex(_empty_complex(), Region.empty())
        shape = max(parts, key=lambda g: g.area)
    else:
        raise InternalInvariantViolation("Clip boundary still touches the complex after repeated perturbation")

    region = Region.from_shapely(shape)
    pieces = shapely.intersection(lines, shape)

    index = VertexIndex(eps)
    kept: dict[int, int] = {}
    cut: set[int] = set()
    whole: set[EdgeKey] = set()
    new_edges: list[EdgeKey] = []

    def _endpoint(p: Sequence[float], a: int, b: int) -> int:
        for v in (a, b):
            if math.dist(p, K.vertices[v]) <= eps:
                kept[v] = index.add(K.vertices[v])
                return kept[v]
        vid = index.add(p)
        cut.add(vid)
        return vid

    for (a, b), geom in zip(edges, pieces):
        for part in shapely.get_parts(geom):
            if part.geom_type != "LineString" or part.length <= eps:
                continue

            coords = list(part.coords)
            u, w = _endpoint(coords[0], a, b), _endpoint(coords[-1], a, b)
            if u == w:
                continue
            new_edges.append(edge_key(u, w))
            if {u, w} == {kept.get(a), kept.get(b)}:
                whole.add((a, b))

    vertices = index.points
    rings = []
    classes = []
    interior = shape.buffer(eps * 10)
    for fid in K.interior_faces:
        face = K.faces[fid]
        if not all(edge_key(a, b) in whole for a, b in face.halfedges()):
            continue
        if not interior.covers(K.face_polygon(fid).to_shapely()):
            continue
        rings.append([kept[v] for v in face.vertices])
        classes.append(face.cls)

    on_faces = {edge_key(a, b) for ring in rings for a, b in zip(ring, ring[1:] + ring[:1])}
    extra = sorted({e for e in new_edges if e not in on_faces})
    clipped = complex_from_rings(vertices, rings, classes, extra_edges=extra)

    boundary = [v for v in sorted(cut) if clipped.degree(v) % 2]
    ordered = _order_on_rings({v: vertices[v] for v in boundary}, _ring_lines(region))
    component_map, simple_paths = _components(clipped)

    result = ClippedComplex(
        clipped,
        region,
        boundary_vertices=[vid for ring in ordered for _, vid in ring],
        cut_vertices=sorted(cut),
        component_map=component_map,
        simple_path_components=simple_paths,
    )
    if len(result.boundary_vertices) % 2:
        raise InternalInvariantViolation(f"Odd number of boundary vertices after clip: {len(result.boundary_vertices)}")

    log.debug(
        "Clipped %r to %r: |S|=%d, %d components", K, clipped, len(result.boundary_vertices), len(clipped.components)
    )
    return result


class PairingOption(Enum):
    A = "A"  # 1-2, 3-4, ...
    B = "B"  # 2-3, 4-5, ..., m-1


@dataclass(frozen=True)
class BoundaryArc:
    """A path along one ring of the clip region, from ``start`` to ``end`` in ring direction."""

    start: int
    end: int
    ring: int
    points: tuple[Point2, ...]

    @cached_property
    def length(self) -> float:
        return LineString(self.points).length


@dataclass
class PatchPlan:
    arcs: list[BoundaryArc] = field(default_factory=list)
    unpatched: list[BoundaryArc] = field(default_factory=list)
    choice: list[PairingOption] = field(default_factory=list)
    added_faces: list[int] = field(default_factory=list)
    arc_edges: list[list[EdgeKey]] = field(default_factory=list)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(arc.start, arc.end) for arc in self.arcs]

    @property
    def added_edges(self) -> set[EdgeKey]:
        return {e for edges in self.arc_edges for e in edges}


def _arcs(
    ring: int, line: LineString, entries: list[tuple[float, int]], points: Sequence[Point2], option: PairingOption
) -> list[BoundaryArc]:
    n = len(entries)
    first = 0 if option == PairingOption.A else 1
    arcs = []
    for i in range(first, n, 2):
        (d0, s), (d1, t) = entries[i], entries[(i + 1) % n]
        path = _ring_path(line, d0, d1)
        path[0], path[-1] = points[s], points[t]
        arcs.append(BoundaryArc(s, t, ring, tuple(path)))
    return arcs


def plan_patch(clipped: ClippedComplex, region: Region | None = None) -> PatchPlan:
    """Choose how to pair up the odd boundary vertices of a clipped complex.

    Each ring of the clip region carries an even number of odd vertices, joined in alternate pairs by
    arcs along the ring. Of the two alternate pairings per ring, the one leaving the fewest
    components wins, then the one adding the least arc length, then option A.
    """
    region = region or clipped.region
    K = clipped.complex
    plan = PatchPlan()
    if not clipped.boundary_vertices:
        return plan

    lines = _ring_lines(region)
    ordered = _order_on_rings({v: K.vertices[v] for v in clipped.boundary_vertices}, lines)

    connections = nx.Graph()
    connections.add_nodes_from(set(clipped.component_map.values()))
    for ring, entries in enumerate(ordered):
        if not entries:
            continue
        if len(entries) % 2:
            raise InternalInvariantViolation(f"Ring {ring} carries an odd number of boundary vertices: {len(entries)}")

        candidates = []
        for option in PairingOption:
            arcs = _arcs(ring, lines[ring], entries, K.vertices, option)
            trial = connections.copy()
            trial.add_edges_from((clipped.component_map[a.start], clipped.component_map[a.end]) for a in arcs)
            candidates.append((nx.number_connected_components(trial), sum(a.length for a in arcs), option, arcs))

        count, _, option, arcs = min(candidates, key=lambda c: c[:2])
        other = next(c[3] for c in candidates if c[2] != option)
        connections.add_edges_from((clipped.component_map[a.start], clipped.component_map[a.end]) for a in arcs)

        plan.choice.append(option)
        plan.arcs.extend(arcs)
        plan.unpatched.extend(other)
        log.debug("Ring %d: pairing %s leaves %d components", ring, option.value, count)

    return plan


def apply_patch(clipped: ClippedComplex, plan: PatchPlan) -> CellComplex:
    """Add the planned arcs to a clipped complex and rebuild its faces."""
    K = clipped.complex
    if not plan.arcs:
        return K

    eps = K.eps
    index = VertexIndex(eps)
    for p in K.vertices:
        index.add(p)

    edges = set(K.edges)
    plan.arc_edges = []
    for arc in plan.arcs:
        ids = [arc.start]
        for p in arc.points[1:-1]:
            vid = index.add(p)
            if vid != ids[-1]:
                ids.append(vid)
        if len(ids) == 1 and edge_key(arc.start, arc.end) in edges:
            # Parallel edge, split it with a midpoint
            ids.append(index.add(LineString(arc.points).interpolate(0.5, normalized=True).coords[0]))
        ids.append(arc.end)

        arc_edges = [edge_key(a, b) for a, b in zip(ids, ids[1:])]
        edges.update(arc_edges)
        plan.arc_edges.append(arc_edges)

    vertices = index.points
    lines = shapely.linestrings(np.asarray([(vertices[a], vertices[b]) for a, b in sorted(edges)], dtype=float))
    inside = clipped.region.to_shapely().buffer(eps * 10)

    rings = []
    classes = {}
    for fid in K.interior_faces:
        classes[frozenset(K.faces[fid].vertices)] = K.faces[fid].cls

    for poly in shapely.get_parts(shapely.polygonize(lines)):
        if not inside.covers(poly.representative_point()):
            continue

        coords = list(orient(shapely.Polygon(poly.exterior), 1.0).exterior.coords)[:-1]
        ring = [index.find(p) for p in coords]
        if None in ring:
            raise InternalInvariantViolation(f"Patched face has a corner off the vertex set: {coords}")
        rings.append(ring)

    on_faces = {edge_key(a, b) for ring in rings for a, b in zip(ring, ring[1:] + ring[:1])}
    extra = [e for e in sorted(edges) if e not in on_faces]
    result = complex_from_rings(
        vertices, rings, [classes.get(frozenset(ring), CellClass.NONE) for ring in rings], extra_edges=extra
    )

    added = plan.added_edges
    plan.added_faces = [
        fid for fid in result.interior_faces if any(edge_key(a, b) in added for a, b in result.faces[fid].halfedges())
    ]

    odd = result.odd_vertices
    if odd:
        raise InternalInvariantViolation(f"Patched complex has odd vertices: {odd}")

    log.debug("Patched %r with %d arcs into %r", K, len(plan.arcs), result)
    return result


def patch(clipped: ClippedComplex, region: Region | None = None) -> CellComplex:
    """Join alternate pairs of odd boundary vertices along the clip region and restore a pure complex."""
    return apply_patch(clipped, plan_patch(clipped, region))


@dataclass
class SupportCorner:
    center: Point2
    apex: Point2
    first: Point2
    second: Point2

    @property
    def section(self) -> list[Point2]:
        return [self.first, self.apex, self.second]


@dataclass
class SupportPath:
    """Support built along one unprinted boundary path of the clip region."""

    path: tuple[Point2, ...]
    circles: int = 0
    slack: float = 0.0
    gap: float = 0.0
    centers: list[Point2] = field(default_factory=list)
    corners: list[SupportCorner] = field(default_factory=list)
    loop: list[Point2] = field(default_factory=list)
    simple: bool = True

    @cached_property
    def length(self) -> float:
        return LineString(self.path).length

    @property
    def supported(self) -> bool:
        return bool(self.corners)


@dataclass
class SupportPlan:
    mode: SupportMode = SupportMode.PERIMETER
    paths: list[SupportPath] = field(default_factory=list)
    extra_loops: list[list[Point2]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def loops(self) -> list[list[Point2]]:
        """Polylines to print, closed loops repeat their first point at the end."""
        if self.mode == SupportMode.SECTIONS:
            return [corner.section for path in self.paths for corner in path.corners]
        return [path.loop for path in self.paths if path.supported]

    @property
    def unsupported(self) -> list[SupportPath]:
        return [path for path in self.paths if not path.supported]


def _circle_count(length: float, r: float) -> int:
    # Circles of radius r at both path ends plus n in between, at centre spacing strictly above 2r
    return max(math.ceil(length / (2 * r) - 1e-9) - 2, 0)


def _centers(line: LineString, n: int) -> list[Point2]:
    return [Point2(*line.interpolate(j * line.length / (n + 1)).coords[0]) for j in range(1, n + 1)]


def _corner(center: Point2, rings: Sequence[LineString], r: float, eps: float) -> SupportCorner | None:
    c = Point(center)
    ring = min(rings, key=lambda line: line.distance(c))
    foot = nearest_points(ring, c)[0]
    direction = np.subtract(foot.coords[0], center)
    distance = float(np.hypot(*direction))
    if distance <= eps:
        return None

    apex = Point2(*(np.asarray(center) + 2 * r * direction / distance))
    hits = Point(apex).buffer(2 * r, quad_segs=64).exterior.intersection(ring)
    base = ring.project(foot)
    length = ring.length

    before, after = None, None
    for hit in shapely.get_parts(hits):
        if hit.geom_type != "Point":
            continue
        rel = (ring.project(hit) - base + length / 2) % length - length / 2
        if rel < 0 and (before is None or rel > before[0]):
            before = (rel, Point2(hit.x, hit.y))
        elif rel > 0 and (after is None or rel < after[0]):
            after = (rel, Point2(hit.x, hit.y))

    if before is None or after is None:
        return None
    return SupportCorner(center, apex, before[1], after[1])


def _crossing(a: Sequence[Point2], b: Sequence[Point2]) -> Point2 | None:
    hit = LineString(a).intersection(LineString(b))
    if hit.geom_type != "Point":
        return None
    return Point2(hit.x, hit.y)


def _along(ring: LineString, start: Point2, end: Point2) -> list[Point2]:
    """Ring points strictly between two points on the ring, or nothing if ``end`` lies behind ``start``."""
    d0, d1 = ring.project(Point(start)), ring.project(Point(end))
    if (d1 - d0) % ring.length > ring.length / 2:
        return []
    return _ring_path(ring, d0, d1)[1:-1]


def _stitch(path: SupportPath, rings: Sequence[LineString]) -> list[Point2]:
    corners = path.corners
    for left, right in zip(corners, corners[1:]):
        hit = _crossing([left.apex, left.second], [right.first, right.apex])
        if hit is not None:
            left.second = right.first = hit

    ends = [Point(path.path[0]), Point(path.path[-1])]
    ring = min(rings, key=lambda line: line.distance(ends[0]))
    start, end = (Point2(*nearest_points(ring, p)[0].coords[0]) for p in ends)

    loop = [path.path[0], start]
    cursor = start
    for corner in corners:
        if corner.first != cursor:
            loop.extend(_along(ring, cursor, corner.first))
            loop.append(corner.first)
        loop.extend([corner.apex, corner.second])
        cursor = corner.second
    loop.extend(_along(ring, cursor, end))
    loop.append(end)
    loop.extend(reversed(path.path))
    return loop


def support_perimeter(
    R: Region, Rtilde: Region, unprinted: Sequence[Sequence[Point2]], cfg: PrintConfig
) -> SupportPlan:
    """Build support for boundary paths of the clip region that the infill does not print.

    Circles of radius r sit at both ends of every path and as many more as fit in between without
    touching, spread evenly. Each circle centre gets a corner reaching out to the region boundary,
    its apex at distance 2r from the centre. Adjacent corners are joined along the boundary, or at
    their crossing point when they overlap.
    """
    plan = SupportPlan(cfg.support_mode)
    r = cfg.extruder_radius
    rings = _ring_lines(R)
    if not rings:
        return plan

    eps = tolerance(p for ring in R.rings for p in ring.ring)
    for points in unprinted:
        support = SupportPath(tuple(Point2(*p) for p in points))
        plan.paths.append(support)

        line = LineString(support.path)
        n = _circle_count(line.length, r)
        while n:
            centers = _centers(line, n)
            chain = [support.path[0], *centers, support.path[-1]]
            if all(math.dist(a, b) > 2 * r for a, b in zip(chain, chain[1:])):
                break
            n -= 1

        if not n:
            plan.warnings.append(f"Unprinted path of length {line.length:.3f} is too short for a support circle")
            log.warning(plan.warnings[-1])
            continue

        residual = line.length - 2 * r * (n + 1)
        support.circles = n
        support.slack = 2 * r - residual
        support.gap = residual / (n + 1)
        support.centers = centers
        support.corners = [c for c in (_corner(center, rings, r, eps) for center in centers) if c is not None]
        if not support.corners:
            plan.warnings.append(f"No support corner reaches the region boundary from path at {support.path[0]}")
            log.warning(plan.warnings[-1])
            continue

        support.loop = _stitch(support, rings)
        support.simple = LinearRing(support.loop).is_simple
        if not support.simple:
            plan.warnings.append(f"Support loop starting at {support.path[0]} is not simple")
            log.warning(plan.warnings[-1])

    if cfg.extra_perimeter:
        plan.extra_loops = [[*ring.ring, ring.ring[0]] for ring in Rtilde.rings]

    log.debug(
        "Support plan: %d paths, %d corners, %d unsupported",
        len(plan.paths),
        sum(len(p.corners) for p in plan.paths),
        len(plan.unsupported),
    )
    return plan


def unprinted_paths(clipped: ClippedComplex, plan: PatchPlan) -> list[tuple[Point2, ...]]:
    """Boundary paths of the clip region left unprinted after patching.

    These are the arcs of the pairing not chosen, plus any ring no lattice edge reaches at all.
    """
    paths = [arc.points for arc in plan.unpatched]
    if clipped.region.is_empty:
        return paths

    K = clipped.complex
    eps = K.eps
    touched = {arc.ring for arc in plan.arcs} | {arc.ring for arc in plan.unpatched}
    printed = shapely.Polygon()
    if K.edges:
        lines = shapely.linestrings(np.asarray([K.segment(e) for e in K.edges], dtype=float))
        printed = shapely.union_all(lines).buffer(eps * 10)

    for i, ring in enumerate(clipped.region.rings):
        if i in touched:
            continue
        line = LineString([*ring.ring, ring.ring[0]])
        if printed.is_empty or not printed.covers(line):
            paths.append(tuple(Point2(*p) for p in line.coords))
    return paths


@dataclass
class LayerEntry:
    """Plan for one fillable piece of one layer polygon."""

    polygon: int
    region: Region
    inset: Region
    complex: CellComplex
    support: SupportPlan
    clipped: ClippedComplex | None = None
    patch: PatchPlan | None = None

    def __iter__(self) -> Iterator:
        yield self.complex
        yield self.support

    @property
    def warnings(self) -> list[str]:
        return self.support.warnings


def plan_layer(Khat: EulerComplex, layer: Sequence[Region] | Layer, cfg: PrintConfig) -> list[LayerEntry]:
    """Clip, patch and support every polygon of a layer.

    A polygon whose inset falls apart yields one entry per piece, one whose inset is empty yields a
    single entry with an empty complex.
    """
    polygons = layer.polygons if isinstance(layer, Layer) else layer
    entries = []
    for i, R in enumerate(polygons):
        pieces = inset_pieces(R, cfg.extruder_radius, cfg.disk_segments)
        if not pieces:
            support = SupportPlan(cfg.support_mode)
            support.warnings.append(f"Polygon {i} is thinner than the extruder, nothing to fill")
            log.warning(support.warnings[-1])
            entries.append(LayerEntry(i, R, Region.empty(), _empty_complex(), support))
            continue

        for Rtilde in pieces:
            clipped = clip(Khat, Rtilde)
            plan = plan_patch(clipped)
            Ktilde = apply_patch(clipped, plan)
            support = support_perimeter(R, clipped.region, unprinted_paths(clipped, plan), cfg)
            entries.append(LayerEntry(i, R, clipped.region, Ktilde, support, clipped, plan))

    return entries
