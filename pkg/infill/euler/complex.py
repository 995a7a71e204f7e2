from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING

import networkx as nx
import numpy as np
import shapely
from shapely.geometry import box
from shapely.geometry.polygon import orient
from shapely.strtree import STRtree

from infill.euler.exceptions import ConfigError, DegenerateGeometry, InvalidComplex
from infill.euler.geometry import Orientation, Point2, Polygon, Region, VertexIndex, signed_area, tolerance

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

EdgeKey = tuple[int, int]


class Role(Enum):
    INTERIOR = "interior"
    HOLE = "hole"
    OUTSIDE = "outside"


class CellClass(Enum):
    NONE = "none"
    CLASS1 = "class1"
    CLASS2 = "class2"
    CLASS3 = "class3"


class MeshScheme(Enum):
    GRID = "grid"
    TRIANGLES = "triangles"


def edge_key(a: int, b: int) -> EdgeKey:
    return (a, b) if a < b else (b, a)


def _angle(origin: Sequence[float], target: Sequence[float]) -> float:
    return math.atan2(target[1] - origin[1], target[0] - origin[0])


@dataclass(frozen=True)
class Face:
    vertices: tuple[int, ...]
    role: Role = Role.INTERIOR
    cls: CellClass = CellClass.NONE

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))

    def halfedges(self) -> Iterator[tuple[int, int]]:
        ring = self.vertices
        yield from zip(ring, ring[1:] + ring[:1])


@dataclass(frozen=True, eq=False)
class CellComplex:
    """A polygonal 2-complex with explicit hole faces and a single outside face.

    Interior and hole faces are stored counter-clockwise, so the face lies to the left of each of its
    half-edges. The outside face has no ring of its own, it owns every half-edge no other face owns.
    ``extra_edges`` holds edges that lie on no face (an impure complex) and the second edge of every
    collapsed two-sided cell, which doubles a face edge. An edge may be listed more than once.
    """

    vertices: tuple[Point2, ...]
    faces: tuple[Face, ...]
    extra_edges: tuple[EdgeKey, ...] = ()

    def __post_init__(self):
        faces = list(self.faces)
        if not any(face.role == Role.OUTSIDE for face in faces):
            faces.append(Face((), Role.OUTSIDE))

        object.__setattr__(self, "vertices", tuple(Point2(*p) for p in self.vertices))
        object.__setattr__(self, "faces", tuple(faces))
        object.__setattr__(self, "extra_edges", tuple(sorted(edge_key(*e) for e in self.extra_edges)))

    def __repr__(self) -> str:
        return f"<CellComplex V={len(self.used_vertices)} E={len(self.edges)} F={len(self.interior_faces)}>"

    @cached_property
    def outside(self) -> int:
        return next(i for i, face in enumerate(self.faces) if face.role == Role.OUTSIDE)

    @cached_property
    def interior_faces(self) -> list[int]:
        return [i for i, face in enumerate(self.faces) if face.role == Role.INTERIOR]

    @cached_property
    def hole_faces(self) -> list[int]:
        return [i for i, face in enumerate(self.faces) if face.role == Role.HOLE]

    @cached_property
    def halfedges(self) -> dict[tuple[int, int], int]:
        result = {}
        for fid, face in enumerate(self.faces):
            for he in face.halfedges():
                result[he] = fid

        for a, b in list(result):
            if (b, a) not in result:
                result[(b, a)] = self.outside

        for a, b in self.extra_edges:
            result.setdefault((a, b), self.outside)
            result.setdefault((b, a), self.outside)
        return result

    @cached_property
    def edges(self) -> list[EdgeKey]:
        return sorted({edge_key(a, b) for a, b in self.halfedges})

    @cached_property
    def edge_faces(self) -> dict[EdgeKey, tuple[int, int]]:
        return {(a, b): (self.halfedges[(a, b)], self.halfedges[(b, a)]) for a, b in self.edges}

    @cached_property
    def neighbors(self) -> dict[int, list[int]]:
        """Neighbors of every vertex, sorted counter-clockwise by direction."""
        result: dict[int, list[int]] = {}
        for a, b in self.edges:
            result.setdefault(a, []).append(b)
            result.setdefault(b, []).append(a)

        for v, nbrs in result.items():
            nbrs.sort(key=lambda w, v=v: _angle(self.vertices[v], self.vertices[w]))
        return result

    @cached_property
    def used_vertices(self) -> list[int]:
        return sorted(self.neighbors)

    def degree(self, v: int) -> int:
        return len(self.neighbors.get(v, ()))

    @cached_property
    def degrees(self) -> dict[int, int]:
        return {v: len(nbrs) for v, nbrs in sorted(self.neighbors.items())}

    @cached_property
    def odd_vertices(self) -> list[int]:
        return [v for v, deg in self.degrees.items() if deg % 2]

    @cached_property
    def face_edges(self) -> set[EdgeKey]:
        return {edge_key(a, b) for face in self.faces for a, b in face.halfedges()}

    @cached_property
    def edge_multiplicity(self) -> dict[EdgeKey, int]:
        """Number of parallel edges drawn on every segment."""
        result = dict.fromkeys(self.edges, 1)
        for e, count in Counter(self.extra_edges).items():
            result[e] = count + 1 if e in self.face_edges else count
        return result

    @cached_property
    def doubled_edges(self) -> list[EdgeKey]:
        return [e for e, count in self.edge_multiplicity.items() if count > 1]

    @property
    def edge_count(self) -> int:
        return sum(self.edge_multiplicity.values())

    @property
    def collapsed_cells(self) -> int:
        return sum(1 for e in self.extra_edges if e in self.face_edges)

    @cached_property
    def multidegrees(self) -> dict[int, int]:
        """Vertex degrees counting every parallel edge."""
        result = dict.fromkeys(self.degrees, 0)
        for (a, b), count in self.edge_multiplicity.items():
            result[a] += count
            result[b] += count
        return result

    @cached_property
    def graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.used_vertices)
        graph.add_edges_from(self.edges)
        return graph

    @cached_property
    def components(self) -> list[frozenset[int]]:
        return sorted((frozenset(c) for c in nx.connected_components(self.graph)), key=min)

    @cached_property
    def boundary_edges(self) -> list[EdgeKey]:
        return [e for e, faces in self.edge_faces.items() if self.outside in faces]

    @cached_property
    def dangling_edges(self) -> list[EdgeKey]:
        return [e for e, faces in self.edge_faces.items() if faces == (self.outside, self.outside)]

    @cached_property
    def eps(self) -> float:
        return tolerance(self.vertices)

    def segment(self, edge: EdgeKey) -> tuple[Point2, Point2]:
        return self.vertices[edge[0]], self.vertices[edge[1]]

    def length(self, edge: EdgeKey) -> float:
        return math.dist(*self.segment(edge))

    @cached_property
    def total_length(self) -> float:
        return sum(self.length(e) for e in self.edges)

    def face_polygon(self, fid: int) -> Polygon:
        return Polygon(tuple(self.vertices[v] for v in self.faces[fid].vertices))

    def incoming(self, fid: int, v: int) -> int:
        """Return the vertex preceding ``v`` on face ``fid``."""
        ring = self.faces[fid].vertices
        return ring[ring.index(v) - 1]

    def outgoing(self, fid: int, v: int) -> int:
        ring = self.faces[fid].vertices
        return ring[(ring.index(v) + 1) % len(ring)]

    def replace(
        self,
        faces: Iterable[Face] | None = None,
        extra_edges: Iterable[EdgeKey] | None = None,
    ) -> CellComplex:
        return CellComplex(
            self.vertices,
            tuple(self.faces if faces is None else faces),
            tuple(self.extra_edges if extra_edges is None else extra_edges),
        )


@dataclass
class ValidationReport:
    covers_domain: bool = True
    holes_disjoint: bool = True
    hole_single_facet_violations: list[tuple[int, int]] = field(default_factory=list)
    adjacent_boundary_edge_violations: list[tuple[int, tuple[EdgeKey, EdgeKey]]] = field(default_factory=list)
    articulation_vertices: list[int] = field(default_factory=list)

    @property
    def is_et_ready(self) -> bool:
        return (
            self.covers_domain
            and self.holes_disjoint
            and not self.hole_single_facet_violations
            and not self.adjacent_boundary_edge_violations
        )

    @property
    def condition4_vertices(self) -> list[int]:
        """Vertices shared by two adjacent boundary edges of one face."""
        return sorted({(set(a) & set(b)).pop() for _, (a, b) in self.adjacent_boundary_edge_violations})


def _trace_complement(vertices: Sequence[Point2], halfedges: Iterable[tuple[int, int]]) -> list[tuple[int, ...]]:
    """Trace the boundary cycles of the complement, each with the complement on its left."""
    outgoing: dict[int, list[int]] = {}
    for a, b in halfedges:
        outgoing.setdefault(a, []).append(b)

    unused = set(halfedges)
    cycles = []
    for start in sorted(unused):
        if start not in unused:
            continue

        cycle = []
        he = start
        while he in unused:
            unused.discard(he)
            cycle.append(he[0])
            v, w = he
            back = _angle(vertices[w], vertices[v])
            # First half-edge clockwise from the reversed incoming edge
            nxt = min(
                outgoing[w],
                key=lambda x: ((back - _angle(vertices[w], vertices[x])) % (2 * math.pi)) or 2 * math.pi,
            )
            he = (w, nxt)
        cycles.append(tuple(cycle))
    return cycles


def complex_from_rings(
    vertices: Sequence[Point2],
    rings: Sequence[Sequence[int]],
    classes: Sequence[CellClass] | None = None,
    holes: Sequence[Sequence[int]] = (),
    extra_edges: Iterable[EdgeKey] = (),
) -> CellComplex:
    """Assemble a complex from counter-clockwise interior rings, synthesizing hole faces when none are given."""
    classes = classes or [CellClass.NONE] * len(rings)
    faces = [Face(tuple(ring), Role.INTERIOR, cls) for ring, cls in zip(rings, classes)]

    if holes:
        faces.extend(Face(tuple(ring), Role.HOLE) for ring in holes)
    else:
        interior = {he for face in faces for he in face.halfedges()}
        complement = [(b, a) for a, b in interior if (b, a) not in interior]
        for cycle in _trace_complement(vertices, complement):
            if len(cycle) >= 3 and signed_area([vertices[v] for v in cycle]) > 0:
                faces.append(Face(cycle, Role.HOLE))

    faces.append(Face((), Role.OUTSIDE))
    return CellComplex(tuple(vertices), tuple(faces), tuple(extra_edges))


def drop_doubled_edges(K: CellComplex) -> CellComplex:
    """Realize ``K`` with every segment drawn once and vertex degrees kept even.

    A doubled face edge whose ends both have odd degree in the drawn graph is removed together with its
    extra copy, merging the two faces along it. Any other doubled edge is drawn once. Returns ``K`` itself
    when nothing is doubled.
    """
    if not K.doubled_edges:
        return K

    rings = {fid: list(K.faces[fid].vertices) for fid in K.interior_faces}
    owner = {he: fid for fid, ring in rings.items() for he in zip(ring, ring[1:] + ring[:1])}
    degrees = dict(K.degrees)
    dropped = 0

    for a, b in K.doubled_edges:
        f, g = owner.get((a, b)), owner.get((b, a))
        if f is None or g is None or f == g or not (degrees[a] % 2 and degrees[b] % 2):
            continue

        # f runs from b round to a, g from a round to b
        rf, rg = rings[f], rings[g]
        i = next(k for k in range(len(rf)) if (rf[k], rf[(k + 1) % len(rf)]) == (a, b))
        j = next(k for k in range(len(rg)) if (rg[k], rg[(k + 1) % len(rg)]) == (b, a))
        rf = rf[i + 1 :] + rf[: i + 1]
        rg = rg[j + 1 :] + rg[: j + 1]
        merged = rf + rg[1:-1]
        if len(set(merged)) != len(merged):
            continue

        rings[f] = merged
        del rings[g]
        for he in zip(merged, merged[1:] + merged[:1]):
            owner[he] = f
        del owner[(a, b)], owner[(b, a)]
        degrees[a] -= 1
        degrees[b] -= 1
        dropped += 1

    faces = []
    for fid, face in enumerate(K.faces):
        if face.role != Role.INTERIOR:
            faces.append(face)
        elif fid in rings:
            faces.append(Face(tuple(rings[fid]), Role.INTERIOR, face.cls))

    # Extra copies of face edges are either merged away or drawn once
    extra = [e for e in sorted(set(K.extra_edges)) if e not in K.face_edges]
    result = CellComplex(K.vertices, tuple(faces), tuple(extra))
    log.debug("Dropped %d doubled edges of %r", dropped, K)
    return result


def build_complex(faces: Sequence[Polygon], domain: Region | None = None) -> CellComplex:
    if not faces:
        raise InvalidComplex("No faces given")

    eps = tolerance(p for face in faces for p in face.ring)
    index = VertexIndex(eps)

    rings = []
    for i, polygon in enumerate(faces):
        ring = []
        for point in polygon.ring:
            vid = index.add(point)
            if not ring or ring[-1] != vid:
                ring.append(vid)
        if len(ring) > 1 and ring[0] == ring[-1]:
            ring.pop()
        if len(set(ring)) < 3:
            raise InvalidComplex(f"Face {i} degenerates after snapping")

        if signed_area([index.points[v] for v in ring]) < 0:
            ring.reverse()
        rings.append(ring)

    vertices = list(index.points)

    owner: dict[tuple[int, int], int] = {}
    incidence: dict[EdgeKey, list[int]] = {}
    for fid, ring in enumerate(rings):
        for a, b in zip(ring, ring[1:] + ring[:1]):
            if (a, b) in owner:
                raise InvalidComplex(f"Faces {owner[(a, b)]} and {fid} overlap along edge {(a, b)}")
            owner[(a, b)] = fid
            incidence.setdefault(edge_key(a, b), []).append(fid)

    for edge, fids in incidence.items():
        if len(fids) > 2:
            raise InvalidComplex(f"Edge {edge} is shared by more than two faces: {fids}")

    geoms = [_shapely_face(vertices, ring) for ring in rings]
    tree = STRtree(geoms)
    left, right = tree.query(geoms, predicate="intersects")
    for i, j in zip(left.tolist(), right.tolist()):
        if i < j and geoms[i].intersection(geoms[j]).area > eps:
            raise InvalidComplex(f"Faces {i} and {j} have overlapping interiors")

    edges = sorted(incidence)
    lines = shapely.linestrings([[vertices[a], vertices[b]] for a, b in edges])
    points = shapely.points(np.asarray(vertices, dtype=float))
    pidx, eidx = STRtree(lines).query(points, predicate="dwithin", distance=eps)
    for p, e in zip(pidx.tolist(), eidx.tolist()):
        if p not in edges[e]:
            raise InvalidComplex(f"T-junction: vertex {p} lies on edge {edges[e]}")

    if domain is not None and not domain.is_empty:
        union = shapely.union_all(geoms)
        if not domain.to_shapely().buffer(eps * 10).covers(union):
            raise InvalidComplex("Faces are not contained in the domain")

    return complex_from_rings(vertices, rings)


def _shapely_face(vertices: Sequence[Point2], ring: Sequence[int]) -> shapely.Polygon:
    return shapely.Polygon([vertices[v] for v in ring])


def validate_input(K: CellComplex) -> ValidationReport:
    report = ValidationReport()
    report.covers_domain = bool(K.interior_faces)

    hole_vertices = [set(K.faces[h].vertices) for h in K.hole_faces]
    for i, a in enumerate(hole_vertices):
        for b in hole_vertices[i + 1 :]:
            if a & b:
                report.holes_disjoint = False

    for fid in K.interior_faces:
        face = K.faces[fid]
        ring = face.vertices
        edges = [edge_key(a, b) for a, b in face.halfedges()]
        other = [K.halfedges[(b, a)] for a, b in face.halfedges()]

        for hole in K.hole_faces:
            if other.count(hole) > 1:
                report.hole_single_facet_violations.append((fid, hole))

        n = len(ring)
        for i in range(n):
            if other[i - 1] == K.outside and other[i] == K.outside:
                report.adjacent_boundary_edge_violations.append((fid, (edges[i - 1], edges[i])))

    starts: dict[int, int] = {}
    for (a, _), fid in K.halfedges.items():
        if K.faces[fid].role != Role.INTERIOR:
            starts[a] = starts.get(a, 0) + 1
    report.articulation_vertices = sorted(v for v, count in starts.items() if count > 1)

    if not report.is_et_ready:
        log.debug("Complex is not ET-ready: %s", report)
    return report


def mesh_region(domain: Polygon, cell_size: float, scheme: MeshScheme = MeshScheme.GRID) -> CellComplex:
    if cell_size <= 0:
        raise ConfigError(f"Cell size must be positive: {cell_size}")

    region = domain.to_shapely()
    minx, miny, maxx, maxy = region.bounds
    if cell_size > max(maxx - minx, maxy - miny):
        raise DegenerateGeometry(f"Cell size {cell_size} exceeds the domain extent")

    # Cells are spread evenly over the extent, none wider than cell_size
    nx_cells = math.ceil((maxx - minx) / cell_size - 1e-9)
    ny_cells = math.ceil((maxy - miny) / cell_size - 1e-9)
    sx, sy = (maxx - minx) / nx_cells, (maxy - miny) / ny_cells

    cells = [
        box(minx + i * sx, miny + j * sy, minx + (i + 1) * sx, miny + (j + 1) * sy)
        for j in range(ny_cells)
        for i in range(nx_cells)
    ]
    clipped = shapely.intersection(np.array(cells, dtype=object), region)

    faces = []
    for geom in clipped:
        if geom.geom_type != "Polygon" or geom.area < 0.05 * sx * sy:
            continue

        ring = list(orient(geom, 1.0).exterior.coords)[:-1]
        if scheme == MeshScheme.TRIANGLES:
            start = min(range(len(ring)), key=lambda i: (ring[i][0] + ring[i][1], ring[i]))
            ring = ring[start:] + ring[:start]
            faces.extend(Polygon((ring[0], ring[i], ring[i + 1])) for i in range(1, len(ring) - 1))
        else:
            faces.append(Polygon(tuple(ring)))

    K = build_complex(faces, Region(domain.oriented(Orientation.CW)))
    log.info("Meshed domain into %d %s cells", len(K.interior_faces), scheme.value)
    return K
