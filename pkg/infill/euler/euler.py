from __future__ import annotations

import dataclasses
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING

import networkx as nx

from infill.euler.complex import (
    CellClass,
    CellComplex,
    EdgeKey,
    Face,
    Role,
    complex_from_rings,
    drop_doubled_edges,
    edge_key,
    validate_input,
)
from infill.euler.exceptions import ConfigError, Error, InvalidComplex, NotEulerReady, OffsetChangesGeometry
from infill.euler.geometry import Point2, mitered_offset, proper_crossings, signed_area, skeleton_event_time

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

log = logging.getLogger(__name__)

LOCAL_ROUNDS = 3


@dataclass
class Provenance:
    class1: dict[int, int] = field(default_factory=dict)
    class2: dict[int, EdgeKey] = field(default_factory=dict)
    class3: dict[int, int] = field(default_factory=dict)
    # new vertex -> (source vertex, source face), the face is None for vertices kept in place. Copies of a
    # vertex inside a collapsed two-sided cell name the face to the left of that cell.
    vertices: dict[int, tuple[int, int | None]] = field(default_factory=dict)
    # doubled source edge -> the collapsed copy of its two-sided cell
    collapsed_class1: dict[EdgeKey, EdgeKey] = field(default_factory=dict)
    collapsed_class2: dict[EdgeKey, EdgeKey] = field(default_factory=dict)
    collapsed_class3: dict[int, list[EdgeKey]] = field(default_factory=dict)


@dataclass(frozen=True)
class CollapsedRun:
    face: int
    edges: tuple[EdgeKey, ...]
    vertex: int
    m_local: int
    measured: int

    @property
    def pi(self) -> int:
        return len(self.edges)

    @property
    def predicted(self) -> int:
        return 2 * self.pi + 4 - self.m_local


@dataclass(frozen=True)
class SplitRecord:
    face: int
    source_vertex: int
    vertices: tuple[int, ...]
    regime: str


@dataclass
class CollapseReport:
    collapsed_runs: list[CollapsedRun] = field(default_factory=list)
    collapsed_class2: list[tuple[EdgeKey, EdgeKey]] = field(default_factory=list)
    affected_odd_vertices: list[int] = field(default_factory=list)
    splits: list[SplitRecord] = field(default_factory=list)

    @property
    def collapsed_edges(self) -> set[EdgeKey]:
        return {new for _, new in self.collapsed_class2}


@dataclass(frozen=True, eq=False)
class EulerComplex:
    complex: CellComplex
    source: CellComplex
    provenance: Provenance
    offset_d: float | None
    iterations: int = 1
    passes: tuple[CellComplex, ...] = ()
    # output vertex -> source vertex, for vertices kept in place through every pass
    fixed: dict[int, int] = field(default_factory=dict)

    def __repr__(self) -> str:
        return f"<EulerComplex m={self.iterations} {self.complex!r}>"

    @cached_property
    def printable(self) -> CellComplex:
        """The transformed complex with every segment drawn once, the one tool paths are planned on."""
        return drop_doubled_edges(self.complex)


@dataclass
class DegreeReport:
    """Degree, planarity and connectivity checks of a transformed complex.

    ``histogram`` counts drawn segments per vertex, ``multi_histogram`` also counts the second edge of
    every collapsed two-sided cell. Parity is taken over the latter.
    """

    histogram: dict[int, int] = field(default_factory=dict)
    multi_histogram: dict[int, int] = field(default_factory=dict)
    odd_vertices: list[int] = field(default_factory=list)
    crossings: list[Point2] = field(default_factory=list)
    components: int = 0
    dangling_edges: list[EdgeKey] = field(default_factory=list)

    @property
    def is_euler(self) -> bool:
        return not self.odd_vertices

    @property
    def is_planar(self) -> bool:
        return not self.crossings

    @property
    def is_connected(self) -> bool:
        return self.components == 1

    @property
    def is_pure(self) -> bool:
        return not self.dangling_edges


def _dedupe(ring: Sequence[int]) -> list[int]:
    result = []
    for v in ring:
        if not result or result[-1] != v:
            result.append(v)
    while len(result) > 1 and result[0] == result[-1]:
        result.pop()
    return result


def _split_at(ring: list[int], vertex: int | None) -> list[list[int]]:
    # A vertex repeated in a ring is an articulation, every visit starts its own cell
    if vertex is None or ring.count(vertex) < 2:
        return [ring]

    start = ring.index(vertex)
    ring = ring[start:] + ring[:start]
    parts = []
    for v in ring:
        if v == vertex:
            parts.append([v])
        else:
            parts[-1].append(v)
    return parts


def _ccw(points: Sequence[Point2], ring: Sequence[int]) -> tuple[int, ...]:
    if signed_area([points[v] for v in ring]) < 0:
        return tuple(reversed(ring))
    return tuple(ring)


def safe_offsets(K: CellComplex) -> dict[int, float]:
    """Per face offset that leaves the face combinatorially unchanged.

    Half the first skeleton event time, capped at a quarter of the face's shortest edge.
    """
    result = {}
    for fid in K.interior_faces:
        polygon = K.face_polygon(fid)
        shortest = min(math.dist(a, b) for a, b in polygon.edges())
        result[fid] = min(0.25 * shortest, 0.5 * skeleton_event_time(polygon))
    return result


def safe_offset(K: CellComplex) -> float:
    return min(safe_offsets(K).values())


def _offsets(K: CellComplex, d: float | None, overrides: Mapping[int, float] | None) -> dict[int, float]:
    overrides = overrides or {}
    safe = safe_offsets(K) if d is None else {}

    offsets = {}
    for fid in K.interior_faces:
        value = overrides.get(fid, safe[fid] if d is None else d)
        if value <= 0:
            raise ConfigError(f"Offset for face {fid} must be positive: {value}")
        offsets[fid] = value
    return offsets


def _doubled(K: CellComplex) -> list[EdgeKey]:
    """Face edges doubled by a collapsed two-sided cell lying between two interior faces."""
    counts = Counter(e for e in K.extra_edges if e in K.face_edges)
    stacked = sorted(e for e, count in counts.items() if count > 1)
    if stacked:
        raise InvalidComplex(f"Edges carry more than one collapsed cell: {stacked}")
    return sorted(e for e in counts if all(K.faces[f].role == Role.INTERIOR for f in K.edge_faces[e]))


def _transform(
    K: CellComplex,
    offsets: Mapping[int, float],
    strict: bool,
) -> tuple[CellComplex, Provenance, CollapseReport]:
    points: list[Point2] = []
    kept: dict[int, int] = {}
    prov = Provenance()

    def original(v: int) -> int:
        if v not in kept:
            kept[v] = len(points)
            points.append(K.vertices[v])
            prov.vertices[kept[v]] = (v, None)
        return kept[v]

    chains: dict[tuple[int, int], tuple[int, ...]] = {}
    faces: list[Face] = []
    runs = []
    splits = []

    # Class 1: mitered offsets of the interior faces
    for fid in K.interior_faces:
        ring = K.faces[fid].vertices
        n = len(ring)
        d = offsets[fid]

        result = mitered_offset(K.face_polygon(fid), d)
        if not result.rings:
            raise OffsetChangesGeometry(f"Face {fid} vanishes at offset {d}")
        if strict and (result.combinatorial_changed or result.topological_changed):
            raise OffsetChangesGeometry(f"Offset {d} changes face {fid}, use euler_transform_relaxed instead")
        if len(result.edge_chains) < n:
            raise OffsetChangesGeometry(f"Part of face {fid} vanishes at offset {d}")

        sources = {}
        for source, lids in result.vertex_images.items():
            for lid in lids:
                sources.setdefault(lid, source)

        local = []
        for lid, point in enumerate(result.points):
            gid = len(points)
            points.append(point)
            local.append(gid)
            prov.vertices[gid] = (ring[sources.get(lid, 0)], fid)

        for i in range(n):
            chains[(ring[i], ring[(i + 1) % n])] = tuple(local[x] for x in result.edge_chains[i])

        for piece in result.rings:
            prov.class1[len(faces)] = fid
            faces.append(Face(tuple(local[x] for x in piece), Role.INTERIOR, CellClass.CLASS1))

        for labels, lid in result.collapsed_edge_runs:
            edges = tuple(edge_key(ring[i], ring[(i + 1) % n]) for i in labels)
            runs.append((fid, edges, local[lid]))

        for source, lids in result.split_vertices:
            splits.append((fid, ring[source], tuple(local[x] for x in lids)))

    # A collapsed two-sided cell is copied onto its own segment, still collapsed
    doubled: dict[tuple[int, int], tuple[int, int]] = {}
    doubles = []
    for a, b in _doubled(K):
        left, right = K.edge_faces[(a, b)]
        t = min(offsets[left], offsets[right], 0.25 * K.length((a, b))) / K.length((a, b))
        copies = []
        for v, w in ((a, b), (b, a)):
            (x0, y0), (x1, y1) = K.vertices[v], K.vertices[w]
            prov.vertices[len(points)] = (v, left)
            copies.append(len(points))
            points.append(Point2(x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
        doubled[(a, b)] = (copies[0], copies[1])
        doubled[(b, a)] = (copies[1], copies[0])
        prov.collapsed_class1[(a, b)] = edge_key(*copies)
        doubles.append(edge_key(*copies))

    def chain(a: int, b: int) -> tuple[int, ...]:
        if (a, b) in chains:
            return chains[(a, b)]
        return (original(a), original(b))

    collapsed = []

    # Class 2: one cell per edge, spanning the copies on either side
    for a, b in K.edges:
        if (a, b) in doubled:
            rings = [chain(a, b) + doubled[(b, a)], doubled[(a, b)] + chain(b, a)]
        else:
            rings = [chain(a, b) + chain(b, a)]

        for ring in map(_dedupe, rings):
            if len(set(ring)) >= 3:
                prov.class2[len(faces)] = (a, b)
                faces.append(Face(_ccw(points, ring), Role.INTERIOR, CellClass.CLASS2))
            elif len(set(ring)) == 2:
                prov.collapsed_class2[(a, b)] = edge_key(*ring[:2])
                collapsed.append(edge_key(*ring[:2]))

    # Class 3: one cell per vertex, through the copies of the vertex in every sector around it
    for v in K.used_vertices:
        nbrs = K.neighbors[v]
        p = len(nbrs)
        ring = []
        for k, w in enumerate(nbrs):
            if (v, w) in doubled:
                ring.append(doubled[(v, w)][0])

            fid = K.halfedges[(v, w)]
            if K.faces[fid].role == Role.INTERIOR:
                ring.append(chain(v, w)[0])
                ring.append(chain(nbrs[(k + 1) % p], v)[-1])
            else:
                ring.append(original(v))

        for part in _split_at(_dedupe(ring), kept.get(v)):
            if len(set(part)) >= 3:
                prov.class3[len(faces)] = v
                faces.append(Face(_ccw(points, part), Role.INTERIOR, CellClass.CLASS3))
            elif len(set(part)) == 2:
                prov.collapsed_class3.setdefault(v, []).append(edge_key(*part[:2]))
                doubles.append(edge_key(*part[:2]))

    faces.extend(Face(tuple(original(v) for v in K.faces[hid].vertices), Role.HOLE) for hid in K.hole_faces)

    # A collapsed Class 2 cell lies on the edge its two Class 3 neighbors share, it is drawn once
    drawn = {edge_key(a, b) for face in faces for a, b in face.halfedges()}
    extra = doubles + sorted({e for e in collapsed if e not in drawn})
    result = CellComplex(tuple(points), tuple(faces), tuple(extra))

    report = CollapseReport()
    for fid, edges, gid in runs:
        m_local = sum(1 for e in edges if e in prov.collapsed_class2)
        report.collapsed_runs.append(CollapsedRun(fid, edges, gid, m_local, result.degree(gid)))

    for fid, source, gids in splits:
        spread = max(math.dist(points[a], points[b]) for a in gids for b in gids)
        regime = "touching" if spread <= 2 * result.eps else "separated"
        report.splits.append(SplitRecord(fid, source, gids, regime))

    report.collapsed_class2 = sorted(prov.collapsed_class2.items())
    report.affected_odd_vertices = result.odd_vertices
    return result, prov, report


def _check_ready(K: CellComplex, allow_condition4: bool) -> None:
    report = validate_input(K)
    if not report.covers_domain:
        raise NotEulerReady("Complex has no interior faces")
    if not report.holes_disjoint:
        raise NotEulerReady("Holes touch each other")
    if report.hole_single_facet_violations:
        raise NotEulerReady(f"Faces meet a hole in more than one edge: {report.hole_single_facet_violations}")
    if report.adjacent_boundary_edge_violations and not allow_condition4:
        raise NotEulerReady(
            f"Faces with adjacent boundary edges at vertices {report.condition4_vertices}, "
            "transform at least twice with generalized_euler_transform"
        )


def euler_transform(
    K: CellComplex,
    d: float | None = None,
    overrides: Mapping[int, float] | None = None,
) -> EulerComplex:
    """Euler transformation of an ET-ready complex, every vertex of the result has degree 4.

    ``d`` is the offset for every face, ``None`` picks each face's safe offset. ``overrides`` maps face ids
    to their own offset.
    """
    _check_ready(K, allow_condition4=False)
    result, prov, _ = _transform(K, _offsets(K, d, overrides), strict=True)
    fixed = {new: src for new, (src, face) in prov.vertices.items() if face is None}
    return EulerComplex(result, K, prov, d, 1, (result,), fixed)


def generalized_euler_transform(
    K: CellComplex,
    d: float | None = None,
    m: int = 1,
    overrides: Mapping[int, float] | None = None,
) -> EulerComplex:
    """Apply the Euler transformation ``m`` times.

    The first pass may start from a complex with adjacent boundary edges on one face. It collapses the cell
    around every corner of degree 2 into a doubled edge, leaving odd vertices in the drawn graph. Later
    passes carry each such cell as a face of its own, every vertex then has degree 4 counting doubled edges,
    and the sizes grow by 4 per pass. Later passes use each face's safe offset, capped at ``d``.
    """
    if m < 1:
        raise ConfigError(f"Number of iterations must be at least 1: {m}")

    _check_ready(K, allow_condition4=True)

    current = K
    fixed = {v: v for v in K.used_vertices}
    passes = []
    prov = Provenance()
    for k in range(m):
        if k == 0:
            offsets = _offsets(current, d, overrides)
        else:
            offsets = {fid: min(d, s) if d is not None else s for fid, s in safe_offsets(current).items()}

        current, prov, _ = _transform(current, offsets, strict=True)
        fixed = {new: fixed[src] for new, (src, face) in prov.vertices.items() if face is None and src in fixed}
        passes.append(current)
        log.debug("Euler transformation pass %d: %r", k + 1, current)

    return EulerComplex(current, K, prov, d, m, tuple(passes), fixed)


def euler_transform_relaxed(
    K: CellComplex,
    d: float,
    overrides: Mapping[int, float] | None = None,
) -> tuple[EulerComplex, CollapseReport]:
    """Euler transformation that lets the offsets collapse edges and split faces, reporting every change."""
    _check_ready(K, allow_condition4=False)
    result, prov, report = _transform(K, _offsets(K, d, overrides), strict=False)
    fixed = {new: src for new, (src, face) in prov.vertices.items() if face is None}

    if report.affected_odd_vertices:
        log.info("Relaxed transformation left %d odd vertices", len(report.affected_odd_vertices))
    return EulerComplex(result, K, prov, d, 1, (result,), fixed), report


def _edge_components(C: CellComplex, fids: Sequence[int]) -> list[list[int]]:
    graph = nx.Graph()
    graph.add_nodes_from(fids)
    owners: dict[EdgeKey, list[int]] = {}
    for fid in fids:
        for a, b in C.faces[fid].halfedges():
            owners.setdefault(edge_key(a, b), []).append(fid)
    for shared in owners.values():
        graph.add_edges_from(zip(shared, shared[1:]))
    return sorted((sorted(c) for c in nx.connected_components(graph)), key=min)


def _transform_component(C: CellComplex, component: Sequence[int]) -> tuple[list[int], EulerComplex] | None:
    verts = sorted({v for fid in component for v in C.faces[fid].vertices})
    local = {v: i for i, v in enumerate(verts)}
    sub = complex_from_rings(
        [C.vertices[v] for v in verts],
        [[local[v] for v in C.faces[fid].vertices] for fid in component],
        [C.faces[fid].cls for fid in component],
    )

    m = 2 if validate_input(sub).adjacent_boundary_edge_violations else 1
    try:
        return verts, generalized_euler_transform(sub, None, m)
    except Error as e:
        log.warning("Local Euler transformation of faces %s failed: %s", list(component), e)
        return None


def _splice(C: CellComplex, components: Sequence[Sequence[int]]) -> tuple[CellComplex, set[int]]:
    """Replace every component by its generalized Euler transformation, stitched along the kept boundary."""
    points = list(C.vertices)
    removed: set[int] = set()
    added: list[Face] = []
    inner: set[EdgeKey] = set()
    extra: list[EdgeKey] = []

    for component in components:
        transformed = _transform_component(C, component)
        if transformed is None:
            continue

        verts, result = transformed
        out = result.printable
        gmap = {}
        for nv in out.used_vertices:
            if nv in result.fixed:
                gmap[nv] = verts[result.fixed[nv]]
            else:
                gmap[nv] = len(points)
                points.append(out.vertices[nv])

        sub = result.source
        inner.update(
            edge_key(verts[a], verts[b]) for (a, b), faces in sub.edge_faces.items() if sub.outside not in faces
        )
        removed.update(component)
        added.extend(
            Face(tuple(gmap[v] for v in out.faces[fid].vertices), Role.INTERIOR, out.faces[fid].cls)
            for fid in out.interior_faces
        )
        extra.extend(edge_key(gmap[a], gmap[b]) for a, b in out.extra_edges)

    faces = [face for fid, face in enumerate(C.faces) if fid not in removed] + added
    extra.extend(e for e in C.extra_edges if e not in inner)
    return CellComplex(tuple(points), tuple(faces), tuple(extra)), removed


def _remap_provenance(prov: Provenance, C: CellComplex, removed: set[int]) -> Provenance:
    kept = [fid for fid in range(len(C.faces)) if fid not in removed]
    moved = {fid: new for new, fid in enumerate(kept)}
    return dataclasses.replace(
        prov,
        class1={moved[f]: s for f, s in prov.class1.items() if f in moved},
        class2={moved[f]: s for f, s in prov.class2.items() if f in moved},
        class3={moved[f]: s for f, s in prov.class3.items() if f in moved},
    )


def local_euler_transform(Khat: EulerComplex, report: CollapseReport | None = None) -> EulerComplex:
    """Repair odd vertices left by collapses by transforming the Class 3 cells around the collapsed edges.

    Class 3 cells sharing a collapsed edge form the seed; cells that are connected through shared edges are
    transformed together. Later rounds, or a missing report, fall back to the Class 3 cells on odd vertices.
    """
    current = Khat
    for round_ in range(LOCAL_ROUNDS):
        C = current.complex
        odd = set(C.odd_vertices)
        if not odd:
            return current

        seeds = report.collapsed_edges if report is not None and round_ == 0 else set()
        class3 = [fid for fid in C.interior_faces if C.faces[fid].cls == CellClass.CLASS3]
        candidates = [fid for fid in class3 if any(edge_key(*he) in seeds for he in C.faces[fid].halfedges())]
        if not candidates:
            candidates = [fid for fid in class3 if odd & set(C.faces[fid].vertices)]

        spliced, removed = _splice(C, _edge_components(C, candidates))
        if not removed:
            break

        current = dataclasses.replace(
            current,
            complex=spliced,
            provenance=_remap_provenance(current.provenance, C, removed),
        )
        log.debug("Local Euler transformation round %d: %d odd vertices left", round_ + 1, len(spliced.odd_vertices))

    if current.complex.odd_vertices:
        log.warning(
            "Local Euler transformation left %d odd vertices after %d rounds",
            len(current.complex.odd_vertices),
            LOCAL_ROUNDS,
        )
    return current


def verify_euler(c: CellComplex | EulerComplex) -> DegreeReport:
    K = c.complex if isinstance(c, EulerComplex) else c
    return DegreeReport(
        histogram=dict(sorted(Counter(K.degrees.values()).items())),
        multi_histogram=dict(sorted(Counter(K.multidegrees.values()).items())),
        odd_vertices=[v for v, deg in K.multidegrees.items() if deg % 2],
        crossings=proper_crossings([K.segment(e) for e in K.edges]),
        components=len(K.components),
        dangling_edges=K.dangling_edges,
    )


def cardinalities(Khat: EulerComplex) -> dict[str, tuple[int, int]]:
    """Expected against measured sizes of every transformation pass, parallel edges and collapsed cells included.

    Keys of later passes carry the pass number, ``edges@2`` for the second pass.
    """
    result = {}
    source = Khat.source
    for k, current in enumerate(Khat.passes or (Khat.complex,), start=1):
        suffix = "" if k == 1 else f"@{k}"
        result[f"vertices{suffix}"] = (2 * source.edge_count, len(current.used_vertices))
        result[f"edges{suffix}"] = (4 * source.edge_count, current.edge_count)
        result[f"faces{suffix}"] = (
            len(source.used_vertices) + source.edge_count + len(source.interior_faces) + source.collapsed_cells,
            len(current.interior_faces) + current.collapsed_cells,
        )
        source = current
    return result
