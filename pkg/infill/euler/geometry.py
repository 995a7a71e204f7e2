# Conventions:
# - +x right, +y up, counter-clockwise rings have positive signed area
# - Region outer rings are clockwise, hole rings counter-clockwise
# - Tolerances scale with the bounding box diagonal of the data they act on

from __future__ import annotations

import heapq
import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
import shapely
from shapely.geometry import MultiPoint
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.geometry.polygon import orient
from shapely.strtree import STRtree

from infill.euler.exceptions import ConfigError, DegenerateGeometry

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

EPSILON_SCALE = 1e-9
DEFAULT_DISK_SEGMENTS = 32


class Point2(NamedTuple):
    x: float
    y: float


Segment = tuple[Point2, Point2]


class Orientation(Enum):
    CW = "cw"
    CCW = "ccw"


def tolerance(points: Iterable[Sequence[float]]) -> float:
    """Return the global snapping tolerance for a set of points: ``1e-9`` times the bounding box diagonal."""
    arr = np.asarray(list(points), dtype=float).reshape(-1, 2)
    if not len(arr):
        return EPSILON_SCALE

    diagonal = float(np.hypot(*(arr.max(axis=0) - arr.min(axis=0))))
    return max(diagonal, 1.0) * EPSILON_SCALE


def _shoelace(coords: np.ndarray) -> float:
    x, y = coords[:, 0], coords[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class Polygon:
    ring: tuple[Point2, ...]

    def __post_init__(self):
        ring = [Point2(float(x), float(y)) for x, y in self.ring]
        if len(ring) > 1 and ring[0] == ring[-1]:
            ring.pop()

        if len(ring) < 3:
            raise DegenerateGeometry(f"Polygon needs at least 3 vertices, got {len(ring)}")

        object.__setattr__(self, "ring", tuple(ring))

    def __len__(self) -> int:
        return len(self.ring)

    def __iter__(self) -> Iterator[Point2]:
        return iter(self.ring)

    @cached_property
    def area(self) -> float:
        return signed_area(self)

    @property
    def orientation(self) -> Orientation:
        return Orientation.CCW if self.area > 0 else Orientation.CW

    def reversed(self) -> Polygon:
        return Polygon(tuple(reversed(self.ring)))

    def oriented(self, orientation: Orientation) -> Polygon:
        return self if self.orientation == orientation else self.reversed()

    def edges(self) -> list[Segment]:
        return list(zip(self.ring, self.ring[1:] + self.ring[:1]))

    def to_shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.ring)


@dataclass(frozen=True)
class Region:
    outer: Polygon | None
    holes: tuple[Polygon, ...] = ()

    def __post_init__(self):
        if self.outer is None:
            object.__setattr__(self, "holes", ())
            return

        object.__setattr__(self, "outer", self.outer.oriented(Orientation.CW))
        object.__setattr__(self, "holes", tuple(hole.oriented(Orientation.CCW) for hole in self.holes))

    @classmethod
    def empty(cls) -> Region:
        return cls(None)

    @classmethod
    def from_shapely(cls, geom: ShapelyPolygon) -> Region:
        if geom.is_empty:
            return cls.empty()
        return cls(
            Polygon(tuple(geom.exterior.coords)),
            tuple(Polygon(tuple(interior.coords)) for interior in geom.interiors),
        )

    @property
    def is_empty(self) -> bool:
        return self.outer is None

    @property
    def rings(self) -> list[Polygon]:
        if self.outer is None:
            return []
        return [self.outer, *self.holes]

    @cached_property
    def area(self) -> float:
        if self.outer is None:
            return 0.0
        return -self.outer.area - sum(hole.area for hole in self.holes)

    def to_shapely(self) -> ShapelyPolygon:
        if self.outer is None:
            return ShapelyPolygon()
        return ShapelyPolygon(self.outer.ring, [hole.ring for hole in self.holes])


class VertexIndex:
    """Snap points onto a tolerance grid, returning one id per distinct location."""

    def __init__(self, eps: float):
        self.eps = eps
        self.points: list[Point2] = []
        self._grid: dict[tuple[int, int], list[int]] = {}

    def __len__(self) -> int:
        return len(self.points)

    def _cell(self, x: float, y: float) -> tuple[int, int]:
        return math.floor(x / self.eps), math.floor(y / self.eps)

    def find(self, point: Sequence[float]) -> int | None:
        x, y = point
        cx, cy = self._cell(x, y)
        for dx, dy in itertools.product((-1, 0, 1), repeat=2):
            for idx in self._grid.get((cx + dx, cy + dy), ()):
                px, py = self.points[idx]
                if math.hypot(px - x, py - y) <= self.eps:
                    return idx
        return None

    def add(self, point: Sequence[float]) -> int:
        idx = self.find(point)
        if idx is not None:
            return idx

        x, y = float(point[0]), float(point[1])
        idx = len(self.points)
        self.points.append(Point2(x, y))
        self._grid.setdefault(self._cell(x, y), []).append(idx)
        return idx


def signed_area(polygon: Polygon | Sequence[Sequence[float]]) -> float:
    ring = polygon.ring if isinstance(polygon, Polygon) else polygon
    coords = np.asarray(ring, dtype=float).reshape(-1, 2)

    if len({(float(x), float(y)) for x, y in coords}) < 3:
        raise DegenerateGeometry(f"Degenerate ring with fewer than 3 distinct vertices: {ring}")

    return _shoelace(coords)


def convex_hull(points: Sequence[Sequence[float]]) -> Polygon:
    if len(points) < 3:
        raise DegenerateGeometry(f"Convex hull needs at least 3 points, got {len(points)}")

    hull = MultiPoint([tuple(p) for p in points]).convex_hull
    if hull.geom_type != "Polygon":
        raise DegenerateGeometry("All points are collinear")

    return Polygon(tuple(orient(hull, 1.0).exterior.coords))


def proper_crossings(segments: Sequence[Segment]) -> list[Point2]:
    """Return every intersection between two segments that do not share an endpoint.

    Touching in the interior of a segment (a T-contact) and collinear overlaps count as crossings,
    the latter reported at the midpoint of the overlap.
    """
    if len(segments) < 2:
        return []

    eps = tolerance(p for seg in segments for p in seg)
    lines = shapely.linestrings([[tuple(a), tuple(b)] for a, b in segments])
    left, right = STRtree(lines).query(lines, predicate="intersects")

    result = set()
    for i, j in zip(left.tolist(), right.tolist()):
        if i >= j:
            continue

        ends = [Point2(*p) for p in segments[i]] + [Point2(*p) for p in segments[j]]
        shared = any(math.dist(a, b) <= eps for a in ends[:2] for b in ends[2:])

        inter = lines[i].intersection(lines[j])
        if inter.is_empty:
            continue

        if inter.geom_type in ("LineString", "MultiLineString"):
            if inter.length <= eps:
                continue
            point = inter.interpolate(0.5, normalized=True)
        elif shared:
            continue
        else:
            point = inter.representative_point()

        result.add(Point2(round(point.x / eps) * eps, round(point.y / eps) * eps))

    return sorted(result)


def _disk(r: float, k: int) -> np.ndarray:
    # Circumscribed k-gon, its apothem equals r so it contains the disk.
    # With k a multiple of 4 the axis-aligned sides sit at exactly distance r.
    radius = r / math.cos(math.pi / k)
    angles = (np.arange(k) + 0.5) * (2 * math.pi / k)
    return np.column_stack((radius * np.cos(angles), radius * np.sin(angles)))


def _swept_boundary(region: Region, r: float, k: int) -> shapely.Geometry:
    disk = _disk(r, k)
    hulls = []
    for ring in region.rings:
        pts = np.asarray(ring.ring, dtype=float)
        nxt = np.roll(pts, -1, axis=0)
        hulls.extend(MultiPoint(np.vstack((a + disk, b + disk))).convex_hull for a, b in zip(pts, nxt))
    return shapely.union_all(hulls)


def _regions_from(geom: shapely.Geometry, min_area: float) -> list[Region]:
    parts = [g for g in getattr(geom, "geoms", [geom]) if g.geom_type == "Polygon" and g.area > min_area]
    parts.sort(key=lambda g: (-g.area, g.bounds))
    return [Region.from_shapely(g) for g in parts]


def inset_pieces(region: Region, r: float, k: int = DEFAULT_DISK_SEGMENTS) -> list[Region]:
    """Return all components of the inward Minkowski offset of ``region`` by a k-gon disk of radius ``r``."""
    if r < 0:
        raise ConfigError(f"Inset distance must be non-negative: {r}")

    if region.is_empty:
        return []

    if r == 0:
        return [region]

    eps = tolerance(region.outer.ring)
    geom = region.to_shapely().difference(_swept_boundary(region, r, k)).simplify(eps)
    return _regions_from(geom, eps * r)


def minkowski_inset(region: Region, r: float, k: int = DEFAULT_DISK_SEGMENTS) -> Region:
    """Inward Minkowski offset by a conservative k-gon disk. Returns the largest piece, or an empty region."""
    pieces = inset_pieces(region, r, k)
    return pieces[0] if pieces else Region.empty()


def minkowski_outset(region: Region, r: float, k: int = DEFAULT_DISK_SEGMENTS) -> shapely.Geometry:
    if region.is_empty or r == 0:
        return region.to_shapely()
    return shapely.union(region.to_shapely(), _swept_boundary(region, r, k))


@dataclass
class OffsetResult:
    pieces: list[Polygon] = field(default_factory=list)
    combinatorial_changed: bool = False
    topological_changed: bool = False
    collapsed_edge_runs: list[tuple[tuple[int, ...], int]] = field(default_factory=list)
    split_vertices: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)

    # Offset vertex positions and, per piece, the ring of vertex ids.
    points: list[Point2] = field(default_factory=list)
    rings: list[tuple[int, ...]] = field(default_factory=list)
    # Source edge index -> offset vertex ids along that edge, ordered in the source edge direction.
    # A collapsed edge maps to its single merge vertex, an edge of a vanished piece is absent.
    edge_chains: dict[int, tuple[int, ...]] = field(default_factory=dict)
    # Source vertex index -> offset vertex ids it ended up in
    vertex_images: dict[int, tuple[int, ...]] = field(default_factory=dict)


class _Vertex:
    __slots__ = ("alive", "base", "edge_in", "edge_out", "id", "next", "prev", "replaced_by", "sources", "velocity")

    def __init__(self, id: int, base: np.ndarray, velocity: np.ndarray, edge_in: int, edge_out: int):
        self.id = id
        self.base = base
        self.velocity = velocity
        self.edge_in = edge_in
        self.edge_out = edge_out
        self.prev: _Vertex = self
        self.next: _Vertex = self
        self.alive = True
        self.sources: frozenset[int] = frozenset()
        self.replaced_by: tuple[_Vertex, ...] = ()

    def pos(self, t: float) -> np.ndarray:
        return self.base + self.velocity * t

    def loop(self) -> Iterator[_Vertex]:
        node = self
        while True:
            yield node
            node = node.next
            if node is self:
                break


class _Wavefront:
    """Straight skeleton wavefront of a counter-clockwise ring, advanced with an event queue."""

    def __init__(self, coords: np.ndarray):
        self.coords = coords
        n = len(coords)
        self.eps = tolerance(coords)

        self.directions = []
        self.normals = []
        self.offsets = []
        for i in range(n):
            edge = coords[(i + 1) % n] - coords[i]
            length = float(np.hypot(*edge))
            if length <= self.eps:
                raise DegenerateGeometry(f"Zero length edge {i} in offset polygon")
            direction = edge / length
            normal = np.array([-direction[1], direction[0]])
            self.directions.append(direction)
            self.normals.append(normal)
            self.offsets.append(float(normal @ coords[i]))

        self._ids = itertools.count()
        self._seq = itertools.count()
        self.heap: list[tuple[float, int, str, tuple]] = []
        self.now = 0.0
        self.collapse_vertex: dict[int, _Vertex] = {}
        self.splits: list[tuple[_Vertex, _Vertex | None, _Vertex | None]] = []
        self.collapsed = False

        verts = []
        for i in range(n):
            velocity = self._velocity((i - 1) % n, i)
            if velocity is None:
                raise DegenerateGeometry(f"Antiparallel edges meet at vertex {i}")
            vertex = self._new_vertex(coords[i], 0.0, velocity, (i - 1) % n, i)
            vertex.sources = frozenset((i,))
            verts.append(vertex)

        self.initial = verts
        for a, b in zip(verts, verts[1:] + verts[:1]):
            a.next = b
            b.prev = a

        for vertex in verts:
            self._push_edge_event(vertex)
        for vertex in verts:
            self._push_split_events(vertex)

    def _velocity(self, edge_in: int, edge_out: int) -> np.ndarray | None:
        na, nb = self.normals[edge_in], self.normals[edge_out]
        det = na[0] * nb[1] - na[1] * nb[0]
        if abs(det) < 1e-12:
            return na.copy() if na @ nb > 0 else None
        return np.linalg.solve(np.array([na, nb]), np.ones(2))

    def _new_vertex(self, point: np.ndarray, t: float, velocity: np.ndarray, edge_in: int, edge_out: int) -> _Vertex:
        return _Vertex(next(self._ids), point - velocity * t, velocity, edge_in, edge_out)

    def _is_reflex(self, vertex: _Vertex) -> bool:
        da, db = self.directions[vertex.edge_in], self.directions[vertex.edge_out]
        return da[0] * db[1] - da[1] * db[0] < -1e-12

    def _push(self, t: float, kind: str, payload: tuple) -> None:
        heapq.heappush(self.heap, (max(t, self.now), next(self._seq), kind, payload))

    def _push_edge_event(self, u: _Vertex) -> None:
        w = u.next
        if w is u:
            return
        direction = self.directions[u.edge_out]
        length0 = float(direction @ (w.base - u.base))
        rate = float(direction @ (w.velocity - u.velocity))
        if rate >= -1e-12:
            return
        self._push(-length0 / rate, "edge", (u, w))

    def _push_split_events(self, u: _Vertex) -> None:
        if not self._is_reflex(u):
            return

        for s in u.loop():
            e = s.next
            if s is u or e is u:
                continue

            k = s.edge_out
            normal = self.normals[k]
            denom = 1.0 - float(normal @ u.velocity)
            if denom <= 1e-12:
                continue

            t = (float(normal @ u.base) - self.offsets[k]) / denom
            if t < self.now - self.eps:
                continue
            if self._hits(u, s, e, t):
                self._push(t, "split", (u, s, e, k))

    def _hits(self, u: _Vertex, s: _Vertex, e: _Vertex, t: float) -> bool:
        direction = self.directions[s.edge_out]
        start = s.pos(t)
        extent = float(direction @ (e.pos(t) - start))
        along = float(direction @ (u.pos(t) - start))
        return extent > self.eps and self.eps < along < extent - self.eps

    def _valid(self, kind: str, payload: tuple) -> bool:
        if kind == "edge":
            u, w = payload
            return u.alive and w.alive and u.next is w
        u, s, e, k = payload
        return u.alive and s.alive and e.alive and s.next is e and s.edge_out == k and u not in (s, e)

    def _loop_area(self, start: _Vertex, t: float) -> float:
        return _shoelace(np.array([v.pos(t) for v in start.loop()]))

    def _vanish(self, start: _Vertex) -> None:
        for v in list(start.loop()):
            v.alive = False
        self.collapsed = True

    def _settle(self, vertex: _Vertex, t: float) -> None:
        loop = list(vertex.loop())
        if len(loop) <= 2 or abs(self._loop_area(vertex, t)) <= self.eps * self.eps:
            self._vanish(vertex)
            return

        for v in loop:
            self._push_edge_event(v)
        for v in loop:
            self._push_split_events(v)

    def _edge_event(self, t: float, u: _Vertex, w: _Vertex) -> None:
        p, n = u.prev, w.next
        point = (u.pos(t) + w.pos(t)) / 2
        label = u.edge_out

        if p is w:
            self.collapse_vertex[label] = u
            self._vanish(u)
            return

        velocity = self._velocity(u.edge_in, w.edge_out)
        if velocity is None:
            # The edge vanished at the tip of a spike, the rest of the loop may live on
            self.collapse_vertex[label] = u
            u.alive = w.alive = False
            x = self._fold(t, p, u.edge_in, w.edge_out, n, u.sources | w.sources)
            if x is not None:
                self._settle(x, t)
            return

        x = self._new_vertex(point, t, velocity, u.edge_in, w.edge_out)
        x.sources = u.sources | w.sources
        p.next, x.prev, x.next, n.prev = x, p, n, x
        u.alive = w.alive = False
        u.replaced_by = w.replaced_by = (x,)
        self.collapse_vertex[label] = x
        self._settle(x, t)

    def _fold(
        self, t: float, prev: _Vertex, edge_in: int, edge_out: int, nxt: _Vertex, sources: frozenset[int]
    ) -> _Vertex | None:
        """Close the zero-width spike left where antiparallel edges ``edge_in`` and ``edge_out`` meet."""
        prev.next, nxt.prev = nxt, prev
        if prev is nxt or nxt.next is prev:
            self._vanish(prev)
            return None

        # Both neighbors sit on the common line, the one further along keeps its outgoing edge
        gap = float(self.directions[edge_in] @ (nxt.pos(t) - prev.pos(t)))
        if gap > self.eps:
            dead, before, after = (nxt,), prev, nxt.next
            edges, point = (edge_in, nxt.edge_out), nxt.pos(t)
        elif gap < -self.eps:
            dead, before, after = (prev,), prev.prev, nxt
            edges, point = (prev.edge_in, edge_out), prev.pos(t)
        else:
            dead, before, after = (prev, nxt), prev.prev, nxt.next
            edges, point = (prev.edge_in, nxt.edge_out), prev.pos(t)

        velocity = self._velocity(*edges)
        if velocity is None or before in dead or after in dead:
            self._vanish(prev)
            return None

        x = self._new_vertex(point, t, velocity, *edges)
        x.sources = sources.union(*(v.sources for v in dead))
        before.next, x.prev, x.next, after.prev = x, before, after, x
        for v in dead:
            v.alive = False
            v.replaced_by = (x,)
        return x

    def _split_event(self, t: float, u: _Vertex, s: _Vertex, e: _Vertex, k: int) -> None:
        point = u.pos(t)
        p, n = u.prev, u.next
        u.alive = False

        sides: list[_Vertex | None] = []
        for before, edge_in, edge_out, after in ((p, u.edge_in, k, e), (s, k, u.edge_out, n)):
            velocity = self._velocity(edge_in, edge_out)
            if velocity is None:
                sides.append(self._fold(t, before, edge_in, edge_out, after, u.sources))
                continue
            v = self._new_vertex(point, t, velocity, edge_in, edge_out)
            v.sources = u.sources
            before.next, v.prev, v.next, after.prev = v, before, after, v
            sides.append(v)

        v1, v2 = sides
        u.replaced_by = tuple(v for v in sides if v is not None)
        self.splits.append((u, v1, v2))

        for v in sides:
            if v is not None and v.alive:
                self._settle(v, t)

    def first_event_time(self) -> float:
        while self.heap:
            t, _, kind, payload = self.heap[0]
            if self._valid(kind, payload):
                return t
            heapq.heappop(self.heap)
        return math.inf

    def advance(self, d: float) -> None:
        while self.heap:
            t, _, kind, payload = self.heap[0]
            if t > d + self.eps:
                break
            heapq.heappop(self.heap)
            if not self._valid(kind, payload):
                continue

            self.now = t
            if kind == "edge":
                self._edge_event(t, *payload)
            else:
                self._split_event(t, *payload)
        self.now = d

    def resolve(self, vertex: _Vertex | None) -> list[_Vertex]:
        if vertex is None:
            return []
        if vertex.alive:
            return [vertex]
        return [v for nxt in vertex.replaced_by for v in self.resolve(nxt)]

    def alive_loops(self, d: float) -> list[list[_Vertex]]:
        seen = set()
        loops = []
        for v in sorted(self._all_alive(), key=lambda v: v.id):
            if v.id in seen:
                continue
            loop = list(v.loop())
            seen.update(x.id for x in loop)
            if len(loop) > 2 and abs(self._loop_area(v, d)) > self.eps * self.eps:
                loops.append(loop)
        return loops

    def _all_alive(self) -> list[_Vertex]:
        found = {}
        stack = list(self.initial)
        while stack:
            v = stack.pop()
            if v.id in found:
                continue
            found[v.id] = v
            stack.extend(v.replaced_by)
            stack.extend((v.next, v.prev))
        return [v for v in found.values() if v.alive]


def _ccw_coords(polygon: Polygon) -> tuple[np.ndarray, bool]:
    flipped = polygon.orientation == Orientation.CW
    ring = polygon.ring[::-1] if flipped else polygon.ring
    return np.asarray(ring, dtype=float), flipped


def skeleton_event_time(polygon: Polygon) -> float:
    """Return the time of the first wavefront event of ``polygon``, ``inf`` if it never changes."""
    coords, _ = _ccw_coords(polygon)
    return _Wavefront(coords).first_event_time()


def mitered_offset(polygon: Polygon, d: float) -> OffsetResult:
    """Offset ``polygon`` inward by ``d`` along its straight skeleton.

    Edge events (an edge shrinking to zero) merge vertices and are reported as collapsed edge runs,
    split events (a reflex vertex running into an opposite edge) break the polygon into pieces and
    are reported as split vertices. Pieces keep the orientation of the input.
    """
    if d < 0:
        raise ConfigError(f"Offset distance must be non-negative: {d}")

    coords, flipped = _ccw_coords(polygon)
    n = len(coords)

    front = _Wavefront(coords)
    front.advance(d)
    loops = front.alive_loops(d)

    ids: dict[int, int] = {}
    points: list[Point2] = []
    rings: list[tuple[int, ...]] = []
    for loop in loops:
        for v in loop:
            ids[v.id] = len(points)
            points.append(Point2(*(float(c) for c in v.pos(d))))
        rings.append(tuple(ids[v.id] for v in loop))

    segments = defaultdict(list)
    for loop in loops:
        for v in loop:
            segments[v.edge_out].append((v, v.next))

    chains: dict[int, tuple[int, ...]] = {}
    runs = defaultdict(list)
    for label in range(n):
        if label in segments:
            direction = front.directions[label]
            chain = []
            for a, b in sorted(segments[label], key=lambda seg: float(direction @ seg[0].pos(d))):
                for x in (ids[a.id], ids[b.id]):
                    if not chain or chain[-1] != x:
                        chain.append(x)
            chains[label] = tuple(chain)
            continue

        final = [v for v in front.resolve(front.collapse_vertex.get(label)) if v.id in ids]
        if final:
            chains[label] = (ids[final[0].id],)
            runs[chains[label][0]].append(label)

    images = defaultdict(list)
    for loop in loops:
        for v in loop:
            for source in v.sources:
                images[source].append(ids[v.id])

    splits = []
    for u, v1, v2 in front.splits:
        resulting = tuple(ids[v.id] for v in front.resolve(v1) + front.resolve(v2) if v.id in ids)
        if resulting:
            splits.append((min(u.sources), resulting))

    if flipped:
        # Map the internal counter-clockwise numbering back onto the clockwise input
        chains = {(n - 2 - label) % n: chain[::-1] for label, chain in chains.items()}
        runs = {vid: [(n - 2 - label) % n for label in labels] for vid, labels in runs.items()}
        images = {n - 1 - source: vids for source, vids in images.items()}
        splits = [(n - 1 - source, resulting) for source, resulting in splits]
        rings = [ring[::-1] for ring in rings]

    result = OffsetResult(
        pieces=[Polygon(tuple(points[i] for i in ring)) for ring in rings],
        points=points,
        rings=rings,
        edge_chains=dict(sorted(chains.items())),
        vertex_images={source: tuple(sorted(vids)) for source, vids in sorted(images.items())},
        collapsed_edge_runs=sorted((tuple(sorted(labels)), vid) for vid, labels in runs.items()),
        split_vertices=splits,
    )
    result.topological_changed = len(rings) != 1
    result.combinatorial_changed = bool(rings) and (bool(runs) or len(chains) < n)

    if result.topological_changed or result.combinatorial_changed:
        log.debug(
            "Offset by %s changed polygon: %d pieces, %d collapsed runs, %d splits",
            d,
            len(rings),
            len(result.collapsed_edge_runs),
            len(splits),
        )
    return result
