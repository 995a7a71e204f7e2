from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING

import networkx as nx

from infill.euler.complex import CellComplex, EdgeKey, edge_key
from infill.euler.exceptions import InternalInvariantViolation, NotEulerian
from infill.euler.geometry import Orientation, Point2, signed_area

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from infill.euler.feasibility import FeasibilityReport
    from infill.euler.slicing import SupportPlan

log = logging.getLogger(__name__)


@dataclass
class Circuit:
    """A closed walk, stored as its vertex sequence without repeating the first vertex."""

    vertices: tuple[int, ...]
    id: int = 0
    pred: int | None = None
    depth: int = 0

    @cached_property
    def edges(self) -> list[EdgeKey]:
        ring = self.vertices
        return [edge_key(a, b) for a, b in zip(ring, ring[1:] + ring[:1])]

    def __len__(self) -> int:
        return len(self.vertices)

    def orientation(self, points: Sequence[Point2]) -> Orientation:
        return Orientation.CW if _area(self.vertices, points) < 0 else Orientation.CCW

    def visits(self, v: int) -> list[tuple[int, int]]:
        """(arrival, departure) neighbors for every pass through ``v``."""
        ring = self.vertices
        n = len(ring)
        return [(ring[i - 1], ring[(i + 1) % n]) for i, w in enumerate(ring) if w == v]


def _area(ring: Sequence[int], points: Sequence[Point2]) -> float:
    if len(set(ring)) < 3:
        return 0.0
    return signed_area([points[v] for v in ring])


def _turn(points: Sequence[Point2], came: int | None, v: int, w: int) -> float:
    px, py = points[v]
    qx, qy = points[w]
    out = math.atan2(qy - py, qx - px)
    if came is None:
        heading = 0.0
    else:
        cx, cy = points[came]
        heading = math.atan2(py - cy, px - cx)
    # In (-pi, pi], negative turns to the right
    return math.pi - (math.pi - (out - heading)) % (2 * math.pi)


def modified_hierholzer(edges: Iterable[EdgeKey], points: Sequence[Point2]) -> list[Circuit]:
    """Find one closed walk per connected component of an edge set, each oriented clockwise.

    Subtours are spliced Hierholzer-style; at every step the walk takes the unused edge turning most
    to the right of its incoming direction.
    """
    unused: dict[int, set[int]] = defaultdict(set)
    for a, b in edges:
        unused[a].add(b)
        unused[b].add(a)

    odd = sorted(v for v, nbrs in unused.items() if len(nbrs) % 2)
    if odd:
        raise NotEulerian(f"Edge set has odd vertices: {odd}")

    circuits = []
    for start in sorted(unused, key=lambda v: (points[v], v)):
        if not unused[start]:
            continue

        stack: list[tuple[int, int | None]] = [(start, None)]
        walk = []
        while stack:
            v, came = stack[-1]
            if unused[v]:
                w = min(unused[v], key=lambda w, v=v, came=came: (_turn(points, came, v, w), w))
                unused[v].discard(w)
                unused[w].discard(v)
                stack.append((w, v))
            else:
                walk.append(stack.pop()[0])

        ring = tuple(reversed(walk[1:]))
        if _area(ring, points) > 0:
            ring = (ring[0], *reversed(ring[1:]))
        circuits.append(Circuit(ring))

    return circuits


@dataclass
class CircuitTree:
    circuits: list[Circuit] = field(default_factory=list)
    roots: list[int] = field(default_factory=list)
    children: dict[int, list[int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.circuits)

    @cached_property
    def sharing(self) -> dict[int, list[int]]:
        """Circuits through every vertex, shallowest first."""
        result: dict[int, list[int]] = defaultdict(list)
        for circuit in sorted(self.circuits, key=lambda c: (c.depth, c.id)):
            for v in dict.fromkeys(circuit.vertices):
                result[v].append(circuit.id)
        return dict(sorted(result.items()))

    def path_to_root(self, cid: int) -> list[int]:
        path = [cid]
        while self.circuits[path[-1]].pred is not None:
            path.append(self.circuits[path[-1]].pred)
        return path

    def bfs(self) -> list[int]:
        order = []
        queue = deque(self.roots)
        while queue:
            cid = queue.popleft()
            order.append(cid)
            queue.extend(self.children.get(cid, ()))
        return order


def _face_walks(K: CellComplex, graph: set[EdgeKey], starts: Iterable[tuple[int, int]]) -> set[EdgeKey]:
    """Edges of ``graph`` bounding an odd number of the faces traced from ``starts``.

    Each face is traced with the face to the left of every half-edge, so the result is a sum of
    closed walks.
    """
    rotation: dict[int, list[int]] = {}
    seen: set[tuple[int, int]] = set()
    result: set[EdgeKey] = set()
    for start in starts:
        u, v = start
        while (u, v) not in seen:
            seen.add((u, v))
            result ^= {edge_key(u, v)}
            if v not in rotation:
                rotation[v] = [w for w in K.neighbors[v] if edge_key(v, w) in graph]
            nbrs = rotation[v]
            u, v = v, nbrs[nbrs.index(u) - 1]
    return result


def find_boundary_circuits(
    Ktilde: CellComplex, C0: Circuit | None, marked: set[EdgeKey] | None = None
) -> list[Circuit]:
    """Circuits through the unmarked edges next to ``C0``, or through the boundary when ``C0`` is None.

    The faces of the unmarked edges that ``C0`` runs through are traced, and every edge bounding one
    of them once makes up the next layer. Without ``C0`` the faces along the outside and the holes
    are traced instead.
    """
    K = Ktilde
    marked = marked if marked is not None else set()
    if K.odd_vertices:
        raise InternalInvariantViolation(f"Complex has odd vertices: {K.odd_vertices}")

    free = set(K.edges) - marked
    if C0 is None:
        rims = {K.outside, *K.hole_faces}
        drawn = free & K.face_edges
        starts = sorted(he for he, fid in K.halfedges.items() if fid in rims and edge_key(*he) in drawn)
        H = _face_walks(K, free, starts)
    else:
        circuit = set(C0.edges)
        starts = [he for a, b in C0.edges for he in ((a, b), (b, a))]
        H = _face_walks(K, free | circuit, starts) - circuit

    if not H:
        return []

    degrees = Counter(v for e in H for v in e)
    odd = sorted(v for v, deg in degrees.items() if deg % 2)
    if odd:
        raise InternalInvariantViolation(f"Boundary edge set has odd vertices: {odd}")
    return modified_hierholzer(H, K.vertices)


def circuit_tree(Ktilde: CellComplex) -> CircuitTree:
    """Peel the complex into circuits, from the boundary inwards.

    Every edge ends up in exactly one circuit. Each circuit's ``pred`` is the circuit whose
    neighborhood it was found in.
    """
    if Ktilde.odd_vertices:
        raise InternalInvariantViolation(f"Complex has odd vertices: {Ktilde.odd_vertices}")

    tree = CircuitTree()
    marked: set[EdgeKey] = set()
    total = len(Ktilde.edges)

    def _add(found: list[Circuit], pred: Circuit | None) -> list[Circuit]:
        for circuit in found:
            circuit.id = len(tree.circuits)
            circuit.pred = None if pred is None else pred.id
            circuit.depth = 0 if pred is None else pred.depth + 1
            tree.circuits.append(circuit)
            marked.update(circuit.edges)
            if pred is None:
                tree.roots.append(circuit.id)
            else:
                tree.children.setdefault(pred.id, []).append(circuit.id)
        return found

    while len(marked) < total:
        roots = find_boundary_circuits(Ktilde, None, marked)
        if not roots:
            free = set(Ktilde.edges) - marked
            start = min(v for e in free for v in e)
            component = nx.node_connected_component(nx.Graph(list(free)), start)
            roots = modified_hierholzer([e for e in free if e[0] in component], Ktilde.vertices)

        queue = deque(_add(roots, None))
        while queue:
            parent = queue.popleft()
            queue.extend(_add(find_boundary_circuits(Ktilde, parent, marked), parent))

    log.debug("Circuit tree of %r: %d circuits, %d roots", Ktilde, len(tree.circuits), len(tree.roots))
    return tree


@dataclass(frozen=True)
class Restriction:
    """Arrive at ``vertex`` from ``incoming`` and leave towards ``outgoing``."""

    vertex: int
    incoming: int
    outgoing: int


def _restriction_chain(v: int, pairs: Sequence[tuple[int, int]]) -> list[Restriction]:
    # pairs[i] holds (arrival, departure) of the i-th pass through v, shallowest circuit first.
    # Circuits at odd positions (1-based) are entered by their departure edge, the others by their
    # arrival edge, so every parent and child run in opposite directions.
    def enter(i: int) -> int:
        return pairs[i - 1][1] if i % 2 else pairs[i - 1][0]

    def leave(i: int) -> int:
        return pairs[i - 1][0] if i % 2 else pairs[i - 1][1]

    q = len(pairs)
    chain = [Restriction(v, pairs[0][0], enter(q))]
    chain.extend(Restriction(v, leave(i), enter(i - 1)) for i in range(q, 2, -1))
    chain.append(Restriction(v, leave(2), pairs[0][1]))
    return chain


def _root_paths(tree: CircuitTree, cids: Iterable[int]) -> list[list[int]]:
    """Split circuits into groups lying on one root path each, shallowest first within a group."""
    left = sorted(cids, key=lambda cid: (-tree.circuits[cid].depth, cid))
    groups = []
    while left:
        on_path = set(tree.path_to_root(left[0]))
        groups.append([cid for cid in reversed(left) if cid in on_path])
        left = [cid for cid in left if cid not in on_path]
    return groups


def traversal_restrictions(tree: CircuitTree, Ktilde: CellComplex) -> list[Restriction]:
    """Transition rules at every vertex shared by several circuits on one root path.

    Every pass of a circuit through the vertex takes part in the chain, circuits on other root paths
    get chains of their own.
    """
    restrictions = []
    for v, cids in tree.sharing.items():
        for group in _root_paths(tree, cids):
            if len(group) < 2:
                continue
            pairs = [pair for cid in group for pair in tree.circuits[cid].visits(v)]
            restrictions.extend(_restriction_chain(v, pairs))
    return restrictions


def _interleaved(pairs: Iterable[tuple[int, int]]) -> bool:
    spans = sorted(tuple(sorted(p)) for p in pairs)
    for i, (a, b) in enumerate(spans):
        for c, d in spans[i + 1 :]:
            if c > b:
                break
            if a < c < b < d:
                return True
    return False


class _Transitions:
    """Pairing of edge ends at every vertex, each end named by the neighbor it leads to."""

    def __init__(self, K: CellComplex):
        self.K = K
        self.pairs: dict[int, dict[int, int]] = defaultdict(dict)

    def link(self, v: int, a: int, b: int) -> None:
        self.pairs[v][a] = b
        self.pairs[v][b] = a

    def matching(self, v: int) -> list[tuple[int, int]]:
        pos = {w: i for i, w in enumerate(self.K.neighbors[v])}
        return [(pos[a], pos[b]) for a, b in self.pairs[v].items() if pos[a] < pos[b]]

    def crossing(self, v: int) -> bool:
        return _interleaved(self.matching(v))

    def untangle(self, v: int) -> None:
        nbrs = self.K.neighbors[v]
        self.pairs[v] = {}
        for a, b in zip(nbrs[::2], nbrs[1::2]):
            self.link(v, a, b)

    def walk(self, start: int, first: int) -> list[int]:
        """Vertices of the closed walk that leaves ``start`` towards ``first``."""
        ring = [start]
        prev, cur = start, first
        while cur != start or self.pairs[start][prev] != first:
            ring.append(cur)
            prev, cur = cur, self.pairs[cur][prev]
        return ring

    def walk_ids(self) -> dict[EdgeKey, int]:
        ids: dict[EdgeKey, int] = {}
        count = 0
        for e in self.K.edges:
            if e in ids:
                continue
            ring = self.walk(*e)
            for a, b in zip(ring, ring[1:] + ring[:1]):
                ids[edge_key(a, b)] = count
            count += 1
        return ids


class MoveKind(Enum):
    PRINT = "print"
    TRAVEL = "travel"


@dataclass(frozen=True)
class Move:
    kind: MoveKind
    start: Point2
    end: Point2
    edge: EdgeKey | None = None
    source: str = "infill"

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)


@dataclass
class ToolPath:
    moves: list[Move] = field(default_factory=list)
    restrictions: list[Restriction] = field(default_factory=list)
    walks: list[list[int]] = field(default_factory=list)
    loops: int = 0

    @property
    def print_length(self) -> float:
        return sum(m.length for m in self.moves if m.kind == MoveKind.PRINT)

    @property
    def travel_length(self) -> float:
        return sum(m.length for m in self.moves if m.kind == MoveKind.TRAVEL)

    @property
    def print_edges(self) -> list[EdgeKey]:
        return sorted({m.edge for m in self.moves if m.kind == MoveKind.PRINT and m.edge is not None})


def _apply_restrictions(transitions: _Transitions, restrictions: Sequence[Restriction]) -> int:
    by_vertex: dict[int, list[Restriction]] = defaultdict(list)
    for rule in restrictions:
        by_vertex[rule.vertex].append(rule)

    skipped = 0
    for v, rules in by_vertex.items():
        saved = dict(transitions.pairs[v])
        for rule in rules:
            for end in (rule.incoming, rule.outgoing):
                other = transitions.pairs[v].pop(end, None)
                if other is not None:
                    transitions.pairs[v].pop(other, None)
        for rule in rules:
            transitions.link(v, rule.incoming, rule.outgoing)

        # Ends freed but not covered by a rule pair up among themselves
        loose = [w for w in transitions.K.neighbors[v] if w not in transitions.pairs[v]]
        for a, b in zip(loose[::2], loose[1::2]):
            transitions.link(v, a, b)

        if transitions.crossing(v):
            transitions.pairs[v] = saved
            skipped += 1
    return skipped


def _join_walks(transitions: _Transitions, order: Iterable[int]) -> int:
    """Merge closed walks at vertices where they meet, swapping angularly adjacent transitions."""
    ids = transitions.walk_ids()
    K = transitions.K
    parent = {w: w for w in set(ids.values())}

    def find(w: int) -> int:
        while parent[w] != w:
            parent[w] = parent[parent[w]]
            w = parent[w]
        return w

    merges = 0
    for v in order:
        nbrs = K.neighbors[v]
        n = len(nbrs)
        for i in range(n):
            e, f = nbrs[i], nbrs[(i + 1) % n]
            we, wf = find(ids[edge_key(v, e)]), find(ids[edge_key(v, f)])
            if we == wf:
                continue

            pairs = transitions.pairs[v]
            j, k = pairs[e], pairs[f]
            transitions.link(v, e, f)
            transitions.link(v, j, k)
            parent[wf] = we
            merges += 1
    return merges


def generate_toolpath(
    Ktilde: CellComplex,
    tree: CircuitTree,
    restrictions: Sequence[Restriction],
    feas: FeasibilityReport | None = None,
    support: SupportPlan | None = None,
) -> ToolPath:
    """Walk every component of the complex once without crossing over itself.

    Circuit transitions are replaced by the restriction chains at shared vertices, and the remaining
    separate walks are joined at vertices where they touch. Forced travel edges are walked like any
    other edge but emitted as travel moves. Components and support loops are chained with travel
    moves, nearest start first.
    """
    K = Ktilde
    path = ToolPath(restrictions=list(restrictions))
    transitions = _Transitions(K)
    for circuit in tree.circuits:
        ring = circuit.vertices
        for i, v in enumerate(ring):
            transitions.link(v, ring[i - 1], ring[(i + 1) % len(ring)])

    missing = [v for v in K.used_vertices if len(transitions.pairs[v]) != K.degree(v)]
    if missing:
        raise InternalInvariantViolation(f"Circuit tree does not cover the edges at vertices {missing}")

    skipped = _apply_restrictions(transitions, restrictions)
    if skipped:
        log.debug("Kept circuit transitions at %d vertices where the restriction chain would cross", skipped)

    for v in K.used_vertices:
        if transitions.crossing(v):
            transitions.untangle(v)

    order = list(dict.fromkeys([*tree.sharing, *K.used_vertices]))
    merges = _join_walks(transitions, order)
    log.debug("Joined %d walks", merges)

    # One walk per component, each starting from the lowest vertex of its root circuit
    roots = [tree.circuits[cid] for cid in tree.roots]
    walks = []
    for component in K.components:
        root = next((c for c in roots if c.vertices[0] in component), None)
        if root is None:
            start = min(component, key=lambda v: (K.vertices[v], v))
            first = K.neighbors[start][0]
        else:
            idx = min(range(len(root)), key=lambda i: (K.vertices[root.vertices[i]], i))
            start, first = root.vertices[idx], root.vertices[(idx + 1) % len(root)]

        ring = transitions.walk(start, first)
        expected = sum(1 for a, b in K.edges if a in component)
        if len(ring) != expected:
            raise InternalInvariantViolation(
                f"Walk from vertex {start} covers {len(ring)} of {expected} edges in its component"
            )
        walks.append(ring)

    position: Point2 | None = None
    pending = list(walks)
    while pending:
        if position is None:
            ring = min(pending, key=lambda ring: (K.vertices[ring[0]], ring[0]))
        else:
            ring = min(pending, key=lambda ring: (math.dist(position, K.vertices[ring[0]]), ring[0]))
        pending.remove(ring)
        path.walks.append(ring)

        if position is not None:
            path.moves.append(Move(MoveKind.TRAVEL, position, K.vertices[ring[0]]))
        for a, b in zip(ring, ring[1:] + ring[:1]):
            path.moves.extend(_edge_moves(K, a, b, feas))
        position = K.vertices[ring[0]]

    if support is not None:
        loops = [("support", loop) for loop in support.loops] + [("perimeter", loop) for loop in support.extra_loops]
        while loops:
            if position is None:
                item = loops[0]
            else:
                item = min(loops, key=lambda item: math.dist(position, item[1][0]))
            loops.remove(item)
            source, loop = item
            if position is not None:
                path.moves.append(Move(MoveKind.TRAVEL, position, loop[0], source=source))
            path.moves.extend(Move(MoveKind.PRINT, a, b, source=source) for a, b in zip(loop, loop[1:]))
            path.loops += 1
            position = loop[-1]

    log.debug(
        "Tool path over %r: %d walks, %d moves, %d support loops", K, len(path.walks), len(path.moves), path.loops
    )
    return path


def _edge_moves(K: CellComplex, a: int, b: int, feas: FeasibilityReport | None) -> list[Move]:
    edge = edge_key(a, b)
    p, q = K.vertices[a], K.vertices[b]
    travel = feas.travel_segments(edge) if feas is not None else []
    if not travel:
        return [Move(MoveKind.PRINT, p, q, edge)]

    length = math.dist(p, q)

    def _t(point: Point2) -> float:
        return ((point[0] - p[0]) * (q[0] - p[0]) + (point[1] - p[1]) * (q[1] - p[1])) / (length * length)

    def _at(t: float) -> Point2:
        return Point2(p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))

    spans = sorted(tuple(sorted((_t(s), _t(e)))) for s, e in travel)
    moves = []
    cursor = 0.0
    for t0, t1 in spans:
        t0, t1 = max(t0, cursor), min(t1, 1.0)
        if t1 <= t0:
            continue
        if t0 > cursor:
            moves.append(Move(MoveKind.PRINT, _at(cursor), _at(t0), edge))
        moves.append(Move(MoveKind.TRAVEL, _at(t0), _at(t1), edge))
        cursor = t1
    if cursor < 1.0:
        moves.append(Move(MoveKind.PRINT, _at(cursor), q, edge))
    return moves


def check_crossovers(path: ToolPath, Ktilde: CellComplex) -> list[int]:
    """Vertices where the walks of a tool path cross over themselves.

    At every vertex the walks pair up the incident edges; a crossover is a pair of transitions that
    interleave in the angular order of the edges around the vertex.
    """
    transitions: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for ring in path.walks:
        n = len(ring)
        for i, v in enumerate(ring):
            transitions[v].append((ring[i - 1], ring[(i + 1) % n]))

    violations = []
    for v, pairs in sorted(transitions.items()):
        pos = {w: i for i, w in enumerate(Ktilde.neighbors[v])}
        if _interleaved((pos[a], pos[b]) for a, b in pairs):
            violations.append(v)

    if violations:
        log.warning("Tool path crosses over at %d vertices: %s", len(violations), violations)
    return violations
