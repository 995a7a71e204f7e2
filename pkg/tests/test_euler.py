from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from infill.euler.complex import (
    CellClass,
    CellComplex,
    MeshScheme,
    Role,
    build_complex,
    complex_from_rings,
    mesh_region,
)
from infill.euler.euler import (
    EulerComplex,
    Provenance,
    cardinalities,
    euler_transform,
    euler_transform_relaxed,
    generalized_euler_transform,
    local_euler_transform,
    safe_offset,
    verify_euler,
)
from infill.euler.exceptions import ConfigError, NotEulerReady, OffsetChangesGeometry
from infill.euler.geometry import Polygon, proper_crossings
from tests.conftest import square


def test_hexagon(hexagon_euler: EulerComplex) -> None:
    K = hexagon_euler.complex
    assert len(K.used_vertices) == 24
    assert len(K.edges) == 48
    assert len(K.interior_faces) == 25
    assert K.extra_edges == ()

    report = verify_euler(hexagon_euler)
    assert report.histogram == {4: 24}
    assert report.is_euler
    assert report.is_planar
    assert report.is_connected
    assert report.is_pure


def test_hexagon_provenance(hexagon_euler: EulerComplex) -> None:
    prov = hexagon_euler.provenance
    assert len(prov.class1) == 6
    assert len(prov.class2) == 12
    assert len(prov.class3) == 7
    assert sorted(prov.class3.values()) == list(range(7))

    # Only the boundary vertices stay where they are
    assert sorted(hexagon_euler.fixed.values()) == [1, 2, 3, 4, 5, 6]
    for new, src in hexagon_euler.fixed.items():
        assert hexagon_euler.complex.vertices[new] == hexagon_euler.source.vertices[src]

    classes = [hexagon_euler.complex.faces[fid].cls for fid in hexagon_euler.complex.interior_faces]
    assert classes.count(CellClass.CLASS1) == 6
    assert classes.count(CellClass.CLASS2) == 12
    assert classes.count(CellClass.CLASS3) == 7


def test_cardinalities(hexagon_euler: EulerComplex) -> None:
    result = cardinalities(hexagon_euler)
    assert result == {"vertices": (24, 24), "edges": (48, 48), "faces": (25, 25)}


def test_safe_offset(hexagon: CellComplex) -> None:
    # Half the inradius of an equilateral triangle with 10 mm sides
    assert safe_offset(hexagon) == pytest.approx(10 / (4 * math.sqrt(3)))


def test_small_offset_doubles_length(hexagon: CellComplex) -> None:
    Khat = euler_transform(hexagon, 0.01)
    assert Khat.offset_d == 0.01
    assert Khat.complex.total_length / hexagon.total_length == pytest.approx(2.0, rel=0.02)
    assert verify_euler(Khat).is_euler


def test_offset_too_large(hexagon: CellComplex) -> None:
    with pytest.raises(OffsetChangesGeometry):
        euler_transform(hexagon, 3.0)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_offset_not_positive(hexagon: CellComplex, d: float) -> None:
    with pytest.raises(ConfigError):
        euler_transform(hexagon, d)


def test_adjacent_boundary_edges(unit_square: CellComplex) -> None:
    with pytest.raises(NotEulerReady, match="adjacent boundary edges"):
        euler_transform(unit_square)

    # One pass collapses the four corner cells into doubled edges
    first = generalized_euler_transform(unit_square, None, 1).complex
    assert len(first.used_vertices) == 8
    assert len(first.edges) == 12
    assert len(first.extra_edges) == 4
    assert first.edge_count == 16
    assert len(first.interior_faces) + first.collapsed_cells == 9
    assert len(first.odd_vertices) == 8

    report = verify_euler(first)
    assert report.histogram == {3: 8}
    assert report.multi_histogram == {4: 8}


@pytest.mark.parametrize(
    ("fixture", "m", "vertices", "edges"),
    [
        ("unit_square", 1, 8, 16),
        ("unit_square", 2, 32, 64),
        ("unit_square", 3, 128, 256),
        ("grid_2x2", 2, 96, 192),
    ],
)
def test_generalized_growth(request: pytest.FixtureRequest, fixture: str, m: int, vertices: int, edges: int) -> None:
    K = request.getfixturevalue(fixture)
    Khat = generalized_euler_transform(K, None, m)
    assert Khat.iterations == m
    assert len(Khat.passes) == m

    out = Khat.complex
    assert len(out.used_vertices) == vertices == 2 * 4 ** (m - 1) * K.edge_count
    assert out.edge_count == edges == 4**m * K.edge_count
    assert all(expected == measured for expected, measured in cardinalities(Khat).values())
    assert verify_euler(Khat).is_planar
    if m >= 2:
        assert verify_euler(Khat).multi_histogram == {4: vertices}


def test_generalized_square_twice(unit_square: CellComplex) -> None:
    Khat = generalized_euler_transform(unit_square, None, 2)
    report = verify_euler(Khat)
    assert report.is_euler
    assert report.is_connected
    # The copies of the corner cells are drawn as a single segment
    assert report.histogram == {3: 8, 4: 24}
    assert len(Khat.provenance.collapsed_class1) == 4
    assert sorted(Khat.fixed.values()) == [0, 1, 2, 3]

    printable = Khat.printable
    assert printable.doubled_edges == []
    assert printable.odd_vertices == []
    assert len(printable.components) == 1
    assert len(printable.edges) == 56
    assert not proper_crossings([printable.segment(e) for e in printable.edges])


def test_transform_after_one_pass(unit_square: CellComplex) -> None:
    first = generalized_euler_transform(unit_square, None, 1).complex
    Khat = euler_transform(first)
    assert len(Khat.complex.used_vertices) == 32
    assert verify_euler(Khat).multi_histogram == {4: 32}


def test_generalized_cardinalities(unit_square: CellComplex) -> None:
    assert cardinalities(generalized_euler_transform(unit_square, None, 2)) == {
        "vertices": (8, 8),
        "edges": (16, 16),
        "faces": (9, 9),
        "vertices@2": (32, 32),
        "edges@2": (64, 64),
        "faces@2": (33, 33),
    }


def test_grid(grid_euler: EulerComplex) -> None:
    report = verify_euler(grid_euler)
    assert report.is_euler
    assert report.is_planar
    assert report.is_connected
    assert set(report.multi_histogram) == {4}
    assert verify_euler(grid_euler.printable).histogram.keys() <= {2, 4}


def test_generalized_hexagon(hexagon: CellComplex) -> None:
    Khat = generalized_euler_transform(hexagon, None, 2)
    assert verify_euler(Khat).is_euler
    assert Khat.passes[0].total_length < Khat.complex.total_length
    assert sorted(Khat.fixed.values()) == [1, 2, 3, 4, 5, 6]


def test_generalized_invalid_iterations(hexagon: CellComplex) -> None:
    with pytest.raises(ConfigError):
        generalized_euler_transform(hexagon, None, 0)


def test_relaxed_collapse(chamfered_ring: CellComplex) -> None:
    with pytest.raises(OffsetChangesGeometry):
        euler_transform(chamfered_ring, 0.1, overrides={0: 2.5})

    Khat, report = euler_transform_relaxed(chamfered_ring, 0.1, overrides={0: 2.5})
    assert len(report.collapsed_runs) == 1

    run = report.collapsed_runs[0]
    assert run.face == 0
    assert run.pi == 1
    assert run.m_local == 0
    assert run.measured == run.predicted == 6
    assert report.affected_odd_vertices == []
    assert verify_euler(Khat).is_euler


def test_relaxed_without_collapse(hexagon: CellComplex) -> None:
    Khat, report = euler_transform_relaxed(hexagon, 0.5)
    assert report.collapsed_runs == []
    assert report.splits == []
    assert report.collapsed_class2 == []
    assert verify_euler(Khat).histogram == {4: 24}


def test_local_noop(hexagon_euler: EulerComplex) -> None:
    assert local_euler_transform(hexagon_euler) is hexagon_euler


def test_local_repairs_odd_vertices() -> None:
    # Two Class 3 squares side by side, the shared edge leaves two vertices of degree 3
    vertices = [(0, 0), (1, 0), (2, 0), (2, 1), (1, 1), (0, 1)]
    C = complex_from_rings(vertices, [[0, 1, 4, 5], [1, 2, 3, 4]], [CellClass.CLASS3, CellClass.CLASS3])
    assert C.odd_vertices == [1, 4]

    Khat = EulerComplex(C, C, Provenance(), None)
    repaired = local_euler_transform(Khat)
    assert repaired is not Khat

    report = verify_euler(repaired)
    assert report.is_euler
    assert report.is_planar
    assert report.is_connected
    assert sum(1 for face in repaired.complex.faces if face.role == Role.OUTSIDE) == 1


def _chamfered_pair() -> CellComplex:
    """A 30x30 square around a centre face whose top right corner is cut by two short edges.

    The corner edges of face 0 merge into one vertex by an offset of about 4.77, the face lasts until 5.
    Face 3 lies across the first corner edge and loses it between offsets of about 1.3 and 2.6.
    """
    faces = [
        Polygon(((10, 10), (20, 10), (20, 17), (19, 19), (16, 20), (10, 20))),
        Polygon(((0, 0), (30, 0), (20, 10), (10, 10))),
        Polygon(((30, 0), (30, 22), (20, 17), (20, 10))),
        Polygon(((20, 17), (30, 22), (30, 30), (19, 19))),
        Polygon(((19, 19), (30, 30), (16, 20))),
        Polygon(((30, 30), (0, 30), (10, 20), (16, 20))),
        Polygon(((0, 30), (0, 0), (10, 10), (10, 20))),
    ]
    return build_complex(faces)


def _fan_corner() -> CellComplex:
    """A 40x40 square around a centre face whose top right corner is cut by three short edges.

    The corner edges of face 0 merge into one vertex by an offset of about 5.24, the face lasts until 10.
    Faces 3 and 5 lie across the outer corner edges and lose them between offsets of about 1.33 and 2.8.
    """
    faces = [
        Polygon(((10, 10), (30, 10), (30, 26), (29, 28), (28, 29), (26, 30), (10, 30))),
        Polygon(((0, 0), (40, 0), (30, 10), (10, 10))),
        Polygon(((40, 0), (40, 31), (30, 26), (30, 10))),
        Polygon(((30, 26), (40, 31), (40, 40), (29, 28))),
        Polygon(((29, 28), (40, 40), (28, 29))),
        Polygon(((28, 29), (40, 40), (31, 40), (26, 30))),
        Polygon(((31, 40), (0, 40), (10, 30), (26, 30))),
        Polygon(((0, 40), (0, 0), (10, 10), (10, 30))),
    ]
    return build_complex(faces)


@pytest.mark.parametrize(
    ("overrides", "m_local", "degree"),
    [
        ({0: 4.88}, 0, 8),
        ({0: 4.88, 3: 2.0}, 1, 7),
    ],
)
def test_relaxed_collapse_two_edges(overrides: dict[int, float], m_local: int, degree: int) -> None:
    _, report = euler_transform_relaxed(_chamfered_pair(), 0.1, overrides=overrides)
    run = next(run for run in report.collapsed_runs if run.face == 0)
    assert run.pi == 2
    assert run.m_local == m_local
    assert run.measured == run.predicted == degree


def test_local_repairs_degree_seven() -> None:
    Khat, report = euler_transform_relaxed(_chamfered_pair(), 0.1, overrides={0: 4.88, 3: 2.0})
    runs = {run.face: run for run in report.collapsed_runs}
    assert sorted(runs) == [0, 3]
    assert (runs[3].pi, runs[3].m_local, runs[3].measured) == (1, 1, 5)
    assert set(report.affected_odd_vertices) == {runs[0].vertex, runs[3].vertex}
    assert Khat.complex.degree(runs[0].vertex) == 7

    repaired = local_euler_transform(Khat, report)
    check = verify_euler(repaired)
    assert check.is_euler
    assert check.is_planar
    assert check.is_connected


@pytest.mark.parametrize(
    ("overrides", "m_local"),
    [
        ({0: 6.0}, 0),
        ({0: 6.0, 3: 2.0}, 1),
        ({0: 6.0, 3: 2.0, 5: 2.0}, 2),
    ],
)
def test_relaxed_collapse_three_edges(overrides: dict[int, float], m_local: int) -> None:
    _, report = euler_transform_relaxed(_fan_corner(), 0.1, overrides=overrides)
    runs = {run.face: run for run in report.collapsed_runs}
    assert sorted(runs) == sorted(overrides)

    run = runs.pop(0)
    assert run.pi == 3
    assert run.m_local == m_local
    assert run.measured == run.predicted == 10 - m_local
    assert all((other.pi, other.m_local, other.measured) == (1, 1, 5) for other in runs.values())


@st.composite
def corner_offsets(draw: st.DrawFn) -> dict[int, float]:
    """Offsets that merge the three corner edges of the centre face, faces 3 and 5 may lose theirs too."""
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)

    overrides = {0: float(rng.uniform(5.5, 9.0))}
    for fid in (3, 5):
        overrides[fid] = float(rng.uniform(1.5, 2.6) if rng.random() < 0.5 else rng.uniform(0.1, 1.0))
    return overrides


@given(corner_offsets())
@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_local_repair_after_collapse(overrides: dict[int, float]) -> None:
    Khat, report = euler_transform_relaxed(_fan_corner(), 0.1, overrides=overrides)
    collapsing = [fid for fid in (3, 5) if overrides[fid] >= 1.5]

    runs = {run.face: run for run in report.collapsed_runs}
    assert sorted(runs) == [0, *collapsing]
    assert runs[0].m_local == len(collapsing)
    assert all(run.measured == run.predicted for run in report.collapsed_runs)
    assert set(report.affected_odd_vertices) == {run.vertex for run in runs.values() if run.predicted % 2}

    repaired = local_euler_transform(Khat, report)
    assert verify_euler(repaired).odd_vertices == []


@st.composite
def et_ready_meshes(draw: st.DrawFn) -> tuple[CellComplex, int]:
    """A jittered triangle wheel to transform once, or a meshed rectangle to transform twice."""
    kind = draw(st.sampled_from(["wheel", MeshScheme.GRID, MeshScheme.TRIANGLES]))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)

    if kind == "wheel":
        n = int(rng.integers(4, 13))
        angles = 2 * math.pi * (np.arange(n) + rng.uniform(-0.3, 0.3, n)) / n
        radii = rng.uniform(5.0, 10.0, n)
        points = [(0.0, 0.0)] + [(float(r * math.cos(a)), float(r * math.sin(a))) for r, a in zip(radii, angles)]
        return complex_from_rings(points, [[0, 1 + k, 1 + (k + 1) % n] for k in range(n)]), 1

    width, height = (float(x) for x in rng.uniform(6.0, 14.0, 2))
    return mesh_region(square(0, 0, width, height), float(rng.uniform(2.5, 5.0)), kind), 2


@given(et_ready_meshes())
@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_random_meshes(mesh: tuple[CellComplex, int]) -> None:
    K, m = mesh
    Khat = generalized_euler_transform(K, None, m)

    report = verify_euler(Khat)
    assert report.multi_histogram == {4: len(Khat.complex.used_vertices)}
    assert report.is_planar
    assert report.is_connected
    assert all(expected == measured for expected, measured in cardinalities(Khat).values())
