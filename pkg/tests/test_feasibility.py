from __future__ import annotations

import pytest

from infill.euler.complex import CellComplex, complex_from_rings
from infill.euler.feasibility import Shrinkability, check_extruder_feasibility
from infill.euler.geometry import Point2, Polygon, Region
from infill.euler.slicing import PatchPlan, PrintConfig
from tests.conftest import square


@pytest.fixture
def strip() -> CellComplex:
    """A 10x0.3 strip, narrower than a 0.2 extruder can print twice."""
    return complex_from_rings([(0, 0), (10, 0), (10, 0.3), (0, 0.3)], [[0, 1, 2, 3]])


def test_strip(strip: CellComplex) -> None:
    report = check_extruder_feasibility(strip, PrintConfig(extruder_radius=0.2))
    assert report.covered_edges == [(0, 3), (1, 2)]
    assert report.collision_pairs == [((0, 1), (2, 3))]
    assert report.shrinkability == {0: Shrinkability.UNSHRINKABLE}
    assert report.forced_travel_edges == [(0, 1), (0, 3), (1, 2), (2, 3)]
    assert report.unresolved == []
    assert report.feasible
    assert not report.is_empty
    assert report.arcs_affected == 0
    assert report.travel_count == 4


def test_strip_unresolved(strip: CellComplex) -> None:
    region = Region(square(-100, -100, 100, 100))
    report = check_extruder_feasibility(strip, PrintConfig(extruder_radius=0.2), PatchPlan(), region)
    assert report.forced_travel == []
    assert report.unresolved == [((0, 1), (2, 3))]
    assert not report.feasible


def test_square_is_clean() -> None:
    K = complex_from_rings([(0, 0), (10, 0), (10, 10), (0, 10)], [[0, 1, 2, 3]])
    report = check_extruder_feasibility(K, PrintConfig(extruder_radius=0.2))
    assert report.is_empty
    assert report.feasible
    assert report.shrinkability == {0: Shrinkability.SHRINKABLE}


def test_split_face_travel(notched_bar: Polygon) -> None:
    K = complex_from_rings(list(notched_bar.ring), [list(range(len(notched_bar)))])
    report = check_extruder_feasibility(K, PrintConfig(extruder_radius=0.5))
    assert report.shrinkability == {0: Shrinkability.TOPOLOGICAL}

    assert report.forced_travel
    assert set(report.forced_travel_edges) <= {(3, 4), (4, 5)}
    for travel in report.forced_travel:
        assert travel.end == Point2(5, 1)
        assert travel.length > 0
        assert report.travel_segments(travel.edge)


def test_patch_arcs(strip: CellComplex) -> None:
    plan = PatchPlan(arc_edges=[[(0, 1)], [(2, 3)]])
    report = check_extruder_feasibility(strip, PrintConfig(extruder_radius=0.2), plan)
    assert report.forced_travel_edges == [(0, 1), (2, 3)]
    assert report.arcs_affected == 2
    assert report.travel_count == 2
    assert [travel.arc for travel in report.forced_travel] == [0, 1]


def test_empty_complex() -> None:
    report = check_extruder_feasibility(CellComplex((), ()), PrintConfig())
    assert report.is_empty
    assert report.feasible


def test_travel_counted_per_arc(strip: CellComplex) -> None:
    plan = PatchPlan(arc_edges=[[(0, 1), (1, 2)]])
    report = check_extruder_feasibility(strip, PrintConfig(extruder_radius=0.2), plan)
    assert report.shrinkability == {0: Shrinkability.UNSHRINKABLE}
    assert report.forced_travel_edges == [(0, 1), (1, 2)]
    assert report.travel_count == 1
    assert report.arcs_affected == 1
    assert report.unresolved == []
