from __future__ import annotations

import math
from typing import TYPE_CHECKING

import pytest

from infill.euler.complex import CellComplex, build_complex, complex_from_rings, mesh_region
from infill.euler.euler import EulerComplex, euler_transform, generalized_euler_transform
from infill.euler.formats import dump_json, layers_to_json
from infill.euler.geometry import Polygon, Region
from infill.euler.slicing import Layer, LayerStack, PrintConfig

if TYPE_CHECKING:
    from pathlib import Path


def square(x0: float, y0: float, x1: float, y1: float) -> Polygon:
    return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def star(cx: float, cy: float, outer: float, inner: float, points: int = 5) -> Polygon:
    ring = []
    for i in range(2 * points):
        radius = outer if i % 2 == 0 else inner
        angle = math.pi / 2 + i * math.pi / points
        ring.append((cx + radius * math.cos(angle), cy + radius * math.sin(angle)))
    return Polygon(tuple(ring))


def write_layers(path: Path, stack: LayerStack) -> Path:
    with path.open("w") as fh:
        dump_json(layers_to_json(stack), fh)
    return path


@pytest.fixture
def unit_square() -> CellComplex:
    return complex_from_rings([(0, 0), (1, 0), (1, 1), (0, 1)], [[0, 1, 2, 3]])


@pytest.fixture
def grid_2x2() -> CellComplex:
    return mesh_region(square(0, 0, 10, 10), 5.0)


@pytest.fixture
def hexagon() -> CellComplex:
    """Regular hexagon of radius 10 split into six triangles around its centre."""
    points = [(0.0, 0.0)] + [(10 * math.cos(k * math.pi / 3), 10 * math.sin(k * math.pi / 3)) for k in range(6)]
    rings = [[0, 1 + k, 1 + (k + 1) % 6] for k in range(6)]
    return complex_from_rings(points, rings)


@pytest.fixture
def hexagon_euler(hexagon: CellComplex) -> EulerComplex:
    return euler_transform(hexagon)


@pytest.fixture
def grid_euler(grid_2x2: CellComplex) -> EulerComplex:
    return generalized_euler_transform(grid_2x2, None, 2)


@pytest.fixture
def notched_bar() -> Polygon:
    """A 10x4 bar with a V notch reaching down to y=1, counter-clockwise."""
    return Polygon(((0, 0), (10, 0), (10, 4), (6, 4), (5, 1), (4, 4), (0, 4)))


@pytest.fixture
def chamfered_ring() -> CellComplex:
    """A 30x30 square: a centre face chamfered at its top right corner, four trapezoids and a sliver.

    Every face has at most one edge on the outside, the centre face is face 0 and its chamfer edge
    collapses under an offset of about 1.71.
    """
    faces = [
        Polygon(((10, 10), (20, 10), (20, 19), (19, 20), (10, 20))),
        Polygon(((0, 0), (30, 0), (20, 10), (10, 10))),
        Polygon(((30, 0), (30, 30), (20, 19), (20, 10))),
        Polygon(((30, 30), (0, 30), (10, 20), (19, 20))),
        Polygon(((0, 30), (0, 0), (10, 10), (10, 20))),
        Polygon(((20, 19), (30, 30), (19, 20))),
    ]
    return build_complex(faces)


@pytest.fixture
def pyramid_config() -> PrintConfig:
    return PrintConfig(extruder_radius=0.5, overhang_c=0.5, cell_size=5.0)


@pytest.fixture
def pyramid() -> LayerStack:
    """20 layers of 3 mm over a 60 mm square base, each layer 0.25 mm smaller on every side."""
    layers = []
    for i in range(20):
        inset = 0.25 * i
        layers.append(Layer(3.0 * (i + 1), (Region(square(inset, inset, 60 - inset, 60 - inset)),)))
    return LayerStack(tuple(layers), 3.0)


@pytest.fixture
def star_stack() -> LayerStack:
    """10 layers of a five pointed star shrinking towards its centre."""
    layers = []
    for i in range(10):
        layers.append(Layer(0.5 * (i + 1), (Region(star(30, 30, 25 - 0.2 * i, 12 - 0.1 * i)),)))
    return LayerStack(tuple(layers), 0.5)


@pytest.fixture
def slab() -> LayerStack:
    return LayerStack((Layer(0.2, (Region(square(0, 0, 20, 20)),)),), 0.2)
