from __future__ import annotations

import math
import re
from xml.etree import ElementTree

import pytest

from infill.euler.complex import CellComplex
from infill.euler.emit import emit_gcode, emit_svg, extrusion
from infill.euler.exceptions import ConfigError
from infill.euler.geometry import Point2
from infill.euler.slicing import PrintConfig
from infill.euler.toolpath import Move, MoveKind, ToolPath

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture
def path() -> ToolPath:
    return ToolPath(
        moves=[
            Move(MoveKind.PRINT, Point2(0, 0), Point2(10, 0), (0, 1)),
            Move(MoveKind.PRINT, Point2(10, 0), Point2(10, 5), (1, 2)),
            Move(MoveKind.TRAVEL, Point2(10, 5), Point2(0, 5)),
            Move(MoveKind.PRINT, Point2(0, 5), Point2(0, 8), source="support"),
        ]
    )


@pytest.fixture
def cfg() -> PrintConfig:
    return PrintConfig(extruder_radius=0.2, layer_height=0.2)


def test_emit_svg(path: ToolPath) -> None:
    root = ElementTree.fromstring(emit_svg(path, layer=3))
    assert root.get("viewBox") == "0 0 12 10"
    assert root.get("width") == "12mm"

    group = root.find(f"{SVG}g")
    assert group.get("id") == "layer-3"

    polylines = group.findall(f"{SVG}polyline")
    assert [p.get("points") for p in polylines] == ["1,9 11,9 11,4", "11,4 1,4", "1,4 1,1"]
    assert polylines[0].get("stroke") == "#000000"
    assert polylines[1].get("stroke-dasharray") is not None
    assert polylines[2].get("stroke") == "#1f77b4"


def test_emit_svg_complex(unit_square: CellComplex) -> None:
    root = ElementTree.fromstring(emit_svg(unit_square))
    assert len(root.findall(f"{SVG}g/{SVG}polyline")) == 4
    assert root.get("viewBox") == "0 0 3 3"


def test_emit_svg_empty() -> None:
    root = ElementTree.fromstring(emit_svg(ToolPath()))
    assert root.get("viewBox") == "0 0 2 2"
    assert root.findall(f"{SVG}g/{SVG}polyline") == []


def test_extrusion(cfg: PrintConfig) -> None:
    expected = 0.2 * 0.4 * 10 / (math.pi * 0.875**2)
    assert extrusion(10.0, cfg) == pytest.approx(expected)

    with pytest.raises(ConfigError, match="Layer height"):
        extrusion(10.0, PrintConfig())


def test_emit_gcode(path: ToolPath, cfg: PrintConfig) -> None:
    gcode = emit_gcode([(0.2, path), (0.4, path)], cfg)
    lines = gcode.splitlines()

    assert lines[0] == "; generated by infill-euler"
    assert "layers: 2" in lines[1]
    assert lines.count(";LAYER:0") == 1
    assert lines.count(";LAYER:1") == 1
    assert "G0 F6000 Z0.200" in lines
    assert "G0 F6000 Z0.400" in lines
    assert lines[-1] == "M84"

    # Every layer starts with a move to the first print, then a travel between the two print runs
    layer = lines[lines.index(";LAYER:0") + 1 : lines.index(";LAYER:1")]
    assert layer[1] == "G0 X0.000 Y0.000"
    assert layer[2].startswith("G1 F1200 X10.000 Y0.000 E")
    assert layer[4] == "G0 X0.000 Y5.000"
    assert sum(1 for line in layer if line.startswith("G1")) == 3

    extruded = [float(m) for m in re.findall(r"^G1 .* E([0-9.]+)$", gcode, re.MULTILINE)]
    assert len(extruded) == 6
    assert extruded == sorted(extruded)
    assert extruded[-1] == pytest.approx(extrusion(2 * 18.0, cfg), abs=1e-5)


def test_emit_gcode_custom_header(path: ToolPath, cfg: PrintConfig) -> None:
    gcode = emit_gcode([(0.2, path)], cfg, header="; r={extruder_radius}\n", footer="; end of {layers}\n")
    assert gcode.startswith("; r=0.2\n;LAYER:0\n")
    assert gcode.endswith("; end of 1\n")


def test_emit_gcode_order(path: ToolPath, cfg: PrintConfig) -> None:
    with pytest.raises(ConfigError, match="strictly increasing"):
        emit_gcode([(0.4, path), (0.4, path)], cfg)


def test_emit_gcode_travel_only(cfg: PrintConfig) -> None:
    path = ToolPath(moves=[Move(MoveKind.TRAVEL, Point2(0, 0), Point2(5, 5))])
    gcode = emit_gcode([(0.2, path)], cfg)
    assert "G0 X5.000 Y5.000" in gcode
    assert not any(line.startswith("G1") for line in gcode.splitlines())
