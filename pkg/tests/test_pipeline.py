from __future__ import annotations

import json
from typing import TYPE_CHECKING

import pytest

from infill.euler.complex import MeshScheme
from infill.euler.euler import DegreeReport
from infill.euler.exceptions import ConfigError, InternalInvariantViolation, InvalidLayers
from infill.euler.geometry import Region
from infill.euler.pipeline import DomainMode, ExitCode, JobConfig, _domains, run_pipeline
from infill.euler.slicing import Layer, LayerStack, PrintConfig
from infill.euler.toolpath import MoveKind
from tests.conftest import square, write_layers

if TYPE_CHECKING:
    from pathlib import Path


@pytest.mark.parametrize(
    "kwargs",
    [
        {"jobs": 0},
        {"iterations": 0},
        {"formats": ("pdf",)},
        {"scheme": "hexagons"},
        {"domain": "box"},
    ],
)
def test_job_config_invalid(kwargs: dict) -> None:
    with pytest.raises(ConfigError):
        JobConfig(**kwargs)


def test_job_config_coerces() -> None:
    config = JobConfig(scheme="triangles", domain="union", formats=["json"], output="out")
    assert config.scheme == MeshScheme.TRIANGLES
    assert config.domain == DomainMode.UNION
    assert config.formats == ("json",)
    assert config.output.name == "out"


@pytest.fixture
def islands() -> LayerStack:
    """Two separate squares on one layer."""
    return LayerStack((Layer(0.2, (Region(square(0, 0, 10, 10)), Region(square(20, 0, 26, 6)))),), 0.2)


def test_domains(islands: LayerStack) -> None:
    cfg = PrintConfig()
    (hull,) = _domains(islands, cfg, DomainMode.HULL)
    assert hull.to_shapely().bounds == pytest.approx((0.2, 0.2, 25.8, 9.8))

    union = _domains(islands, cfg, DomainMode.UNION)
    assert len(union) == 2
    assert union[0].to_shapely().area > union[1].to_shapely().area


def test_domains_too_thin() -> None:
    stack = LayerStack((Layer(0.2, (Region(square(0, 0, 10, 0.3)),)),), 0.2)
    with pytest.raises(InvalidLayers, match="wide enough"):
        _domains(stack, PrintConfig(), DomainMode.HULL)


def test_slab(slab: LayerStack) -> None:
    result = run_pipeline(slab)
    report = result.report
    assert len(report.layers) == 1
    assert report.crossovers == 0
    assert report.iterations == 2
    assert report.degree_checks == [True]
    assert report.continuity_violations == []

    # The mesh fills the whole inset, so the layer is the full lattice in a single walk
    Khat = result.domains[0]
    z, path = result.paths[0]
    assert z == 0.2
    assert report.layers[0].walks == 1
    assert report.layers[0].boundary_vertices == 0
    assert path.print_edges == Khat.printable.edges
    assert all(move.kind == MoveKind.PRINT for move in path.moves)
    assert report.layers[0].print_length == pytest.approx(Khat.printable.total_length)
    assert set(report.cardinalities[0]) == {"vertices", "edges", "faces", "vertices@2", "edges@2", "faces@2"}
    assert all(expected == measured for expected, measured in report.cardinalities[0].values())


def test_union_domains(islands: LayerStack) -> None:
    result = run_pipeline(islands, JobConfig(PrintConfig(cell_size=2.0), domain=DomainMode.UNION))
    assert len(result.domains) == 2
    assert len(result.report.degree_checks) == 2
    assert result.report.layers[0].entries == 2
    assert result.report.crossovers == 0


def test_pyramid(pyramid: LayerStack, pyramid_config: PrintConfig) -> None:
    result = run_pipeline(pyramid, JobConfig(pyramid_config, jobs=2))
    report = result.report
    assert len(report.layers) == 20
    assert [layer.index for layer in report.layers] == list(range(20))
    assert report.crossovers == 0
    assert report.continuity_violations == []
    assert report.exit_code == ExitCode.OK

    for layer in report.layers:
        assert layer.unresolved == 0
        assert layer.components == 1
        assert layer.walks == 1
        # Every patch arc pairs two boundary vertices and carries at most one forced travel
        assert 2 * layer.patch_arcs == layer.boundary_vertices
        assert layer.forced_travel <= layer.boundary_vertices // 2
        assert layer.forced_travel <= layer.travel_edges

    zs = [z for z, _ in result.paths]
    assert zs == sorted(zs)
    assert len(set(zs)) == 20


def test_write_outputs(tmp_path: Path, slab: LayerStack) -> None:
    layers = write_layers(tmp_path / "layers.json", slab)
    out = tmp_path / "out"
    result = run_pipeline(layers, JobConfig(formats=("svg", "gcode", "json"), output=out))

    assert (out / "layer_0000.svg").read_text().startswith("<?xml")
    assert ";LAYER:0" in (out / "toolpath.gcode").read_text()
    assert json.loads((out / "complex_0.json").read_text())["iterations"] == 2

    report = json.loads((out / "report.json").read_text())
    assert report["exit_code"] == int(result.report.exit_code)
    assert len(report["layers"]) == 1
    assert report["layers"][0]["z"] == 0.2
    assert set(report["timings"]) == {"transform", "layers"}


def test_continuity_violation_reported(tmp_path: Path) -> None:
    stack = LayerStack(
        (Layer(0.2, (Region(square(0, 0, 10, 10)),)), Layer(0.4, (Region(square(0, 0, 12, 10)),))),
        0.2,
    )
    result = run_pipeline(stack, JobConfig(PrintConfig(extruder_radius=0.4)))
    assert result.report.continuity_violations == [(1, [0])]
    assert len(result.report.layers) == 2


def test_star_stack(star_stack: LayerStack) -> None:
    result = run_pipeline(star_stack, JobConfig(PrintConfig(extruder_radius=0.5)))
    report = result.report
    assert len(report.layers) == 10
    assert report.crossovers == 0
    assert report.degree_checks == [True]
    assert all(layer.walks >= 1 for layer in report.layers)
    assert report.exit_code in (ExitCode.OK, ExitCode.INFEASIBLE)


def test_degree_check_failure(monkeypatch: pytest.MonkeyPatch, slab: LayerStack) -> None:
    monkeypatch.setattr("infill.euler.pipeline.verify_euler", lambda K: DegreeReport(odd_vertices=[3], components=1))
    with pytest.raises(InternalInvariantViolation, match=r"odd vertices \[3\]"):
        run_pipeline(slab)


def test_crossovers_are_internal(monkeypatch: pytest.MonkeyPatch, tmp_path: Path, slab: LayerStack) -> None:
    monkeypatch.setattr("infill.euler.pipeline.check_crossovers", lambda path, K: [0])
    out = tmp_path / "out"
    with pytest.raises(InternalInvariantViolation, match="cross over"):
        run_pipeline(slab, JobConfig(formats=("json",), output=out))

    # The report is still written, with the internal exit code
    report = json.loads((out / "report.json").read_text())
    assert report["exit_code"] == int(ExitCode.INTERNAL) == 1
    assert report["layers"][0]["crossovers"] == [0]
