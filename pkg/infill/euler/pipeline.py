from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import TYPE_CHECKING

import shapely
from shapely.geometry.polygon import orient

from infill.euler.complex import MeshScheme, mesh_region, validate_input
from infill.euler.emit import DEFAULT_FOOTER, DEFAULT_HEADER, emit_gcode, emit_svg
from infill.euler.euler import (
    EulerComplex,
    cardinalities,
    euler_transform,
    euler_transform_relaxed,
    generalized_euler_transform,
    local_euler_transform,
    verify_euler,
)
from infill.euler.exceptions import ConfigError, InternalInvariantViolation, InvalidLayers, OffsetChangesGeometry
from infill.euler.feasibility import check_extruder_feasibility
from infill.euler.formats import complex_to_json, dump_json, load_layers
from infill.euler.geometry import Polygon, Region, inset_pieces
from infill.euler.slicing import LayerStack, PrintConfig, check_epsilon_continuity, plan_layer
from infill.euler.toolpath import (
    Move,
    MoveKind,
    ToolPath,
    check_crossovers,
    circuit_tree,
    generate_toolpath,
    traversal_restrictions,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    from infill.euler.slicing import Layer

log = logging.getLogger(__name__)

FORMATS = ("svg", "gcode", "json")


class DomainMode(Enum):
    HULL = "hull"
    UNION = "union"


class ExitCode(IntEnum):
    OK = 0
    # An invariant check failed
    INTERNAL = 1
    INVALID = 2
    INFEASIBLE = 3


@dataclass
class JobConfig:
    print_config: PrintConfig = field(default_factory=PrintConfig)
    scheme: MeshScheme = MeshScheme.GRID
    iterations: int | None = None
    domain: DomainMode = DomainMode.HULL
    formats: tuple[str, ...] = ("svg", "gcode")
    jobs: int = 1
    output: Path | None = None
    gcode_header: str = DEFAULT_HEADER
    gcode_footer: str = DEFAULT_FOOTER

    def __post_init__(self):
        try:
            self.scheme = MeshScheme(self.scheme)
            self.domain = DomainMode(self.domain)
        except ValueError as e:
            raise ConfigError(str(e))

        if self.iterations is not None and self.iterations < 1:
            raise ConfigError(f"Iterations must be at least 1: {self.iterations}")
        if self.jobs < 1:
            raise ConfigError(f"Worker count must be at least 1: {self.jobs}")

        self.formats = tuple(self.formats)
        unknown = set(self.formats) - set(FORMATS)
        if unknown:
            raise ConfigError(f"Unknown output formats: {sorted(unknown)}")

        if self.output is not None:
            self.output = Path(self.output)


@dataclass
class LayerReport:
    index: int
    z: float
    entries: int = 0
    components: int = 0
    boundary_vertices: int = 0
    patch_arcs: int = 0
    forced_travel: int = 0
    travel_edges: int = 0
    arcs_affected: int = 0
    crossovers: list[int] = field(default_factory=list)
    support_loops: int = 0
    unsupported: int = 0
    walks: int = 0
    print_length: float = 0.0
    travel_length: float = 0.0
    unresolved: int = 0
    warnings: list[str] = field(default_factory=list)


@dataclass
class JobReport:
    layers: list[LayerReport] = field(default_factory=list)
    cardinalities: list[dict[str, tuple[int, int]]] = field(default_factory=list)
    degree_checks: list[bool] = field(default_factory=list)
    continuity_violations: list[tuple[int, list[int]]] = field(default_factory=list)
    iterations: int = 1
    timings: dict[str, float] = field(default_factory=dict)
    exit_code: ExitCode = ExitCode.OK

    @property
    def crossovers(self) -> int:
        return sum(len(layer.crossovers) for layer in self.layers)

    def to_dict(self) -> dict:
        return {
            "exit_code": int(self.exit_code),
            "iterations": self.iterations,
            "cardinalities": [{k: list(v) for k, v in c.items()} for c in self.cardinalities],
            "degree_checks": self.degree_checks,
            "continuity_violations": [[upper, polygons] for upper, polygons in self.continuity_violations],
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
            "layers": [dataclasses.asdict(layer) for layer in self.layers],
        }


@dataclass
class JobResult:
    report: JobReport
    domains: list[EulerComplex]
    paths: list[tuple[float, ToolPath]]


def _domains(stack: LayerStack, cfg: PrintConfig, mode: DomainMode) -> list[Polygon]:
    """Outlines to mesh: the insets of every layer polygon, projected onto one plane and merged."""
    pieces = [
        piece.to_shapely()
        for region in stack.regions()
        for piece in inset_pieces(region, cfg.extruder_radius, cfg.disk_segments)
    ]
    if not pieces:
        raise InvalidLayers("No layer polygon is wide enough to fill")

    union = shapely.union_all(pieces)
    if mode == DomainMode.HULL:
        parts = [union.convex_hull]
    else:
        parts = sorted(shapely.get_parts(union), key=lambda g: (-g.area, g.bounds))

    # Hole rings are dropped, clipping removes whatever the mesh puts inside them
    return [Polygon(tuple(orient(shapely.Polygon(part.exterior), -1.0).exterior.coords)) for part in parts]


def _transform(domain: Polygon, config: JobConfig, cfg: PrintConfig) -> tuple[EulerComplex, int]:
    K = mesh_region(domain, cfg.cell_size, config.scheme)
    iterations = config.iterations
    if iterations is None:
        iterations = 1 if validate_input(K).is_et_ready else 2

    try:
        if iterations == 1:
            Khat = euler_transform(K, cfg.offset)
        else:
            Khat = generalized_euler_transform(K, cfg.offset, iterations)
    except OffsetChangesGeometry as e:
        log.warning("Offset changes cell geometry (%s), falling back to the local transformation", e)
        Khat, collapse = euler_transform_relaxed(K, cfg.offset)
        Khat = local_euler_transform(Khat, collapse)

    return Khat, iterations


def _domain_of(region: Region, domains: Sequence[Polygon]) -> int:
    shape = region.to_shapely()
    return max(range(len(domains)), key=lambda i: (shape.intersection(domains[i].to_shapely()).area, -i))


def _process_layer(
    index: int,
    layer: Layer,
    domains: Sequence[Polygon],
    khats: Sequence[EulerComplex],
    cfg: PrintConfig,
) -> tuple[LayerReport, ToolPath]:
    report = LayerReport(index, layer.z)
    layer_path = ToolPath()

    groups: dict[int, list[Region]] = {}
    for region in layer.polygons:
        groups.setdefault(_domain_of(region, domains) if len(domains) > 1 else 0, []).append(region)

    for d, regions in sorted(groups.items()):
        for entry in plan_layer(khats[d], regions, cfg):
            K = entry.complex
            report.entries += 1
            report.warnings.extend(entry.warnings)
            report.unsupported += len(entry.support.unsupported)
            if entry.clipped is not None:
                report.boundary_vertices += len(entry.clipped.boundary_vertices)
            if entry.patch is not None:
                report.patch_arcs += len(entry.patch.arcs)

            feas = check_extruder_feasibility(K, cfg, entry.patch, entry.inset)
            tree = circuit_tree(K)
            restrictions = traversal_restrictions(tree, K)
            path = generate_toolpath(K, tree, restrictions, feas, entry.support)
            crossovers = check_crossovers(path, K)

            report.components += len(K.components)
            report.forced_travel += feas.travel_count
            report.travel_edges += len(feas.forced_travel_edges)
            report.arcs_affected += feas.arcs_affected
            report.unresolved += len(feas.unresolved)
            report.crossovers.extend(crossovers)
            report.support_loops += path.loops
            report.walks += len(path.walks)

            if layer_path.moves and path.moves:
                layer_path.moves.append(Move(MoveKind.TRAVEL, layer_path.moves[-1].end, path.moves[0].start))
            layer_path.moves.extend(path.moves)
            layer_path.restrictions.extend(path.restrictions)
            layer_path.walks.extend(path.walks)
            layer_path.loops += path.loops

    report.print_length = layer_path.print_length
    report.travel_length = layer_path.travel_length
    log.info(
        "Layer %d at z=%s: %d entries, %d walks, %d support loops, %d forced travels",
        index,
        layer.z,
        report.entries,
        report.walks,
        report.support_loops,
        report.forced_travel,
    )
    return report, layer_path


def run_pipeline(stack: LayerStack | Path | str, config: JobConfig | None = None) -> JobResult:
    """Plan continuous, crossover-free infill tool paths for every layer of a stack.

    The layer insets are projected onto one plane and merged into a domain, which is meshed and
    Euler transformed once. Every layer is then clipped, patched, supported and walked. Outputs are
    written to ``config.output`` when set.
    """
    config = config or JobConfig()
    if not isinstance(stack, LayerStack):
        stack = load_layers(stack)

    cfg = config.print_config
    if cfg.layer_height is None:
        cfg = dataclasses.replace(cfg, layer_height=stack.layer_height)

    report = JobReport()
    started = time.perf_counter()

    for continuity in check_epsilon_continuity(stack, cfg):
        if not continuity.continuous:
            report.continuity_violations.append((continuity.upper, continuity.violations))

    domains = _domains(stack, cfg, config.domain)
    khats = []
    for domain in domains:
        Khat, report.iterations = _transform(domain, config, cfg)
        degrees = verify_euler(Khat.printable)
        passed = degrees.is_euler and degrees.is_planar and degrees.is_connected
        report.degree_checks.append(passed)
        report.cardinalities.append(cardinalities(Khat))
        if not passed:
            raise InternalInvariantViolation(
                f"Transformed domain fails its checks: odd vertices {degrees.odd_vertices}, "
                f"{len(degrees.crossings)} crossings, {degrees.components} components"
            )
        khats.append(Khat)
    report.timings["transform"] = time.perf_counter() - started

    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=config.jobs) as executor:
        futures = [
            executor.submit(_process_layer, i, layer, domains, khats, cfg) for i, layer in enumerate(stack.layers)
        ]
        results = [future.result() for future in futures]
    report.timings["layers"] = time.perf_counter() - started

    paths = []
    for layer_report, path in results:
        report.layers.append(layer_report)
        paths.append((layer_report.z, path))

    if report.crossovers:
        report.exit_code = ExitCode.INTERNAL
    elif any(layer.unresolved for layer in report.layers):
        report.exit_code = ExitCode.INFEASIBLE

    result = JobResult(report, khats, paths)
    if config.output is not None:
        write_outputs(result, config, cfg)

    if report.crossovers:
        raise InternalInvariantViolation(f"Tool paths cross over at {report.crossovers} vertices")
    return result


def write_outputs(result: JobResult, config: JobConfig, cfg: PrintConfig) -> None:
    out = config.output
    out.mkdir(parents=True, exist_ok=True)

    if "svg" in config.formats:
        for index, (_, path) in enumerate(result.paths):
            (out / f"layer_{index:04d}.svg").write_text(emit_svg(path, index, 2 * cfg.extruder_radius))

    if "gcode" in config.formats:
        gcode = emit_gcode(result.paths, cfg, config.gcode_header, config.gcode_footer)
        (out / "toolpath.gcode").write_text(gcode)

    if "json" in config.formats:
        for index, Khat in enumerate(result.domains):
            with (out / f"complex_{index}.json").open("w") as fh:
                dump_json(complex_to_json(Khat), fh)

    with (out / "report.json").open("w") as fh:
        dump_json(result.report.to_dict(), fh)
    log.info("Wrote %s to %s", ", ".join([*config.formats, "report"]), out)
