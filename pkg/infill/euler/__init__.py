from infill.euler.complex import CellComplex, Face, MeshScheme, complex_from_rings, mesh_region, validate_input
from infill.euler.emit import emit_gcode, emit_svg
from infill.euler.euler import (
    EulerComplex,
    cardinalities,
    euler_transform,
    generalized_euler_transform,
    local_euler_transform,
    verify_euler,
)
from infill.euler.exceptions import (
    ConfigError,
    DegenerateGeometry,
    Error,
    InternalInvariantViolation,
    InvalidComplex,
    InvalidLayers,
    NotEulerian,
    NotEulerReady,
    OffsetChangesGeometry,
)
from infill.euler.feasibility import check_extruder_feasibility
from infill.euler.geometry import Point2, Polygon, Region, minkowski_inset, mitered_offset
from infill.euler.pipeline import JobConfig, run_pipeline
from infill.euler.slicing import Layer, LayerStack, PrintConfig, clip, patch, plan_layer, support_perimeter
from infill.euler.toolpath import ToolPath, circuit_tree, generate_toolpath, traversal_restrictions

__all__ = [
    "CellComplex",
    "ConfigError",
    "DegenerateGeometry",
    "Error",
    "EulerComplex",
    "Face",
    "InternalInvariantViolation",
    "InvalidComplex",
    "InvalidLayers",
    "JobConfig",
    "Layer",
    "LayerStack",
    "MeshScheme",
    "NotEulerReady",
    "NotEulerian",
    "OffsetChangesGeometry",
    "Point2",
    "Polygon",
    "PrintConfig",
    "Region",
    "ToolPath",
    "cardinalities",
    "check_extruder_feasibility",
    "circuit_tree",
    "clip",
    "complex_from_rings",
    "emit_gcode",
    "emit_svg",
    "euler_transform",
    "generalized_euler_transform",
    "generate_toolpath",
    "local_euler_transform",
    "mesh_region",
    "minkowski_inset",
    "mitered_offset",
    "patch",
    "plan_layer",
    "run_pipeline",
    "support_perimeter",
    "traversal_restrictions",
    "validate_input",
    "verify_euler",
]
