from __future__ import annotations

import io
import logging
import math
from typing import TYPE_CHECKING

from infill.euler.complex import CellComplex
from infill.euler.exceptions import ConfigError
from infill.euler.toolpath import MoveKind, ToolPath

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from infill.euler.geometry import Point2
    from infill.euler.slicing import PrintConfig
    from infill.euler.toolpath import Move

log = logging.getLogger(__name__)

SVG_MARGIN = 1.0
PRINT_FEED = 1200.0
TRAVEL_FEED = 6000.0

DEFAULT_HEADER = """; generated by infill-euler
; layers: {layers}, layer height: {layer_height} mm, extruder radius: {extruder_radius} mm
G21
G90
M82
G92 E0
"""
DEFAULT_FOOTER = """G92 E0
M84
"""

_STROKES = {
    (MoveKind.PRINT, "infill"): 'stroke="#000000"',
    (MoveKind.PRINT, "support"): 'stroke="#1f77b4"',
    (MoveKind.PRINT, "perimeter"): 'stroke="#2ca02c"',
    (MoveKind.TRAVEL, "infill"): 'stroke="#999999" stroke-dasharray="0.8,0.8"',
    (MoveKind.TRAVEL, "support"): 'stroke="#999999" stroke-dasharray="0.8,0.8"',
    (MoveKind.TRAVEL, "perimeter"): 'stroke="#999999" stroke-dasharray="0.8,0.8"',
}


def _num(value: float) -> str:
    text = f"{value:.4f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def _polylines(moves: Iterable[Move]) -> list[tuple[tuple[MoveKind, str], list[Point2]]]:
    """Chain consecutive moves of one kind and source into polylines."""
    chains: list[tuple[tuple[MoveKind, str], list[Point2]]] = []
    for move in moves:
        key = (move.kind, move.source)
        if chains and chains[-1][0] == key and chains[-1][1][-1] == move.start:
            chains[-1][1].append(move.end)
        else:
            chains.append((key, [move.start, move.end]))
    return chains


def emit_svg(item: ToolPath | CellComplex, layer: int = 0, stroke_width: float = 0.2) -> str:
    """Render a tool path or a complex as an SVG document in millimetres with the y axis pointing up."""
    if isinstance(item, ToolPath):
        shapes = _polylines(item.moves)
    else:
        shapes = [((MoveKind.PRINT, "infill"), list(item.segment(e))) for e in item.edges]

    points = [p for _, chain in shapes for p in chain]
    if points:
        min_x = min(p[0] for p in points) - SVG_MARGIN
        max_x = max(p[0] for p in points) + SVG_MARGIN
        min_y = min(p[1] for p in points) - SVG_MARGIN
        max_y = max(p[1] for p in points) + SVG_MARGIN
    else:
        min_x, max_x, min_y, max_y = 0.0, 2 * SVG_MARGIN, 0.0, 2 * SVG_MARGIN

    width, height = max_x - min_x, max_y - min_y

    def _xy(p: Point2) -> str:
        return f"{_num(p[0] - min_x)},{_num(max_y - p[1])}"

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(width)}mm" height="{_num(height)}mm" '
        f'viewBox="0 0 {_num(width)} {_num(height)}">',
        f'  <g id="layer-{layer}" fill="none" stroke-width="{_num(stroke_width)}" stroke-linecap="round" '
        'stroke-linejoin="round">',
    ]
    for key, chain in shapes:
        lines.append(f'    <polyline {_STROKES[key]} points="{" ".join(_xy(p) for p in chain)}"/>')
    lines.append("  </g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def extrusion(length: float, cfg: PrintConfig) -> float:
    """Filament length fed for a bead of width 2r, height h and the given length."""
    if cfg.layer_height is None:
        raise ConfigError("Layer height is required to compute extrusion")
    area = math.pi * (cfg.filament_diameter / 2) ** 2
    return cfg.layer_height * 2 * cfg.extruder_radius * length / area


def emit_gcode(
    paths: Sequence[tuple[float, ToolPath]],
    cfg: PrintConfig,
    header: str = DEFAULT_HEADER,
    footer: str = DEFAULT_FOOTER,
) -> str:
    """Emit absolute-coordinate G-code for ``(z, tool path)`` pairs in layer order.

    Travel moves become G0, print moves G1 with an absolute, ever increasing extruder position.
    """
    for (lower, _), (upper, _) in zip(paths, paths[1:]):
        if not upper > lower:
            raise ConfigError(f"Layer heights must be strictly increasing: {lower} followed by {upper}")

    out = io.StringIO()
    fields = {
        "layers": len(paths),
        "layer_height": cfg.layer_height,
        "extruder_radius": cfg.extruder_radius,
    }
    out.write(header.format(**fields))

    e = 0.0
    for index, (z, path) in enumerate(paths):
        out.write(f";LAYER:{index}\n")
        out.write(f"G0 F{_num(TRAVEL_FEED)} Z{z:.3f}\n")
        position = None
        for move in path.moves:
            if move.kind == MoveKind.TRAVEL:
                out.write(f"G0 X{move.end[0]:.3f} Y{move.end[1]:.3f}\n")
                position = move.end
                continue

            if position != move.start:
                out.write(f"G0 X{move.start[0]:.3f} Y{move.start[1]:.3f}\n")
            e += extrusion(move.length, cfg)
            out.write(f"G1 F{_num(PRINT_FEED)} X{move.end[0]:.3f} Y{move.end[1]:.3f} E{e:.5f}\n")
            position = move.end

    out.write(footer.format(**fields))
    log.debug("Emitted G-code for %d layers, %.3f mm of filament", len(paths), e)
    return out.getvalue()
