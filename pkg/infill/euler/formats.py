from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any, BinaryIO, TextIO

from infill.euler.complex import CellClass, CellComplex, Face, Role
from infill.euler.euler import EulerComplex
from infill.euler.exceptions import DegenerateGeometry, InvalidComplex, InvalidLayers
from infill.euler.geometry import Polygon, Region
from infill.euler.slicing import Layer, LayerStack

if TYPE_CHECKING:
    from infill.euler.euler import Provenance

log = logging.getLogger(__name__)


def _load(fh: TextIO | BinaryIO | Path | str, error: type[Exception]) -> Any:
    try:
        if isinstance(fh, (str, Path)):
            with Path(fh).open("rb") as f:
                return json.load(f)
        return json.load(fh)
    except json.JSONDecodeError as e:
        raise error(f"Malformed JSON: {e}")


def dump_json(obj: Any, fh: TextIO) -> None:
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")


def _region(data: dict) -> Region:
    try:
        outer = Polygon(tuple(tuple(map(float, p)) for p in data["outer"]))
        holes = tuple(Polygon(tuple(tuple(map(float, p)) for p in hole)) for hole in data.get("holes", ()))
    except DegenerateGeometry as e:
        raise InvalidLayers(f"Degenerate polygon: {e}")
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidLayers(f"Invalid polygon: {e!r}")

    region = Region(outer, holes)
    if not region.to_shapely().is_valid:
        raise InvalidLayers(f"Polygon is not valid: outer ring starts at {outer.ring[0]}")
    return region


def layers_from_json(data: dict) -> LayerStack:
    """Build a layer stack from a parsed layers document."""
    if not isinstance(data, dict):
        raise InvalidLayers(f"Layers document must be an object, not {type(data).__name__}")

    units = data.get("units", "mm")
    if units != "mm":
        raise InvalidLayers(f"Unsupported units: {units!r}")

    try:
        layer_height = float(data["layer_height"])
        entries = data["layers"]
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidLayers(f"Missing or invalid layers field: {e!r}")

    if not entries:
        raise InvalidLayers("Layers document has no layers")

    layers = []
    for entry in entries:
        try:
            z = float(entry["z"])
            polygons = entry.get("polygons", [])
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise InvalidLayers(f"Invalid layer entry: {e!r}")
        layers.append(Layer(z, tuple(_region(polygon) for polygon in polygons)))

    stack = LayerStack(tuple(layers), layer_height)
    log.debug("Loaded %d layers, layer height %s", len(stack), layer_height)
    return stack


def load_layers(fh: TextIO | BinaryIO | Path | str) -> LayerStack:
    return layers_from_json(_load(fh, InvalidLayers))


def layers_to_json(stack: LayerStack) -> dict:
    def _ring(polygon: Polygon) -> list[list[float]]:
        return [[p.x, p.y] for p in polygon.ring]

    return {
        "units": "mm",
        "layer_height": stack.layer_height,
        "layers": [
            {
                "z": layer.z,
                "polygons": [
                    {"outer": _ring(region.outer), "holes": [_ring(hole) for hole in region.holes]}
                    for region in layer.polygons
                    if not region.is_empty
                ],
            }
            for layer in stack
        ],
    }


def _provenance_to_json(prov: Provenance) -> dict:
    return {
        "class1": {str(k): v for k, v in sorted(prov.class1.items())},
        "class2": {str(k): list(v) for k, v in sorted(prov.class2.items())},
        "class3": {str(k): v for k, v in sorted(prov.class3.items())},
        "vertices": {str(k): list(v) for k, v in sorted(prov.vertices.items())},
        "collapsed_class2": [[list(k), list(v)] for k, v in sorted(prov.collapsed_class2.items())],
        "collapsed_class3": {str(k): [list(e) for e in v] for k, v in sorted(prov.collapsed_class3.items())},
    }


def complex_to_json(K: CellComplex | EulerComplex) -> dict:
    """Serialize a complex. Interior and hole faces are written, the outside face is implied."""
    source = K
    if isinstance(K, EulerComplex):
        K = K.complex

    faces = [face for face in K.faces if face.role != Role.OUTSIDE]
    data = {
        "vertices": [[p.x, p.y] for p in K.vertices],
        "faces": [list(face.vertices) for face in faces],
        "roles": [face.role.value for face in faces],
        "classes": [face.cls.value for face in faces],
    }
    if K.extra_edges:
        data["extra_edges"] = [list(e) for e in K.extra_edges]

    if isinstance(source, EulerComplex):
        data["provenance"] = _provenance_to_json(source.provenance)
        data["offset"] = source.offset_d
        data["iterations"] = source.iterations
    return data


def complex_from_json(data: dict) -> CellComplex:
    """Rebuild a complex from its JSON form; edges follow from the face rings."""
    try:
        vertices = [(float(x), float(y)) for x, y in data["vertices"]]
        rings = [tuple(int(v) for v in ring) for ring in data["faces"]]
        roles = [Role(role) for role in data.get("roles", ["interior"] * len(rings))]
        classes = [CellClass(cls) for cls in data.get("classes", ["none"] * len(rings))]
        extra = [tuple(int(v) for v in e) for e in data.get("extra_edges", [])]
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidComplex(f"Invalid complex document: {e!r}")

    if not len(rings) == len(roles) == len(classes):
        raise InvalidComplex(f"Face, role and class counts differ: {len(rings)}, {len(roles)}, {len(classes)}")

    for ring in rings:
        if len(ring) < 3 or any(not 0 <= v < len(vertices) for v in ring):
            raise InvalidComplex(f"Invalid face ring: {list(ring)}")

    faces = [Face(ring, role, cls) for ring, role, cls in zip(rings, roles, classes)]
    return CellComplex(tuple(vertices), tuple(faces), tuple(extra))


def load_complex(fh: TextIO | BinaryIO | Path | str) -> CellComplex:
    return complex_from_json(_load(fh, InvalidComplex))
