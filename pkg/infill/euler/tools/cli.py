from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from infill.euler.complex import MeshScheme
from infill.euler.euler import EulerComplex, cardinalities, verify_euler
from infill.euler.exceptions import (
    ConfigError,
    DegenerateGeometry,
    InternalInvariantViolation,
    InvalidComplex,
    InvalidLayers,
)
from infill.euler.formats import complex_to_json, dump_json, load_layers
from infill.euler.pipeline import DomainMode, ExitCode, JobConfig, _domains, _transform, run_pipeline
from infill.euler.slicing import LayerStack, PrintConfig, SupportMode, check_epsilon_continuity

log = logging.getLogger(__name__)

LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--layers", type=Path, required=True, help="layers JSON file")
    parser.add_argument("--cell-size", type=float, default=5.0, help="mesh cell size in mm")
    parser.add_argument("--offset", type=float, help="Euler transformation offset in mm, per cell safe offset if unset")
    parser.add_argument("--extruder-radius", type=float, default=0.2, help="extruder radius r in mm")
    parser.add_argument("--overhang-c", type=float, default=0.5, help="overhang factor c, epsilon = c * r")
    parser.add_argument("--iterations", type=int, help="Euler transformation passes (default: 1, or 2 if needed)")
    parser.add_argument("--scheme", choices=[s.value for s in MeshScheme], default="grid", help="mesh scheme")
    parser.add_argument("--domain", choices=[d.value for d in DomainMode], default="hull", help="domain outline")
    parser.add_argument("--support", choices=[s.value for s in SupportMode], default="perimeter", help="support mode")
    parser.add_argument("--extra-perimeter", action="store_true", help="print one more loop along the fill boundary")
    parser.add_argument("--jobs", type=int, default=1, help="number of layers processed concurrently")
    parser.add_argument("--format", action="append", choices=["svg", "gcode", "json"], help="output format")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="increase verbosity")


def _config(args: argparse.Namespace, formats: tuple[str, ...] | None = None) -> JobConfig:
    cfg = PrintConfig(
        extruder_radius=args.extruder_radius,
        overhang_c=args.overhang_c,
        cell_size=args.cell_size,
        offset=args.offset,
        support_mode=args.support,
        extra_perimeter=args.extra_perimeter,
    )
    return JobConfig(
        print_config=cfg,
        scheme=args.scheme,
        iterations=args.iterations,
        domain=args.domain,
        formats=formats or tuple(args.format or ("svg", "gcode")),
        jobs=args.jobs,
        output=args.out,
    )


def _transformed(args: argparse.Namespace) -> tuple[JobConfig, LayerStack, list[EulerComplex]]:
    config = _config(args)
    stack = load_layers(args.layers)
    domains = _domains(stack, config.print_config, config.domain)
    return config, stack, [_transform(domain, config, config.print_config)[0] for domain in domains]


def cmd_plan(args: argparse.Namespace) -> int:
    result = run_pipeline(args.layers, _config(args))
    report = result.report
    print(
        f"{len(report.layers)} layers, {sum(layer.walks for layer in report.layers)} walks, "
        f"{report.crossovers} crossovers, exit {int(report.exit_code)}"
    )
    return int(report.exit_code)


def cmd_transform(args: argparse.Namespace) -> int:
    _, _, khats = _transformed(args)
    if args.out is None:
        dump_json([complex_to_json(Khat) for Khat in khats], sys.stdout)
        return ExitCode.OK

    args.out.mkdir(parents=True, exist_ok=True)
    for index, Khat in enumerate(khats):
        with (args.out / f"complex_{index}.json").open("w") as fh:
            dump_json(complex_to_json(Khat), fh)
    return ExitCode.OK


def cmd_check(args: argparse.Namespace) -> int:
    config, stack, khats = _transformed(args)
    summary = {
        "continuity": [
            {"lower": c.lower, "upper": c.upper, "violations": c.violations}
            for c in check_epsilon_continuity(stack, config.print_config)
        ],
        "domains": [],
    }
    ok = True
    for Khat in khats:
        degrees = verify_euler(Khat)
        counts = cardinalities(Khat)
        ok &= degrees.is_euler and degrees.is_planar and degrees.is_connected
        summary["domains"].append(
            {
                "degrees": {str(k): v for k, v in sorted(degrees.multi_histogram.items())},
                "drawn_degrees": {str(k): v for k, v in sorted(degrees.histogram.items())},
                "crossings": len(degrees.crossings),
                "components": degrees.components,
                "cardinalities": {k: list(v) for k, v in counts.items()},
            }
        )
    print(json.dumps(summary, indent=2, sort_keys=True))
    return ExitCode.OK if ok else ExitCode.INTERNAL


def cmd_render(args: argparse.Namespace) -> int:
    if args.out is None:
        raise ConfigError("render needs an output directory (--out)")
    result = run_pipeline(args.layers, _config(args, formats=("svg",)))
    return int(result.report.exit_code)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="infill-euler",
        description="Continuous, crossover-free infill tool paths for layered prints",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, func, summary in (
        ("plan", cmd_plan, "run the full pipeline and write tool paths"),
        ("transform", cmd_transform, "write the Euler transformed domain only"),
        ("check", cmd_check, "validate the input and check the transformation invariants"),
        ("render", cmd_render, "write SVG previews of every layer"),
    ):
        sub = subparsers.add_parser(name, help=summary, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        _add_common(sub)
        sub.set_defaults(func=func)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=LOG_LEVELS[min(args.verbose, len(LOG_LEVELS) - 1)],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return int(args.func(args))
    except (InvalidComplex, InvalidLayers, ConfigError, DegenerateGeometry) as e:
        log.error("%s", e)
        return ExitCode.INVALID
    except InternalInvariantViolation as e:
        log.error("Internal check failed: %s", e)
        return ExitCode.INTERNAL


if __name__ == "__main__":
    sys.exit(main())
