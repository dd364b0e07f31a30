"""
main_cli.py

CLI entry point for the verification engine. Run with:
    contactlab check --scenario heisenberg-sasakian
    contactlab list-scenarios
    contactlab run --all --seed 7 --format jsonl
"""

import argparse
import os
import sys

from contactlab.core.config import Config, default_config_paths, load_config
from contactlab.core.instrumentation import (
    setup_instrumentation_config,
    setup_instrumentation_file,
)
from contactlab.core.report import emit_report
from contactlab.core.sampling import SamplingSpec
from contactlab.core.scenarios import exit_code, load_registry, run_scenario


def _grid(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"grid must look like 8x8x16, got '{text}'") from e
    if len(dims) != 3 or any(k < 1 for k in dims):
        raise argparse.ArgumentTypeError(f"grid must be 3 positive sizes, got '{text}'")
    return dims


def _common(parser: argparse.ArgumentParser) -> None:
    # fmt: off
    parser.add_argument(
        "-c",
        "--config",
        type=str,
        action="append",
        help="Path to config yaml (can be used multiple times)",
    )
    parser.add_argument(
        "--log",
        nargs="?",
        const="contactlab-log.jsonl",
        default=None,
        help="Save check tracing to a file. Defaults to contactlab-log.jsonl if no filename is provided.",
    )
    sampling = parser.add_mutually_exclusive_group()
    sampling.add_argument(
        "--grid",
        type=_grid,
        help="Grid sampling AxBxC (default 8x8x16)"
    )
    sampling.add_argument(
        "--random",
        type=int,
        metavar="N",
        help="Seeded uniform sampling of N points"
    )
    parser.add_argument(
        "--seed",
        type=int,
        help="Seed for random sampling and probe vectors (default 7)"
    )
    parser.add_argument(
        "--tol",
        type=float,
        help="Absolute residual tolerance (default 1e-8, or the scenario's own)"
    )
    parser.add_argument(
        "--format",
        choices=["table", "jsonl", "csv"],
        help="Report format"
    )
    parser.add_argument(
        "--out",
        type=str,
        help="Write the report to a file instead of stdout"
    )
    parser.add_argument(
        "--workers",
        type=int,
        help="Threads for point chunks; output does not depend on it"
    )
    # fmt: on


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Verify contact metric geometry identities on explicit charts."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="Run one scenario")
    _common(check)
    # fmt: off
    check.add_argument(
        "--scenario",
        required=True,
        help="Scenario name (see list-scenarios)"
    )
    check.add_argument(
        "--structure",
        type=str,
        help="Structure-definition JSON file replacing the scenario's structure"
    )
    check.add_argument(
        "--f",
        type=str,
        help="Deformation function of z for the g^f structure, e.g. '0.1*sin(2*z)'"
    )
    check.add_argument(
        "--variant",
        choices=["paper-literal", "derived", "half-offdiag"],
        help="g^f variant"
    )
    check.add_argument(
        "--a",
        type=float,
        help="D-homothety constant"
    )
    # fmt: on

    run = sub.add_parser("run", help="Run scenarios from the registry")
    _common(run)
    run.add_argument("--all", action="store_true", required=True, help="Run every scenario")

    sub.add_parser("list-scenarios", help="List built-in scenarios")
    return parser


def _merge_config(config: Config, args) -> Config:
    """CLI flags override config file values."""
    sampling = config.sampling.model_copy()
    if args.grid is not None:
        sampling = sampling.model_copy(update={"grid": args.grid, "random": None})
    if args.random is not None:
        sampling = sampling.model_copy(update={"random": args.random})
    if args.seed is not None:
        sampling = sampling.model_copy(update={"seed": args.seed})
    checks = config.checks
    if args.workers is not None:
        checks = checks.model_copy(update={"workers": args.workers})
    output = config.output
    if args.format is not None:
        output = output.model_copy(update={"format": args.format})
    if args.out is not None:
        output = output.model_copy(update={"out": args.out})
    return config.model_copy(update={"sampling": sampling, "checks": checks, "output": output})


def main():
    """Main function for the CLI."""
    parser = build_parser()
    args = parser.parse_args()

    try:
        registry = load_registry()
    except RuntimeError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(2)

    if args.command == "list-scenarios":
        for name, scenario in registry.items():
            print(f"{name:<40} {scenario.expect:<15} {scenario.description}")
        return

    try:
        paths = default_config_paths(args.config)
        config = _merge_config(load_config(paths), args)
    except (RuntimeError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(2)

    if config.trace:
        setup_instrumentation_config(config.trace)
    elif args.log:
        setup_instrumentation_file(args.log)

    if args.command == "check":
        if args.scenario not in registry:
            print(f"Error: unknown scenario '{args.scenario}'", file=sys.stderr)
            sys.exit(2)
        if args.structure and not os.path.exists(args.structure):
            print(f"Error: structure file '{args.structure}' not found", file=sys.stderr)
            sys.exit(2)
        try:
            scenario = registry[args.scenario].with_overrides(
                structure_file=args.structure, f=args.f, variant=args.variant, a=args.a
            )
        except ValueError as e:
            print(f"Error: {e}", file=sys.stderr)
            sys.exit(2)
        scenarios = [scenario]
    else:
        scenarios = list(registry.values())

    explicit = args.grid is not None or args.random is not None or args.seed is not None
    spec: SamplingSpec | None = config.sampling.spec() if explicit or paths else None
    reports = [
        run_scenario(
            s,
            tolerance=args.tol if args.tol is not None else _config_tolerance(config, s),
            sampling=spec,
            workers=config.checks.workers,
            chunk_size=config.checks.chunk_size,
        )
        for s in scenarios
    ]

    out = config.output
    if out.out:
        with open(os.path.expanduser(out.out), "w", encoding="utf-8") as f:
            emit_report(reports, out.format, f)
    else:
        emit_report(reports, out.format, sys.stdout)

    for r in reports:
        if r.verdict == "error":
            print(f"Error in {r.scenario}: {r.notes.get('error', '')}", file=sys.stderr)
    sys.exit(exit_code(reports))


def _config_tolerance(config: Config, scenario) -> float | None:
    # scenario's own tolerance wins over the config default
    if scenario.tolerance is not None:
        return None
    return config.checks.tolerance


if __name__ in {"__main__", "__mp_main__"}:
    main()
