"""Command-line entry points: ibmg run | print-config | snapshot."""

from __future__ import annotations

import argparse
import sys

from .bench import (
    format_config,
    load_config,
    run_experiment,
    run_point,
    snapshot_fields,
    sweep_points,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ibmg",
        description="Stokes immersed-boundary multigrid benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the sweep described by a config file")
    run_p.add_argument("config", help="flat key = value config file")
    run_p.add_argument("--out-dir", default=None, help="override the output directory")
    run_p.add_argument("--jobs", type=int, default=None, help="concurrent sweep points")

    sub.add_parser("print-config", help="print every config key with its default")

    snap_p = sub.add_parser(
        "snapshot", help="run the first sweep point and write a field snapshot"
    )
    snap_p.add_argument("config")
    snap_p.add_argument("-o", "--output", default="fields.csv")

    args = parser.parse_args(argv)

    if args.command == "print-config":
        sys.stdout.write(format_config())
        return 0

    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        parser.error(f"bad config: {exc}")

    if args.command == "run":
        if args.jobs is not None:
            cfg["jobs"] = args.jobs
        return run_experiment(cfg, out_dir=args.out_dir)

    if args.command == "snapshot":
        point = sweep_points(cfg)[0]
        result, problem = run_point(point, cfg)
        snapshot_fields(result, problem, args.output)
        print(f"wrote {args.output} for {point.run_id()}")
        return 0

    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
