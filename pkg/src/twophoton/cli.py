"""Command line: run, validate and list scenarios.

Exit codes: 0 success, 1 validation failure, 2 runtime failure, 3 a declared
reference check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .scenario import (
    BUILTINS,
    ElementError,
    ScenarioError,
    apply_override,
    builtin_text,
    format_report,
    from_dict,
    run_scenario,
)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_REFERENCE = 0, 1, 2, 3


def _load(source: str, overrides, grid_n):
    p = Path(source)
    if p.is_file():
        text, base = p.read_text(), p.parent
    elif source in BUILTINS:
        text, base = builtin_text(source), None
    else:
        raise ScenarioError(f"no scenario file or builtin named {source!r}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, "", exc.lineno, exc.colno) from None
    if not overrides and grid_n is None:
        return from_dict(doc, text, base)
    for o in overrides or []:
        doc = apply_override(doc, o)
    if grid_n is not None:
        doc = apply_override(doc, f"grid.n={grid_n}")
    # Positions refer to the edited document, so re-serialise it.
    return from_dict(doc, json.dumps(doc, indent=2), base)


def cmd_run(args) -> int:
    try:
        s = _load(args.scenario, args.override, args.grid_n)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out) if args.out else Path("runs") / s.name
    try:
        report = run_scenario(s, out)
    except ElementError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(format_report(report))
    print(f"outputs written to {out}")
    return EXIT_OK if report.passed else EXIT_REFERENCE


def cmd_validate(args) -> int:
    try:
        s = _load(args.scenario, args.override, None)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"ok: {s.name} ({len(s.elements)} elements, {len(s.references)} reference checks)")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in BUILTINS:
        doc = json.loads(builtin_text(name))
        print(f"{name:22s} {doc.get('description', '')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twophoton", description="Two-photon amplitude scenario runner")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file or builtin")
    r.add_argument("scenario", help="path to scenario JSON or a builtin name")
    r.add_argument("--out", help="output directory (default runs/<name>)")
    r.add_argument("--grid-n", type=int, help="override the grid size")
    r.add_argument("--override", action="append", metavar="KEY=VALUE", help="dotted-path override, repeatable")
    r.set_defaults(fn=cmd_run)

    v = sub.add_parser("validate", help="check a scenario without running it")
    v.add_argument("scenario")
    v.add_argument("--override", action="append", metavar="KEY=VALUE")
    v.set_defaults(fn=cmd_validate)

    lb = sub.add_parser("list-builtins", help="list shipped scenarios")
    lb.set_defaults(fn=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
