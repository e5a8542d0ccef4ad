"""Command-line front end: ``amdl check|compile|lift|hier|graph``.

Exit status 0 means success, 1 means diagnostics were reported and 2 means
a usage or I/O error. Diagnostics go to stderr as
``file:line:col: severity: message``; artifacts go to stdout or ``--out``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from amdl.compiler import CompileError, compile_model
from amdl.dsl import ParseError, format_model, parse_model
from amdl.emit import SchemaLoadError, emit_graph, emit_hierarchy, emit_json, emit_sql, load_json
from amdl.lift import lift_schema
from amdl.model import AbstractModel

OK, DIAGNOSTICS, USAGE = 0, 1, 2


class _Failure(Exception):
    def __init__(self, status: int):
        self.status = status


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        print(f"amdl: error: cannot read {path}: {exc.strerror}", file=sys.stderr)
        raise _Failure(USAGE) from None


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        print(f"amdl: error: cannot write {out}: {exc.strerror}", file=sys.stderr)
        raise _Failure(USAGE) from None


def _load_model(path: str) -> AbstractModel:
    source = _read(path)
    try:
        return parse_model(source, path)
    except ParseError as exc:
        for diag in exc.diagnostics:
            print(diag, file=sys.stderr)
        raise _Failure(DIAGNOSTICS) from None


def cmd_check(args: argparse.Namespace) -> int:
    _load_model(args.model)
    return OK


def cmd_compile(args: argparse.Namespace) -> int:
    model = _load_model(args.model)
    try:
        schema = compile_model(model)
    except CompileError as exc:
        print(f"{args.model}:1:1: error: {exc}", file=sys.stderr)
        return DIAGNOSTICS
    text = emit_sql(schema) if args.to == "sql" else emit_json(schema) + "\n"
    _write(text, args.out)
    return OK


def cmd_lift(args: argparse.Namespace) -> int:
    data = _read(args.schema)
    try:
        schema = load_json(data)
    except SchemaLoadError as exc:
        for message in exc.diagnostics:
            print(f"{args.schema}: error: {message}", file=sys.stderr)
        return USAGE if exc.malformed else DIAGNOSTICS
    report = lift_schema(schema)
    for table, why in report.excluded_tables:
        print(f"{args.schema}: warning: excluded table {table}: {why}", file=sys.stderr)
    for message in report.warnings:
        print(f"{args.schema}: warning: {message}", file=sys.stderr)
    _write(format_model(report.model), args.out)
    return OK


def cmd_hier(args: argparse.Namespace) -> int:
    _write(emit_hierarchy(_load_model(args.model)).text(), None)
    return OK


def cmd_graph(args: argparse.Namespace) -> int:
    _write(emit_graph(_load_model(args.model)), None)
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amdl", description="Abstract data model compiler."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compile", help="compile a model to SQL DDL or JSON")
    p.add_argument("model")
    p.add_argument("--to", choices=("sql", "json"), required=True)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("lift", help="recover a model from a JSON schema")
    p.add_argument("schema")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("hier", help="print the hierarchical form")
    p.add_argument("model")
    p.set_defaults(func=cmd_hier)

    p = sub.add_parser("graph", help="print the reference graph as dot")
    p.add_argument("model")
    p.set_defaults(func=cmd_graph)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Failure as exc:
        return exc.status


if __name__ == "__main__":
    sys.exit(main())
