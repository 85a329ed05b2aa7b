"""Batch driver: load a program, check it, lower it, run the fixpoint,
and emit relation tables as TSV or JSON.

Exit codes: 0 ok, 1 parse/type/weight-literal errors, 2 lowering errors,
3 fixpoint non-convergence, 4 table divergence in --diff mode.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import poly, semiring, syntax, typecheck
from .eval import FixpointResult, RelTable, fixpoint, index_value
from .semiring import SEMIRINGS, SemiringSpec, WeightLiteralError, render_weight
from .syntax import Factor, Goal, ParseError, Program, render_program, render_type, render_value

EXIT_BAD_PROGRAM = 1
EXIT_LOWERING = 2
EXIT_NO_CONVERGENCE = 3
EXIT_DIVERGENCE = 4


@dataclass
class RunConfig:
    source: str
    semiring: str
    poly_mode: str = "monomorphize"
    epsilon: float = 1e-9
    max_iters: int = 10000
    fmt: str = "tsv"
    relations: list = field(default_factory=list)
    diff: bool = False
    emit_lowered: Optional[str] = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max-iters must be at least 1")


def check_factor_literals(p: Program, spec: SemiringSpec) -> None:
    def walk(g: Goal) -> None:
        match g:
            case syntax.Conj(a, b) | syntax.Disj(a, b):
                walk(a)
                walk(b)
            case syntax.Fresh(_, _, body):
                walk(body)
            case Factor(lit):
                semiring.parse_weight_literal(lit, spec)
            case _:
                pass

    for rel in p.relations:
        walk(rel.body)


def emit_tables(tables: list[RelTable], fmt: str, spec: SemiringSpec) -> str:
    if fmt == "json":
        out = []
        for t in tables:
            entries = []
            for idx in np.ndindex(*t.sizes):
                values = [render_value(index_value(i, ty))
                          for i, (_, ty) in zip(idx, t.params)]
                w = t.cells[idx]
                if spec.name == "boolean":
                    jw = bool(w)
                elif float(w) == float("inf"):
                    jw = "inf"
                else:
                    jw = float(w)
                entries.append({"values": values, "weight": jw})
            out.append({
                "relation": t.rel,
                "params": [{"name": x, "type": render_type(ty)} for x, ty in t.params],
                "entries": entries,
            })
        return json.dumps(out, indent=2) + "\n"

    blocks = []
    for t in tables:
        lines = [f"# {t.rel}"]
        lines.append("\t".join([x for x, _ in t.params] + ["weight"]))
        for idx in np.ndindex(*t.sizes):
            values = [render_value(index_value(i, ty))
                      for i, (_, ty) in zip(idx, t.params)]
            lines.append("\t".join(values + [render_weight(t.cells[idx], spec)]))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def _select_tables(result: FixpointResult, lowered: Program,
                   wanted: list) -> list[RelTable]:
    order = [rel.name for rel in lowered.relations]
    if wanted:
        missing = [w for w in wanted if w not in result.tables]
        if missing:
            raise KeyError(f"no such relation: {', '.join(missing)}")
        order = [n for n in order if n in wanted]
    return [result.tables[n] for n in order]


def _pipeline(cfg: RunConfig, text: str, spec: SemiringSpec, mode: str):
    program = syntax.parse_program(text)
    checked = typecheck.check_program(program)
    check_factor_literals(checked, spec)
    lowered = poly.lower_program(checked, mode, spec)
    epsilon = cfg.epsilon if spec.name == "real" else None
    result = fixpoint(lowered, spec, epsilon=epsilon, max_iters=cfg.max_iters)
    return lowered, result


def diff_modes(cfg: RunConfig, text: str, spec: SemiringSpec,
               out=None) -> int:
    """Run both lowering modes and compare every shared relation table."""
    out = sys.stdout if out is None else out
    lowered_m, result_m = _pipeline(cfg, text, spec, "monomorphize")
    lowered_l, result_l = _pipeline(cfg, text, spec, "large-enough")
    # Same-size instances of differently shaped types can share a mangled
    # name across modes; only tables over identical parameter types are
    # directly comparable.
    shared = [rel.name for rel in lowered_m.relations
              if rel.name in result_l.tables
              and result_l.tables[rel.name].params == rel.params]
    for name in shared:
        a, b = result_m.tables[name], result_l.tables[name]
        if not np.array_equal(a.cells, b.cells):
            bad = next(idx for idx in np.ndindex(*a.sizes)
                       if not np.array_equal(a.cells[idx], b.cells[idx]))
            cellvals = [render_value(index_value(i, ty))
                        for i, (_, ty) in zip(bad, a.params)]
            print(f"divergence in {name} at ({', '.join(cellvals)}): "
                  f"monomorphize={render_weight(a.cells[bad], spec)} "
                  f"large-enough={render_weight(b.cells[bad], spec)}", file=out)
            return EXIT_DIVERGENCE
    print("identical", file=out)
    return 0


def run(cfg: RunConfig, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        with open(cfg.source, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        print(f"error: {e}", file=err)
        return EXIT_BAD_PROGRAM

    spec = SEMIRINGS[cfg.semiring]
    try:
        if cfg.diff:
            return diff_modes(cfg, text, spec, out=out)
        program = syntax.parse_program(text)
        checked = typecheck.check_program(program)
        check_factor_literals(checked, spec)
    except (ParseError, typecheck.TypeCheckError, WeightLiteralError) as e:
        print(f"error: {e}", file=err)
        return EXIT_BAD_PROGRAM
    except poly.LoweringError as e:
        print(f"error: {e}", file=err)
        return EXIT_LOWERING

    try:
        lowered = poly.lower_program(checked, cfg.poly_mode, spec)
    except poly.LoweringError as e:
        print(f"error: {e}", file=err)
        return EXIT_LOWERING

    if cfg.emit_lowered:
        with open(cfg.emit_lowered, "w", encoding="utf-8") as fh:
            fh.write(render_program(lowered))

    epsilon = cfg.epsilon if spec.name == "real" else None
    result = fixpoint(lowered, spec, epsilon=epsilon, max_iters=cfg.max_iters)

    try:
        tables = _select_tables(result, lowered, cfg.relations)
    except KeyError as e:
        print(f"error: {e.args[0]}", file=err)
        return EXIT_BAD_PROGRAM
    out.write(emit_tables(tables, cfg.fmt, spec))

    if not result.converged:
        print(f"warning: fixpoint did not converge within {cfg.max_iters} "
              f"iterations; tables are from the last round", file=err)
        return EXIT_NO_CONVERGENCE
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skn", description="weighted relational programs, tabulated bottom-up")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="evaluate a program and print its tables")
    runp.add_argument("file", help="program source (.skn)")
    runp.add_argument("--semiring", choices=sorted(SEMIRINGS),
                      default=os.environ.get("SKN_SEMIRING"),
                      help="weight semiring (or set SKN_SEMIRING)")
    runp.add_argument("--poly-mode", choices=["monomorphize", "large-enough"],
                      default="monomorphize")
    runp.add_argument("--rel", action="append", default=[], metavar="NAME",
                      help="emit only these relations (repeatable)")
    runp.add_argument("--epsilon", type=float, default=1e-9,
                      help="real-semiring convergence tolerance")
    runp.add_argument("--max-iters", type=int, default=10000)
    runp.add_argument("--format", choices=["tsv", "json"], default="tsv")
    runp.add_argument("--emit-lowered", metavar="PATH",
                      help="write the lowered monomorphic program here")
    runp.add_argument("--diff", action="store_true",
                      help="compare both poly modes instead of emitting tables")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    if args.semiring is None:
        print("error: --semiring is required (or set SKN_SEMIRING)", file=sys.stderr)
        return EXIT_BAD_PROGRAM
    try:
        cfg = RunConfig(
            source=args.file,
            semiring=args.semiring,
            poly_mode=args.poly_mode,
            epsilon=args.epsilon,
            max_iters=args.max_iters,
            fmt=args.format,
            relations=args.rel,
            diff=args.diff,
            emit_lowered=args.emit_lowered,
        )
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_PROGRAM
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
