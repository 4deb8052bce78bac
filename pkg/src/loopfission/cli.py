"""Command-line entry point: ``loopfission <command> ...``.

Exit codes: 0 success, 1 a check failed (``diff``, ``fuzz``, ``fmt
--check``), 2 usage, parse or emission error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from .ast import Command, If, Seq, While, body_statements, contains_parallel, vars_out
from .dfg import corr, dfg_of
from .emit import EmitError, EmitOptions, emit_c, emit_dot
from .fission import FissionOptions, analyze_loop, fission_program
from .fuzz import FuzzConfig, random_program
from .interp import DEFAULT_FUEL, State, differential_check, execute
from .parser import SourceError, format_expr, parse, pretty_print
from .corpus import array_hints

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
DEFAULT_SEEDS = "0..999"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Argument helpers


def _ratio(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a ratio: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("ratio must be non-negative")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def parse_seeds(text: str) -> range:
    """``A..B`` (inclusive) or a single seed."""
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.\s*(\d+)\s*)?", text)
    if not m:
        raise UsageError(f"bad seed range {text!r} (expected A..B or N)")
    lo = int(m.group(1))
    hi = int(m.group(2)) if m.group(2) is not None else lo
    if hi < lo:
        raise UsageError(f"empty seed range {text!r}")
    return range(lo, hi + 1)


_INIT_RE = re.compile(r"\s*([A-Za-z_]\w*)\s*(?:\[\s*(\d+)\s*\])?\s*=\s*(-?\d+)\s*")


def parse_inits(items: list[str]) -> State:
    s = State()
    for item in items:
        m = _INIT_RE.fullmatch(item)
        if not m:
            raise UsageError(f"bad --init {item!r} (expected x=3 or t[0]=5)")
        name, index, value = m.group(1), m.group(2), int(m.group(3))
        if index is None:
            if name in s.arrays:
                raise UsageError(f"{name} initialised both as scalar and array")
            s.scalars[name] = value
        else:
            if name in s.scalars:
                raise UsageError(f"{name} initialised both as scalar and array")
            s.arrays.setdefault(name, {})[int(index)] = value
    return s


def parse_hints(items: list[str]) -> dict[str, int]:
    hints = {}
    for item in items:
        name, sep, extent = item.partition("=")
        if not sep or not name or not extent.isdigit() or int(extent) <= 0:
            raise UsageError(f"bad --array {item!r} (expected name=extent)")
        hints[name] = int(extent)
    return hints


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        return Path(path).read_text()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from None


def _load(path: str, allow_parallel: bool = False):
    text = _read(path)
    try:
        return text, parse(text, allow_parallel=allow_parallel)
    except SourceError as err:
        raise UsageError(f"{path}:{err}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _options(args) -> FissionOptions:
    return FissionOptions(
        mode=getattr(args, "mode", "par"),
        max_dup_ratio=args.max_dup_ratio,
        augment=not args.no_augment,
    )


def _loops(c: Command, path=()):
    """(location, loop) pairs in program order, outer loops first.

    Locations follow the numbering of fission reports.
    """
    if isinstance(c, Seq):
        for k, x in enumerate(c.items):
            yield from _loops(x, path + (k + 1,))
    elif isinstance(c, If):
        yield from _loops(c.then, path)
        yield from _loops(c.orelse, path)
    elif isinstance(c, While):
        yield path, c
        for k, x in enumerate(body_statements(c.body)):
            yield from _loops(x, path + (k + 1,))


def _loc(path) -> str:
    return ".".join(map(str, path)) or "top"


# ---------------------------------------------------------------------------
# Commands


def cmd_fmt(args) -> int:
    text, p = _load(args.file, allow_parallel=True)
    out = pretty_print(p)
    if args.check:
        if out != text:
            print(f"{args.file}: not in canonical form", file=sys.stderr)
            return EXIT_FAIL
        return EXIT_OK
    _write(args.output, out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    _, p = _load(args.file)
    options = _options(args)
    loops = list(_loops(p))
    if args.format == "json":
        records = []
        for path, loop in loops:
            report = analyze_loop(loop, options)
            report.location = path
            m = _loop_matrix(loop)
            rec = report.to_dict()
            rec["matrix"] = {"index": list(m.index), "rows": [[str(w) for w in r] for r in m.rows()]}
            records.append(rec)
        whole = dfg_of(p)
        doc = {
            "program": {"index": list(whole.index), "rows": [[str(w) for w in r] for r in whole.rows()]},
            "loops": records,
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        fmt = (lambda m: m.format_csv()) if args.format == "csv" else (lambda m: m.format_table())
        out = ["# program\n", fmt(dfg_of(p))]
        for path, loop in loops:
            report = analyze_loop(loop, options)
            m = _loop_matrix(loop)
            out.append(f"\n# loop {_loc(path)}: while {format_expr(loop.cond)}\n")
            out.append(fmt(m))
            if args.format == "table":
                out.append(f"edges: {' '.join(f'{i}->{j}' for i, j in sorted(report.graph.edges))}\n")
                out.append(f"sccs: {_groups(report.sccs)}\n")
                out.append(f"covering: {_groups(report.covering)}\n")
                out.append(f"privatized: {', '.join(report.privatized) or '-'}\n")
        sys.stdout.write("".join(out))
    if args.dot:
        _dump_dot(args.dot, loops, options)
    return EXIT_OK


def _loop_matrix(loop: While):
    """The matrix the dependence graph is read from."""
    return dfg_of(Seq(body_statements(loop.body))) + corr(loop.cond, vars_out(loop.body))


def _groups(parts) -> str:
    return " ".join("{" + ",".join(map(str, p)) + "}" for p in parts)


def _dump_dot(directory: str, loops, options: FissionOptions) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for path, loop in loops:
        report = analyze_loop(loop, options)
        stem = "loop_" + (_loc(path).replace(".", "_"))
        (d / f"{stem}.dot").write_text(emit_dot(report.graph, report.sccs))
        (d / f"{stem}_condensation.dot").write_text(
            emit_dot(report.condensation, name="condensation")
        )


def cmd_fission(args) -> int:
    _, p = _load(args.file)
    options = _options(args)
    out, reports = fission_program(p, options)
    _write(args.output, pretty_print(out))
    if args.dot:
        _dump_dot(args.dot, list(_loops(p)), options)
    if args.report:
        doc = [r.to_dict() for r in reports]
        Path(args.report).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _show_value(v) -> str:
    if isinstance(v, dict):
        return "[" + ", ".join(f"{k}: {x}" for k, x in sorted(v.items())) + "]"
    if isinstance(v, tuple):
        return "[" + ", ".join(f"{k}: {x}" for k, x in v) + "]"
    return str(v)


def cmd_run(args) -> int:
    _, p = _load(args.file, allow_parallel=True)
    result = execute(p, parse_inits(args.init), args.fuel)
    if args.json:
        print(result.to_json())
    else:
        for name in result.state.names():
            value = result.state.arrays.get(name, result.state.scalars.get(name))
            print(f"{name} = {_show_value(value)}")
        for effect in result.log:
            shown = ", ".join(_show_value(v) for v in effect.values)
            print(f"use({', '.join(effect.args)}) -> {shown}")
        if not result.ok:
            print(f"{result.status}: {result.detail}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_RUNTIME


def cmd_diff(args) -> int:
    _, p = _load(args.file)
    verdict = differential_check(p, _options(args), parse_inits(args.init), args.fuel)
    if args.json:
        doc = verdict.to_dict()
        doc["program"] = args.file
        print(json.dumps(doc, sort_keys=True))
    else:
        print(f"{args.file}: {verdict}")
    return EXIT_OK if verdict.ok else EXIT_FAIL


def _fuzz_one(seed: int, config: FuzzConfig, options: FissionOptions):
    from .fission import condensation, sccs, verify_covering

    p = random_program(seed, config)
    problems = []
    if parse(pretty_print(p)) != p:
        problems.append("round-trip")
    _, reports = fission_program(p, options)
    for r in reports:
        problem = verify_covering(r.graph, r.covering)
        if problem:
            problems.append(f"covering at {_loc(r.location)}: {problem}")
        try:
            condensation(r.graph, sccs(r.graph))
        except AssertionError as err:
            problems.append(f"condensation at {_loc(r.location)}: {err}")
    verdict = differential_check(p, options, fuel=config.fuel())
    return seed, p, verdict, problems


def cmd_fuzz(args) -> int:
    seeds = parse_seeds(args.seed if args.seed is not None else
                        (args.seeds or os.environ.get("FISSION_SEED", DEFAULT_SEEDS)))
    config = FuzzConfig(
        max_stmts=args.max_stmts, max_depth=args.max_depth, max_iterations=args.max_iterations
    )
    options = _options(args)
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(lambda s: _fuzz_one(s, config, options), seeds))
    results.sort(key=lambda r: r[0])

    failures = []
    for seed, p, verdict, problems in results:
        if verdict.ok and not problems:
            continue
        failures.append({"seed": seed, "verdict": verdict.to_dict(), "problems": problems})
        if args.out:
            d = Path(args.out)
            d.mkdir(parents=True, exist_ok=True)
            header = f"// seed {seed}: {verdict}\n" + "".join(f"// {x}\n" for x in problems)
            (d / f"seed_{seed}.whl").write_text(header + pretty_print(p))
    summary = {
        "seeds": [seeds.start, seeds.stop - 1],
        "programs": len(results),
        "split_loops": sum(v.split_loops for _, _, v, _ in results),
        "failures": len(failures),
        "parallel_races": sum(v.kind == "parallel-race" for _, _, v, _ in results),
        "fuel_exhausted": sum("fuel" in v.detail for _, _, v, _ in results),
        "failed": failures,
    }
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(
            f"seeds {seeds.start}..{seeds.stop - 1}: {summary['programs']} programs, "
            f"{summary['split_loops']} split loops, {summary['failures']} failures"
        )
        for f in failures:
            print(f"  seed {f['seed']}: {f['verdict']['kind']} {' '.join(f['problems'])}".rstrip())
    return EXIT_OK if not failures else EXIT_FAIL


def cmd_emit_c(args) -> int:
    text, p = _load(args.file, allow_parallel=True)
    if args.fission:
        if contains_parallel(p):
            raise UsageError("--fission needs a parallel-free input")
        p, _ = fission_program(p, replace(_options(args), mode="par"))
    hints = array_hints(text)
    hints.update(parse_hints(args.array))
    init = parse_inits(args.init)
    values: dict = dict(init.scalars)
    values.update(init.arrays)
    options = EmitOptions(strategy=args.strategy, array_hints=hints)
    _write(args.output, emit_c(p, options, values))
    return EXIT_OK


# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="loopfission", description="Loop fission for WHILE programs."
    )
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    def fission_flags(p, with_mode=False):
        if with_mode:
            p.add_argument("--mode", choices=("par", "seq"), default="par")
        p.add_argument("--max-dup-ratio", type=_ratio, default=None, metavar="R",
                       help="merge generated loops while duplicated/total exceeds R (e.g. 1/2)")
        p.add_argument("--no-augment", action="store_true",
                       help="use only the matrix-derived and condition dependence edges")

    p = sub.add_parser("fmt", help="print a program in canonical form")
    p.add_argument("file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("-o", "--output")
    g.add_argument("--check", action="store_true", help="exit 1 if the file is not canonical")
    p.set_defaults(func=cmd_fmt)

    p = sub.add_parser("analyze", help="print data-flow matrices and dependence graphs")
    p.add_argument("file")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--dot", metavar="DIR", help="write one DOT file per loop into DIR")
    fission_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fission", help="split loops and print the transformed program")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.add_argument("--dot", metavar="DIR")
    p.add_argument("--report", metavar="FILE", help="write per-loop reports as JSON")
    fission_flags(p, with_mode=True)
    p.set_defaults(func=cmd_fission)

    p = sub.add_parser("run", help="interpret a program")
    p.add_argument("file")
    p.add_argument("--init", action="append", default=[], metavar="x=3|t[0]=5")
    p.add_argument("--fuel", type=_positive, default=DEFAULT_FUEL)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("diff", help="check that fission preserves the program's behaviour")
    p.add_argument("file")
    p.add_argument("--init", action="append", default=[], metavar="x=3|t[0]=5")
    p.add_argument("--fuel", type=_positive, default=DEFAULT_FUEL)
    p.add_argument("--json", action="store_true")
    fission_flags(p)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("fuzz", help="differential checks on random programs")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--seeds", metavar="A..B", help=f"inclusive range (default {DEFAULT_SEEDS}, "
                   "or $FISSION_SEED)")
    g.add_argument("--seed", metavar="N")
    p.add_argument("--out", metavar="DIR", help="write failing programs here")
    p.add_argument("--max-stmts", type=_positive, default=12)
    p.add_argument("--max-depth", type=_positive, default=3)
    p.add_argument("--max-iterations", type=_positive, default=8)
    p.add_argument("--jobs", type=_positive, default=4)
    p.add_argument("--json", action="store_true")
    fission_flags(p)
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("emit-c", help="emit C with OpenMP pragmas")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.add_argument("--array", action="append", default=[], metavar="name=extent")
    p.add_argument("--init", action="append", default=[], metavar="x=3|t[0]=5")
    p.add_argument("--strategy", choices=("sections", "single-nowait"), default="sections")
    p.add_argument("--fission", action="store_true", help="apply par-mode fission first")
    fission_flags(p)
    p.set_defaults(func=cmd_emit_c)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"loopfission: {err}", file=sys.stderr)
        return EXIT_USAGE
    except EmitError as err:
        print(f"loopfission: cannot emit C: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
