"""C/OpenMP and DOT output.

``emit_c`` turns a program, possibly containing ``parallel`` nodes, into a
self-contained C99 file.  Program variables become static globals named
``v_<name>``, ``use`` feeds a volatile checksum sink, and ``main`` prints
one ``name value`` line per variable, sorted by name.  Arrays are printed
as a 64-bit checksum over their declared extent.

A ``parallel`` node becomes an OpenMP region.  Variables written by two or
more branches are privatized: each branch works on its own copy,
initialised from the shared value before the region and copied back from
the first writing branch afterwards.  Branches that would touch each
other's variables any other way are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal as Lit

from .ast import (
    EFFECT,
    ArrayAssign,
    ArrayRef,
    Assign,
    Command,
    Expression,
    If,
    Literal,
    OpApply,
    Parallel,
    Program,
    Seq,
    Skip,
    Use,
    VarRef,
    While,
    array_names,
    contains_use,
    vars_in,
    vars_occ,
    vars_out,
)
from .fission import Condensation, DepGraph, Partition, sccs as compute_sccs
from .parser import pretty_print

Strategy = Lit["sections", "single-nowait"]

CHECKSUM_MULT = 1000003
_U64 = (1 << 64) - 1
_INT64_MIN = -(1 << 63)


class EmitError(ValueError):
    pass


@dataclass
class EmitOptions:
    strategy: Strategy = "sections"
    array_hints: dict[str, int] = field(default_factory=dict)
    scalar_type: str = "long long"


def _c_literal(v: int) -> str:
    if v == _INT64_MIN:
        return "(-9223372036854775807LL - 1)"
    return f"{v}LL" if v >= 0 else f"({v}LL)"


class _Emitter:
    def __init__(self, p: Program, options: EmitOptions):
        self.p = p
        self.o = options
        if options.strategy not in ("sections", "single-nowait"):
            raise EmitError(f"unknown strategy {options.strategy!r}")
        self.arrays = tuple(sorted(array_names(p)))
        names = [v for v in vars_occ(p) if v != EFFECT]
        self.scalars = tuple(sorted(v for v in names if v not in self.arrays))
        missing = [a for a in self.arrays if a not in options.array_hints]
        if missing:
            raise EmitError(f"missing array size hint for {', '.join(missing)}")
        for a in self.arrays:
            if options.array_hints[a] <= 0:
                raise EmitError(f"array extent for {a} must be positive")
        self.copies: list[tuple[str, str]] = []  # (declared name, original variable)
        self.regions = 0

    # -- expressions -------------------------------------------------------

    def expr(self, e: Expression, env: dict[str, str]) -> str:
        if isinstance(e, Literal):
            return _c_literal(e.value)
        if isinstance(e, VarRef):
            return env.get(e.name, "v_" + e.name)
        if isinstance(e, ArrayRef):
            return f"{env.get(e.name, 'v_' + e.name)}[{self.expr(e.index, env)}]"
        if isinstance(e, OpApply):
            if len(e.operands) == 1:
                return f"({e.op}{self.expr(e.operands[0], env)})"
            a, b = (self.expr(x, env) for x in e.operands)
            return f"({a} {e.op} {b})"
        raise TypeError(f"not an expression: {e!r}")

    # -- commands ----------------------------------------------------------

    def cmd(self, c: Command, env: dict[str, str], depth: int) -> list[str]:
        pad = "  " * depth
        if isinstance(c, Assign):
            return [f"{pad}{env.get(c.target, 'v_' + c.target)} = {self.expr(c.expr, env)};"]
        if isinstance(c, ArrayAssign):
            tgt = env.get(c.target, "v_" + c.target)
            return [f"{pad}{tgt}[{self.expr(c.index, env)}] = {self.expr(c.expr, env)};"]
        if isinstance(c, Skip):
            return []
        if isinstance(c, Use):
            out = []
            for a in c.args:
                name = env.get(a, "v_" + a)
                if a in self.arrays:
                    out.append(f"{pad}effect(checksum({name}, {self.o.array_hints[a]}));")
                else:
                    out.append(f"{pad}effect((unsigned long long){name});")
            return out
        if isinstance(c, Seq):
            return [line for x in c.items for line in self.cmd(x, env, depth)]
        if isinstance(c, If):
            lines = [f"{pad}if ({self.expr(c.cond, env)}) {{", *self.cmd(c.then, env, depth + 1)]
            if not isinstance(c.orelse, Skip):
                lines += [f"{pad}}} else {{", *self.cmd(c.orelse, env, depth + 1)]
            return lines + [f"{pad}}}"]
        if isinstance(c, While):
            return [
                f"{pad}while ({self.expr(c.cond, env)}) {{",
                *self.cmd(c.body, env, depth + 1),
                f"{pad}}}",
            ]
        if isinstance(c, Parallel):
            return self.parallel(c, env, depth)
        raise TypeError(f"not a command: {c!r}")

    def check_branches(self, c: Parallel) -> tuple[str, ...]:
        outs = [set(vars_out(b)) for b in c.branches]
        ins = [set(vars_in(b)) for b in c.branches]
        private = sorted(v for v in set().union(*outs) if sum(v in o for o in outs) >= 2)
        for k, written in enumerate(outs):
            for v in sorted(written - set(private)):
                for j in range(len(c.branches)):
                    if j != k and v in ins[j]:
                        raise EmitError(
                            f"branch {j + 1} reads {v}, which branch {k + 1} writes; "
                            "refusing to emit a racy parallel region"
                        )
        if sum(contains_use(b) for b in c.branches) >= 2:
            raise EmitError("use statements in several branches would reorder effects")
        return tuple(private)

    def parallel(self, c: Parallel, env: dict[str, str], depth: int) -> list[str]:
        pad = "  " * depth
        private = self.check_branches(c)
        region = self.regions
        self.regions += 1
        outs = [set(vars_out(b)) for b in c.branches]
        lines = [f"{pad}/* parallel region {region}: private {', '.join(private) or '-'} */"]
        envs = []
        for k in range(len(c.branches)):
            local = dict(env)
            for v in private:
                shared = env.get(v, "v_" + v)
                copy = f"p{region}_{k}_v_{v}"
                self.copies.append((copy, v))
                local[v] = copy
                if v in self.arrays:
                    lines.append(f"{pad}memcpy({copy}, {shared}, sizeof {copy});")
                else:
                    lines.append(f"{pad}{copy} = {shared};")
            envs.append(local)
        if self.o.strategy == "sections":
            lines += [f"{pad}#pragma omp parallel sections", f"{pad}{{"]
            for k, b in enumerate(c.branches):
                lines += [f"{pad}  #pragma omp section", f"{pad}  {{"]
                lines += self.cmd(b, envs[k], depth + 2)
                lines.append(f"{pad}  }}")
            lines.append(f"{pad}}}")
        else:
            lines += [f"{pad}#pragma omp parallel", f"{pad}{{"]
            for k, b in enumerate(c.branches):
                lines += [f"{pad}  #pragma omp single nowait", f"{pad}  {{"]
                lines += self.cmd(b, envs[k], depth + 2)
                lines.append(f"{pad}  }}")
            lines.append(f"{pad}}}")
        for v in private:
            first = next(k for k, o in enumerate(outs) if v in o)
            shared, copy = env.get(v, "v_" + v), envs[first][v]
            if v in self.arrays:
                lines.append(f"{pad}memcpy({shared}, {copy}, sizeof {shared});")
            else:
                lines.append(f"{pad}{shared} = {copy};")
        return lines

    # -- file --------------------------------------------------------------

    def declare(self, name: str, var: str) -> str:
        if var in self.arrays:
            return f"static {self.o.scalar_type} {name}[{self.o.array_hints[var]}];"
        return f"static {self.o.scalar_type} {name};"

    def render(self, init: dict[str, int | dict[int, int]] | None) -> str:
        body = self.cmd(self.p, {}, 1)
        out = [
            "/* Generated by loopfission.  Compile with -fopenmp -fwrapv. */",
            "#include <stdio.h>",
            "#include <string.h>",
            "",
        ]
        out += [self.declare("v_" + v, v) for v in sorted(self.scalars + self.arrays)]
        out += [self.declare(n, v) for n, v in self.copies]
        out += [
            "static volatile unsigned long long effect_sink;",
            "",
            "static void effect(unsigned long long v)",
            "{",
            f"  effect_sink = effect_sink * {CHECKSUM_MULT}ULL + v;",
            "}",
            "",
            f"static unsigned long long checksum(const {self.o.scalar_type} *a, long n)",
            "{",
            "  unsigned long long h = 0;",
            "  for (long k = 0; k < n; k++)",
            f"    h = h * {CHECKSUM_MULT}ULL + (unsigned long long)a[k];",
            "  return h;",
            "}",
            "",
            "static void init(void)",
            "{",
        ]
        for name, value in sorted((init or {}).items()):
            if isinstance(value, dict):
                extent = self.o.array_hints.get(name, 0)
                for k, v in sorted(value.items()):
                    if not 0 <= k < extent:
                        raise EmitError(f"initial {name}[{k}] outside extent {extent}")
                    out.append(f"  v_{name}[{k}] = {_c_literal(v)};")
            elif name in self.scalars:
                out.append(f"  v_{name} = {_c_literal(value)};")
        out += ["}", "", "static void run(void)", "{", *body, "}", "", "int main(void)", "{"]
        out += ["  init();", "  run();"]
        rows = [(EFFECT, 'printf("__effect %llu\\n", (unsigned long long)effect_sink);')]
        for v in self.scalars:
            rows.append((v, f'printf("{v} %lld\\n", (long long)v_{v});'))
        for a in self.arrays:
            rows.append((a, f'printf("{a} %llu\\n", checksum(v_{a}, {self.o.array_hints[a]}));'))
        out += [f"  {stmt}" for _, stmt in sorted(rows)]
        out += ["  return 0;", "}", ""]
        return "\n".join(out)


def emit_c(
    p: Program,
    options: EmitOptions | None = None,
    init: dict[str, int | dict[int, int]] | None = None,
) -> str:
    """C source for ``p``; ``init`` gives initial scalars and array cells."""
    return _Emitter(p, options or EmitOptions()).render(init)


def _array_checksum(cells: dict[int, int], extent: int) -> int:
    h = 0
    for k in range(extent):
        h = (h * CHECKSUM_MULT + (cells.get(k, 0) & _U64)) & _U64
    return h


def expected_output(result, p: Program, options: EmitOptions | None = None) -> str:
    """The lines the compiled program prints, computed from an interpreter run."""
    options = options or EmitOptions()
    arrays = set(array_names(p))
    extents = options.array_hints
    sink = 0
    for effect in result.log:
        for name, value in zip(effect.args, effect.values):
            if isinstance(value, tuple):
                v = _array_checksum(dict(value), extents[name])
            else:
                v = value & _U64
            sink = (sink * CHECKSUM_MULT + v) & _U64
    rows = [(EFFECT, str(sink))]
    for v in sorted(set(vars_occ(p)) - {EFFECT}):
        if v in arrays:
            rows.append((v, str(_array_checksum(result.state.arrays.get(v, {}), extents[v]))))
        else:
            rows.append((v, str(result.state.scalars.get(v, 0))))
    return "".join(f"{name} {value}\n" for name, value in sorted(rows))


# ---------------------------------------------------------------------------
# DOT


def _dot_string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _stmt_label(k: int, c: Command) -> str:
    lines = pretty_print(c).splitlines()
    text = lines[0].rstrip(" {") + (" ..." if len(lines) > 1 else "")
    return f"{k}: {text}"


def emit_dot(
    g: DepGraph | Condensation,
    parts: Partition | None = None,
    name: str = "dependences",
) -> str:
    """DOT text for a dependence graph (SCCs as clusters) or a condensation."""
    out = [f"digraph {name} {{", '  node [shape=box, fontname="monospace"];']
    if isinstance(g, Condensation):
        for k, part in enumerate(g.parts):
            label = "{" + ", ".join(map(str, part)) + "}"
            out.append(f"  c{k} [label={_dot_string(label)}];")
        out += [f"  c{a} -> c{b};" for a, b in sorted(g.edges)]
        return "\n".join(out + ["}"]) + "\n"
    if parts is None:
        parts = compute_sccs(g) if g.n else ()
    for k, part in enumerate(parts):
        out.append(f"  subgraph cluster_{k} {{")
        out.append(f"    label={_dot_string('SCC ' + ', '.join(map(str, part)))};")
        out.append("    style=dotted;")
        for v in part:
            out.append(f"    s{v} [label={_dot_string(_stmt_label(v, g.stmts[v - 1]))}];")
        out.append("  }")
    out += [f"  s{i} -> s{j};" for i, j in sorted(g.edges)]
    return "\n".join(out + ["}"]) + "\n"
