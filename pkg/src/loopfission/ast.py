"""Abstract syntax of the WHILE language and its variable-set functions.

Nodes are frozen dataclasses, so structurally equal trees compare equal and
can be hashed.  Variable sets are returned as tuples ordered by first
syntactic occurrence; matrices, graphs and printed output all inherit that
order and are therefore deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

EFFECT = "__effect"

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

BINARY_OPS = ("||", "&&", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/", "%")
UNARY_OPS = ("!", "-")


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class ArrayRef:
    name: str
    index: "Expression"


@dataclass(frozen=True)
class Literal:
    value: int


@dataclass(frozen=True)
class OpApply:
    op: str
    operands: tuple["Expression", ...]

    def __post_init__(self):
        n = len(self.operands)
        if n == 2 and self.op in BINARY_OPS:
            return
        if n == 1 and self.op in UNARY_OPS:
            return
        raise ValueError(f"operator {self.op!r} does not take {n} operand(s)")


Expression = Union[VarRef, ArrayRef, Literal, OpApply]


# ---------------------------------------------------------------------------
# Commands


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expression


@dataclass(frozen=True)
class ArrayAssign:
    target: str
    index: Expression
    expr: Expression


@dataclass(frozen=True)
class If:
    cond: Expression
    then: "Command"
    orelse: "Command"


@dataclass(frozen=True)
class While:
    cond: Expression
    body: "Command"


@dataclass(frozen=True)
class Use:
    args: tuple[str, ...]


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Seq:
    items: tuple["Command", ...]

    def __post_init__(self):
        if not self.items:
            raise ValueError("Seq needs at least one command")


@dataclass(frozen=True)
class Parallel:
    branches: tuple["Command", ...]

    def __post_init__(self):
        if len(self.branches) < 2:
            raise ValueError("Parallel needs at least two branches")


Command = Union[Assign, ArrayAssign, If, While, Use, Skip, Seq, Parallel]

# A program is its top-level statement sequence.
Program = Seq


def is_valid_name(name: str) -> bool:
    return bool(IDENT_RE.match(name))


def seq(commands: Iterable[Command]) -> Seq:
    """Build a Seq, substituting ``skip`` for an empty list."""
    items = tuple(commands)
    return Seq(items or (Skip(),))


def body_statements(cmd: Command) -> tuple[Command, ...]:
    """Top-level statements of a loop body (a non-Seq body is a singleton)."""
    if isinstance(cmd, Seq):
        return cmd.items
    return (cmd,)


def _union(*groups: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(name for group in groups for name in group))


# ---------------------------------------------------------------------------
# Variable sets


def expr_occ(e: Expression) -> tuple[str, ...]:
    if isinstance(e, VarRef):
        return (e.name,)
    if isinstance(e, ArrayRef):
        return _union((e.name,), expr_occ(e.index))
    if isinstance(e, Literal):
        return ()
    if isinstance(e, OpApply):
        return _union(*(expr_occ(o) for o in e.operands))
    raise TypeError(f"not an expression: {e!r}")


def vars_out(c: Command) -> tuple[str, ...]:
    """Variables modified by ``c``."""
    if isinstance(c, (Assign, ArrayAssign)):
        return (c.target,)
    if isinstance(c, If):
        return _union(vars_out(c.then), vars_out(c.orelse))
    if isinstance(c, While):
        return vars_out(c.body)
    if isinstance(c, (Use, Skip)):
        return ()
    if isinstance(c, Seq):
        return _union(*(vars_out(x) for x in c.items))
    if isinstance(c, Parallel):
        return _union(*(vars_out(x) for x in c.branches))
    raise TypeError(f"not a command: {c!r}")


def vars_in(c: Command) -> tuple[str, ...]:
    """Variables used by ``c``."""
    if isinstance(c, Assign):
        return expr_occ(c.expr)
    if isinstance(c, ArrayAssign):
        return _union(expr_occ(c.index), expr_occ(c.expr))
    if isinstance(c, If):
        return _union(expr_occ(c.cond), vars_in(c.then), vars_in(c.orelse))
    if isinstance(c, While):
        return _union(expr_occ(c.cond), vars_in(c.body))
    if isinstance(c, Use):
        return _union(c.args)
    if isinstance(c, Skip):
        return ()
    if isinstance(c, Seq):
        return _union(*(vars_in(x) for x in c.items))
    if isinstance(c, Parallel):
        return _union(*(vars_in(x) for x in c.branches))
    raise TypeError(f"not a command: {c!r}")


def vars_occ(c: Command | Expression) -> tuple[str, ...]:
    """Variables occurring in a command or an expression."""
    if isinstance(c, (VarRef, ArrayRef, Literal, OpApply)):
        return expr_occ(c)
    if isinstance(c, Assign):
        return _union((c.target,), expr_occ(c.expr))
    if isinstance(c, ArrayAssign):
        return _union((c.target,), expr_occ(c.index), expr_occ(c.expr))
    if isinstance(c, If):
        return _union(expr_occ(c.cond), vars_occ(c.then), vars_occ(c.orelse))
    if isinstance(c, While):
        return _union(expr_occ(c.cond), vars_occ(c.body))
    if isinstance(c, Use):
        return _union(c.args)
    if isinstance(c, Skip):
        return ()
    if isinstance(c, Seq):
        return _union(*(vars_occ(x) for x in c.items))
    if isinstance(c, Parallel):
        return _union(*(vars_occ(x) for x in c.branches))
    raise TypeError(f"not a command or expression: {c!r}")


def contains_use(c: Command) -> bool:
    if isinstance(c, Use):
        return True
    if isinstance(c, If):
        return contains_use(c.then) or contains_use(c.orelse)
    if isinstance(c, While):
        return contains_use(c.body)
    if isinstance(c, Seq):
        return any(contains_use(x) for x in c.items)
    if isinstance(c, Parallel):
        return any(contains_use(x) for x in c.branches)
    return False


def contains_parallel(c: Command) -> bool:
    if isinstance(c, Parallel):
        return True
    if isinstance(c, If):
        return contains_parallel(c.then) or contains_parallel(c.orelse)
    if isinstance(c, While):
        return contains_parallel(c.body)
    if isinstance(c, Seq):
        return any(contains_parallel(x) for x in c.items)
    return False


def vars_in_star(c: Command) -> tuple[str, ...]:
    """``vars_in`` plus the effect variable when ``c`` performs a ``use``."""
    base = vars_in(c)
    return _union(base, (EFFECT,)) if contains_use(c) else base


def vars_out_star(c: Command) -> tuple[str, ...]:
    """``vars_out`` plus the effect variable when ``c`` performs a ``use``."""
    base = vars_out(c)
    return _union(base, (EFFECT,)) if contains_use(c) else base


def array_names(c: Command | Expression) -> tuple[str, ...]:
    """Names used with a subscript anywhere in ``c``."""
    found: dict[str, None] = {}

    def walk_e(e):
        if isinstance(e, ArrayRef):
            found[e.name] = None
            walk_e(e.index)
        elif isinstance(e, OpApply):
            for o in e.operands:
                walk_e(o)

    def walk(x):
        if isinstance(x, (VarRef, ArrayRef, Literal, OpApply)):
            walk_e(x)
        elif isinstance(x, Assign):
            walk_e(x.expr)
        elif isinstance(x, ArrayAssign):
            found[x.target] = None
            walk_e(x.index)
            walk_e(x.expr)
        elif isinstance(x, If):
            walk_e(x.cond)
            walk(x.then)
            walk(x.orelse)
        elif isinstance(x, While):
            walk_e(x.cond)
            walk(x.body)
        elif isinstance(x, Seq):
            for y in x.items:
                walk(y)
        elif isinstance(x, Parallel):
            for y in x.branches:
                walk(y)

    walk(c)
    return tuple(found)
