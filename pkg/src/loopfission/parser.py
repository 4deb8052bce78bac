"""Concrete syntax for WHILE programs (``.whl`` files).

``parse`` turns source text into a :data:`~loopfission.ast.Program`;
``pretty_print`` produces the canonical text form.  See ``docs/syntax.md``
for the grammar and the desugarings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

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
    seq,
)

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

KEYWORDS = frozenset({"if", "then", "else", "while", "do", "for", "use", "skip", "parallel"})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>//[^\n]*)
  | (?P<nl>\n)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/%<>!=;(){}\[\],])
    """,
    re.VERBOSE,
)


class SourceError(Exception):
    """Malformed program text.  ``line`` and ``column`` are 1-based."""

    def __init__(self, line: int, column: int, message: str, token: str = ""):
        self.line = line
        self.column = column
        self.message = message
        self.token = token
        where = f"{line}:{column}"
        super().__init__(f"{where}: {message}" + (f" (at {token!r})" if token else ""))


@dataclass
class _Tok:
    kind: str  # int, ident, op, nl, eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, pos = 1, 0, 0
    depth = 0  # newlines inside () and [] are not separators
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SourceError(line, pos - line_start + 1, "unexpected character", text[pos])
        kind = m.lastgroup
        tok_text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            if depth == 0:
                toks.append(_Tok("nl", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind in ("int", "ident", "op"):
            if tok_text in ("(", "["):
                depth += 1
            elif tok_text in (")", "]"):
                depth = max(0, depth - 1)
            toks.append(_Tok(kind, tok_text, line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# Binding strength of binary operators; larger binds tighter.
_BINARY_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
    "%": 6,
}
_UNARY_PREC = 7
_ATOM_PREC = 8


class _Parser:
    def __init__(self, text: str, allow_parallel: bool):
        self.toks = _tokenize(text)
        self.pos = 0
        self.allow_parallel = allow_parallel

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def error(self, message: str, tok: _Tok | None = None) -> SourceError:
        tok = tok or self.tok
        return SourceError(tok.line, tok.col, message, tok.text)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "ident") and t.text == text

    def advance(self) -> _Tok:
        t = self.tok
        self.pos += 1
        return t

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def skip_separators(self) -> None:
        while self.tok.kind == "nl" or self.at(";"):
            self.advance()

    def skip_newlines(self) -> None:
        while self.tok.kind == "nl":
            self.advance()

    def name(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error("expected a variable name")
        if t.text == EFFECT:
            raise self.error(f"{EFFECT} is reserved")
        self.advance()
        return t.text

    # -- statements --------------------------------------------------------

    def program(self) -> Program:
        items = self.statements(end="eof")
        return seq(items)

    def statements(self, end: str) -> list[Command]:
        items: list[Command] = []
        self.skip_separators()
        while not self._at_end(end):
            items.extend(self.statement())
            if self._at_end(end):
                break
            if not (self.tok.kind == "nl" or self.at(";")):
                raise self.error("expected ';' or newline between statements")
            self.skip_separators()
        return items

    def _at_end(self, end: str) -> bool:
        if end == "eof":
            return self.tok.kind == "eof"
        if self.tok.kind == "eof":
            raise self.error(f"expected {end!r} before end of input")
        return self.at(end)

    def block(self) -> Seq:
        self.skip_newlines()
        self.expect("{")
        items = self.statements(end="}")
        self.expect("}")
        return seq(items)

    def statement(self) -> list[Command]:
        t = self.tok
        if t.kind != "ident" and not self.at("{"):
            raise self.error("expected a statement")
        if self.at("{"):
            return [self.block()]
        if t.text == "skip":
            self.advance()
            return [Skip()]
        if t.text == "use":
            return [self.use()]
        if t.text == "if":
            return [self.if_()]
        if t.text == "while":
            self.advance()
            cond = self.expr()
            self.skip_newlines()
            if self.at("do"):
                self.advance()
            return [While(cond, self.block())]
        if t.text == "for":
            return self.for_()
        if t.text == "parallel":
            if not self.allow_parallel:
                raise self.error("'parallel' is not allowed in input programs")
            return [self.parallel()]
        return [self.assignment()]

    def use(self) -> Use:
        self.expect("use")
        self.expect("(")
        args: list[str] = []
        if not self.at(")"):
            args.append(self.name())
            while self.at(","):
                self.advance()
                args.append(self.name())
        self.expect(")")
        return Use(tuple(args))

    def if_(self) -> If:
        self.expect("if")
        cond = self.expr()
        self.skip_newlines()
        if self.at("then"):
            self.advance()
        then = self.block()
        # ``else`` may start the next line
        mark = self.pos
        self.skip_newlines()
        if self.at("else"):
            self.advance()
            orelse: Command = self.block()
        else:
            self.pos = mark
            orelse = Skip()
        return If(cond, then, orelse)

    def for_(self) -> list[Command]:
        self.expect("for")
        self.expect("(")
        init = self.assignment()
        self.expect(";")
        cond = self.expr()
        self.expect(";")
        step = self.assignment()
        self.expect(")")
        body = self.block()
        items = tuple(x for x in body.items if not isinstance(x, Skip) or len(body.items) > 1)
        return [init, While(cond, Seq(items + (step,)))]

    def parallel(self) -> Parallel:
        self.expect("parallel")
        branches: list[Command] = []
        while True:
            mark = self.pos
            self.skip_newlines()
            if not self.at("{"):
                self.pos = mark
                break
            b = self.block()
            branches.append(b.items[0] if len(b.items) == 1 else b)
        if len(branches) < 2:
            raise self.error("'parallel' needs at least two branches")
        return Parallel(tuple(branches))

    def assignment(self) -> Command:
        name = self.name()
        if self.at("["):
            self.advance()
            index = self.expr()
            self.expect("]")
            self.expect("=")
            return ArrayAssign(name, index, self.expr())
        self.expect("=")
        return Assign(name, self.expr())

    # -- expressions -------------------------------------------------------

    def expr(self, min_prec: int = 1) -> Expression:
        left = self.unary()
        while True:
            t = self.tok
            prec = _BINARY_PREC.get(t.text) if t.kind == "op" else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self.expr(prec + 1)
            left = OpApply(t.text, (left, right))

    def unary(self) -> Expression:
        t = self.tok
        if t.kind == "op" and t.text in ("!", "-"):
            self.advance()
            if t.text == "-" and self.tok.kind == "int":
                return self.literal(negate=True)
            return OpApply(t.text, (self.unary(),))
        return self.atom()

    def literal(self, negate: bool = False) -> Literal:
        t = self.advance()
        value = -int(t.text) if negate else int(t.text)
        if not INT64_MIN <= value <= INT64_MAX:
            raise self.error("integer literal out of 64-bit range", t)
        return Literal(value)

    def atom(self) -> Expression:
        t = self.tok
        if t.kind == "int":
            return self.literal()
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            name = self.name()
            if self.at("["):
                self.advance()
                index = self.expr()
                self.expect("]")
                if self.at("["):
                    raise self.error("only one subscript level is supported")
                return ArrayRef(name, index)
            return VarRef(name)
        raise self.error("expected an expression")


def parse(text: str, allow_parallel: bool = False) -> Program:
    """Parse program text.

    Raises :class:`SourceError` on malformed input.  ``parallel`` blocks are
    rejected unless ``allow_parallel`` is set (they only appear in
    transformed programs).
    """
    return _Parser(text, allow_parallel).program()


def parse_expr(text: str) -> Expression:
    p = _Parser(text, allow_parallel=False)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error("trailing input after expression")
    return e


# ---------------------------------------------------------------------------
# Printing


def _prec(e: Expression) -> int:
    if isinstance(e, OpApply):
        return _UNARY_PREC if len(e.operands) == 1 else _BINARY_PREC[e.op]
    if isinstance(e, Literal) and e.value < 0:
        return _UNARY_PREC
    return _ATOM_PREC


def format_expr(e: Expression) -> str:
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, Literal):
        return str(e.value)
    if isinstance(e, ArrayRef):
        return f"{e.name}[{format_expr(e.index)}]"
    if isinstance(e, OpApply):
        if len(e.operands) == 1:
            (x,) = e.operands
            inner = format_expr(x)
            # keep -(5) distinct from the literal -5
            if _prec(x) < _UNARY_PREC or (e.op == "-" and isinstance(x, Literal)):
                inner = f"({inner})"
            return f"{e.op}{inner}"
        left, right = e.operands
        p = _BINARY_PREC[e.op]
        ls, rs = format_expr(left), format_expr(right)
        if _prec(left) < p:
            ls = f"({ls})"
        if _prec(right) <= p:
            rs = f"({rs})"
        return f"{ls} {e.op} {rs}"
    raise TypeError(f"not an expression: {e!r}")


def _lines(c: Command, depth: int) -> list[str]:
    pad = "  " * depth
    if isinstance(c, Assign):
        return [f"{pad}{c.target} = {format_expr(c.expr)}"]
    if isinstance(c, ArrayAssign):
        return [f"{pad}{c.target}[{format_expr(c.index)}] = {format_expr(c.expr)}"]
    if isinstance(c, Skip):
        return [f"{pad}skip"]
    if isinstance(c, Use):
        return [f"{pad}use({', '.join(c.args)})"]
    if isinstance(c, While):
        return [f"{pad}while {format_expr(c.cond)} do {{", *_block(c.body, depth), f"{pad}}}"]
    if isinstance(c, If):
        out = [f"{pad}if {format_expr(c.cond)} then {{", *_block(c.then, depth)]
        if isinstance(c.orelse, Skip):
            out.append(f"{pad}}}")
        else:
            out += [f"{pad}}} else {{", *_block(c.orelse, depth), f"{pad}}}"]
        return out
    if isinstance(c, Seq):
        return [f"{pad}{{", *_block(c, depth), f"{pad}}}"]
    if isinstance(c, Parallel):
        out = [f"{pad}parallel {{"]
        for k, b in enumerate(c.branches):
            if k:
                out.append(f"{pad}}} {{")
            out += _block(b, depth)
        out.append(f"{pad}}}")
        return out
    raise TypeError(f"not a command: {c!r}")


def _block(c: Command, depth: int) -> list[str]:
    """Lines of the statements inside a braced block."""
    items = c.items if isinstance(c, Seq) else (c,)
    return [line for x in items for line in _lines(x, depth + 1)]


def pretty_print(p: Command) -> str:
    """Canonical text: two-space indent, one statement per line, braces always."""
    items = p.items if isinstance(p, Seq) else (p,)
    return "".join(line + "\n" for x in items for line in _lines(x, 0))
