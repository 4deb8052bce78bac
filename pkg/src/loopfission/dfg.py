"""Data-flow graphs over the semiring ({0, 1, inf}, max, x).

A :class:`DfgMatrix` is a square matrix indexed by variable names.  Entry
``(x, y)`` says how the value of ``x`` on entry flows into the value of ``y``
on exit: ``INF`` is a dependence, ``ONE`` plain propagation, ``ZERO``
reinitialisation or independence.

Matrices over different variable sets are combined by embedding both into
the union index.  Each matrix carries the weight used on the diagonal of
the variables it does not mention (``pad``): ``ONE`` for the graph of a
command, which leaves unmentioned variables untouched, and ``ZERO`` for
loop corrections, which only add dependences.
"""

from __future__ import annotations

from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .ast import (
    EFFECT,
    ArrayAssign,
    Assign,
    Command,
    Expression,
    If,
    Parallel,
    Seq,
    Skip,
    Use,
    VarRef,
    While,
    expr_occ,
    vars_out,
)


class SemiWeight(IntEnum):
    ZERO = 0
    ONE = 1
    INF = 2

    def __add__(self, other):
        return SemiWeight(max(self, other))

    def __mul__(self, other):
        if self == SemiWeight.ZERO or other == SemiWeight.ZERO:
            return SemiWeight.ZERO
        return SemiWeight(max(self, other))

    def __str__(self):
        return ("0", "1", "inf")[self]


ZERO, ONE, INF = SemiWeight.ZERO, SemiWeight.ONE, SemiWeight.INF


def _as_codes(entries) -> np.ndarray:
    a = np.asarray(entries, dtype=np.uint8)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if a.size and a.max() > 2:
        raise ValueError("entries must be 0, 1 or 2 (inf)")
    return a


class DfgMatrix:
    """Square semiring matrix with rows and columns labelled by variables."""

    __slots__ = ("index", "entries", "pad", "_pos")

    def __init__(self, index: Sequence[str], entries=None, pad: SemiWeight = ONE):
        self.index = tuple(index)
        if len(set(self.index)) != len(self.index):
            raise ValueError("duplicate variable in index")
        n = len(self.index)
        if entries is None:
            entries = np.zeros((n, n), dtype=np.uint8)
        self.entries = _as_codes(entries)
        if self.entries.shape[0] != n:
            raise ValueError("entries do not match index size")
        self.pad = SemiWeight(pad)
        self._pos = {v: k for k, v in enumerate(self.index)}

    @classmethod
    def identity(cls, index: Sequence[str]) -> "DfgMatrix":
        return cls(index, np.eye(len(index), dtype=np.uint8), ONE)

    @classmethod
    def from_rows(cls, index: Sequence[str], rows) -> "DfgMatrix":
        """Build from nested lists of SemiWeight / 0 / 1 / 2."""
        n = len(index)
        codes = np.array([[int(w) for w in row] for row in rows], dtype=np.uint8)
        return cls(index, codes.reshape(n, n) if codes.size == 0 else codes)

    def __getitem__(self, key: tuple[str, str]) -> SemiWeight:
        x, y = key
        px, py = self._pos.get(x), self._pos.get(y)
        if px is None or py is None:
            return self.pad if x == y else ZERO
        return SemiWeight(int(self.entries[px, py]))

    def __contains__(self, name: str) -> bool:
        return name in self._pos

    def embed(self, index: Sequence[str]) -> "DfgMatrix":
        """Re-express over ``index``, which must contain every current variable."""
        index = tuple(index)
        missing = [v for v in self.index if v not in index]
        if missing:
            raise ValueError(f"cannot drop variables {missing}")
        n = len(index)
        out = np.zeros((n, n), dtype=np.uint8)
        np.fill_diagonal(out, int(self.pad))
        pos = [index.index(v) for v in self.index]
        if pos:
            out[np.ix_(pos, pos)] = self.entries
        return DfgMatrix(index, out, self.pad)

    def reindex(self, order: Sequence[str]) -> "DfgMatrix":
        """Same matrix with rows/columns permuted (and padded) to ``order``."""
        return self.embed(tuple(order) + tuple(v for v in self.index if v not in order))

    def dependences(self) -> list[tuple[str, str]]:
        xs, ys = np.nonzero(self.entries == INF)
        return [(self.index[x], self.index[y]) for x, y in zip(xs, ys)]

    def rows(self) -> list[list[SemiWeight]]:
        return [[SemiWeight(int(w)) for w in row] for row in self.entries]

    def __eq__(self, other):
        if not isinstance(other, DfgMatrix):
            return NotImplemented
        if self.pad != other.pad:
            return False
        a, b = _align(self, other)
        return bool(np.array_equal(a.entries, b.entries))

    def __hash__(self):
        return hash((self.index, self.entries.tobytes(), self.pad))

    def __repr__(self):
        return f"DfgMatrix({list(self.index)!r}, {self.entries.tolist()!r})"

    def __add__(self, other):
        return mat_add(self, other)

    def __matmul__(self, other):
        return mat_mul(self, other)

    def format_table(self) -> str:
        """Aligned text table; header row and column carry variable names."""
        labels = list(self.index)
        cells = [[str(SemiWeight(int(w))) for w in row] for row in self.entries]
        width = max([len(s) for s in labels] + [3])
        head = " " * width + " " + " ".join(s.rjust(width) for s in labels)
        body = [
            labels[k].ljust(width) + " " + " ".join(c.rjust(width) for c in cells[k])
            for k in range(len(labels))
        ]
        return "\n".join([head.rstrip(), *body]) + "\n"

    def format_csv(self) -> str:
        labels = list(self.index)
        lines = ["," + ",".join(labels)]
        for k, row in enumerate(self.entries):
            lines.append(labels[k] + "," + ",".join(str(SemiWeight(int(w))) for w in row))
        return "\n".join(lines) + "\n"


def _align(a: DfgMatrix, b: DfgMatrix) -> tuple[DfgMatrix, DfgMatrix]:
    if a.index == b.index:
        return a, b
    index = tuple(dict.fromkeys(a.index + b.index))
    return a.embed(index), b.embed(index)


def mat_add(a: DfgMatrix, b: DfgMatrix) -> DfgMatrix:
    """Pointwise max over the union index."""
    a, b = _align(a, b)
    return DfgMatrix(a.index, np.maximum(a.entries, b.entries), a.pad + b.pad)


def _semiring_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # (a.b)[x, z] = max_y a[x, y] * b[y, z]
    left = a[:, :, None]
    right = b[None, :, :]
    prod = np.where((left == 0) | (right == 0), 0, np.maximum(left, right))
    if prod.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    return prod.max(axis=1).astype(np.uint8)


def mat_mul(a: DfgMatrix, b: DfgMatrix) -> DfgMatrix:
    """Semiring matrix product over the union index."""
    a, b = _align(a, b)
    return DfgMatrix(a.index, _semiring_product(a.entries, b.entries), a.pad * b.pad)


def corr(e: Expression, outs: Iterable[str]) -> DfgMatrix:
    """Loop/branch correction: every variable of ``e`` flows into every ``out``."""
    sources = expr_occ(e)
    outs = tuple(outs)
    index = tuple(dict.fromkeys(sources + outs))
    m = np.zeros((len(index), len(index)), dtype=np.uint8)
    if sources and outs:
        rows = [index.index(v) for v in sources]
        cols = [index.index(v) for v in outs]
        m[np.ix_(rows, cols)] = int(INF)
    return DfgMatrix(index, m, ZERO)


def _assignment(target: str, sources: tuple[str, ...], keep_self: bool) -> DfgMatrix:
    index = tuple(dict.fromkeys((target,) + sources))
    m = np.eye(len(index), dtype=np.uint8)
    t = index.index(target)
    m[t, t] = int(INF) if keep_self else 0
    for v in sources:
        m[index.index(v), t] = int(INF)
    return DfgMatrix(index, m, ONE)


def dfg_of(c: Command) -> DfgMatrix:
    """Data-flow graph of a parallel-free command."""
    if isinstance(c, Assign):
        if c.expr == VarRef(c.target):
            # x = x only propagates x
            return DfgMatrix.identity((c.target,))
        src = expr_occ(c.expr)
        return _assignment(c.target, src, c.target in src)
    if isinstance(c, ArrayAssign):
        # the array is one entity: (t, t) is 0 unless t is read on the right
        src = tuple(dict.fromkeys(expr_occ(c.index) + expr_occ(c.expr)))
        return _assignment(c.target, src, c.target in src)
    if isinstance(c, Skip):
        return DfgMatrix.identity(())
    if isinstance(c, Use):
        index = tuple(dict.fromkeys(c.args + (EFFECT,)))
        m = np.eye(len(index), dtype=np.uint8)
        e = index.index(EFFECT)
        m[:, e] = int(INF)
        return DfgMatrix(index, m, ONE)
    if isinstance(c, Seq):
        result = dfg_of(c.items[0])
        for item in c.items[1:]:
            result = mat_mul(result, dfg_of(item))
        return result
    if isinstance(c, If):
        outs = tuple(dict.fromkeys(vars_out(c.then) + vars_out(c.orelse)))
        return dfg_of(c.then) + dfg_of(c.orelse) + corr(c.cond, outs)
    if isinstance(c, While):
        return dfg_of(c.body) + corr(c.cond, vars_out(c.body))
    if isinstance(c, Parallel):
        raise ValueError("dfg_of is defined on parallel-free commands only")
    raise TypeError(f"not a command: {c!r}")
