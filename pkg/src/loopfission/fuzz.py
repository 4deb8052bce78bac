"""Random terminating WHILE programs for differential testing.

Every loop owns a counter ``cK`` that is reset right before the loop, is
tested by the guard ``cK != N`` and is incremented exactly once, at the
top level of the body.  Nothing else writes a counter, so every loop runs
exactly ``N <= max_iterations`` times.  Array indices are counters plus a
non-negative literal and divisors are positive literals, so generated
programs never hit a runtime error.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .ast import (
    ArrayAssign,
    ArrayRef,
    Assign,
    Command,
    Expression,
    If,
    Literal,
    OpApply,
    Program,
    Seq,
    Skip,
    Use,
    VarRef,
    While,
)


@dataclass(frozen=True)
class FuzzConfig:
    max_stmts: int = 12
    max_depth: int = 3
    var_pool: tuple[str, ...] = ("a", "b", "d", "x", "y", "z")
    array_pool: tuple[str, ...] = ("p", "q", "r")
    max_iterations: int = 8

    def __post_init__(self):
        if min(self.max_stmts, self.max_depth, self.max_iterations) < 1:
            raise ValueError("fuzz bounds must be positive")
        if not self.var_pool:
            raise ValueError("var_pool must not be empty")
        if set(self.var_pool) & set(self.array_pool):
            raise ValueError("scalar and array pools must be disjoint")

    def fuel(self) -> int:
        """An iteration budget no generated program can exhaust."""
        return self.max_iterations ** self.max_depth * 64 + 1000


_ARITH = ("+", "+", "-", "*")
_COMPARE = ("==", "!=", "<", "<=", ">", ">=")


class _Generator:
    def __init__(self, rng: random.Random, cfg: FuzzConfig):
        self.rng = rng
        self.cfg = cfg
        self.loops = 0

    # -- expressions -------------------------------------------------------

    def index(self, counters: list[str]) -> Expression:
        rng = self.rng
        if not counters:
            return Literal(rng.randint(0, 3))
        c = VarRef(rng.choice(counters))
        if rng.random() < 0.3:
            return OpApply("+", (c, Literal(rng.randint(1, 2))))
        return c

    def atom(self, counters: list[str]) -> Expression:
        rng = self.rng
        r = rng.random()
        if r < 0.45:
            return VarRef(rng.choice(self.cfg.var_pool))
        if r < 0.65:
            return Literal(rng.randint(-3, 9))
        if r < 0.85 and self.cfg.array_pool:
            return ArrayRef(rng.choice(self.cfg.array_pool), self.index(counters))
        if counters:
            return VarRef(rng.choice(counters))
        return Literal(rng.randint(0, 5))

    def expr(self, counters: list[str], depth: int = 2) -> Expression:
        rng = self.rng
        if depth == 0 or rng.random() < 0.35:
            return self.atom(counters)
        r = rng.random()
        if r < 0.7:
            op = rng.choice(_ARITH)
            return OpApply(op, (self.expr(counters, depth - 1), self.expr(counters, depth - 1)))
        if r < 0.8:
            op = rng.choice(("/", "%"))
            return OpApply(op, (self.expr(counters, depth - 1), Literal(rng.randint(1, 5))))
        if r < 0.95:
            op = rng.choice(_COMPARE)
            return OpApply(op, (self.expr(counters, depth - 1), self.expr(counters, depth - 1)))
        return OpApply("-", (self.atom(counters),))

    def cond(self, counters: list[str]) -> Expression:
        rng = self.rng
        c = OpApply(rng.choice(_COMPARE), (self.expr(counters, 1), self.expr(counters, 1)))
        if rng.random() < 0.2:
            other = OpApply(rng.choice(_COMPARE), (self.atom(counters), self.atom(counters)))
            c = OpApply(rng.choice(("&&", "||")), (c, other))
        return c

    # -- commands ----------------------------------------------------------

    def simple(self, counters: list[str]) -> Command:
        rng = self.rng
        r = rng.random()
        if r < 0.55 or not self.cfg.array_pool:
            return Assign(rng.choice(self.cfg.var_pool), self.expr(counters))
        if r < 0.85:
            return ArrayAssign(rng.choice(self.cfg.array_pool), self.index(counters), self.expr(counters))
        k = rng.randint(1, 2)
        return Use(tuple(rng.sample(self.cfg.var_pool, min(k, len(self.cfg.var_pool)))))

    def block(self, counters: list[str], limit: int) -> Seq:
        return Seq(tuple(self.simple(counters) for _ in range(self.rng.randint(1, limit))))

    def statements(self, counters: list[str], depth: int, budget: int) -> list[Command]:
        """Up to ``budget`` statements; nested loops count as two (reset + loop)."""
        rng = self.rng
        out: list[Command] = []
        while budget > 0:
            r = rng.random()
            if r < 0.14 and depth < self.cfg.max_depth and budget >= 2:
                out.extend(self.loop(counters, depth + 1))
                budget -= 2
            elif r < 0.28:
                orelse = self.block(counters, 2) if rng.random() < 0.5 else Skip()
                out.append(If(self.cond(counters), self.block(counters, 3), orelse))
                budget -= 1
            else:
                out.append(self.simple(counters))
                budget -= 1
            if rng.random() < 0.2:
                break
        return out

    def loop(self, counters: list[str], depth: int) -> list[Command]:
        rng = self.rng
        name = f"c{self.loops}"
        self.loops += 1
        inner = counters + [name]
        budget = rng.randint(1, self.cfg.max_stmts - 1) if self.cfg.max_stmts > 1 else 0
        body = self.statements(inner, depth, budget)
        step = Assign(name, OpApply("+", (VarRef(name), Literal(1))))
        body.insert(rng.randint(0, len(body)), step)
        bound = Literal(rng.randint(1, self.cfg.max_iterations))
        guard = OpApply("!=", (VarRef(name), bound))
        return [Assign(name, Literal(0)), While(guard, Seq(tuple(body)))]

    def program(self) -> Program:
        rng = self.rng
        items: list[Command] = []
        for v in rng.sample(self.cfg.var_pool, rng.randint(1, len(self.cfg.var_pool))):
            items.append(Assign(v, Literal(rng.randint(-5, 9))))
        for _ in range(rng.randint(1, 2)):
            items.extend(self.loop([], 1))
            if rng.random() < 0.5:
                items.append(self.simple([]))
        items.append(Use(tuple(self.cfg.var_pool)))
        return Seq(tuple(items))


def random_program(seed: int, config: FuzzConfig | None = None) -> Program:
    """Deterministic random program for ``seed``."""
    return _Generator(random.Random(seed), config or FuzzConfig()).program()
