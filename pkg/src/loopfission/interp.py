"""Reference semantics for WHILE programs, including ``parallel``.

Values are 64-bit two's-complement integers.  Scalars and array cells
default to 0.  ``use`` appends the observed values to an effect log.

A ``parallel`` command runs every branch on a private copy of the current
state.  Afterwards each variable takes the value of the branch that wrote
it; when several branches wrote it, they must agree, otherwise the run
fails with a ``parallel-race`` runtime error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

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
    vars_occ,
    vars_out,
)

DEFAULT_FUEL = 10**7

_MASK = (1 << 64) - 1
_SIGN = 1 << 63


def wrap(v: int) -> int:
    """Reduce to the signed 64-bit range."""
    v &= _MASK
    return v - (1 << 64) if v & _SIGN else v


class WhileRuntimeError(Exception):
    def __init__(self, kind: str, detail: str):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: {detail}")


class FuelExhausted(Exception):
    pass


@dataclass
class State:
    scalars: dict[str, int] = field(default_factory=dict)
    arrays: dict[str, dict[int, int]] = field(default_factory=dict)

    def copy(self) -> "State":
        return State(dict(self.scalars), {k: dict(v) for k, v in self.arrays.items()})

    def value(self, name: str):
        """Comparable value of a variable: an int, or a sorted tuple of nonzero cells."""
        if name in self.arrays:
            return tuple(sorted((k, v) for k, v in self.arrays[name].items() if v))
        return self.scalars.get(name, 0)

    def names(self) -> list[str]:
        return sorted(set(self.scalars) | set(self.arrays))

    def to_dict(self) -> dict:
        out: dict = {}
        for name in self.names():
            if name in self.arrays:
                out[name] = {str(k): v for k, v in sorted(self.arrays[name].items())}
            else:
                out[name] = self.scalars[name]
        return out


@dataclass(frozen=True)
class Effect:
    args: tuple[str, ...]
    values: tuple


@dataclass
class RunResult:
    state: State
    log: list[Effect]
    status: str = "completed"  # completed | fuel-exhausted | runtime-error
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "completed"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "detail": self.detail,
            "state": self.state.to_dict(),
            "log": [{"args": list(e.args), "values": _jsonable(e.values)} for e in self.log],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(values):
    return [list(map(list, v)) if isinstance(v, tuple) else v for v in values]


LoopObserver = Callable[[While, State, State], None]


def _cdiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


class _Machine:
    def __init__(self, state: State, fuel: int, watch: dict[int, LoopObserver] | None):
        self.state = state
        self.fuel = fuel
        self.log: list[Effect] = []
        self.written: set[str] = set()
        self.watch = watch or {}

    # -- expressions -------------------------------------------------------

    def eval(self, e: Expression) -> int:
        if isinstance(e, Literal):
            return e.value
        if isinstance(e, VarRef):
            if e.name in self.state.arrays:
                raise WhileRuntimeError("kind-mismatch", f"array {e.name} used as a scalar")
            return self.state.scalars.get(e.name, 0)
        if isinstance(e, ArrayRef):
            if e.name in self.state.scalars:
                raise WhileRuntimeError("kind-mismatch", f"scalar {e.name} used as an array")
            k = self.eval(e.index)
            if k < 0:
                raise WhileRuntimeError("negative-index", f"{e.name}[{k}]")
            return self.state.arrays.get(e.name, {}).get(k, 0)
        if isinstance(e, OpApply):
            return self.apply(e)
        raise TypeError(f"not an expression: {e!r}")

    def apply(self, e: OpApply) -> int:
        op = e.op
        if len(e.operands) == 1:
            v = self.eval(e.operands[0])
            return int(v == 0) if op == "!" else wrap(-v)
        left, right = e.operands
        if op == "&&":
            return int(self.eval(left) != 0 and self.eval(right) != 0)
        if op == "||":
            return int(self.eval(left) != 0 or self.eval(right) != 0)
        a, b = self.eval(left), self.eval(right)
        if op == "+":
            return wrap(a + b)
        if op == "-":
            return wrap(a - b)
        if op == "*":
            return wrap(a * b)
        if op in ("/", "%"):
            if b == 0:
                raise WhileRuntimeError("division-by-zero", f"{a} {op} 0")
            q = _cdiv(a, b)
            return wrap(q) if op == "/" else wrap(a - b * q)
        if op == "==":
            return int(a == b)
        if op == "!=":
            return int(a != b)
        if op == "<":
            return int(a < b)
        if op == "<=":
            return int(a <= b)
        if op == ">":
            return int(a > b)
        if op == ">=":
            return int(a >= b)
        raise ValueError(f"unknown operator {op!r}")

    # -- commands ----------------------------------------------------------

    def run(self, c: Command) -> None:
        st = self.state
        if isinstance(c, Assign):
            if c.target in st.arrays:
                raise WhileRuntimeError("kind-mismatch", f"array {c.target} assigned as a scalar")
            st.scalars[c.target] = self.eval(c.expr)
            self.written.add(c.target)
        elif isinstance(c, ArrayAssign):
            if c.target in st.scalars:
                raise WhileRuntimeError("kind-mismatch", f"scalar {c.target} used as an array")
            k = self.eval(c.index)
            if k < 0:
                raise WhileRuntimeError("negative-index", f"{c.target}[{k}]")
            v = self.eval(c.expr)
            st.arrays.setdefault(c.target, {})[k] = v
            self.written.add(c.target)
        elif isinstance(c, Seq):
            for x in c.items:
                self.run(x)
        elif isinstance(c, If):
            self.run(c.then if self.eval(c.cond) != 0 else c.orelse)
        elif isinstance(c, While):
            observer = self.watch.get(id(c))
            pre = st.copy() if observer else None
            while self.eval(c.cond) != 0:
                if self.fuel <= 0:
                    raise FuelExhausted()
                self.fuel -= 1
                self.run(c.body)
            if observer:
                observer(c, pre, st.copy())
        elif isinstance(c, Use):
            self.log.append(Effect(c.args, tuple(st.value(a) for a in c.args)))
        elif isinstance(c, Skip):
            pass
        elif isinstance(c, Parallel):
            self.parallel(c)
        else:
            raise TypeError(f"not a command: {c!r}")

    def parallel(self, c: Parallel) -> None:
        pre = self.state
        outer_log, outer_written = self.log, self.written
        results = []
        for branch in c.branches:
            self.state = pre.copy()
            self.log = []
            self.written = set()
            self.run(branch)
            results.append((self.state, self.log, self.written))
        merged = pre
        for name in sorted(set().union(*(w for _, _, w in results))):
            writers = [s for s, _, w in results if name in w]
            values = {repr(s.value(name)) for s in writers}
            if len(values) > 1:
                raise WhileRuntimeError("parallel-race", f"branches disagree on {name}")
            src = writers[0]
            if name in src.arrays:
                merged.arrays[name] = dict(src.arrays[name])
            else:
                merged.scalars[name] = src.scalars.get(name, 0)
        self.state = merged
        self.log = outer_log
        for _, branch_log, written in results:
            self.log.extend(branch_log)
            outer_written |= written
        self.written = outer_written


def execute(
    c: Command,
    state: State | None = None,
    fuel: int = DEFAULT_FUEL,
    watch: dict[int, LoopObserver] | None = None,
) -> RunResult:
    """Run ``c`` from a copy of ``state``; ``fuel`` bounds total loop iterations.

    ``watch`` maps ``id()`` of While nodes to observers called with the
    state before and after each complete execution of that loop.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    m = _Machine((state or State()).copy(), fuel, watch)
    try:
        m.run(c)
    except FuelExhausted:
        return RunResult(m.state, m.log, "fuel-exhausted", "iteration budget exhausted")
    except WhileRuntimeError as err:
        return RunResult(m.state, m.log, "runtime-error", str(err))
    return RunResult(m.state, m.log)


# ---------------------------------------------------------------------------
# Differential checking of the fission transformation


@dataclass
class Verdict:
    ok: bool
    kind: str = "ok"
    mode: str = ""
    variable: str = ""
    location: tuple[int, ...] = ()
    expected: object = None
    actual: object = None
    detail: str = ""
    split_loops: int = 0

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "kind": self.kind,
            "mode": self.mode,
            "variable": self.variable,
            "location": list(self.location),
            "expected": _plain(self.expected),
            "actual": _plain(self.actual),
            "detail": self.detail,
            "split_loops": self.split_loops,
        }

    def __str__(self):
        if self.ok:
            return f"ok ({self.split_loops} loop(s) split)"
        where = f" at loop {'/'.join(map(str, self.location))}" if self.location else ""
        var = f" variable {self.variable}" if self.variable else ""
        return (
            f"FAIL {self.kind} [{self.mode}]{where}{var}: "
            f"expected {self.expected!r}, got {self.actual!r} {self.detail}".rstrip()
        )


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _error_kind(r: RunResult) -> str:
    return r.detail.split(":", 1)[0] if r.status == "runtime-error" else ""


def differential_check(
    p: Program,
    options=None,
    state: State | None = None,
    fuel: int = DEFAULT_FUEL,
    max_observations: int | None = 16,
) -> Verdict:
    """Run ``p`` and its fissioned forms (par and seq) and compare them.

    Checks final values of every variable of ``p``, the effect logs, and
    for every split loop that each generated loop run alone from the
    pre-loop state reproduces the original post-loop value of each
    variable it writes.  ``max_observations`` caps how many executions of
    a nested loop are re-checked.
    """
    from dataclasses import replace

    from .fission import FissionOptions, fission_program

    base = options or FissionOptions()
    par_prog, reports = fission_program(p, replace(base, mode="par"))
    seq_prog, _ = fission_program(p, replace(base, mode="seq"))
    split = [r for r in reports if r.split]

    observations: dict[int, list[tuple[State, State]]] = {}

    def record(loop, pre, post):
        seen = observations.setdefault(id(loop), [])
        if max_observations is None or len(seen) < max_observations:
            seen.append((pre, post))

    watch = {id(r.loop): record for r in split}
    original = execute(p, state, fuel, watch)
    names = [v for v in vars_occ(p) if v != EFFECT]
    n_split = len(split)

    for mode, prog in (("par", par_prog), ("seq", seq_prog)):
        run = execute(prog, state, fuel)
        if run.status != original.status or _error_kind(run) != _error_kind(original):
            kind = "parallel-race" if "parallel-race" in run.detail else "status-mismatch"
            return Verdict(False, kind, mode, expected=original.status, actual=run.status,
                           detail=run.detail or original.detail, split_loops=n_split)
        if not original.ok:
            # states are only comparable for completed runs
            continue
        for v in names:
            if original.state.value(v) != run.state.value(v):
                return Verdict(False, "state-mismatch", mode, v,
                               expected=original.state.value(v), actual=run.state.value(v),
                               split_loops=n_split)
        if original.log != run.log:
            return Verdict(False, "log-mismatch", mode, split_loops=n_split,
                           detail=f"{len(original.log)} vs {len(run.log)} effects")

    if not original.ok:
        return Verdict(True, split_loops=n_split, detail=f"all runs ended with {original.status}")

    for r in split:
        for pre, post in observations.get(id(r.loop), []):
            for k, loop in enumerate(r.generated):
                alone = execute(loop, pre, fuel)
                if not alone.ok:
                    return Verdict(False, "per-loop-status", "par", location=r.location,
                                   expected="completed", actual=alone.status,
                                   detail=f"generated loop {k + 1}: {alone.detail}",
                                   split_loops=n_split)
                for v in vars_out(loop):
                    if alone.state.value(v) != post.value(v):
                        return Verdict(False, "per-loop-mismatch", "par", v, r.location,
                                       expected=post.value(v), actual=alone.state.value(v),
                                       detail=f"generated loop {k + 1}", split_loops=n_split)
    return Verdict(True, split_loops=n_split)


from .fuzz import FuzzConfig, random_program  # noqa: E402  (re-export)
