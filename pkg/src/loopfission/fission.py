"""SCC-based loop fission.

For a loop ``while e do {C1; ...; Cn}`` the statements are the vertices of a
dependence graph; an edge ``(i, j)`` means statement ``i`` depends on
statement ``j``.  The graph is condensed into its strongly connected
components, and every source component of the condensation, together with
everything it reaches, becomes one generated loop over the same condition.
Statements reached from several sources are duplicated; variables written
by several generated loops are private to each loop and end with equal
values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal as Lit, Sequence

from .ast import (
    Assign,
    Command,
    If,
    Parallel,
    Program,
    Seq,
    VarRef,
    While,
    array_names,
    body_statements,
    contains_use,
    expr_occ,
    vars_occ,
    vars_out,
    vars_in_star,
    vars_out_star,
)
from .dfg import INF, corr, dfg_of

log = logging.getLogger(__name__)

Mode = Lit["seq", "par"]
Partition = tuple[tuple[int, ...], ...]
Covering = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class DepGraph:
    """Dependence graph on the 1-based statement indices of a loop body."""

    stmts: tuple[Command, ...]
    edges: frozenset[tuple[int, int]]

    @property
    def n(self) -> int:
        return len(self.stmts)

    @property
    def vertices(self) -> range:
        return range(1, self.n + 1)

    def successors(self, i: int) -> list[int]:
        return sorted(j for (a, j) in self.edges if a == i)

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in self.vertices}
        for i, j in sorted(self.edges):
            adj[i].append(j)
        return adj


@dataclass(frozen=True)
class Condensation:
    """Acyclic quotient of a DepGraph; vertices are indices into ``parts``."""

    parts: Partition
    edges: frozenset[tuple[int, int]]

    def sources(self) -> list[int]:
        targets = {b for (_, b) in self.edges}
        return [k for k in range(len(self.parts)) if k not in targets]


@dataclass
class FissionReport:
    location: tuple[int, ...]
    loop: While
    graph: DepGraph
    sccs: Partition
    condensation: Condensation
    covering: Covering
    privatized: tuple[str, ...]
    generated: tuple[While, ...] = ()
    seq_fallback: bool = False

    @property
    def split(self) -> bool:
        return len(self.covering) >= 2

    @property
    def duplicated(self) -> int:
        return sum(len(s) for s in self.covering) - self.graph.n

    def to_dict(self) -> dict:
        return {
            "location": list(self.location),
            "statements": self.graph.n,
            "edges": sorted([list(e) for e in self.graph.edges]),
            "sccs": [list(p) for p in self.sccs],
            "condensation_edges": sorted([list(e) for e in self.condensation.edges]),
            "covering": [list(s) for s in self.covering],
            "split": self.split,
            "duplicated": self.duplicated,
            "privatized": list(self.privatized),
            "seq_fallback": self.seq_fallback,
        }


@dataclass
class FissionOptions:
    mode: Mode = "par"
    max_dup_ratio: Fraction | None = None
    augment: bool = True


class CoveringError(AssertionError):
    pass


# ---------------------------------------------------------------------------
# Dependence graph


def dependence_graph(loop: While, augment: bool = True) -> DepGraph:
    """Build the statement dependence graph of ``loop``.

    The base edges come from the composed body DFG plus the loop correction:
    ``(i, j)`` whenever some ``x`` written by ``Cj`` has an ``inf`` entry
    towards some ``y`` read by ``Ci``; and every statement depends on the
    statements that update the condition variables.

    With ``augment`` two direct rules are added: ``Ci`` reads a variable
    ``Cj`` writes (the matrix loses this when ``Cj`` kills its own input, as
    in ``x = z + 1; use(x)``), and two statements writing the same variable
    depend on each other (otherwise separate loops would leave different
    final values).
    """
    stmts = body_statements(loop.body)
    n = len(stmts)
    ins = [set(vars_in_star(c)) for c in stmts]
    outs = [set(vars_out_star(c)) for c in stmts]
    m = dfg_of(Seq(stmts)) + corr(loop.cond, vars_out(loop.body))
    edges: set[tuple[int, int]] = set()

    for i in range(n):
        for j in range(n):
            if any(m[x, y] == INF for x in outs[j] for y in ins[i]):
                edges.add((i + 1, j + 1))

    cond_vars = set(expr_occ(loop.cond))
    updaters = [j for j in range(n) if outs[j] & cond_vars]
    for i in range(n):
        for j in updaters:
            edges.add((i + 1, j + 1))

    if augment:
        for i in range(n):
            for j in range(n):
                if outs[j] & ins[i]:
                    edges.add((i + 1, j + 1))
                if i != j and outs[i] & outs[j]:
                    edges.add((i + 1, j + 1))
    return DepGraph(tuple(stmts), frozenset(edges))


# ---------------------------------------------------------------------------
# Strongly connected components


def sccs(g: DepGraph) -> Partition:
    """Tarjan's algorithm, iterative; components sorted by smallest member."""
    adj = g.adjacency()
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    found: list[tuple[int, ...]] = []
    counter = 0

    for root in g.vertices:
        if root in index:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                found.append(tuple(sorted(comp)))
    return tuple(sorted(found))


def _has_cycle(nodes: int, edges: Iterable[tuple[int, int]]) -> bool:
    succ: dict[int, list[int]] = {k: [] for k in range(nodes)}
    indeg = [0] * nodes
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    ready = [k for k in range(nodes) if indeg[k] == 0]
    seen = 0
    while ready:
        k = ready.pop()
        seen += 1
        for b in succ[k]:
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
    return seen != nodes


def condensation(g: DepGraph, parts: Partition) -> Condensation:
    owner = {v: k for k, part in enumerate(parts) for v in part}
    edges = frozenset(
        (owner[i], owner[j]) for (i, j) in g.edges if owner[i] != owner[j]
    )
    if _has_cycle(len(parts), edges):
        raise AssertionError("condensation is not acyclic")
    return Condensation(tuple(parts), edges)


def source_closures(dag: Condensation) -> Covering:
    """One subgraph per source component: all statements it reaches."""
    succ: dict[int, list[int]] = {k: [] for k in range(len(dag.parts))}
    for a, b in sorted(dag.edges):
        succ[a].append(b)
    covering = []
    for src in dag.sources():
        seen = {src}
        todo = [src]
        while todo:
            k = todo.pop()
            for b in succ[k]:
                if b not in seen:
                    seen.add(b)
                    todo.append(b)
        covering.append(tuple(sorted(v for k in seen for v in dag.parts[k])))
    return tuple(covering)


def verify_covering(g: DepGraph, c: Covering) -> str | None:
    """Return None for a saturated covering, else the first violation."""
    covered = set().union(*map(set, c)) if c else set()
    for v in g.vertices:
        if v not in covered:
            return f"vertex {v} uncovered"
    for k, sub in enumerate(c):
        members = set(sub)
        for i, j in sorted(g.edges):
            if i in members and j not in members:
                return f"edge ({i}, {j}) leaves subgraph {k + 1}"
    return None


def merge_effects(c: Covering, g: DepGraph) -> Covering:
    """Merge subgraphs sharing a statement that contains ``use``.

    Duplicating such a statement would repeat its effect.  A union of
    closed subgraphs is closed, so the result is still saturated.
    """
    effectful = {v for v in g.vertices if contains_use(g.stmts[v - 1])}
    subs = [set(s) for s in c]
    merged = True
    while merged:
        merged = False
        for a in range(len(subs)):
            for b in range(a + 1, len(subs)):
                if subs[a] & subs[b] & effectful:
                    subs[a] |= subs.pop(b)
                    merged = True
                    break
            if merged:
                break
    return tuple(tuple(sorted(s)) for s in subs)


def dup_ratio(c: Covering, n: int) -> Fraction:
    if n == 0:
        return Fraction(0)
    return Fraction(sum(len(s) for s in c) - n, n)


def merge_by_cost(c: Covering, g: DepGraph, max_dup_ratio: Fraction | float) -> Covering:
    """Merge subgraphs until the duplicated-statement ratio is acceptable.

    Each step merges the pair with the largest intersection; ties go to the
    lexicographically smallest pair of positions, and the union takes the
    first position.
    """
    limit = Fraction(max_dup_ratio)
    subs = [tuple(s) for s in c]
    while len(subs) >= 2 and dup_ratio(tuple(subs), g.n) > limit:
        best = None
        for a in range(len(subs)):
            for b in range(a + 1, len(subs)):
                size = len(set(subs[a]) & set(subs[b]))
                if best is None or size > best[0]:
                    best = (size, a, b)
        _, a, b = best
        subs[a] = tuple(sorted(set(subs[a]) | set(subs[b])))
        del subs[b]
    return tuple(subs)


# ---------------------------------------------------------------------------
# Rebuilding loops


def privatized_vars(loop: While, c: Covering) -> tuple[str, ...]:
    """Variables written by two or more of the generated loops."""
    stmts = body_statements(loop.body)
    counts: dict[str, int] = {}
    for sub in c:
        written = dict.fromkeys(v for k in sub for v in vars_out_star(stmts[k - 1]))
        for v in written:
            counts[v] = counts.get(v, 0) + 1
    return tuple(v for v in vars_occ(loop) if counts.get(v, 0) >= 2)


def _fresh(base: str, taken: set[str]) -> str:
    k = 1
    while f"{base}__pre{k}" in taken:
        k += 1
    name = f"{base}__pre{k}"
    taken.add(name)
    return name


def rebuild(
    loop: While,
    c: Covering,
    mode: Mode = "par",
    stmts: Sequence[Command] | None = None,
    taken: set[str] | None = None,
) -> tuple[Command, tuple[str, ...]]:
    """Generate one loop per subgraph and combine them according to ``mode``.

    ``stmts`` replaces the body statements in the output (used when inner
    loops were already transformed); the analysis is unaffected.  In ``seq``
    mode every loop after the first starts from the pre-loop values of the
    privatized scalars, saved in fresh variables avoiding ``taken``.
    """
    original = body_statements(loop.body)
    stmts = tuple(original if stmts is None else stmts)
    private = privatized_vars(loop, c)
    if len(c) < 2:
        return (While(loop.cond, Seq(stmts)) if stmts != original else loop), private
    loops = tuple(While(loop.cond, Seq(tuple(stmts[k - 1] for k in sub))) for sub in c)
    if mode == "par":
        return Parallel(loops), private

    taken = set(taken or ()) | set(vars_occ(loop))
    saves = {v: _fresh(v, taken) for v in private}
    items: list[Command] = [Assign(saves[v], VarRef(v)) for v in private]
    for k, generated in enumerate(loops):
        if k:
            # restoring a variable this loop never writes would clobber its final value
            written = {v for j in c[k] for v in vars_out_star(original[j - 1])}
            items.extend(Assign(v, VarRef(saves[v])) for v in private if v in written)
        items.append(generated)
    return Seq(tuple(items)), private


# ---------------------------------------------------------------------------
# Whole programs


def analyze_loop(loop: While, options: FissionOptions | None = None) -> FissionReport:
    """Run the analysis pipeline on one loop without rewriting anything."""
    options = options or FissionOptions()
    g = dependence_graph(loop, augment=options.augment)
    parts = sccs(g)
    dag = condensation(g, parts)
    cover = source_closures(dag)
    problem = verify_covering(g, cover)
    if problem:
        raise CoveringError(problem)
    cover = merge_effects(cover, g)
    if options.max_dup_ratio is not None:
        cover = merge_by_cost(cover, g, options.max_dup_ratio)
        problem = verify_covering(g, cover)
        if problem:
            raise CoveringError(problem)
    return FissionReport(
        location=(),
        loop=loop,
        graph=g,
        sccs=parts,
        condensation=dag,
        covering=cover,
        privatized=privatized_vars(loop, cover),
    )


def fission_program(
    p: Program, options: FissionOptions | None = None
) -> tuple[Program, list[FissionReport]]:
    """Fission every loop of ``p``, innermost first.

    A loop that was already split is a single statement of its enclosing
    body; the enclosing loop is analysed on the original statement and the
    transformed one is emitted.  Reports are in completion order.
    """
    options = options or FissionOptions()
    reports: list[FissionReport] = []
    taken = set(vars_occ(p))

    def transform_items(items: Sequence[Command], path: tuple[int, ...]) -> list[Command]:
        out: list[Command] = []
        for k, c in enumerate(items):
            new = transform(c, path + (k + 1,))
            if isinstance(new, Seq) and not isinstance(c, Seq):
                out.extend(new.items)
            else:
                out.append(new)
        return out

    def transform(c: Command, path: tuple[int, ...]) -> Command:
        if isinstance(c, Seq):
            return Seq(tuple(transform_items(c.items, path)))
        if isinstance(c, If):
            return If(c.cond, transform(c.then, path), transform(c.orelse, path))
        if isinstance(c, Parallel):
            raise ValueError("fission_program expects a parallel-free program")
        if not isinstance(c, While):
            return c
        # a transformed inner loop stays one statement of this body
        inner = [transform(s, path + (k + 1,)) for k, s in enumerate(body_statements(c.body))]
        report = analyze_loop(c, options)
        report.location = path
        if not report.split:
            reports.append(report)
            return While(c.cond, Seq(tuple(inner)))
        mode = options.mode
        if mode == "seq" and any(v in _arrays(c) for v in report.privatized):
            # privatized arrays cannot be restored by assignment
            log.info("loop at %s: privatized array, left unsplit in seq mode", path)
            report.seq_fallback = True
            reports.append(report)
            return While(c.cond, Seq(tuple(inner)))
        new, _ = rebuild(c, report.covering, "par", stmts=inner)
        report.generated = new.branches
        if mode == "seq":
            new, _ = rebuild(c, report.covering, "seq", stmts=inner, taken=taken)
        reports.append(report)
        return new

    return Seq(tuple(transform_items(p.items, ()))), reports


def _arrays(c: Command) -> set[str]:
    return set(array_names(c))


def count_branches(c: Command) -> int:
    """Total number of branches over all Parallel nodes in ``c``."""
    if isinstance(c, Parallel):
        return len(c.branches) + sum(count_branches(b) for b in c.branches)
    if isinstance(c, Seq):
        return sum(count_branches(x) for x in c.items)
    if isinstance(c, If):
        return count_branches(c.then) + count_branches(c.orelse)
    if isinstance(c, While):
        return count_branches(c.body)
    return 0
