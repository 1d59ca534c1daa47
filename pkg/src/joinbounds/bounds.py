"""Size bounds for join answers and the instances that make them tight.

* :func:`agm_bound` evaluates prod |R|^x_R for a fractional edge cover x.
* :func:`worst_case_instance` builds grid relations from an optimal dual
  solution, reaching the bound for unconstrained sizes.
* :func:`constrained_bound` / :func:`constrained_worst_instance` do the same
  when every relation R has a prescribed size N_R.
* The graph helpers encode a graph as a query of binary relations of size 2,
  whose largest answer is 2 to the independence number.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .engine import DEFAULT_TUPLE_BUDGET, Instance, Relation
from .errors import CapabilityError, CapacityError, DomainError, InvariantError, ParseError
from .lp import CoverLp, CoverSolution, fractional_cover, is_fractional_cover, solve_cover_lp
from .numeric import Log2Value, as_fraction, exact_log2, floor_pow2, lcm_of_denominators, rational_pow_le
from .query import JoinQuery, RelationSchema, TOKEN

__all__ = [
    "BoundValue", "GraphInput", "agm_bound", "constrained_bound",
    "constrained_worst_instance", "graph_to_query", "independence_number",
    "independent_set_instance", "is_independent", "maximum_independent_set",
    "parse_graph", "parse_sizes", "worst_case_instance",
]


@dataclass(frozen=True)
class BoundValue(Log2Value):
    """prod |R|^x_R, kept in log form; ``factors`` lists (relation, size, x_R)."""

    factors: tuple[tuple[str, int, Fraction], ...] = ()

    def holds_for(self, count: int, rel_tol: float = 1e-6) -> bool:
        """Whether ``count`` is at most the bound.

        Decided exactly when the integers involved are small enough, otherwise
        by comparing logarithms with a relative slack.
        """
        if count <= 0:
            return True
        if self.log2 == -math.inf:
            return False
        exact = rational_pow_le(count, [(n, x) for _, n, x in self.factors])
        if exact is not None:
            return exact
        return math.log2(count) <= self.log2 + math.log2(1 + rel_tol)


def agm_bound(query: JoinQuery, x: Mapping[str, Fraction], sizes: Mapping[str, int]) -> BoundValue:
    """prod_R |R|^x_R for a fractional edge cover ``x`` of ``query``.

    A size of 0 with x_R > 0 makes the bound 0; with x_R = 0 it contributes 1.
    """
    xs = {r: as_fraction(x.get(r, 0)) for r in query.names}
    if not is_fractional_cover(query, xs):
        raise DomainError("x is not a fractional edge cover of the query")
    factors = []
    for r in query.names:
        if r not in sizes:
            raise DomainError(f"no size given for relation {r}")
        n_r = int(sizes[r])
        if n_r < 0:
            raise DomainError(f"size of {r} is negative")
        factors.append((r, n_r, xs[r]))
    if any(n == 0 and e > 0 for _, n, e in factors):
        return BoundValue(-math.inf, None, tuple(factors))
    live = [(n, e) for _, n, e in factors if e != 0 and n != 1]
    log2 = math.fsum(float(e) * math.log2(n) for n, e in live)
    exact = None
    if all(exact_log2(n) is not None for n, _ in live):
        exact = sum((e * exact_log2(n) for n, e in live), Fraction(0))
        log2 = float(exact)
    return BoundValue(log2, exact, tuple(factors))


def _grid_relation(schema: RelationSchema, widths: Mapping[str, int], start: int = 0) -> Relation:
    ranges = [range(start, start + widths[a]) for a in schema.attributes]
    return Relation(schema.attributes, frozenset(itertools.product(*ranges)))


def _check_budget(required: int, budget: int | None) -> None:
    if budget is not None and required > budget:
        raise CapacityError(
            f"instance would hold {required} tuples, budget is {budget}", required, budget)


def worst_case_instance(query: JoinQuery, n0: int, budget: int | None = DEFAULT_TUPLE_BUDGET,
                        solution: CoverSolution | None = None) -> Instance:
    """Grid instance with |Q(D)| >= prod |R(D)|^x_R.

    With the optimal dual written as y_a = p_a/q, attribute a ranges over
    n0^p_a values 0..n0^p_a - 1 and each relation is the full grid over its
    attributes. Relations with x_R > 0 all get exactly N = n0^q tuples.
    """
    if n0 < 2:
        raise DomainError("n0 must be at least 2")
    sol = solution if solution is not None else fractional_cover(query)
    q = lcm_of_denominators(sol.y.values())
    widths = {a: n0 ** int(sol.y[a] * q) for a in query.universe}
    sizes = {r.name: math.prod(widths[a] for a in r.attributes) for r in query.relations}
    _check_budget(sum(sizes.values()), budget)
    return Instance({r.name: _grid_relation(r, widths) for r in query.relations})


def constrained_bound(query: JoinQuery, sizes: Mapping[str, int]) -> tuple[CoverSolution, BoundValue]:
    """Optimal prod N_R^x_R over fractional edge covers, via costs log2 N_R."""
    sol = solve_cover_lp(CoverLp.from_sizes(query, sizes))
    return sol, agm_bound(query, sol.x, sizes)


def _padding(existing: set[tuple[int, ...]], arity: int, count: int) -> list[tuple[int, ...]]:
    """The ``count`` lexicographically smallest tuples over 0,1,2,... not in ``existing``.

    Every tuple (0,...,0,j) precedes any tuple with a non-zero earlier
    coordinate, so those are the candidates, in increasing j.
    """
    out = []
    j = 0
    while len(out) < count:
        t = (0,) * (arity - 1) + (j,)
        if t not in existing:
            out.append(t)
        j += 1
    return out


def constrained_worst_instance(query: JoinQuery, sizes: Mapping[str, int],
                               budget: int | None = DEFAULT_TUPLE_BUDGET,
                               solution: CoverSolution | None = None) -> Instance:
    """Instance with |R(D)| = N_R for every R and |Q(D)| >= 2^-n prod N_R^x_R.

    Attribute a gets floor(2^y_a) values from an optimal dual y; each
    relation is that grid, topped up to N_R tuples by :func:`_padding`.
    """
    sol = solution if solution is not None else solve_cover_lp(CoverLp.from_sizes(query, sizes))
    _check_budget(sum(int(sizes[r]) for r in query.names), budget)
    widths = {a: floor_pow2(sol.y[a]) for a in query.universe}
    rels = {}
    for r in query.relations:
        grid = _grid_relation(r, widths)
        target = int(sizes[r.name])
        if len(grid) > target:
            raise InvariantError(f"grid for {r.name} has {len(grid)} tuples, more than N_R = {target}")
        tuples = set(grid.tuples)
        tuples.update(_padding(tuples, r.arity, target - len(tuples)))
        rels[r.name] = Relation(r.attributes, frozenset(tuples))
    return Instance(rels)


def parse_sizes(text: str, query: JoinQuery | None = None, source: str | None = None) -> dict[str, int]:
    """Sizes file: ``size <rel> <int>`` per line."""
    sizes: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] != "size":
            raise ParseError("expected 'size <relation> <int>'", lineno, source)
        name = parts[1]
        if query is not None and name not in query:
            raise ParseError(f"unknown relation {name}", lineno, source)
        if name in sizes:
            raise ParseError(f"size of {name} given twice", lineno, source)
        try:
            value = int(parts[2], 10)
        except ValueError:
            raise ParseError(f"size {parts[2]!r} is not an integer", lineno, source) from None
        if value < 1:
            raise ParseError(f"size of {name} must be >= 1", lineno, source)
        sizes[name] = value
    if query is not None:
        missing = [n for n in query.names if n not in sizes]
        if missing:
            raise ParseError(f"no size for relations {missing}", None, source)
    return sizes


# -- graphs and independent sets --------------------------------------------

@dataclass(frozen=True)
class GraphInput:
    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    @classmethod
    def from_edges(cls, edges: Iterable[Sequence[str]]) -> "GraphInput":
        verts: list[str] = []
        seen_edges: set[frozenset[str]] = set()
        out = []
        for u, v in edges:
            for w in (u, v):
                if not TOKEN.match(w):
                    raise DomainError(f"invalid vertex name {w!r}")
            if u == v:
                raise DomainError(f"self-loop at {u}")
            key = frozenset((u, v))
            if key in seen_edges:
                raise DomainError(f"duplicate edge {u} {v}")
            seen_edges.add(key)
            out.append((u, v))
            for w in (u, v):
                if w not in verts:
                    verts.append(w)
        return cls(tuple(verts), tuple(out))

    def adjacent(self, u: str, v: str) -> bool:
        return (u, v) in self.edges or (v, u) in self.edges

    @property
    def alpha(self) -> int:
        return independence_number(self)


def parse_graph(text: str, source: str | None = None) -> GraphInput:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] != "edge":
            raise ParseError("expected 'edge <u> <v>'", lineno, source)
        edges.append((parts[1], parts[2]))
        try:
            GraphInput.from_edges(edges)
        except DomainError as exc:
            raise ParseError(str(exc), lineno, source) from None
    return GraphInput.from_edges(edges)


def is_independent(graph: GraphInput, vertices: Iterable[str]) -> bool:
    vs = set(vertices)
    return not any(u in vs and v in vs for u, v in graph.edges)


MAX_EXHAUSTIVE_VERTICES = 24


def maximum_independent_set(graph: GraphInput) -> tuple[str, ...]:
    """A largest independent set by exhaustive search, first in combination order."""
    n = len(graph.vertices)
    if n > MAX_EXHAUSTIVE_VERTICES:
        raise CapabilityError(f"exhaustive independent set search needs <= {MAX_EXHAUSTIVE_VERTICES} vertices")
    for k in range(n, 0, -1):
        for combo in itertools.combinations(graph.vertices, k):
            if is_independent(graph, combo):
                return combo
    return ()


def independence_number(graph: GraphInput) -> int:
    return len(maximum_independent_set(graph))


def graph_to_query(graph: GraphInput) -> tuple[JoinQuery, dict[str, int]]:
    """One attribute per vertex, one relation R_u_v per edge, all sizes 2."""
    if not graph.edges:
        raise DomainError("graph has no edges")
    rels = tuple(RelationSchema(f"R_{u}_{v}", (u, v)) for u, v in graph.edges)
    q = JoinQuery(rels, graph.vertices)
    return q, {r.name: 2 for r in rels}


def independent_set_instance(graph: GraphInput, independent: Iterable[str]) -> Instance:
    """Two tuples per relation whose answer contains every 0/1 assignment to I.

    Each relation gets the all-0 tuple. If exactly one endpoint lies in I it
    also gets the tuple with 1 there; otherwise it is padded with (2, 2).
    """
    chosen = set(independent)
    unknown = chosen - set(graph.vertices)
    if unknown:
        raise DomainError(f"vertices {sorted(unknown)} are not in the graph")
    if not is_independent(graph, chosen):
        raise DomainError("vertex set is not independent")
    q, _ = graph_to_query(graph)
    rels = {}
    for r, (u, v) in zip(q.relations, graph.edges):
        if u in chosen:
            extra = (1, 0)
        elif v in chosen:
            extra = (0, 1)
        else:
            extra = (2, 2)
        rels[r.name] = Relation(r.attributes, frozenset({(0, 0), extra}))
    return Instance(rels)
