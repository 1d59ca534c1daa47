"""Fractional and integral edge covers, solved exactly over the rationals.

The covering LP

    minimise   sum_R c_R x_R
    subject to sum_{R : a in R} x_R >= 1   for every attribute a
               x >= 0

is solved through its dual packing LP

    maximise   sum_a y_a
    subject to sum_{a in R} y_a <= c_R     for every relation R
               y >= 0

whose slack basis is feasible at the origin, so no phase one is needed.
Both solutions are read off the same final tableau: ``y`` from the basic
columns, ``x`` from the reduced costs of the slack columns. Complementary
slackness therefore holds by construction, not by a tolerance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import CapabilityError, DomainError, InvariantError
from .numeric import as_fraction, log2_cost
from .query import JoinQuery

__all__ = [
    "CoverLp",
    "CoverSolution",
    "EdgeCover",
    "check_complementary_slackness",
    "fractional_cover",
    "greedy_edge_cover",
    "is_fractional_cover",
    "min_edge_cover",
    "solve_cover_lp",
]

MAX_EXHAUSTIVE_RELATIONS = 20


@dataclass(frozen=True)
class CoverLp:
    query: JoinQuery
    costs: Mapping[str, Fraction]
    # relations whose cost is a rounded stand-in for log2(N_R)
    perturbed: frozenset[str] = frozenset()

    def __post_init__(self):
        costs = {name: as_fraction(self.costs[name]) for name in self.query.names}
        if set(self.costs) - set(costs):
            raise DomainError(f"costs for unknown relations {sorted(set(self.costs) - set(costs))}")
        if any(c < 0 for c in costs.values()):
            raise DomainError("covering costs must be non-negative")
        object.__setattr__(self, "costs", costs)

    @classmethod
    def unit(cls, query: JoinQuery) -> "CoverLp":
        return cls(query, {name: Fraction(1) for name in query.names})

    @classmethod
    def from_sizes(cls, query: JoinQuery, sizes: Mapping[str, int]) -> "CoverLp":
        """Costs log2(N_R), exact for powers of two."""
        costs, perturbed = {}, set()
        for name in query.names:
            if name not in sizes:
                raise DomainError(f"no size given for relation {name}")
            n_r = int(sizes[name])
            if n_r < 1:
                raise DomainError(f"size of {name} must be >= 1, got {n_r}")
            costs[name], inexact = log2_cost(n_r)
            if inexact:
                perturbed.add(name)
        return cls(query, costs, frozenset(perturbed))


@dataclass(frozen=True)
class CoverSolution:
    query: JoinQuery
    costs: Mapping[str, Fraction]
    x: Mapping[str, Fraction]
    y: Mapping[str, Fraction]
    pivots: int = field(default=0, compare=False)

    @property
    def objective(self) -> Fraction:
        return sum((self.costs[r] * self.x[r] for r in self.query.names), Fraction(0))

    @property
    def dual_objective(self) -> Fraction:
        return sum(self.y.values(), Fraction(0))

    @property
    def rho_star(self) -> Fraction | None:
        """The fractional edge cover number, when the costs are all one."""
        if all(c == 1 for c in self.costs.values()):
            return self.objective
        return None

    def primal_feasible(self) -> bool:
        if any(self.x.get(r, Fraction(-1)) < 0 for r in self.query.names):
            return False
        return is_fractional_cover(self.query, self.x)

    def dual_feasible(self) -> bool:
        if any(self.y.get(a, Fraction(-1)) < 0 for a in self.query.universe):
            return False
        return all(sum(self.y[a] for a in r.attributes) <= self.costs[r.name]
                   for r in self.query.relations)


@dataclass(frozen=True)
class EdgeCover:
    relations: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.relations)


def is_fractional_cover(query: JoinQuery, x: Mapping[str, Fraction]) -> bool:
    if any(as_fraction(x.get(r, 0)) < 0 for r in query.names):
        return False
    for a in query.universe:
        if sum((as_fraction(x.get(r.name, 0)) for r in query.relations_with(a)), Fraction(0)) < 1:
            return False
    return True


def _require_covered(query: JoinQuery) -> None:
    isolated = query.attributes - query.covered()
    if isolated:
        raise DomainError(f"attributes {sorted(isolated)} appear in no relation; no cover exists")


def solve_cover_lp(lp: CoverLp) -> CoverSolution:
    """Exact optimal primal/dual pair by the simplex method with Bland's rule."""
    q = lp.query
    _require_covered(q)
    attrs = q.universe
    n, m = len(attrs), q.m
    col = {a: j for j, a in enumerate(attrs)}
    zero, one = Fraction(0), Fraction(1)

    rows = []
    for r in q.relations:
        row = [zero] * (n + m)
        for a in r.attributes:
            row[col[a]] = one
        row[n + len(rows)] = one
        rows.append(row)
    rhs = [lp.costs[r.name] for r in q.relations]
    basis = list(range(n, n + m))
    reduced = [one] * n + [zero] * m
    pivots = 0

    while True:
        entering = next((j for j in range(n + m) if reduced[j] > 0), None)
        if entering is None:
            break
        best = None
        for i in range(m):
            coef = rows[i][entering]
            if coef > 0:
                key = (rhs[i] / coef, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            raise InvariantError("packing LP reported unbounded; every attribute must be in a relation")
        i = best[1]
        piv = rows[i][entering]
        prow = [v / piv for v in rows[i]]
        rows[i] = prow
        rhs[i] = rhs[i] / piv
        for k in range(m):
            if k != i and rows[k][entering] != 0:
                f = rows[k][entering]
                rows[k] = [u - f * v for u, v in zip(rows[k], prow)]
                rhs[k] -= f * rhs[i]
        f = reduced[entering]
        reduced = [u - f * v for u, v in zip(reduced, prow)]
        basis[i] = entering
        pivots += 1

    y = {a: zero for a in attrs}
    for i, j in enumerate(basis):
        if j < n:
            y[attrs[j]] = rhs[i]
    x = {r.name: -reduced[n + i] for i, r in enumerate(q.relations)}
    sol = CoverSolution(q, dict(lp.costs), x, y, pivots)
    if not (sol.primal_feasible() and sol.dual_feasible()):
        raise InvariantError("simplex returned an infeasible pair")
    if sol.objective != sol.dual_objective:
        raise InvariantError("strong duality failed")
    return sol


def fractional_cover(query: JoinQuery) -> CoverSolution:
    """Optimal fractional edge cover with unit costs; ``.rho_star`` is ρ*(Q)."""
    return solve_cover_lp(CoverLp.unit(query))


def check_complementary_slackness(sol: CoverSolution) -> bool:
    """True iff every relation with x_R > 0 has a tight dual constraint."""
    if not sol.primal_feasible():
        raise DomainError("x is not a fractional edge cover")
    if not sol.dual_feasible():
        raise DomainError("y violates a packing constraint")
    for r in sol.query.relations:
        if sol.x[r.name] > 0 and sum(sol.y[a] for a in r.attributes) != sol.costs[r.name]:
            return False
    return True


def _covers(query: JoinQuery, names) -> bool:
    got = set()
    for name in names:
        got |= query.relation(name).attrset
    return got >= query.attributes


def min_edge_cover(query: JoinQuery) -> EdgeCover:
    """Minimum-cardinality edge cover; the first one in lexicographic relation order."""
    if query.m > MAX_EXHAUSTIVE_RELATIONS:
        raise CapabilityError(
            f"exhaustive edge cover needs m <= {MAX_EXHAUSTIVE_RELATIONS} (got {query.m}); "
            "use greedy_edge_cover")
    _require_covered(query)
    for k in range(1, query.m + 1):
        for combo in itertools.combinations(query.names, k):
            if _covers(query, combo):
                return EdgeCover(combo)
    raise InvariantError("the full relation set must be a cover")


def greedy_edge_cover(query: JoinQuery) -> EdgeCover:
    """Greedy set cover; relations come back in schema order."""
    _require_covered(query)
    uncovered = set(query.universe)
    chosen: set[str] = set()
    while uncovered:
        best = max(query.relations, key=lambda r: len(r.attrset & uncovered))
        chosen.add(best.name)
        uncovered -= best.attrset
    return EdgeCover(tuple(n for n in query.names if n in chosen))
