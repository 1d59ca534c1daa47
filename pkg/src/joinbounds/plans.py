"""Plan generators: the attribute-prefix join-project plan, the cover-first
join plan, exhaustive join-plan enumeration, and the adversarial query family
on which every join plan has a large intermediate result.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterator, Mapping, Sequence

from .engine import DEFAULT_TUPLE_BUDGET, Instance, Relation
from .errors import CapabilityError, CapacityError, DomainError
from .lp import greedy_edge_cover
from .plantree import Join, Leaf, Plan, Project, children, left_deep, subplans
from .query import JoinQuery, RelationSchema

__all__ = [
    "adversarial_answer_size", "adversarial_instance", "adversarial_query",
    "balanced_split", "catalan", "cover_join_plan", "enumerate_join_plans",
    "gm_plan", "gm_stages", "join_plan_count",
]

MAX_ENUMERATION_RELATIONS = 5


def _check_order(query: JoinQuery, order: Sequence[str] | None) -> tuple[str, ...]:
    if order is None:
        return query.universe
    order = tuple(order)
    if len(order) != query.n or set(order) != query.attributes:
        raise DomainError(f"{order} is not a permutation of the attributes {query.universe}")
    return order


def gm_stages(query: JoinQuery, order: Sequence[str] | None = None) -> list[Plan]:
    """[phi_1, ..., phi_n] where phi_i joins every relation projected onto the
    first i attributes of ``order``, on top of phi_{i-1}.

    Projections onto the empty set are kept: they evaluate to {()} or to the
    empty relation, which is what makes phi_i exact for the prefix.
    """
    order = _check_order(query, order)
    stages: list[Plan] = []
    current: Plan | None = None
    for i in range(1, len(order) + 1):
        prefix = set(order[:i])
        parts = [Project(tuple(a for a in r.attributes if a in prefix), Leaf(r.name))
                 for r in query.relations]
        current = left_deep(parts) if current is None else left_deep([current, *parts])
        stages.append(current)
    return stages


def gm_plan(query: JoinQuery, order: Sequence[str] | None = None) -> Plan:
    """A join-project plan whose every stage is bounded by |D|^rho*(Q)."""
    return gm_stages(query, order)[-1]


def cover_join_plan(query: JoinQuery) -> Plan:
    """Left-deep join plan: greedy cover relations first, then the rest."""
    cover = greedy_edge_cover(query).relations
    rest = [n for n in query.names if n not in cover]
    return left_deep([Leaf(n) for n in (*cover, *rest)])


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def join_plan_count(m: int) -> int:
    """Ordered binary trees with m distinct labelled leaves."""
    return catalan(m - 1) * math.factorial(m)


def _trees(names: tuple[str, ...]) -> Iterator[Plan]:
    if len(names) == 1:
        yield Leaf(names[0])
        return
    for k in range(1, len(names)):
        for left in itertools.combinations(names, k):
            right = tuple(n for n in names if n not in left)
            for lt in _trees(left):
                for rt in _trees(right):
                    yield Join(lt, rt)


def enumerate_join_plans(query: JoinQuery) -> list[Plan]:
    """Every projection-free plan using each relation exactly once."""
    if query.m > MAX_ENUMERATION_RELATIONS:
        raise CapabilityError(
            f"join plan enumeration supports m <= {MAX_ENUMERATION_RELATIONS}, got {query.m}")
    return list(_trees(query.names))


def balanced_split(plan: Plan, colors: Mapping[str, object]) -> Plan:
    """A node whose leaves span between ceil((m+2)/2) and m+1 of the 2m colours.

    Takes a lowest node covering at least m+2 colours and returns its child
    with more colours (the left one on ties). When no node reaches m+2, which
    happens only for m = 1, the root itself spans m+1 colours.
    """
    spans: dict[tuple, frozenset] = {}
    heights: dict[tuple, int] = {}
    nodes: dict[tuple, Plan] = {}
    for path, node in subplans(plan):
        nodes[path] = node
        kids = children(node)
        if not kids:
            if not isinstance(node, Leaf):
                raise DomainError(f"leaf {node!r} carries no colour")
            if node.name not in colors:
                raise DomainError(f"no colour for leaf {node.name}")
            spans[path] = frozenset([colors[node.name]])
            heights[path] = 0
        else:
            kid_paths = [path + (i,) for i in range(len(kids))]
            spans[path] = frozenset().union(*(spans[p] for p in kid_paths))
            heights[path] = 1 + max(heights[p] for p in kid_paths)
    total = len(spans[()])
    if total < 2:
        raise DomainError("need at least 2 colours")
    if total % 2:
        raise DomainError(f"need an even number of colours, got {total}")
    m = total // 2
    candidates = [p for p in spans if len(spans[p]) >= m + 2]
    if not candidates:
        return plan
    # lowest height first; ties go to the leftmost path
    t = min(candidates, key=lambda p: (heights[p], p))
    kid_paths = [t + (i,) for i in range(len(children(nodes[t])))]
    best = max(kid_paths, key=lambda p: (len(spans[p]), -p[-1]))
    return nodes[best]


# -- adversarial family ------------------------------------------------------

def _subset_name(s: Sequence[int]) -> str:
    return "a_" + "_".join(map(str, s))


def adversarial_query(m: int) -> JoinQuery:
    """2m relations over one attribute a_s per m-subset s of {1..2m};
    R_i holds the a_s with i in s."""
    if m < 1:
        raise DomainError("m must be at least 1")
    subsets = list(itertools.combinations(range(1, 2 * m + 1), m))
    rels = tuple(RelationSchema(f"R{i}", tuple(_subset_name(s) for s in subsets if i in s))
                 for i in range(1, 2 * m + 1))
    return JoinQuery(rels, tuple(_subset_name(s) for s in subsets))


def adversarial_answer_size(m: int, n_values: int) -> int:
    """|Q(D)| for :func:`adversarial_instance`, counted by hand.

    An answer tuple is non-1 on one attribute, or on a pair a_s, a_t with t
    the complement of s (no relation holds both, so nothing constrains the
    pair). Three pairwise complementary m-subsets cannot exist.
    """
    n = math.comb(2 * m, m)
    k = n_values - 1
    return 1 + n * k + (n // 2) * k * k


def adversarial_instance(m: int, n_values: int,
                         budget: int | None = DEFAULT_TUPLE_BUDGET) -> tuple[JoinQuery, Instance]:
    """R_i(D): tuples with one coordinate anywhere in 1..N and 1 elsewhere."""
    if n_values < 2:
        raise DomainError("N must be at least 2")
    q = adversarial_query(m)
    arity = q.relations[0].arity
    per_relation = (n_values - 1) * arity + 1
    required = per_relation * q.m
    if budget is not None and required > budget:
        raise CapacityError(f"instance needs {required} tuples, budget is {budget}", required, budget)
    rels = {}
    for r in q.relations:
        tuples = {(1,) * arity}
        for pos in range(arity):
            for v in range(2, n_values + 1):
                t = [1] * arity
                t[pos] = v
                tuples.add(tuple(t))
        rels[r.name] = Relation(r.attributes, frozenset(tuples))
    return q, Instance(rels)
