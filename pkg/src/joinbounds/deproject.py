"""Turning a join-project plan into a join plan with comparable expected
intermediate sizes under the random model.

Each round picks the lowest, leftmost projection pi_A(phi0) whose input phi0
is projection-free, widens A to the closure A* = C_S(A) of the potential

    f_S(A) = |A| (log N - n - 1) - sum of w_R over R in S with A_R inside A,

drops from phi0 the relations not inside A* (each replaced by the 0-ary
unit), joins in a dummy full-domain relation for every attribute of A*, and
then erases the projection, which has become the identity. Dummies and units
are removed once no projection is left.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import DEFAULT_TUPLE_BUDGET, evaluate
from .errors import CapabilityError, DomainError, InvariantError
from .numeric import as_fraction, exact_log2
from .plantree import (Dummy, Join, Leaf, Plan, Project, Unit, children, leaves, left_deep,
                       node_at, plan_stats, replace_at, subplans)
from .query import JoinQuery
from .stochastic import ProbabilityModel, sample_instance, subset_weight_table

log = logging.getLogger(__name__)

__all__ = [
    "ClosureContext", "ClosureResult", "DeprojectResult", "InflationReport",
    "closure", "deproject", "eliminate_once", "f_value", "inflation_report",
    "lowest_projection", "normalize_plan", "strip_auxiliary",
]

MAX_CLOSURE_ATTRIBUTES = 22


@dataclass(frozen=True)
class ClosureContext:
    """Relations S (name -> attributes), their weights, the domain size N
    (a power of two) and the attribute universe of the whole query."""

    universe: tuple[str, ...]
    relations: Mapping[str, frozenset[str]]
    weights: Mapping[str, Fraction]
    N: int

    def __post_init__(self):
        if exact_log2(self.N) is None or self.N < 2:
            raise DomainError(f"N must be a power of two >= 2, got {self.N}")
        rels = {k: frozenset(v) for k, v in self.relations.items()}
        for name, attrs in rels.items():
            if not attrs <= set(self.universe):
                raise DomainError(f"relation {name} uses attributes outside the universe")
            if name not in self.weights:
                raise DomainError(f"no weight for relation {name}")
        ws = {k: as_fraction(self.weights[k]) for k in rels}
        if any(w < 0 for w in ws.values()):
            raise DomainError("weights must be non-negative")
        object.__setattr__(self, "universe", tuple(self.universe))
        object.__setattr__(self, "relations", rels)
        object.__setattr__(self, "weights", ws)

    @classmethod
    def for_query(cls, query: JoinQuery, names: Iterable[str], weights: Mapping[str, Fraction],
                  N: int) -> "ClosureContext":
        rels = {n: query.relation(n).attrset for n in names}
        return cls(query.universe, rels, {n: weights[n] for n in rels}, N)

    @property
    def n(self) -> int:
        return len(self.universe)

    @property
    def log2_n(self) -> int:
        return exact_log2(self.N)

    @property
    def slope(self) -> int:
        """log N - n - 1, the per-attribute term of f_S."""
        return self.log2_n - self.n - 1


def f_value(ctx: ClosureContext, attrs: Iterable[str]) -> Fraction:
    a = frozenset(attrs)
    if not a <= set(ctx.universe):
        raise DomainError(f"attributes {sorted(a - set(ctx.universe))} are not in the universe")
    inside = sum((ctx.weights[r] for r, ra in ctx.relations.items() if ra <= a), Fraction(0))
    return len(a) * ctx.slope - inside


@dataclass(frozen=True)
class ClosureResult:
    A_star: frozenset[str]
    f_value: Fraction
    unique: bool


def closure(ctx: ClosureContext, attrs: Iterable[str]) -> ClosureResult:
    """C_S(A): the largest superset of A minimising f_S, by scanning all supersets."""
    a = frozenset(attrs)
    if not a <= set(ctx.universe):
        raise DomainError(f"attributes {sorted(a - set(ctx.universe))} are not in the universe")
    n = ctx.n
    if n > MAX_CLOSURE_ATTRIBUTES:
        raise CapabilityError(f"closure scan supports n <= {MAX_CLOSURE_ATTRIBUTES}, got {n}")
    pos = {x: i for i, x in enumerate(ctx.universe)}
    names = list(ctx.relations)
    d = 1
    for r in names:
        d = np.lcm(d, ctx.weights[r].denominator)
    d = int(d)
    scaled = [int(ctx.weights[r] * d) for r in names]
    W, pop = subset_weight_table(n, [[pos[x] for x in ctx.relations[r]] for r in names], scaled)
    masks = np.arange(1 << n, dtype=np.int64)
    amask = sum(1 << pos[x] for x in a)
    sup = (masks & amask) == amask
    f = pop * (ctx.slope * d) - W
    best = min(int(v) for v in f[sup]) if f.dtype == object else int(f[sup].min())
    at_min = sup & (f == best)
    top = int(pop[at_min].max())
    winners = np.flatnonzero(at_min & (pop == top))
    if len(winners) != 1:
        raise InvariantError(f"closure of {sorted(a)} is not unique: {len(winners)} maximal minimisers")
    mask = int(winners[0])
    star = frozenset(x for x in ctx.universe if mask >> pos[x] & 1)
    return ClosureResult(star, Fraction(best, d), True)


def normalize_plan(plan: Plan, query: JoinQuery) -> Plan:
    """(((plan JOIN R_1) JOIN R_2) ... JOIN R_m) in schema order."""
    return left_deep([plan, *(Leaf(n) for n in query.names)])


def lowest_projection(plan: Plan) -> tuple[int, ...] | None:
    """Path of the first projection in post-order; its input has no projection."""
    for path, node in subplans(plan):
        if isinstance(node, Project):
            return path
    return None


def _names_in(plan: Plan) -> list[Plan]:
    return [n for _, n in subplans(plan) if isinstance(n, (Leaf, Dummy))]


def _attrs_of(node: Plan, query: JoinQuery) -> frozenset[str]:
    if isinstance(node, Dummy):
        return frozenset([node.attribute])
    return query.relation(node.name).attrset


def _dummy_name(a: str) -> str:
    # '@' cannot occur in relation names, so this never clashes
    return f"@{a}"


def eliminate_once(plan: Plan, query: JoinQuery, model: ProbabilityModel,
                   target: Sequence[int] | None = None,
                   a_star: Iterable[str] | None = None) -> tuple[Plan, frozenset[str]]:
    """One round: widen the chosen projection to its closure, prune, erase it.

    ``target`` defaults to :func:`lowest_projection`; ``a_star`` overrides the
    computed closure (useful for stipulated examples). Returns the new plan
    and the A* that was used.
    """
    if target is None:
        target = lowest_projection(plan)
        if target is None:
            raise DomainError("plan has no projection")
    target = tuple(target)
    proj = node_at(plan, target)
    if not isinstance(proj, Project):
        raise DomainError(f"node at {target} is not a projection")
    phi0 = proj.child
    if any(isinstance(n, Project) for _, n in subplans(phi0)):
        raise DomainError("the chosen projection has a projection below it")

    members = _names_in(phi0)
    if a_star is None:
        rels = {}
        weights = {}
        for node in members:
            if isinstance(node, Dummy):
                key = _dummy_name(node.attribute)
                weights[key] = Fraction(0)
            else:
                key = node.name
                weights[key] = model.weight(node.name)
            rels[key] = _attrs_of(node, query)
        ctx = ClosureContext(query.universe, rels, weights, model.N)
        star = closure(ctx, proj.attrs).A_star
    else:
        star = frozenset(a_star)
        if not set(proj.attrs) <= star:
            raise DomainError("A* must contain the projection's attributes")

    # Step 1: relations not inside A* become the unit, then dummies for A*
    def prune(node: Plan) -> Plan:
        if isinstance(node, (Leaf, Dummy)):
            return node if _attrs_of(node, query) <= star else Unit()
        if isinstance(node, Join):
            return Join(prune(node.left), prune(node.right))
        return node

    widened = left_deep([prune(phi0), *(Dummy(a) for a in query.order(star))])
    # Step 2: pi_A becomes pi_{A*}, which is the identity on the widened input
    return replace_at(plan, target, widened), star


def strip_auxiliary(plan: Plan) -> Plan:
    """Remove dummy and unit leaves; a subtree made only of them becomes the unit."""
    if isinstance(plan, (Dummy, Unit)):
        return Unit()
    if isinstance(plan, Leaf):
        return plan
    if isinstance(plan, Project):
        inner = strip_auxiliary(plan.child)
        return Unit() if isinstance(inner, Unit) and not plan.attrs else Project(plan.attrs, inner)
    left, right = strip_auxiliary(plan.left), strip_auxiliary(plan.right)
    if isinstance(left, Unit):
        return right
    if isinstance(right, Unit):
        return left
    return Join(left, right)


def _strip_wrapper(plan: Plan, query: JoinQuery) -> Plan:
    """Drop the normalisation joins of relations that the core already holds."""
    wrapped = []
    node = plan
    for name in reversed(query.names):
        if isinstance(node, Join) and node.right == Leaf(name):
            wrapped.append(name)
            node = node.left
        else:
            break
    core = node
    present = set(leaves(core))
    extra = [Leaf(n) for n in reversed(wrapped) if n not in present]
    if isinstance(core, Unit):
        return left_deep(extra) if extra else core
    return left_deep([core, *extra])


@dataclass(frozen=True)
class DeprojectResult:
    plan: Plan
    iterations: int
    closures: tuple[frozenset[str], ...]
    initial_projections: int


def deproject(plan: Plan, query: JoinQuery, model: ProbabilityModel) -> DeprojectResult:
    """Iterate :func:`eliminate_once` until no projection remains.

    The input is normalised first and the result is cleaned up: dummies and
    units are removed, then wrapper joins whose relation already occurs.
    """
    if exact_log2(model.N) is None:
        raise DomainError(f"N must be a power of two, got {model.N}")
    initial = plan_stats(plan).projection_count
    current = normalize_plan(plan, query)
    stars = []
    while (path := lowest_projection(current)) is not None:
        before = plan_stats(current).projection_count
        current, star = eliminate_once(current, query, model, path)
        stars.append(star)
        if plan_stats(current).projection_count != before - 1:
            raise InvariantError("elimination did not remove exactly one projection")
        log.debug("round %d: A* = %s", len(stars), sorted(star))
    if len(stars) > initial:
        raise InvariantError("more rounds than projections")
    result = _strip_wrapper(strip_auxiliary(current), query)
    return DeprojectResult(result, len(stars), tuple(stars), initial)


@dataclass(frozen=True)
class InflationReport:
    trials: int
    max_mean_original: float
    max_mean_rewritten: float
    ratio: float
    ci_low: float
    ci_high: float


def _subplan_cardinalities(plan: Plan, db, budget) -> list[int]:
    _, trace = evaluate(plan, db, budget=budget)
    return [e.cardinality for e in trace]


def inflation_report(plan: Plan, rewritten: Plan, query: JoinQuery, model: ProbabilityModel,
                     trials: int, seed: int = 0, budget: int | None = DEFAULT_TUPLE_BUDGET,
                     resamples: int = 1000) -> InflationReport:
    """Monte Carlo estimate of max over subplans of E|psi(D)| for both plans.

    The ratio rewritten/original comes with a 95% bootstrap interval. When
    both maxima are below one tuple the ratio is reported as 1.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    a_rows, b_rows = [], []
    for t in range(trials):
        db = sample_instance(query, model, (seed, t), budget)
        a_rows.append(_subplan_cardinalities(plan, db, budget))
        b_rows.append(_subplan_cardinalities(rewritten, db, budget))
    a = np.asarray(a_rows, dtype=float)
    b = np.asarray(b_rows, dtype=float)

    def ratio(ma: float, mb: float) -> float:
        if ma < 1 and mb < 1:
            return 1.0
        if ma == 0:
            return float("inf")
        return float(mb / ma)

    ma, mb = a.mean(axis=0).max(), b.mean(axis=0).max()
    rng = np.random.default_rng(np.random.SeedSequence([seed, trials, 0x1F]))
    idx = rng.integers(0, trials, size=(resamples, trials))
    boot = [ratio(a[i].mean(axis=0).max(), b[i].mean(axis=0).max()) for i in idx]
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return InflationReport(trials, float(ma), float(mb), ratio(ma, mb), float(lo), float(hi))
