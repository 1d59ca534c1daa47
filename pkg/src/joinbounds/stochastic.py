"""The random database model D(N, p) and the quantities that govern it.

Each relation R carries a weight w_R >= 0 and every candidate tuple in
[N]^{A_R} is included independently with probability p_R = 2^-w_R. All
analysis happens in weight space with exact rationals; floats appear only
when sampling.

Model files (``.model``)::

    N 64
    weight R 1
    weight S 3/2
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .engine import DEFAULT_TUPLE_BUDGET, Instance, Relation, answer
from .errors import CapabilityError, CapacityError, DomainError, InvariantError, ParseError
from .numeric import Log2Value, as_fraction, exact_log2, lcm_of_denominators
from .query import JoinQuery

__all__ = [
    "ConcentrationReport", "DensityReport", "ProbabilityModel",
    "concentration_experiment", "density", "expected_answer_size",
    "max_density_bruteforce", "max_density_flow", "min_cut", "min_cut_capacity",
    "parse_model", "sample_instance", "subset_weight_table", "variance_upper_bound",
]

MAX_BRUTEFORCE_ATTRIBUTES = 22


@dataclass(frozen=True)
class ProbabilityModel:
    weights: Mapping[str, Fraction]
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise DomainError("domain size N must be at least 1")
        ws = {k: as_fraction(v) for k, v in self.weights.items()}
        if any(w < 0 for w in ws.values()):
            raise DomainError("weights must be non-negative")
        object.__setattr__(self, "weights", ws)

    @classmethod
    def for_query(cls, query: JoinQuery, N: int, weights: Mapping[str, object] | None = None,
                  default: object = 1) -> "ProbabilityModel":
        weights = dict(weights or {})
        unknown = set(weights) - set(query.names)
        if unknown:
            raise DomainError(f"weights for unknown relations {sorted(unknown)}")
        return cls({r: as_fraction(weights.get(r, default)) for r in query.names}, N)

    def weight(self, name: str) -> Fraction:
        try:
            return self.weights[name]
        except KeyError:
            raise DomainError(f"model has no weight for relation {name}") from None

    def probability(self, name: str) -> float:
        return 2.0 ** -float(self.weight(name))

    @property
    def log2_n(self) -> float:
        return math.log2(self.N)

    def log2_n_exact(self) -> int | None:
        return exact_log2(self.N)


def parse_model(text: str, query: JoinQuery, source: str | None = None) -> ProbabilityModel:
    weights: dict[str, Fraction] = {}
    n_value = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "N" and len(parts) == 2:
            if n_value is not None:
                raise ParseError("N given twice", lineno, source)
            try:
                n_value = int(parts[1], 10)
            except ValueError:
                raise ParseError(f"N must be an integer, got {parts[1]!r}", lineno, source) from None
            if n_value < 1:
                raise ParseError("N must be at least 1", lineno, source)
        elif parts[0] == "weight" and len(parts) == 3:
            name = parts[1]
            if name not in query:
                raise ParseError(f"unknown relation {name}", lineno, source)
            if name in weights:
                raise ParseError(f"weight of {name} given twice", lineno, source)
            try:
                w = Fraction(parts[2])
            except (ValueError, ZeroDivisionError):
                raise ParseError(f"bad weight {parts[2]!r}", lineno, source) from None
            if w < 0:
                raise ParseError("weights must be non-negative", lineno, source)
            weights[name] = w
        else:
            raise ParseError("expected 'N <int>' or 'weight <relation> <p/q>'", lineno, source)
    if n_value is None:
        raise ParseError("model has no 'N' line", None, source)
    return ProbabilityModel.for_query(query, n_value, weights)


def expected_answer_size(query: JoinQuery, model: ProbabilityModel) -> Log2Value:
    """E|Q(D)| = N^n prod p_R = 2^(n log N - sum w_R)."""
    total_w = sum((model.weight(r) for r in query.names), Fraction(0))
    k = model.log2_n_exact()
    if k is not None:
        return Log2Value.from_exact(query.n * k - total_w)
    return Log2Value(query.n * model.log2_n - float(total_w), None)


# -- density ----------------------------------------------------------------

def density(query: JoinQuery, weights: Mapping[str, Fraction], attrs) -> Fraction:
    """delta(Q[B], w): weight of relations inside B divided by |B|."""
    b = frozenset(attrs)
    if not b:
        raise DomainError("density needs a non-empty attribute set")
    if not b <= query.attributes:
        raise DomainError(f"attributes {sorted(b - query.attributes)} are not in the query")
    total = sum((as_fraction(weights[r.name]) for r in query.relations if r.attrset <= b), Fraction(0))
    return total / len(b)


@dataclass(frozen=True)
class DensityReport:
    best_B: tuple[str, ...]
    max_density: Fraction
    densities: Mapping[frozenset, Fraction] | None = field(default=None, compare=False)
    method: str = "brute"


def _scaled_weights(query: JoinQuery, weights: Mapping[str, Fraction]) -> tuple[list[int], int]:
    ws = [as_fraction(weights[r]) for r in query.names]
    if any(w < 0 for w in ws):
        raise DomainError("weights must be non-negative")
    d = lcm_of_denominators(ws)
    return [int(w * d) for w in ws], d


def subset_weight_table(n: int, members: Sequence[Sequence[int]],
                        weights: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """For every bitmask B over n positions: the summed integer weight of the
    relations (given as position lists) inside B, and |B|."""
    size = 1 << n
    dtype = np.int64 if sum(abs(w) for w in weights) < 2 ** 62 else object
    W = np.zeros(size, dtype=dtype)
    for idx, w in zip(members, weights):
        W[sum(1 << i for i in idx)] += w
    masks = np.arange(size, dtype=np.int64)
    # zeta transform over subsets
    for i in range(n):
        bit = 1 << i
        with_bit = (masks & bit) != 0
        W[with_bit] += W[masks[with_bit] ^ bit]
    pop = np.zeros(size, dtype=np.int64)
    for i in range(n):
        pop += (masks >> i) & 1
    return W, pop


def max_density_bruteforce(query: JoinQuery, weights: Mapping[str, Fraction],
                           keep_all: bool = False) -> DensityReport:
    """Scan every non-empty B. Ties go to larger B, then to the B whose
    attribute positions form the lexicographically smallest list."""
    n = query.n
    if n > MAX_BRUTEFORCE_ATTRIBUTES:
        raise CapabilityError(
            f"subset scan supports n <= {MAX_BRUTEFORCE_ATTRIBUTES}, got {n}; use max_density_flow")
    if n == 0:
        raise DomainError("query has no attributes")
    scaled, d = _scaled_weights(query, weights)
    pos = {a: i for i, a in enumerate(query.universe)}
    W, pop = subset_weight_table(n, [[pos[a] for a in r.attributes] for r in query.relations], scaled)
    size = 1 << n
    masks = np.arange(size, dtype=np.int64)

    best: tuple[Fraction, int] | None = None
    for k in range(1, n + 1):
        wk = int(W[pop == k].max())
        cand = (Fraction(wk, k * d), k)
        if best is None or cand > best:
            best = cand
    delta, k = best
    hit = (pop == k) & (W == int(delta * k * d))
    # among equal-size sets, lexicographically smallest sorted positions
    # == largest bit-reversed mask
    rev = np.zeros(size, dtype=np.int64)
    for i in range(n):
        rev |= ((masks >> i) & 1) << (n - 1 - i)
    idx = np.nonzero(hit)[0]
    mask = int(idx[np.argmax(rev[idx])])
    best_b = tuple(a for a in query.universe if mask >> pos[a] & 1)

    all_d = None
    if keep_all:
        all_d = {frozenset(a for a in query.universe if b >> pos[a] & 1): Fraction(int(W[b]), int(pop[b]) * d)
                 for b in range(1, size)}
    return DensityReport(best_b, delta, all_d, "brute")


def min_cut(query: JoinQuery, weights: Mapping[str, Fraction],
            delta: Fraction) -> tuple[Fraction, frozenset[str]]:
    """Minimum cut of the density network and its sink-side attribute set.

    Source -> attribute arcs have capacity delta, attribute -> relation arcs
    are effectively infinite, relation -> sink arcs carry w_R. A cut whose
    sink-side attributes are B costs delta|B| plus the weight of relations
    not inside B.
    """
    delta = as_fraction(delta)
    if delta <= 0:
        raise DomainError("delta must be positive")
    ws = {r: as_fraction(weights[r]) for r in query.names}
    if any(w < 0 for w in ws.values()):
        raise DomainError("weights must be non-negative")
    inf = sum(ws.values(), Fraction(0)) + query.n * delta + 1
    # node ids: 0 source, 1 sink, attributes, then relations
    src, snk = 0, 1
    a_id = {a: 2 + i for i, a in enumerate(query.universe)}
    r_id = {r: 2 + query.n + i for i, r in enumerate(query.names)}
    size = 2 + query.n + query.m
    cap: list[dict[int, Fraction]] = [dict() for _ in range(size)]

    def arc(u: int, v: int, c: Fraction) -> None:
        cap[u][v] = cap[u].get(v, Fraction(0)) + c
        cap[v].setdefault(u, Fraction(0))

    for a in query.universe:
        arc(src, a_id[a], delta)
    for r in query.relations:
        for a in r.attributes:
            arc(a_id[a], r_id[r.name], inf)
        arc(r_id[r.name], snk, ws[r.name])

    flow = Fraction(0)
    while True:
        parent = {src: src}
        queue = deque([src])
        while queue and snk not in parent:
            u = queue.popleft()
            for v, c in cap[u].items():
                if c > 0 and v not in parent:
                    parent[v] = u
                    queue.append(v)
        if snk not in parent:
            break
        path_cap = inf
        v = snk
        while v != src:
            u = parent[v]
            path_cap = min(path_cap, cap[u][v])
            v = u
        v = snk
        while v != src:
            u = parent[v]
            cap[u][v] -= path_cap
            cap[v][u] += path_cap
            v = u
        flow += path_cap
    sink_side = frozenset(a for a in query.universe if a_id[a] not in parent)
    return flow, sink_side


def min_cut_capacity(query: JoinQuery, weights: Mapping[str, Fraction], delta) -> Fraction:
    """gamma(Q, w, delta); it is below sum w_R exactly when the max density exceeds delta."""
    return min_cut(query, weights, delta)[0]


def max_density_flow(query: JoinQuery, weights: Mapping[str, Fraction]) -> DensityReport:
    """Max density by bisection on the cut criterion, then an exact snap.

    The answer has the form j / (k d) with k <= n and d the common weight
    denominator; two such values differ by at least 1/(n d)^2, so once the
    bracket (lo, hi] is narrower than that it holds exactly one of them.
    """
    n = query.n
    if n == 0:
        raise DomainError("query has no attributes")
    scaled, d = _scaled_weights(query, weights)
    total = Fraction(sum(scaled), d)
    if total == 0:
        return DensityReport(query.universe, Fraction(0), None, "flow")
    lo, hi = Fraction(0), total
    width = Fraction(1, (n * d) ** 2)
    while hi - lo >= width:
        mid = (lo + hi) / 2
        if min_cut_capacity(query, weights, mid) < total:
            lo = mid
        else:
            hi = mid
    found = {Fraction(math.floor(hi * k * d), k * d) for k in range(1, n + 1)}
    found = {v for v in found if lo < v <= hi}
    if len(found) != 1:
        raise InvariantError(f"density snap found {sorted(found)} in ({lo}, {hi}]")
    delta = found.pop()
    probe = lo if lo > 0 else delta / 2
    _, b = min_cut(query, weights, probe)
    if not b or density(query, weights, b) != delta:
        raise InvariantError("flow witness does not attain the recovered density")
    return DensityReport(query.order(b), delta, None, "flow")


def variance_upper_bound(query: JoinQuery, model: ProbabilityModel,
                         max_density: Fraction | None = None) -> float | None:
    """E[X]^2 (2^n - 1) 2^(Delta - log N), or None when Delta > log N."""
    if max_density is None:
        max_density = max_density_flow(query, model.weights).max_density
    p, q = max_density.numerator, max_density.denominator
    # Delta <= log2 N  <=>  2^p <= N^q
    if p > q * model.N.bit_length():
        return None
    if (1 << p) > model.N ** q:
        return None
    e = expected_answer_size(query, model)
    log2 = 2 * e.log2 + math.log2(2 ** query.n - 1) + float(max_density) - model.log2_n
    try:
        return 2.0 ** log2
    except OverflowError:
        return math.inf


# -- sampling -----------------------------------------------------------------

def _seed_words(seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def sample_instance(query: JoinQuery, model: ProbabilityModel, seed=0,
                    budget: int | None = DEFAULT_TUPLE_BUDGET) -> Instance:
    """Draw D from D(N, p); relation i uses its own stream keyed on (seed, i)."""
    words = _seed_words(seed)
    candidates = sum(model.N ** r.arity for r in query.relations)
    if budget is not None and candidates > budget:
        raise CapacityError(f"sampling scans {candidates} candidate tuples, budget is {budget}",
                            candidates, budget)
    rels = {}
    for i, r in enumerate(query.relations):
        rng = np.random.default_rng(np.random.SeedSequence([*words, i]))
        shape = (model.N,) * r.arity
        keep = np.flatnonzero(rng.random(model.N ** r.arity) < model.probability(r.name))
        cols = np.unravel_index(keep, shape)
        tuples = frozenset(zip(*(c.tolist() for c in cols)))
        rels[r.name] = Relation(r.attributes, tuples)
    return Instance(rels, domain_size=model.N)


@dataclass(frozen=True)
class ConcentrationReport:
    trials: int
    sizes: tuple[int, ...]
    mean: float
    variance: float
    expected: Log2Value
    variance_bound: float | None
    empty_fraction: float
    max_density: Fraction
    gap: float
    regime: str


def concentration_experiment(query: JoinQuery, model: ProbabilityModel, trials: int,
                             seed: int = 0, budget: int | None = DEFAULT_TUPLE_BUDGET) -> ConcentrationReport:
    """Sample ``trials`` databases and compare |Q(D)| with its prediction.

    The regime is read off the sign of log N - Delta: "concentrated" below
    the threshold, "vanishing" above it, "critical" on it.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    sizes = []
    for t in range(trials):
        db = sample_instance(query, model, (seed, t), budget)
        sizes.append(len(answer(query, db, budget)))
    arr = np.asarray(sizes, dtype=float)
    var = float(arr.var(ddof=1)) if trials > 1 else 0.0
    dens = max_density_flow(query, model.weights).max_density
    gap = model.log2_n - float(dens)
    k = model.log2_n_exact()
    if k is not None:
        regime = "concentrated" if dens < k else "vanishing" if dens > k else "critical"
    else:
        regime = "concentrated" if gap > 0 else "vanishing" if gap < 0 else "critical"
    return ConcentrationReport(
        trials=trials,
        sizes=tuple(sizes),
        mean=float(arr.mean()),
        variance=var,
        expected=expected_answer_size(query, model),
        variance_bound=variance_upper_bound(query, model, dens),
        empty_fraction=sum(1 for s in sizes if s == 0) / trials,
        max_density=dens,
        gap=gap,
        regime=regime,
    )
