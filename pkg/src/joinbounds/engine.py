"""Materialised relations, hash join, projection, traced plan evaluation,
and a brute-force reference for query answers.

Relations are sets of tuples of non-negative 64-bit integers, positionally
aligned with an attribute tuple. Output row order is never meaningful;
compare relations with :meth:`Relation.same_as`.

Database files (``.jdb``) hold one section per relation::

    @R
    1 2
    2 3
    @S
    2 5
"""

from __future__ import annotations

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import CapacityError, DomainError, ParseError
from .plantree import Dummy, Join, Leaf, Plan, Project, Unit, format_plan
from .query import JoinQuery

log = logging.getLogger(__name__)

DEFAULT_TUPLE_BUDGET = 10 ** 7
DEFAULT_ORACLE_BUDGET = 10 ** 8
MAX_VALUE = 2 ** 64 - 1


@dataclass(frozen=True)
class Relation:
    attributes: tuple[str, ...]
    tuples: frozenset[tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if len(set(self.attributes)) != len(self.attributes):
            raise DomainError(f"duplicate attribute in {self.attributes}")
        if not isinstance(self.tuples, frozenset):
            object.__setattr__(self, "tuples", frozenset(map(tuple, self.tuples)))
        k = len(self.attributes)
        for t in self.tuples:
            if len(t) != k:
                raise DomainError(f"tuple {t} does not match arity {k}")
            break

    @classmethod
    def from_rows(cls, attributes: Sequence[str], rows: Iterable[Sequence[int]]) -> "Relation":
        return cls(tuple(attributes), frozenset(tuple(int(v) for v in r) for r in rows))

    @classmethod
    def unit(cls) -> "Relation":
        """The 0-ary relation {()}; joining with it changes nothing."""
        return cls((), frozenset({()}))

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    @property
    def arity(self) -> int:
        return len(self.attributes)

    @property
    def size(self) -> int:
        """||R|| = |R| * arity."""
        return len(self.tuples) * self.arity

    def aligned(self, attributes: Sequence[str]) -> "Relation":
        """The same relation with its columns reordered to ``attributes``."""
        attributes = tuple(attributes)
        if set(attributes) != set(self.attributes) or len(attributes) != self.arity:
            raise DomainError(f"cannot align {self.attributes} to {attributes}")
        if attributes == self.attributes:
            return self
        idx = [self.attributes.index(a) for a in attributes]
        return Relation(attributes, frozenset(tuple(t[i] for i in idx) for t in self.tuples))

    def same_as(self, other: "Relation") -> bool:
        if set(self.attributes) != set(other.attributes):
            return False
        return other.aligned(self.attributes).tuples == self.tuples

    def column(self, attribute: str) -> set[int]:
        i = self.attributes.index(attribute)
        return {t[i] for t in self.tuples}


@dataclass
class Instance:
    """A database: relation name -> Relation.

    ``domain_size`` is set for instances drawn over the domain {0..N-1}; it is
    what a dummy relation expands to. ``duplicates`` counts rows dropped while
    loading.
    """

    relations: dict[str, Relation]
    domain_size: int | None = None
    duplicates: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        """|D| = total number of tuples."""
        return sum(len(r) for r in self.relations.values())

    def __getitem__(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise DomainError(f"instance has no relation {name}") from None

    def sizes(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.relations.items()}

    def active_domain(self, attribute: str) -> set[int]:
        vals: set[int] = set()
        for r in self.relations.values():
            if attribute in r.attributes:
                vals |= r.column(attribute)
        return vals

    def check_schema(self, query: JoinQuery) -> None:
        for rs in query.relations:
            rel = self[rs.name]
            if rel.attributes != rs.attributes:
                raise DomainError(
                    f"relation {rs.name} has attributes {rel.attributes}, schema says {rs.attributes}")


def _budget_check(required: int, budget: int | None, what: str) -> None:
    if budget is not None and required > budget:
        raise CapacityError(f"{what} needs {required} tuples, budget is {budget}", required, budget)


def join(r: Relation, s: Relation, budget: int | None = DEFAULT_TUPLE_BUDGET) -> Relation:
    """Natural join by hashing the smaller input on the shared attributes.

    Output columns are r's attributes followed by s's new ones. The exact
    output size is counted from bucket sizes before anything is materialised.
    """
    shared = [a for a in r.attributes if a in s.attributes]
    r_key = [r.attributes.index(a) for a in shared]
    s_key = [s.attributes.index(a) for a in shared]
    s_rest = [i for i, a in enumerate(s.attributes) if a not in r.attributes]
    out_attrs = r.attributes + tuple(s.attributes[i] for i in s_rest)

    build_is_r = len(r) <= len(s)
    build, b_key = (r, r_key) if build_is_r else (s, s_key)
    probe, p_key = (s, s_key) if build_is_r else (r, r_key)
    table: dict[tuple, list[tuple]] = defaultdict(list)
    for t in build.tuples:
        table[tuple(t[i] for i in b_key)].append(t)

    required = sum(len(table.get(tuple(t[i] for i in p_key), ())) for t in probe.tuples)
    _budget_check(required, budget, "join")

    out = set()
    for p in probe.tuples:
        for b in table.get(tuple(p[i] for i in p_key), ()):
            rt, st = (b, p) if build_is_r else (p, b)
            out.add(rt + tuple(st[i] for i in s_rest))
    return Relation(out_attrs, frozenset(out))


def project(r: Relation, attrs: Iterable[str]) -> Relation:
    keep = set(attrs)
    missing = keep - set(r.attributes)
    if missing:
        raise DomainError(f"cannot project {r.attributes} onto missing {sorted(missing)}")
    idx = [i for i, a in enumerate(r.attributes) if a in keep]
    return Relation(tuple(r.attributes[i] for i in idx),
                    frozenset(tuple(t[i] for i in idx) for t in r.tuples))


@dataclass(frozen=True)
class TraceEntry:
    path: tuple[int, ...]
    node: Plan
    cardinality: int
    arity: int

    @property
    def size(self) -> int:
        return self.cardinality * self.arity

    @property
    def label(self) -> str:
        return format_plan(self.node)


@dataclass
class EvalTrace:
    entries: list[TraceEntry] = field(default_factory=list)

    @property
    def peak(self) -> int:
        return max((e.cardinality for e in self.entries), default=0)

    def at(self, path: Sequence[int]) -> TraceEntry:
        path = tuple(path)
        for e in self.entries:
            if e.path == path:
                return e
        raise KeyError(path)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _dummy_relation(attribute: str, db: Instance) -> Relation:
    if db.domain_size is not None:
        values: Iterable[int] = range(db.domain_size)
    else:
        values = db.active_domain(attribute)
    return Relation((attribute,), frozenset((v,) for v in values))


def evaluate(plan: Plan, db: Instance, query: JoinQuery | None = None,
             budget: int | None = DEFAULT_TUPLE_BUDGET) -> tuple[Relation, EvalTrace]:
    """Evaluate bottom-up, recording every subplan's output cardinality."""
    if query is not None:
        db.check_schema(query)
    trace = EvalTrace()

    def run(node: Plan, path: tuple[int, ...]) -> Relation:
        if isinstance(node, Leaf):
            out = db[node.name]
            if query is not None and node.name not in query:
                raise DomainError(f"plan leaf {node.name} is not in the query")
        elif isinstance(node, Join):
            left = run(node.left, path + (0,))
            right = run(node.right, path + (1,))
            out = join(left, right, budget)
        elif isinstance(node, Project):
            out = project(run(node.child, path + (0,)), node.attrs)
        elif isinstance(node, Unit):
            out = Relation.unit()
        elif isinstance(node, Dummy):
            out = _dummy_relation(node.attribute, db)
        else:
            raise TypeError(f"not a plan node: {node!r}")
        trace.entries.append(TraceEntry(path, node, len(out), out.arity))
        return out

    return run(plan, ()), trace


def oracle_answer(query: JoinQuery, db: Instance,
                  budget: int | None = DEFAULT_ORACLE_BUDGET) -> Relation:
    """Q(D) by enumerating candidate tuples; shares no code with :func:`join`.

    Each attribute ranges over the values it takes in every relation that
    mentions it, which is a superset of its values in the answer.
    """
    db.check_schema(query)
    attrs = query.universe
    domains = []
    for a in attrs:
        rels = [db[r.name] for r in query.relations_with(a)]
        if not rels:
            raise DomainError(f"attribute {a} is in no relation; its domain is unbounded")
        vals = set.intersection(*(r.column(a) for r in rels))
        domains.append(sorted(vals))
    total = 1
    for d in domains:
        total *= len(d)
    _budget_check(total, budget, "oracle enumeration")

    pos = {a: i for i, a in enumerate(attrs)}
    checks = [([pos[a] for a in r.attributes], db[r.name].tuples) for r in query.relations]
    out = [t for t in itertools.product(*domains)
           if all(tuple(t[i] for i in idx) in rel for idx, rel in checks)]
    return Relation(attrs, frozenset(out))


def answer(query: JoinQuery, db: Instance, budget: int | None = DEFAULT_TUPLE_BUDGET) -> Relation:
    """Q(D) through left-deep hash joins in schema order."""
    db.check_schema(query)
    out = Relation.unit()
    for r in query.relations:
        out = join(out, db[r.name], budget)
    return out.aligned(query.universe) if set(out.attributes) == set(query.universe) else out


def parse_database(text: str, query: JoinQuery, source: str | None = None) -> Instance:
    rows: dict[str, set[tuple[int, ...]]] = {}
    dups: dict[str, int] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@"):
            current = line[1:].strip()
            if current not in query:
                raise ParseError(f"relation {current} is not in the query schema", lineno, source)
            if current in rows:
                raise ParseError(f"relation {current} appears twice", lineno, source)
            rows[current] = set()
            dups[current] = 0
            continue
        if current is None:
            raise ParseError("tuple before any '@relation' header", lineno, source)
        arity = query.relation(current).arity
        parts = line.split()
        if len(parts) != arity:
            raise ParseError(f"{current} expects {arity} values, got {len(parts)}", lineno, source)
        try:
            t = tuple(int(p, 10) for p in parts)
        except ValueError:
            raise ParseError(f"non-integer value in {line!r}", lineno, source) from None
        if any(v < 0 or v > MAX_VALUE for v in t):
            raise ParseError("values must be unsigned 64-bit integers", lineno, source)
        if t in rows[current]:
            dups[current] += 1
        rows[current].add(t)
    missing = [n for n in query.names if n not in rows]
    if missing:
        raise ParseError(f"no section for relations {missing}", None, source)
    if any(dups.values()):
        log.warning("dropped duplicate rows: %s", {k: v for k, v in dups.items() if v})
    rels = {n: Relation(query.relation(n).attributes, frozenset(rows[n])) for n in query.names}
    return Instance(rels, duplicates={k: v for k, v in dups.items() if v})


def load_database(path, query: JoinQuery) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_database(fh.read(), query, str(path))


def format_database(db: Instance, query: JoinQuery | None = None) -> str:
    names: Sequence[str] = query.names if query is not None else list(db.relations)
    lines = []
    for name in names:
        lines.append(f"@{name}")
        lines.extend(" ".join(map(str, t)) for t in sorted(db[name].tuples))
    return "\n".join(lines) + "\n"


def instance_from_rows(query: JoinQuery, rows: Mapping[str, Iterable[Sequence[int]]],
                       domain_size: int | None = None) -> Instance:
    return Instance({r.name: Relation.from_rows(r.attributes, rows.get(r.name, ()))
                     for r in query.relations}, domain_size)
