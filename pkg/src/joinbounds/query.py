"""Join queries, their hypergraphs, and the ``.jq`` query file format.

A query file lists one relation per line::

    # the triangle
    rel R a b
    rel S b c
    rel T c a

Relation order and attribute order are taken from the file and are kept
everywhere downstream, which is what makes LP pivoting and plan generation
deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, ParseError

TOKEN = re.compile(r"^[A-Za-z0-9_]+$")


def _check_token(kind: str, name: str) -> None:
    if not isinstance(name, str) or not TOKEN.match(name):
        raise DomainError(f"invalid {kind} name {name!r}")


@dataclass(frozen=True)
class RelationSchema:
    name: str
    attributes: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        _check_token("relation", self.name)
        if not self.attributes:
            raise DomainError(f"relation {self.name} has no attributes")
        for a in self.attributes:
            _check_token("attribute", a)
        if len(set(self.attributes)) != len(self.attributes):
            raise DomainError(f"relation {self.name} repeats an attribute")

    @property
    def attrset(self) -> frozenset[str]:
        return frozenset(self.attributes)

    @property
    def arity(self) -> int:
        return len(self.attributes)

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.attributes)})"


@dataclass(frozen=True)
class Hypergraph:
    vertices: tuple[str, ...]
    edges: tuple[frozenset[str], ...]

    def multiplicity(self, edge: Iterable[str]) -> int:
        e = frozenset(edge)
        return sum(1 for x in self.edges if x == e)


@dataclass(frozen=True)
class JoinQuery:
    """The natural join of ``relations``.

    ``universe`` defaults to the union of relation attributes in order of first
    appearance. It may be given explicitly as a superset, which is how induced
    subqueries keep attributes no retained relation covers.
    """

    relations: tuple[RelationSchema, ...]
    universe: tuple[str, ...] = field(default=())
    _index: Mapping[str, RelationSchema] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        rels = tuple(self.relations)
        object.__setattr__(self, "relations", rels)
        names = [r.name for r in rels]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise DomainError(f"duplicate relation name {dup}")
        covered: list[str] = []
        seen: set[str] = set()
        for r in rels:
            for a in r.attributes:
                if a not in seen:
                    seen.add(a)
                    covered.append(a)
        universe = tuple(self.universe) if self.universe else tuple(covered)
        if len(set(universe)) != len(universe):
            raise DomainError("attribute universe has duplicates")
        for a in universe:
            _check_token("attribute", a)
        missing = seen - set(universe)
        if missing:
            raise DomainError(f"universe misses relation attributes {sorted(missing)}")
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "_index", {r.name: r for r in rels})

    @classmethod
    def from_spec(cls, spec: Mapping[str, Sequence[str]] | Sequence[tuple[str, Sequence[str]]],
                  universe: Sequence[str] = ()) -> "JoinQuery":
        items = spec.items() if isinstance(spec, Mapping) else spec
        return cls(tuple(RelationSchema(n, tuple(a)) for n, a in items), tuple(universe))

    @property
    def n(self) -> int:
        return len(self.universe)

    @property
    def m(self) -> int:
        return len(self.relations)

    @property
    def size(self) -> int:
        """|Q|: the sum of relation arities."""
        return sum(r.arity for r in self.relations)

    @property
    def attributes(self) -> frozenset[str]:
        return frozenset(self.universe)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.relations)

    def relation(self, name: str) -> RelationSchema:
        try:
            return self._index[name]
        except KeyError:
            raise DomainError(f"unknown relation {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def covered(self) -> frozenset[str]:
        """Attributes that occur in at least one relation."""
        return frozenset(a for r in self.relations for a in r.attributes)

    def relations_with(self, attribute: str) -> tuple[RelationSchema, ...]:
        return tuple(r for r in self.relations if attribute in r.attrset)

    def order(self, attrs: Iterable[str]) -> tuple[str, ...]:
        """``attrs`` sorted by universe position."""
        s = set(attrs)
        return tuple(a for a in self.universe if a in s)

    def __str__(self) -> str:
        return " ⋈ ".join(str(r) for r in self.relations)

    def to_text(self) -> str:
        return "".join(f"rel {r.name} {' '.join(r.attributes)}\n" for r in self.relations)


def induced_subquery(q: JoinQuery, attrs: Iterable[str]) -> JoinQuery:
    """Q[B]: every relation whose attributes all lie in B, over universe B."""
    b = set(attrs)
    extra = b - q.attributes
    if extra:
        raise DomainError(f"attributes {sorted(extra)} are not in the query")
    kept = tuple(r for r in q.relations if r.attrset <= b)
    return JoinQuery(kept, q.order(b))


def hypergraph(q: JoinQuery) -> Hypergraph:
    return Hypergraph(q.universe, tuple(r.attrset for r in q.relations))


def primal_graph(q: JoinQuery) -> set[frozenset[str]]:
    """Edges between attributes that co-occur in some relation."""
    edges = set()
    for r in q.relations:
        attrs = r.attributes
        for i, a in enumerate(attrs):
            for b in attrs[i + 1:]:
                edges.add(frozenset((a, b)))
    return edges


def parse_query(text: str, source: str | None = None) -> JoinQuery:
    rels: list[RelationSchema] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "rel":
            raise ParseError(f"expected 'rel', got {parts[0]!r}", lineno, source)
        if len(parts) < 2:
            raise ParseError("missing relation name", lineno, source)
        name, attrs = parts[1], parts[2:]
        if not attrs:
            raise ParseError(f"relation {name} has an empty attribute list", lineno, source)
        if name in seen:
            raise ParseError(f"duplicate relation name {name}", lineno, source)
        if len(set(attrs)) != len(attrs):
            raise ParseError(f"duplicate attribute in relation {name}", lineno, source)
        try:
            rels.append(RelationSchema(name, tuple(attrs)))
        except DomainError as exc:
            raise ParseError(str(exc), lineno, source) from None
        seen.add(name)
    if not rels:
        raise ParseError("query has no relations", None, source)
    return JoinQuery(tuple(rels))


def load_query(path) -> JoinQuery:
    with open(path, encoding="utf-8") as fh:
        return parse_query(fh.read(), str(path))
