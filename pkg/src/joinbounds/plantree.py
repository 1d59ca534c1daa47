"""Join-project plan terms and their parenthesised text form.

Text syntax::

    R                        leaf: a relation name
    (join X Y)               binary natural join
    (project (a b c) X)      projection onto {a, b, c}

Two internal node kinds exist for the projection-elimination rewrite and
print as ``(unit)`` (the 0-ary relation holding the empty tuple, the join
identity) and ``(dummy a)`` (a unary relation holding the whole domain of
``a``). Parsing accepts them too, so intermediate plans round-trip.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

from .errors import DomainError, ParseError
from .query import JoinQuery

__all__ = [
    "Dummy", "Join", "Leaf", "Plan", "PlanStats", "Project", "Unit",
    "format_plan", "is_join_plan", "leaves", "left_deep", "node_at",
    "output_attributes", "parse_plan", "plan_stats", "replace_at",
    "subplans", "validate_plan",
]


@dataclass(frozen=True)
class Leaf:
    name: str


@dataclass(frozen=True)
class Join:
    left: "Plan"
    right: "Plan"


@dataclass(frozen=True)
class Project:
    attrs: tuple[str, ...]
    child: "Plan"

    def __post_init__(self):
        object.__setattr__(self, "attrs", tuple(self.attrs))


@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Dummy:
    attribute: str


Plan = Union[Leaf, Join, Project, Unit, Dummy]
Path = tuple[int, ...]


@dataclass(frozen=True)
class PlanStats:
    leaf_count: int
    projection_count: int
    depth: int

    @property
    def is_join_plan(self) -> bool:
        return self.projection_count == 0


def children(node: Plan) -> tuple[Plan, ...]:
    if isinstance(node, Join):
        return (node.left, node.right)
    if isinstance(node, Project):
        return (node.child,)
    return ()


def subplans(plan: Plan, path: Path = ()) -> Iterator[tuple[Path, Plan]]:
    """Every subplan with its path, children before parents, left before right."""
    for i, c in enumerate(children(plan)):
        yield from subplans(c, path + (i,))
    yield path, plan


def node_at(plan: Plan, path: Sequence[int]) -> Plan:
    node = plan
    for i in path:
        kids = children(node)
        if i >= len(kids):
            raise DomainError(f"no child {i} at {node!r}")
        node = kids[i]
    return node


def replace_at(plan: Plan, path: Sequence[int], new: Plan) -> Plan:
    if not path:
        return new
    head, rest = path[0], path[1:]
    if isinstance(plan, Join):
        if head == 0:
            return Join(replace_at(plan.left, rest, new), plan.right)
        return Join(plan.left, replace_at(plan.right, rest, new))
    if isinstance(plan, Project) and head == 0:
        return Project(plan.attrs, replace_at(plan.child, rest, new))
    raise DomainError(f"path {tuple(path)} does not exist")


def leaves(plan: Plan) -> list[str]:
    """Relation names at Leaf nodes, left to right (repeats kept)."""
    return [n.name for _, n in subplans(plan) if isinstance(n, Leaf)]


def left_deep(items: Sequence[Plan]) -> Plan:
    if not items:
        raise DomainError("cannot join zero plans")
    plan = items[0]
    for item in items[1:]:
        plan = Join(plan, item)
    return plan


def is_join_plan(plan: Plan) -> bool:
    return not any(isinstance(n, Project) for _, n in subplans(plan))


def plan_stats(plan: Plan) -> PlanStats:
    def depth(node: Plan) -> int:
        kids = children(node)
        return 0 if not kids else 1 + max(depth(k) for k in kids)

    nodes = [n for _, n in subplans(plan)]
    return PlanStats(
        leaf_count=sum(1 for n in nodes if isinstance(n, (Leaf, Unit, Dummy))),
        projection_count=sum(1 for n in nodes if isinstance(n, Project)),
        depth=depth(plan),
    )


def _schema(schema) -> Mapping[str, tuple[str, ...]]:
    if isinstance(schema, JoinQuery):
        return {r.name: r.attributes for r in schema.relations}
    return schema


def output_attributes(plan: Plan, schema) -> tuple[str, ...]:
    """A_φ in column order: left columns, then the right side's new ones."""
    sch = _schema(schema)
    if isinstance(plan, Leaf):
        if plan.name not in sch:
            raise DomainError(f"unknown relation {plan.name}")
        return tuple(sch[plan.name])
    if isinstance(plan, Unit):
        return ()
    if isinstance(plan, Dummy):
        return (plan.attribute,)
    if isinstance(plan, Join):
        left = output_attributes(plan.left, sch)
        right = output_attributes(plan.right, sch)
        return left + tuple(a for a in right if a not in left)
    inner = output_attributes(plan.child, sch)
    missing = set(plan.attrs) - set(inner)
    if missing:
        raise DomainError(f"projection onto {sorted(missing)} not available below it")
    keep = set(plan.attrs)
    return tuple(a for a in inner if a in keep)


def validate_plan(plan: Plan, query: JoinQuery) -> None:
    """Leaves name schema relations and every projection is onto available attributes."""
    output_attributes(plan, query)


def format_plan(plan: Plan) -> str:
    if isinstance(plan, Leaf):
        return plan.name
    if isinstance(plan, Join):
        return f"(join {format_plan(plan.left)} {format_plan(plan.right)})"
    if isinstance(plan, Project):
        return f"(project ({' '.join(plan.attrs)}) {format_plan(plan.child)})"
    if isinstance(plan, Unit):
        return "(unit)"
    if isinstance(plan, Dummy):
        return f"(dummy {plan.attribute})"
    raise TypeError(f"not a plan node: {plan!r}")


def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for tok in line.replace("(", " ( ").replace(")", " ) ").split():
            out.append((tok, lineno))
    return out


def parse_plan(text: str, source: str | None = None) -> Plan:
    toks = _tokenize(text)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else (None, toks[-1][1] if toks else None)

    def take(expected: str | None = None) -> tuple[str, int]:
        nonlocal pos
        tok, line = peek()
        if tok is None:
            raise ParseError("unexpected end of plan", line, source)
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, got {tok!r}", line, source)
        pos += 1
        return tok, line

    def name(line_tok) -> str:
        tok, line = line_tok
        if tok in ("(", ")"):
            raise ParseError(f"expected a name, got {tok!r}", line, source)
        return tok

    def term() -> Plan:
        tok, line = take()
        if tok == ")":
            raise ParseError("unexpected ')'", line, source)
        if tok != "(":
            return Leaf(tok)
        op, line = take()
        if op == "join":
            left, right = term(), term()
            take(")")
            return Join(left, right)
        if op == "project":
            take("(")
            attrs = []
            while peek()[0] != ")":
                attrs.append(name(take()))
            take(")")
            child = term()
            take(")")
            return Project(tuple(attrs), child)
        if op == "unit":
            take(")")
            return Unit()
        if op == "dummy":
            attr = name(take())
            take(")")
            return Dummy(attr)
        raise ParseError(f"unknown plan operator {op!r}", line, source)

    if not toks:
        raise ParseError("empty plan", None, source)
    plan = term()
    if pos != len(toks):
        raise ParseError(f"trailing input {toks[pos][0]!r}", toks[pos][1], source)
    return plan
