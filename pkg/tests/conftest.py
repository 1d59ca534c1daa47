import random
import string

import pytest

from joinbounds.engine import Instance, Relation
from joinbounds.query import JoinQuery, RelationSchema, parse_query

TRIANGLE_TEXT = "rel R a b\nrel S b c\nrel T c a\n"


@pytest.fixture
def triangle():
    return parse_query(TRIANGLE_TEXT)


def random_query(rng: random.Random, max_m: int = 4, max_n: int = 5, max_arity: int = 3) -> JoinQuery:
    """Random schema whose relations together cover every attribute."""
    n = rng.randint(1, max_n)
    attrs = list(string.ascii_lowercase[:n])
    while True:
        m = rng.randint(1, max_m)
        rels = []
        for i in range(m):
            k = rng.randint(1, min(max_arity, n))
            rels.append(RelationSchema(f"R{i}", tuple(rng.sample(attrs, k))))
        covered = {a for r in rels for a in r.attributes}
        if covered == set(attrs):
            return JoinQuery(tuple(rels))


def random_instance(rng: random.Random, q: JoinQuery, max_size: int = 50, domain: int = 4) -> Instance:
    rels = {}
    for r in q.relations:
        grid = domain ** r.arity
        k = rng.randint(0, min(max_size, grid))
        chosen = set()
        while len(chosen) < k:
            chosen.add(tuple(rng.randrange(domain) for _ in r.attributes))
        rels[r.name] = Relation(r.attributes, frozenset(chosen))
    return Instance(rels)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
