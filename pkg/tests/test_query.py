import pytest

from joinbounds.errors import DomainError, ParseError
from joinbounds.query import (JoinQuery, RelationSchema, hypergraph, induced_subquery,
                              parse_query, primal_graph)


def test_parse_triangle(triangle):
    assert (triangle.m, triangle.n, triangle.size) == (3, 3, 6)
    assert triangle.names == ("R", "S", "T")
    assert triangle.universe == ("a", "b", "c")


def test_parse_single_relation():
    q = parse_query("rel R a b")
    assert (q.m, q.n, q.size) == (1, 2, 2)


def test_comments_and_blank_lines():
    q = parse_query("# header\n\nrel R a b  # trailing\n   \nrel S b\n")
    assert q.names == ("R", "S")


@pytest.mark.parametrize("text, line", [
    ("rel R a a", 1),
    ("rel R a b\nrel R b c", 2),
    ("rel R a\nrel S", 2),
    ("rel R a\nrelation S b", 2),
    ("rel R a-b", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as exc:
        parse_query(text, "q.jq")
    assert exc.value.line == line
    assert f"q.jq:{line}" in str(exc.value)


def test_empty_file_is_an_error():
    with pytest.raises(ParseError):
        parse_query("# nothing\n")


def test_schema_invariants():
    with pytest.raises(DomainError):
        RelationSchema("R", ())
    with pytest.raises(DomainError):
        JoinQuery.from_spec({"R": ["a"], "S": ["a"]}, universe=["b"])


def test_induced_subquery(triangle):
    sub = induced_subquery(triangle, {"a", "b"})
    assert sub.names == ("R",)
    assert induced_subquery(triangle, triangle.universe).relations == triangle.relations
    lone = induced_subquery(triangle, {"a"})
    assert lone.m == 0 and lone.universe == ("a",)
    with pytest.raises(DomainError):
        induced_subquery(triangle, {"z"})


def test_induced_subquery_monotone(triangle):
    import itertools
    subsets = [set(c) for k in range(4) for c in itertools.combinations("abc", k)]
    for b in subsets:
        for b2 in subsets:
            if b <= b2:
                assert set(induced_subquery(triangle, b).names) <= set(induced_subquery(triangle, b2).names)


def test_hypergraph(triangle):
    h = hypergraph(triangle)
    assert h.vertices == ("a", "b", "c")
    assert len(h.edges) == 3
    assert primal_graph(triangle) == {frozenset("ab"), frozenset("bc"), frozenset("ca")}


def test_hypergraph_keeps_multiplicity():
    q = parse_query("rel R a b\nrel R2 a b")
    h = hypergraph(q)
    assert h.multiplicity({"a", "b"}) == 2
    assert len(h.edges) == 2


def test_round_trip_text(triangle):
    assert parse_query(triangle.to_text()) == triangle
