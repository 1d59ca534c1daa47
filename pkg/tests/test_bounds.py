import itertools
import math
import random
from fractions import Fraction as F

import pytest

from joinbounds.bounds import (GraphInput, agm_bound, constrained_bound, constrained_worst_instance,
                               graph_to_query, independence_number, independent_set_instance,
                               is_independent, parse_graph, parse_sizes, worst_case_instance)
from joinbounds.engine import answer, oracle_answer
from joinbounds.errors import CapacityError, DomainError, ParseError
from joinbounds.lp import fractional_cover, is_fractional_cover
from joinbounds.query import parse_query

from conftest import random_instance, random_query

HALF = {"R": F(1, 2), "S": F(1, 2), "T": F(1, 2)}


def test_agm_triangle(triangle):
    b = agm_bound(triangle, HALF, {"R": 16, "S": 16, "T": 16})
    assert b.log2_exact == 6 and b.exact_int == 64
    assert b.holds_for(64) and not b.holds_for(65)


def test_agm_unit_sizes(triangle):
    b = agm_bound(triangle, {"R": 1, "S": 1, "T": 1}, {"R": 1, "S": 1, "T": 1})
    assert b.exact_int == 1


def test_agm_rejects_non_cover(triangle):
    with pytest.raises(DomainError):
        agm_bound(triangle, {"R": F(1, 2), "S": F(1, 2), "T": 0}, {"R": 4, "S": 4, "T": 4})


def test_agm_empty_relation(triangle):
    b = agm_bound(triangle, HALF, {"R": 0, "S": 4, "T": 4})
    assert b.value == 0 and b.holds_for(0) and not b.holds_for(1)


def test_agm_non_power_of_two(triangle):
    b = agm_bound(triangle, HALF, {"R": 5, "S": 5, "T": 5})
    assert b.log2_exact is None
    assert b.value == pytest.approx(5 ** 1.5, rel=1e-12)
    assert b.holds_for(11) and not b.holds_for(12)


def test_agm_triangle_exhaustive_domain_three(triangle):
    """Largest triangle answer with |R|=|S|=|T|=4 over values {0,1,2}."""
    pairs = list(itertools.product(range(3), repeat=2))
    best = 0
    for r in itertools.combinations(pairs, 4):
        for s in itertools.combinations(pairs, 4):
            # answers per (c, a): number of b with (a,b) in R and (b,c) in S
            counts = {}
            for a, b in r:
                for b2, c in s:
                    if b == b2:
                        counts[(c, a)] = counts.get((c, a), 0) + 1
            best = max(best, sum(sorted(counts.values(), reverse=True)[:4]))
    assert best == 8
    assert agm_bound(triangle, HALF, {"R": 4, "S": 4, "T": 4}).exact_int == 8


def test_agm_random_instances():
    rng = random.Random(3)
    for _ in range(50):
        q = random_query(rng)
        db = random_instance(rng, q)
        x = fractional_cover(q).x
        assert agm_bound(q, x, db.sizes()).holds_for(len(oracle_answer(q, db)))


def test_worst_case_triangle(triangle):
    db = worst_case_instance(triangle, 2)
    assert db.sizes() == {"R": 4, "S": 4, "T": 4}
    assert db["R"].tuples == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert len(oracle_answer(triangle, db)) == 8


def test_worst_case_single_relation():
    q = parse_query("rel R a b")
    db = worst_case_instance(q, 3)
    assert len(db["R"]) == 3 and len(oracle_answer(q, db)) == 3


def test_worst_case_budget_and_domain(triangle):
    with pytest.raises(CapacityError) as exc:
        worst_case_instance(triangle, 1000, budget=10 ** 6)
    assert exc.value.required == 3 * 10 ** 6
    with pytest.raises(DomainError):
        worst_case_instance(triangle, 1)


def test_worst_case_random_queries():
    rng = random.Random(5)
    for _ in range(20):
        q = random_query(rng, max_m=3, max_n=4)
        sol = fractional_cover(q)
        db = worst_case_instance(q, 2, solution=sol)
        count = len(answer(q, db))
        bound = agm_bound(q, sol.x, db.sizes())
        assert count >= bound.value * (1 - 1e-9)
        live = {len(db[r]) for r in q.names if sol.x[r] > 0}
        assert len(live) == 1


def test_constrained_bound_triangle(triangle):
    sol, b = constrained_bound(triangle, {"R": 8, "S": 8, "T": 8})
    assert sol.x == HALF
    assert sol.y == {"a": F(3, 2), "b": F(3, 2), "c": F(3, 2)}
    assert b.log2_exact == F(9, 2)
    assert b.value == pytest.approx(8 ** 1.5)


def test_constrained_bound_free_relation(triangle):
    sizes = {"R": 1, "S": 64, "T": 64}
    sol, b = constrained_bound(triangle, sizes)
    assert b.exact_int == 64
    # cross-check against every cover on a grid of quarter steps
    grid = [F(k, 4) for k in range(9)]
    best = min(xr * 0 + xs * 6 + xt * 6 for xr in grid for xs in grid for xt in grid
               if is_fractional_cover(triangle, {"R": xr, "S": xs, "T": xt}))
    assert sol.objective == best == 6


def test_constrained_bound_unit_sizes(triangle):
    assert constrained_bound(triangle, {"R": 1, "S": 1, "T": 1})[1].exact_int == 1


def test_constrained_worst_triangle(triangle):
    sizes = {"R": 8, "S": 8, "T": 8}
    db = constrained_worst_instance(triangle, sizes)
    assert db.sizes() == sizes
    assert sorted(db["R"].tuples) == [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 0), (1, 1)]
    assert len(oracle_answer(triangle, db)) >= 8


def test_constrained_worst_single_relation():
    q = parse_query("rel R a b")
    db = constrained_worst_instance(q, {"R": 5})
    assert len(db["R"]) == 5 and len(oracle_answer(q, db)) == 5


def test_constrained_worst_unit_sizes(triangle):
    db = constrained_worst_instance(triangle, {"R": 1, "S": 1, "T": 1})
    assert len(oracle_answer(triangle, db)) == 1


def test_constrained_worst_random():
    rng = random.Random(9)
    for _ in range(20):
        q = random_query(rng, max_m=4, max_n=4)
        sizes = {r: rng.randint(1, 40) for r in q.names}
        sol, b = constrained_bound(q, sizes)
        db = constrained_worst_instance(q, sizes, solution=sol)
        assert db.sizes() == sizes
        count = len(answer(q, db))
        assert math.log2(count) >= b.log2 - q.n - 1e-9


def test_parse_sizes(triangle):
    assert parse_sizes("size R 4\nsize S 5\nsize T 6\n", triangle) == {"R": 4, "S": 5, "T": 6}
    for text, line in [("size R x", 1), ("size R 4\nsize Z 1", 2), ("size R 0", 1), ("sz R 1", 1)]:
        with pytest.raises(ParseError) as exc:
            parse_sizes(text, triangle)
        assert exc.value.line == line
    with pytest.raises(ParseError):
        parse_sizes("size R 4", triangle)


def cycle(k):
    return GraphInput.from_edges([(f"v{i}", f"v{(i + 1) % k}") for i in range(k)])


def test_graph_to_query_k3():
    g = parse_graph("edge a b\nedge b c\nedge c a\n")
    q, sizes = graph_to_query(g)
    assert q.names == ("R_a_b", "R_b_c", "R_c_a")
    assert fractional_cover(q).rho_star == F(3, 2)
    assert set(sizes.values()) == {2}


def test_graph_to_query_small():
    q, _ = graph_to_query(GraphInput.from_edges([("u", "v")]))
    assert q.m == 1 and q.relations[0].attributes == ("u", "v")
    q, _ = graph_to_query(cycle(5))
    assert q.m == 5 and q.n == 5
    with pytest.raises(DomainError):
        graph_to_query(GraphInput.from_edges([]))


def test_graph_parse_errors():
    for text in ["edge a a", "edge a b\nedge b a", "edge a", "vertex a"]:
        with pytest.raises(ParseError):
            parse_graph(text)


def test_independent_set_instances():
    k3 = parse_graph("edge a b\nedge b c\nedge c a\n")
    q, _ = graph_to_query(k3)
    assert independence_number(k3) == 1
    assert len(oracle_answer(q, independent_set_instance(k3, {"a"}))) == 2
    c5 = cycle(5)
    q5, _ = graph_to_query(c5)
    assert independence_number(c5) == 2
    assert len(oracle_answer(q5, independent_set_instance(c5, {"v0", "v2"}))) == 4
    empty = independent_set_instance(c5, set())
    assert all(r.tuples == {(0, 0), (2, 2)} for r in empty.relations.values())
    assert len(oracle_answer(q5, empty)) >= 1
    with pytest.raises(DomainError):
        independent_set_instance(c5, {"v0", "v1"})


def test_best_witness_reaches_two_to_alpha():
    rng = random.Random(1)
    graphs = [cycle(4), cycle(6), GraphInput.from_edges([("a", "b"), ("b", "c"), ("c", "d")])]
    for _ in range(5):
        verts = [f"x{i}" for i in range(6)]
        edges = [e for e in itertools.combinations(verts, 2) if rng.random() < 0.4] or [("x0", "x1")]
        graphs.append(GraphInput.from_edges(edges))
    for g in graphs:
        q, _ = graph_to_query(g)
        best = max(len(answer(q, independent_set_instance(g, s)))
                   for k in range(len(g.vertices) + 1)
                   for s in itertools.combinations(g.vertices, k) if is_independent(g, s))
        assert best == 2 ** independence_number(g)


def test_binary_domain_upper_bound_small_graphs():
    two_tuple_rels = list(itertools.combinations(list(itertools.product((0, 1), repeat=2)), 2))
    for g in [GraphInput.from_edges([("a", "b")]), parse_graph("edge a b\nedge b c\nedge c a")]:
        q, _ = graph_to_query(g)
        from joinbounds.engine import instance_from_rows
        for combo in itertools.product(two_tuple_rels, repeat=q.m):
            db = instance_from_rows(q, dict(zip(q.names, combo)))
            assert len(answer(q, db)) <= 2 ** independence_number(g)
