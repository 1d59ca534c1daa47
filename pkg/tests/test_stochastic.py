import itertools
import random
from fractions import Fraction as F

import numpy as np
import pytest

from joinbounds.errors import CapabilityError, CapacityError, DomainError, ParseError
from joinbounds.query import JoinQuery, induced_subquery, parse_query
from joinbounds.stochastic import (ProbabilityModel, concentration_experiment, density,
                                   expected_answer_size, max_density_bruteforce, max_density_flow,
                                   min_cut, min_cut_capacity, parse_model, sample_instance,
                                   variance_upper_bound)

from conftest import random_query

ONES = {"R": 1, "S": 1, "T": 1}


def test_expected_answer_size(triangle):
    assert expected_answer_size(triangle, ProbabilityModel.for_query(triangle, 64)).exact_int == 32768
    assert expected_answer_size(triangle, ProbabilityModel.for_query(triangle, 1, default=0)).value == 1
    assert expected_answer_size(triangle, ProbabilityModel.for_query(triangle, 64, default=6)).exact_int == 1
    e = expected_answer_size(triangle, ProbabilityModel.for_query(triangle, 10))
    assert e.log2_exact is None and e.value == pytest.approx(1000 / 8)


def test_bruteforce_density(triangle):
    rep = max_density_bruteforce(triangle, ONES, keep_all=True)
    assert rep.max_density == 1 and rep.best_B == ("a", "b", "c")
    assert all(v == F(1, 2) for b, v in rep.densities.items() if len(b) == 2)
    single = max_density_bruteforce(parse_query("rel R a b"), {"R": 3})
    assert single.max_density == F(3, 2) and single.best_B == ("a", "b")


def test_bruteforce_tie_breaking():
    q = parse_query("rel R a b\nrel S c d")
    # every B made of whole relations has density 1/2; prefer the largest
    assert max_density_bruteforce(q, {"R": 1, "S": 1}).best_B == ("a", "b", "c", "d")
    q = parse_query("rel R a\nrel S b\nrel T c d")
    assert max_density_bruteforce(q, {"R": 1, "S": 1, "T": 0}).best_B == ("a", "b")
    q = parse_query("rel R a\nrel S b")
    assert max_density_bruteforce(q, {"R": 1, "S": 0}).best_B == ("a",)


def test_isolated_attributes_have_zero_density(triangle):
    lone = induced_subquery(triangle, {"a"})
    rep = max_density_bruteforce(lone, {})
    assert rep.max_density == 0 and rep.best_B == ("a",)
    assert density(triangle, ONES, {"a"}) == 0


def test_bruteforce_capability():
    q = JoinQuery.from_spec({"R": [f"a{i}" for i in range(23)]})
    with pytest.raises(CapabilityError):
        max_density_bruteforce(q, {"R": 1})


def _cut_by_enumeration(q, w, delta):
    best = None
    for k in range(q.n + 1):
        for b in itertools.combinations(q.universe, k):
            bs = set(b)
            cap = delta * len(b) + sum(F(w[r.name]) for r in q.relations if not r.attrset <= bs)
            best = cap if best is None else min(best, cap)
    return best


def test_min_cut_examples(triangle):
    assert min_cut_capacity(triangle, ONES, F(1, 2)) == F(3, 2) == _cut_by_enumeration(triangle, ONES, F(1, 2))
    assert min_cut_capacity(triangle, ONES, 2) == 3
    assert min_cut_capacity(triangle, ONES, 100) == 3
    with pytest.raises(DomainError):
        min_cut_capacity(triangle, ONES, 0)


def test_min_cut_matches_enumeration():
    rng = random.Random(8)
    for _ in range(40):
        q = random_query(rng, max_m=4, max_n=5)
        w = {r: F(rng.randint(0, 8), rng.choice([1, 2, 3])) for r in q.names}
        delta = F(rng.randint(1, 12), rng.choice([1, 2, 4, 5]))
        gamma, b = min_cut(q, w, delta)
        assert gamma == _cut_by_enumeration(q, w, delta)
        assert gamma == delta * len(b) + sum(w[r.name] for r in q.relations if not r.attrset <= b)


def test_flow_density(triangle):
    rep = max_density_flow(triangle, ONES)
    assert rep.max_density == 1
    assert max_density_flow(parse_query("rel R a b"), {"R": 0}).max_density == 0


def test_flow_equals_bruteforce():
    rng = random.Random(12)
    for _ in range(60):
        q = random_query(rng, max_m=6, max_n=8, max_arity=4)
        w = {r: F(rng.randint(0, 12), rng.choice([1, 2, 3, 7])) for r in q.names}
        brute = max_density_bruteforce(q, w)
        flow = max_density_flow(q, w)
        assert flow.max_density == brute.max_density
        assert density(q, w, brute.best_B) == brute.max_density
        if brute.max_density > 0:
            assert density(q, w, flow.best_B) == flow.max_density


def test_variance_bound(triangle):
    m = ProbabilityModel.for_query(triangle, 64)
    assert variance_upper_bound(triangle, m) == pytest.approx(32768 ** 2 * 7 / 32)
    edge = ProbabilityModel.for_query(triangle, 64, default=6)
    assert variance_upper_bound(triangle, edge) == pytest.approx(7.0)
    assert variance_upper_bound(triangle, ProbabilityModel.for_query(triangle, 64, default=7)) is None


def test_sample_full_and_empty(triangle):
    full = sample_instance(triangle, ProbabilityModel.for_query(triangle, 3, default=0), 5)
    assert all(len(r) == 9 for r in full.relations.values())
    assert full.domain_size == 3
    sparse = ProbabilityModel.for_query(triangle, 2, default=60)
    assert all(sample_instance(triangle, sparse, s).size == 0 for s in range(1000))


def test_sample_mean_relation_size(triangle):
    m = ProbabilityModel.for_query(triangle, 8)
    sizes = [len(sample_instance(triangle, m, s)["R"]) for s in range(1000)]
    assert abs(np.mean(sizes) - 32) <= 0.05 * 32


def test_sample_deterministic(triangle):
    m = ProbabilityModel.for_query(triangle, 8)
    a, b = sample_instance(triangle, m, (3, 1)), sample_instance(triangle, m, (3, 1))
    assert all(a[r].tuples == b[r].tuples for r in triangle.names)
    c = sample_instance(triangle, m, (3, 2))
    assert any(a[r].tuples != c[r].tuples for r in triangle.names)


def test_sample_budget(triangle):
    with pytest.raises(CapacityError):
        sample_instance(triangle, ProbabilityModel.for_query(triangle, 10 ** 4), 0)


def test_concentration_certain_model(triangle):
    rep = concentration_experiment(triangle, ProbabilityModel.for_query(triangle, 3, default=0), 5)
    assert rep.sizes == (27,) * 5 and rep.variance == 0


def test_concentration_variance_within_bound(triangle):
    m = ProbabilityModel.for_query(triangle, 8)
    rep = concentration_experiment(triangle, m, 1000, seed=1)
    assert rep.regime == "concentrated"
    assert rep.variance <= 3 * rep.variance_bound
    assert abs(rep.mean - 64) <= 0.1 * 64


def test_concentration_vanishing(triangle):
    rep = concentration_experiment(triangle, ProbabilityModel.for_query(triangle, 4, default=10), 100)
    assert rep.regime == "vanishing" and rep.variance_bound is None
    assert rep.empty_fraction >= 0.99


def test_parse_model(triangle):
    m = parse_model("N 64\nweight R 3/2\n# comment\nweight T 0\n", triangle)
    assert m.N == 64 and m.weights == {"R": F(3, 2), "S": 1, "T": 0}
    for text, line in [("N x", 1), ("N 4\nweight Z 1", 2), ("N 4\nweight R -1", 2),
                       ("N 4\nN 8", 2), ("weight R 1/0\nN 4", 1), ("N 4\nfoo", 2)]:
        with pytest.raises(ParseError) as exc:
            parse_model(text, triangle)
        assert exc.value.line == line
    with pytest.raises(ParseError):
        parse_model("weight R 1", triangle)
