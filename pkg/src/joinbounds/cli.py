"""Command-line interface.

Every report is a sequence of ``key value`` lines on stdout. Exit codes:
0 success, 1 usage, 2 malformed input, 3 precondition or capacity, 4 internal
consistency failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import bounds, deproject as dp, engine, lp, plans, stochastic
from .errors import InvariantError, JoinBoundsError
from .numeric import format_float, format_rational
from .plantree import format_plan, parse_plan, plan_stats, validate_plan
from .query import load_query

log = logging.getLogger("joinbounds")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(out, key: str, *values) -> None:
    out.write(" ".join([key, *map(str, values)]) + "\n")


def _read(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _bound_lines(out, bound: bounds.BoundValue) -> None:
    if bound.log2_exact is not None:
        _emit(out, "bound_log2", format_rational(bound.log2_exact))
        exact = bound.exact_int
        if exact is not None:
            _emit(out, "bound", exact)
            return
    else:
        _emit(out, "bound_log2", format_float(bound.log2))
    _emit(out, "bound", format_float(bound.value))


def _write_db(path, db: engine.Instance, query) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(engine.format_database(db, query))


def cmd_rho_star(args, out) -> int:
    q = load_query(args.query)
    sol = lp.fractional_cover(q)
    _emit(out, "rho_star", format_rational(sol.rho_star))
    for r in q.names:
        _emit(out, "x", r, format_rational(sol.x[r]))
    for a in q.universe:
        _emit(out, "y", a, format_rational(sol.y[a]))
    if q.m <= lp.MAX_EXHAUSTIVE_RELATIONS:
        _emit(out, "rho", lp.min_edge_cover(q).size)
    return 0


def cmd_bound(args, out) -> int:
    q = load_query(args.query)
    sizes = bounds.parse_sizes(_read(args.sizes), q, args.sizes)
    lp_problem = lp.CoverLp.from_sizes(q, sizes)
    sol = lp.solve_cover_lp(lp_problem)
    bound = bounds.agm_bound(q, sol.x, sizes)
    _emit(out, "objective", format_rational(sol.objective))
    _bound_lines(out, bound)
    for r in q.names:
        _emit(out, "x", r, format_rational(sol.x[r]))
    for a in q.universe:
        _emit(out, "y", a, format_rational(sol.y[a]))
    for r in sorted(lp_problem.perturbed):
        _emit(out, "perturbed", r)
    return 0


def _report_instance(out, q, db, budget) -> None:
    for r in q.names:
        _emit(out, "size", r, len(db[r]))
    _emit(out, "db_size", db.size)
    _emit(out, "answer_size", len(engine.answer(q, db, budget)))


def cmd_worst_case(args, out) -> int:
    q = load_query(args.query)
    sol = lp.fractional_cover(q)
    db = bounds.worst_case_instance(q, args.n0, args.budget, sol)
    bound = bounds.agm_bound(q, sol.x, db.sizes())
    _report_instance(out, q, db, args.budget)
    _bound_lines(out, bound)
    if args.output:
        _write_db(args.output, db, q)
    return 0


def cmd_constrained_worst(args, out) -> int:
    q = load_query(args.query)
    sizes = bounds.parse_sizes(_read(args.sizes), q, args.sizes)
    sol, bound = bounds.constrained_bound(q, sizes)
    db = bounds.constrained_worst_instance(q, sizes, args.budget, sol)
    _report_instance(out, q, db, args.budget)
    _bound_lines(out, bound)
    _emit(out, "guarantee_log2", format_float(bound.log2 - q.n))
    if args.output:
        _write_db(args.output, db, q)
    return 0


def cmd_plan(args, out) -> int:
    q = load_query(args.query)
    if args.kind == "gm":
        order = args.order.split(",") if args.order else None
        plan = plans.gm_plan(q, order)
    else:
        plan = plans.cover_join_plan(q)
    text = format_plan(plan)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    stats = plan_stats(plan)
    _emit(out, "plan", text)
    _emit(out, "leaves", stats.leaf_count)
    _emit(out, "projections", stats.projection_count)
    _emit(out, "depth", stats.depth)
    return 0


def cmd_eval(args, out) -> int:
    q = load_query(args.query)
    plan = parse_plan(_read(args.plan), args.plan)
    validate_plan(plan, q)
    db = engine.load_database(args.database, q)
    rel, trace = engine.evaluate(plan, db, q, args.budget)
    _emit(out, "answer_size", len(rel))
    _emit(out, "arity", rel.arity)
    _emit(out, "peak", trace.peak)
    if args.trace:
        for e in trace:
            path = "".join(map(str, e.path)) or "-"
            _emit(out, "trace", path, e.cardinality, e.arity, e.label)
    return 0


def _load_model(args, q):
    return stochastic.parse_model(_read(args.model), q, args.model)


def cmd_density(args, out) -> int:
    q = load_query(args.query)
    model = _load_model(args, q)
    reports = []
    if args.method in ("brute", "both"):
        reports.append(stochastic.max_density_bruteforce(q, model.weights))
    if args.method in ("flow", "both"):
        reports.append(stochastic.max_density_flow(q, model.weights))
    if len({r.max_density for r in reports}) != 1:
        raise InvariantError("brute-force and flow densities disagree")
    for r in reports:
        _emit(out, f"max_density_{r.method}", format_rational(r.max_density))
        _emit(out, f"best_B_{r.method}", ",".join(r.best_B))
    _emit(out, "log2_N", format_float(model.log2_n))
    return 0


def cmd_sample(args, out) -> int:
    q = load_query(args.query)
    model = _load_model(args, q)
    db = stochastic.sample_instance(q, model, args.seed, args.budget)
    for r in q.names:
        _emit(out, "size", r, len(db[r]))
    _emit(out, "db_size", db.size)
    _emit(out, "seed", args.seed)
    if args.output:
        _write_db(args.output, db, q)
    return 0


def cmd_concentrate(args, out) -> int:
    q = load_query(args.query)
    model = _load_model(args, q)
    rep = stochastic.concentration_experiment(q, model, args.trials, args.seed, args.budget)
    _emit(out, "trials", rep.trials)
    _emit(out, "seed", args.seed)
    _emit(out, "mean", format_float(rep.mean))
    _emit(out, "variance", format_float(rep.variance))
    _emit(out, "expected", format_float(rep.expected.value))
    _emit(out, "variance_bound", "inapplicable" if rep.variance_bound is None
          else format_float(rep.variance_bound))
    _emit(out, "empty_fraction", format_float(rep.empty_fraction))
    _emit(out, "max_density", format_rational(rep.max_density))
    _emit(out, "gap", format_float(rep.gap))
    _emit(out, "regime", rep.regime)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("trial,answer_size\n")
            fh.writelines(f"{i},{s}\n" for i, s in enumerate(rep.sizes))
    return 0


def cmd_deproject(args, out) -> int:
    q = load_query(args.query)
    plan = parse_plan(_read(args.plan), args.plan)
    validate_plan(plan, q)
    model = _load_model(args, q)
    res = dp.deproject(plan, q, model)
    _emit(out, "N", model.N)
    _emit(out, "plan", format_plan(res.plan))
    _emit(out, "iterations", res.iterations)
    _emit(out, "initial_projections", res.initial_projections)
    for star in res.closures:
        _emit(out, "closure", ",".join(q.order(star)) or "-")
    if args.report_inflation:
        rep = dp.inflation_report(plan, res.plan, q, model, args.trials, args.seed, args.budget)
        _emit(out, "trials", rep.trials)
        _emit(out, "max_mean_original", format_float(rep.max_mean_original))
        _emit(out, "max_mean_rewritten", format_float(rep.max_mean_rewritten))
        _emit(out, "inflation", format_float(rep.ratio))
        _emit(out, "inflation_ci", format_float(rep.ci_low), format_float(rep.ci_high))
    if args.output:
        Path(args.output).write_text(format_plan(res.plan) + "\n", encoding="utf-8")
    return 0


def cmd_adversarial(args, out) -> int:
    q, db = plans.adversarial_instance(args.m, args.N, args.budget)
    ans = engine.answer(q, db, args.budget)
    _emit(out, "m", args.m)
    _emit(out, "n", q.n)
    _emit(out, "query_size", q.size)
    _emit(out, "relation_size", len(db[q.names[0]]))
    _emit(out, "db_size", db.size)
    _emit(out, "answer_size", len(ans))
    _emit(out, "rho_star", format_rational(lp.fractional_cover(q).rho_star))
    if args.output:
        d = Path(args.output)
        d.mkdir(parents=True, exist_ok=True)
        (d / "query.jq").write_text(q.to_text(), encoding="utf-8")
        _write_db(d / "db.jdb", db, q)
    return 0


def cmd_indset(args, out) -> int:
    graph = bounds.parse_graph(_read(args.graph), args.graph)
    q, sizes = bounds.graph_to_query(graph)
    alpha_set = bounds.maximum_independent_set(graph)
    witness = tuple(args.witness.split(",")) if args.witness else alpha_set
    if args.witness == "":
        witness = ()
    db = bounds.independent_set_instance(graph, witness)
    _emit(out, "vertices", len(graph.vertices))
    _emit(out, "edges", len(graph.edges))
    _emit(out, "alpha", len(alpha_set))
    _emit(out, "witness", ",".join(witness) or "-")
    _emit(out, "answer_size", len(engine.answer(q, db, args.budget)))
    if args.output:
        d = Path(args.output)
        d.mkdir(parents=True, exist_ok=True)
        (d / "query.jq").write_text(q.to_text(), encoding="utf-8")
        (d / "sizes.txt").write_text("".join(f"size {r} {n}\n" for r, n in sizes.items()),
                                     encoding="utf-8")
        _write_db(d / "db.jdb", db, q)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    common.add_argument("--budget", type=int, default=engine.DEFAULT_TUPLE_BUDGET,
                        help="tuple budget for materialised results")

    p = _Parser(prog="joinbounds", description="Join size bounds, extremal instances and plans.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        sp.set_defaults(func=func)
        return sp

    sp = add("rho-star", cmd_rho_star, "fractional edge cover number")
    sp.add_argument("query")

    sp = add("bound", cmd_bound, "size bound under relation size constraints")
    sp.add_argument("query")
    sp.add_argument("--sizes", required=True)

    sp = add("worst-case", cmd_worst_case, "instance meeting the unconstrained bound")
    sp.add_argument("query")
    sp.add_argument("--n0", type=int, required=True)
    sp.add_argument("-o", "--output")

    sp = add("constrained-worst", cmd_constrained_worst, "instance with prescribed relation sizes")
    sp.add_argument("query")
    sp.add_argument("--sizes", required=True)
    sp.add_argument("-o", "--output")

    sp = add("plan", cmd_plan, "print a plan")
    sp.add_argument("kind", choices=["gm", "cover"])
    sp.add_argument("query")
    sp.add_argument("--order", help="attribute order for the gm plan, comma separated")
    sp.add_argument("-o", "--output")

    sp = add("eval", cmd_eval, "evaluate a plan on a database")
    sp.add_argument("query")
    sp.add_argument("plan")
    sp.add_argument("database")
    sp.add_argument("--trace", action="store_true")

    sp = add("density", cmd_density, "maximum density of the weighted query")
    sp.add_argument("query")
    sp.add_argument("--model", required=True)
    sp.add_argument("--method", choices=["brute", "flow", "both"], default="both")

    sp = add("sample", cmd_sample, "draw a random database")
    sp.add_argument("query")
    sp.add_argument("--model", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output")

    sp = add("concentrate", cmd_concentrate, "empirical answer size distribution")
    sp.add_argument("query")
    sp.add_argument("--model", required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv", help="write per-trial answer sizes")

    sp = add("deproject", cmd_deproject, "rewrite a join-project plan as a join plan")
    sp.add_argument("query")
    sp.add_argument("plan")
    sp.add_argument("--model", required=True)
    sp.add_argument("--report-inflation", action="store_true")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output")

    sp = add("adversarial", cmd_adversarial, "query and instance where join plans blow up")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("-o", "--output")

    sp = add("indset", cmd_indset, "graph to query reduction with a witness instance")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--witness", help="comma separated independent set (default: a maximum one)")
    sp.add_argument("-o", "--output")
    return p


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=err)
    try:
        return args.func(args, out)
    except JoinBoundsError as exc:
        err.write(f"error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        err.write(f"error: {exc}\n")
        return 2 if isinstance(exc, FileNotFoundError) else 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
