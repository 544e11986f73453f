"""``gridforest`` command line.

Exit codes: 0 success, 2 infeasible single solve, 1 any error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data_io
from .graph import EnumerationLimitError, GraphError, count_spanning_trees, enumerate_spanning_forests, enumerate_spanning_trees
from .harness import (
    BatchConfig,
    compare_nodes,
    format_node_comparison,
    format_summary,
    objective_mismatches,
    run_batch,
    summarize,
)
from .mgform import VARIANTS, ModelVariant, dg_utilization, restored_load, solve_restoration
from .milp import BACKENDS, SolveOptions
from .radiality import FORMULATIONS, merge_substations, random_objective_lp_test
from .scenario import FaultScenario


def _net(arg: str):
    path = Path(arg)
    if not path.exists() and not path.suffix:
        path = data_io.bundled_network_path(arg)
    return data_io.load_network(path)


def _opts(args) -> SolveOptions:
    return SolveOptions(time_limit=args.time_limit, backend=args.backend, seed=args.solver_seed)


def cmd_solve(args) -> int:
    net = _net(args.net)
    scenario = data_io.load_scenario(args.scenario) if args.scenario else FaultScenario()
    variant = ModelVariant(args.variant, args.radiality, args.segments)
    outcome, sol = solve_restoration(net, scenario, variant, _opts(args))
    nodes = "unknown" if outcome.nodes is None else outcome.nodes
    print(f"status={outcome.status} nodes={nodes} time={outcome.wall_time:.3f}s")
    if sol is None:
        return 2 if outcome.status == "infeasible" else 1
    print(f"objective={sol.objective:.6g} restored_kw={restored_load(sol):.1f} "
          f"dg_utilization={dg_utilization(sol):.3f} components={sol.kappa}")
    for c in sol.components:
        state = "energized" if c.energized else "dark"
        print(f"  {state:<9} sources={list(c.sources)} nodes={list(c.nodes)}")
    if args.out:
        data_io.save_solution(sol.to_dict(), args.out)
    return 0


def cmd_batch(args) -> int:
    net = _net(args.net)
    cfg = BatchConfig(
        n_scenarios=args.n,
        seed=args.seed,
        variants=tuple(args.variants.split(",")),
        radiality=tuple(args.radiality.split(",")),
        open_prob=args.open_prob,
        workers=args.workers,
        solve=_opts(args),
    )
    res = run_batch(net, cfg, args.csv)
    if args.meta:
        Path(args.meta).write_text(json.dumps(res.metadata, indent=1, default=str))
    _report(res.rows)
    return 0


def _report(rows) -> None:
    print(format_summary(summarize(rows)))
    tags = {f"{r['variant']}/{r['radiality']}" for r in rows}
    if {"proposed/scf", "proposed/dmcf"} <= tags:
        print(format_node_comparison(compare_nodes(rows, "proposed/scf", "proposed/dmcf")))
        bad = objective_mismatches(rows, "proposed/scf", "proposed/dmcf")
        print(f"scf/dmcf objective mismatches: {len(bad)}" + (f" {bad}" if bad else ""))


def cmd_summarize(args) -> int:
    rows = data_io.read_batch_csv(args.csv)
    _report(rows)
    if args.compare:
        a, b = args.compare
        print(format_node_comparison(compare_nodes(rows, a, b)))
    return 0


def cmd_oracle(args) -> int:
    net = _net(args.net)
    if args.what == "count":
        print(count_spanning_trees(net))
        return 0
    sels = enumerate_spanning_trees(net) if args.what == "trees" else enumerate_spanning_forests(net)
    print(len(sels))
    if args.list:
        for s in sorted(sels, key=lambda s: s.bits):
            print(" ".join(map(str, s.ids(net))))
    return 0


def cmd_lp_test(args) -> int:
    net = _net(args.net)
    merged = merge_substations(net)
    rep = random_objective_lp_test(
        merged.topology, merged.root, args.radiality, args.trials, args.seed, args.coupled
    )
    layer = "alpha" if args.coupled else "beta"
    print(
        f"{args.radiality} {layer}: {args.trials} trials, max fractionality {rep.max_fractionality:.3g}, "
        f"non-integral optima {len(rep.failures)}"
    )
    return 0 if rep.passed else 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridforest", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def solver_flags(sp):
        sp.add_argument("--backend", choices=BACKENDS, default="highs")
        sp.add_argument("--time-limit", type=float, default=None)
        sp.add_argument("--solver-seed", type=int, default=0)

    s = sub.add_parser("solve", help="solve one restoration model")
    s.add_argument("--net", default="ieee33", help="network JSON file or bundled name")
    s.add_argument("--scenario", help="scenario JSON file (default: no faults)")
    s.add_argument("--variant", choices=VARIANTS, default="proposed")
    s.add_argument("--radiality", choices=FORMULATIONS, default="scf")
    s.add_argument("--segments", type=int, default=12)
    s.add_argument("--out", help="write the solution JSON here")
    solver_flags(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("batch", help="run a random-scenario batch")
    b.add_argument("--net", default="ieee33")
    b.add_argument("--n", type=int, default=200)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--variants", default=",".join(VARIANTS))
    b.add_argument("--radiality", default="scf,dmcf")
    b.add_argument("--open-prob", type=float, default=0.5)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--csv", default="batch.csv")
    b.add_argument("--meta", help="write batch metadata JSON here")
    solver_flags(b)
    b.set_defaults(func=cmd_batch)

    o = sub.add_parser("oracle", help="enumerate spanning trees/forests or count trees")
    o.add_argument("what", choices=("trees", "forests", "count"))
    o.add_argument("--net", required=True)
    o.add_argument("--list", action="store_true", help="print each selection as closed branch ids")
    o.set_defaults(func=cmd_oracle)

    t = sub.add_parser("lp-test", help="random-objective LP relaxation integrality test")
    t.add_argument("--net", required=True)
    t.add_argument("--radiality", choices=FORMULATIONS, default="dmcf")
    t.add_argument("--trials", type=int, default=100)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--coupled", action="store_true", help="objective on alpha with alpha <= beta")
    t.set_defaults(func=cmd_lp_test)

    m = sub.add_parser("summarize", help="summary tables from a batch CSV")
    m.add_argument("--csv", required=True)
    m.add_argument("--compare", nargs=2, metavar=("TAG_A", "TAG_B"))
    m.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (GraphError, EnumerationLimitError, data_io.SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
