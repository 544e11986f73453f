"""Acceptance gate. Each test records one pass/fail line before asserting."""
import itertools
import math
import time

import numpy as np
import pytest

from conftest import feasible_alpha_set
from gridforest.graph import (
    EdgeSelection,
    connected_components,
    count_spanning_trees,
    enumerate_spanning_forests,
    enumerate_spanning_trees,
    is_spanning_forest,
    make_network,
)
from gridforest.harness import (
    BatchConfig,
    compare_nodes,
    draw_scenarios,
    format_node_comparison,
    format_summary,
    nesting_violations,
    objective_mismatches,
    run_batch,
    summarize,
)
from gridforest.mgform import ModelVariant, restored_load, solve_restoration
from gridforest.milp import MilpModel, mccormick_binary_product, polygonal_capacity_cuts, solve
from gridforest.radiality import build_radiality, random_objective_lp_test
from gridforest.scenario import FaultScenario

TRIANGLE = make_network(3, [(1, 2), (2, 3), (1, 3)])
CYCLE4 = make_network(4, [(1, 2), (2, 3), (3, 4), (4, 1)])
PATH4 = make_network(4, [(1, 2), (2, 3), (3, 4)])


@pytest.fixture(scope="module")
def desk_batch(ieee33, tmp_path_factory):
    cfg = BatchConfig(n_scenarios=200, seed=2020)
    csv = tmp_path_factory.mktemp("batch") / "desk.csv"
    res = run_batch(ieee33, cfg, csv)
    print(format_summary(summarize(res.rows)))
    return res


def test_c1_forest_equivalence(acceptance_graphs, verdict):
    t0 = time.perf_counter()
    bad = []
    for g_idx, net in enumerate(acceptance_graphs):
        forests = enumerate_spanning_forests(net)
        for f in ("scf", "dmcf"):
            if feasible_alpha_set(net, f) != forests:
                bad.append((g_idx, f))
    wall = time.perf_counter() - t0
    ok = not bad and wall < 300
    verdict(1, ok, f"20 graphs x 2 formulations, mismatches={bad}, {wall:.1f}s (limit 300s)")
    assert ok


def test_c2_matrix_tree(acceptance_graphs, verdict):
    bad = [k for k, g in enumerate(acceptance_graphs) if count_spanning_trees(g) != len(enumerate_spanning_trees(g))]
    small = tuple(count_spanning_trees(g) for g in (TRIANGLE, CYCLE4, PATH4))
    ok = not bad and small == (3, 4, 1)
    verdict(2, ok, f"cofactor vs enumeration mismatches={bad}; triangle/4-cycle/path={small}")
    assert ok


def test_c3_dmcf_relaxation_integral(acceptance_graphs, verdict):
    worst, failed = 0.0, []
    for k, net in enumerate(acceptance_graphs):
        for coupled in (False, True):
            rep = random_objective_lp_test(net, 1, "dmcf", trials=100, seed=k, coupled=coupled, tol=1e-6)
            worst = max(worst, rep.max_fractionality)
            if not rep.passed:
                failed.append((k, coupled, rep.failures[:3]))
    ok = not failed
    verdict(3, ok, f"4000 LP solves, max fractionality {worst:.2e}, failures={failed}")
    assert ok


def test_c4_size_formulas(acceptance_graphs, verdict):
    graphs = [TRIANGLE, CYCLE4, PATH4, make_network(5, list(itertools.combinations(range(1, 6), 2)))]
    graphs.append(acceptance_graphs[0])
    bad = []
    for net in graphs:
        n, l = net.n_nodes, net.n_branches
        for f, want in (("scf", (3 * l, n + 2 * l)), ("dmcf", (2 * n * l + l, n * n + 2 * n * l - n - l + 1))):
            m = MilpModel()
            build_radiality(m, net, 1, f)
            if (m.num_vars, m.num_constraints) != want:
                bad.append((n, l, f, (m.num_vars, m.num_constraints), want))
    m = MilpModel()
    build_radiality(m, TRIANGLE, 1, "dmcf")
    tri = (m.num_vars, m.num_constraints)
    ok = not bad and tri == (21, 22)
    verdict(4, ok, f"5 graphs, mismatches={bad}; triangle dmcf={tri}")
    assert ok


def test_c5_full_restoration(ieee33, verdict):
    t0 = time.perf_counter()
    out, sol = solve_restoration(ieee33, FaultScenario(), ModelVariant("proposed"))
    wall = time.perf_counter() - t0
    kw = restored_load(sol) if sol else float("nan")
    ok = out.optimal and kw == 3715.0 and out.objective == pytest.approx(3715.0, abs=1e-6) and wall < 10
    verdict(5, ok, f"restored {kw} kW (objective {out.objective}) in {wall:.2f}s")
    assert ok


def test_c6_nesting(desk_batch, verdict):
    rows = desk_batch.rows
    viol = nesting_violations(rows, rtol=1e-6)
    s = summarize(rows)
    inf = {t: s[t].infeasible for t in s}
    odd = [r for r in rows if r["status"] not in ("optimal", "infeasible")]
    prop = max(inf["proposed/scf"], inf["proposed/dmcf"])
    ok = not viol and not odd and prop <= inf["fixed_islands/scf"] and prop <= inf["radial_baseline/scf"]
    verdict(6, ok, f"200 scenarios, nesting violations={len(viol)}, infeasible counts={inf}, other statuses={len(odd)}")
    assert ok, viol[:5]


def test_c7_formulation_invariance(desk_batch, verdict):
    rows = desk_batch.rows
    bad = objective_mismatches(rows, "proposed/scf", "proposed/dmcf", rtol=1e-6)
    cmp = compare_nodes(rows, "proposed/dmcf", "proposed/scf")
    table = format_node_comparison(cmp)
    print(table)
    n = sum(r["variant"] == "proposed" and r["radiality"] == "scf" for r in rows)
    ok = not bad and n == 200 and cmp.total > 0
    verdict(7, ok, f"scf/dmcf mismatches={bad}; {table}")
    assert ok


def test_c8_linearizations(verdict):
    exact = True
    for av, bv in itertools.product((0, 1), repeat=2):
        m = MilpModel()
        a, b = m.binary("a"), m.binary("b")
        z = mccormick_binary_product(m, a, b, "z")
        m.add_constr({a: 1}, "=", av)
        m.add_constr({b: 1}, "=", bv)
        for sense in ("max", "min"):
            m.set_objective({z: 1}, sense)
            exact &= abs(solve(m).value(z) - av * bv) < 1e-9

    m = MilpModel()
    p, q, g = m.continuous("p", -2, 2), m.continuous("q", -2, 2), m.binary("g")
    cuts = polygonal_capacity_cuts(m, p, q, 1.0, g, 12)
    A = np.array([[c.coeffs.get(p.index, 0.0), c.coeffs.get(q.index, 0.0)] for c in cuts])
    gate = np.array([c.coeffs[g.index] for c in cuts])
    rng = np.random.Generator(np.random.PCG64(12))
    r = np.sqrt(rng.uniform(0, 1, 1000))
    th = rng.uniform(0, 2 * np.pi, 1000)
    disc = np.column_stack([r * np.cos(th), r * np.sin(th)])
    in_polygon = lambda pts: np.all(pts @ A.T + gate <= 1e-12, axis=1)
    disc_ok = bool(in_polygon(disc).all())
    box = rng.uniform(-1.2, 1.2, (200000, 2))
    radii = np.hypot(*box[in_polygon(box)].T)
    over = radii.max() - 1.0
    bound = 1 / math.cos(math.pi / 12) - 1
    ok = exact and disc_ok and over <= bound + 1e-12
    verdict(8, ok, f"McCormick exact={exact}; 1000 disc points inside={disc_ok}; overshoot {over:.4%} <= {bound:.4%}")
    assert ok


def independent_check(net, scen, sol, tol=1e-6):
    """Re-derive the solution properties without the package's verifier."""
    closed = EdgeSelection(tuple(sol.alpha[b.id] for b in net.branches))
    problems = []
    if not is_spanning_forest(net, closed):
        problems.append("cycle")
    for c in connected_components(net, closed):
        if len(set(c) & set(net.substations)) > 1:
            problems.append(f"substations share {c}")
    s_base = 1000.0 * net.base_mva
    for n in net.nodes:
        for flow, gen, dem in ((sol.P, sol.pg, n.p_demand), (sol.Q, sol.qg, n.q_demand)):
            res = gen.get(n.id, 0.0) - sol.delta[n.id] * dem
            for b in net.branches:
                if b.to_node == n.id:
                    res += flow[b.id]
                elif b.from_node == n.id:
                    res -= flow[b.id]
            if abs(res) / s_base >= tol:
                problems.append(f"balance {n.id}: {res / s_base:.2e}")
    for b in net.branches:
        if sol.alpha[b.id]:
            gap = sol.v[b.from_node] - sol.v[b.to_node] - 2 * (b.r * sol.P[b.id] + b.x * sol.Q[b.id]) / s_base
            if abs(gap) >= tol:
                problems.append(f"voltage drop {b.id}: {gap:.2e}")
    return problems


def test_c9_solution_verification(ieee33, desk_batch, verdict):
    scenarios = desk_batch.scenarios[:25] + [FaultScenario()]
    checked, problems = 0, []
    for k, sc in enumerate(scenarios):
        for tag, rad in (("proposed", "scf"), ("proposed", "dmcf"), ("fixed_islands", "scf"), ("radial_baseline", "scf")):
            out, sol = solve_restoration(ieee33, sc, ModelVariant(tag, rad))
            if sol is None:
                continue
            checked += 1
            problems += [(k, tag, rad, p) for p in independent_check(ieee33, sc, sol)]
    errors = [r for r in desk_batch.rows if r["status"] == "error"]
    ok = not problems and not errors and checked > 0
    verdict(9, ok, f"{checked} optimal solutions re-checked, problems={problems[:5]}, batch verifier errors={len(errors)}")
    assert ok
