"""Post-disaster microgrid formation MILP and two baseline variants.

``proposed`` uses the two-step radiality constraints and lets the number of
microgrids, the grouping of sources and the set of energized nodes float.
``fixed_islands`` forces one source per island and energizes every node;
``radial_baseline`` additionally keeps every normally-open tie open.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .graph import EdgeSelection, GraphError, Network, connected_components, is_spanning_forest, is_spanning_tree
from .milp import MilpModel, ModelError, SolveOptions, SolveOutcome, Var, mccormick_binary_product, polygonal_capacity_cuts, solve
from .radiality import FORMULATIONS, MergedTopology, RadialityHandles, add_subgraph_coupling, build_radiality, merge_substations
from .scenario import FaultScenario

VARIANTS = ("proposed", "fixed_islands", "radial_baseline")
BIG_M_POLICIES = ("per_branch", "uniform")

BINARY_TOL = 1e-6


class VerificationError(AssertionError):
    """An optimal solution violates a model equation; the model builder is wrong."""


@dataclass(frozen=True)
class ModelVariant:
    tag: str = "proposed"
    radiality: str = "scf"
    segments: int = 12
    big_m: str = "per_branch"

    def __post_init__(self):
        if self.tag not in VARIANTS:
            raise ValueError(f"unknown variant {self.tag!r}")
        if self.radiality not in FORMULATIONS:
            raise ValueError(f"unknown radiality formulation {self.radiality!r}")
        if self.big_m not in BIG_M_POLICIES:
            raise ValueError(f"unknown big-M policy {self.big_m!r}")


@dataclass
class MgHandles:
    net: Network
    scenario: FaultScenario
    variant: ModelVariant
    alpha: dict[int, Var]
    delta: dict[int, Var]
    eps: dict[int, Var]  # empty for the baselines (every node energized)
    pg: dict[int, Var]
    qg: dict[int, Var]
    v: dict[int, Var]
    P: dict[int, Var]
    Q: dict[int, Var]
    big_m: dict[int, float]
    merged: MergedTopology | None = None
    radiality: RadialityHandles | None = None
    assign: dict[tuple[int, int], Var] = field(default_factory=dict)


def big_m_values(net: Network, policy: str = "per_branch") -> dict[int, float]:
    """Smallest constants that switch off the voltage-drop rows of an open branch.

    ``(max v_max - min v_min) + 2 (r + x) S`` in per unit.
    """
    span = max(n.v_max for n in net.nodes) - min(n.v_min for n in net.nodes)
    s_base = 1000.0 * net.base_mva
    per = {b.id: span + 2 * (b.r + b.x) * b.s_cap / s_base for b in net.branches}
    if policy == "uniform":
        top = max(per.values(), default=span)
        return {k: top for k in per}
    return per


def normally_closed(net: Network) -> EdgeSelection:
    return EdgeSelection(tuple(int(not b.normally_open) for b in net.branches))


def build_mg_formation(
    net: Network, scenario: FaultScenario, variant: ModelVariant = ModelVariant()
) -> tuple[MilpModel, MgHandles]:
    scenario.validate(net)
    if not net.is_connected:
        raise GraphError("network is disconnected")
    for b in net.branches:
        if not math.isfinite(b.s_cap):
            raise ModelError(f"branch {b.id} needs a finite capacity")
    if variant.tag == "radial_baseline" and not is_spanning_tree(net, normally_closed(net)):
        raise ModelError("radial_baseline needs the normally-closed branches to form a spanning tree")

    s_base = 1000.0 * net.base_mva  # kVA per pu
    m = MilpModel(f"mg_{variant.tag}_{variant.radiality}")
    sec = 1.0 / math.cos(math.pi / variant.segments)

    alpha = {b.id: m.binary(f"alpha_{b.id}") for b in net.branches}
    delta = {n.id: m.binary(f"delta_{n.id}") for n in net.nodes}
    eps = {n.id: m.binary(f"eps_{n.id}") for n in net.nodes} if variant.tag == "proposed" else {}
    # zero injection at sourceless nodes: those nodes simply get no generator variables
    pg = {n.id: m.continuous(f"pg_{n.id}", 0.0, n.p_cap / s_base) for n in net.nodes if n.is_source}
    qg = {n.id: m.continuous(f"qg_{n.id}", 0.0, n.q_cap / s_base) for n in net.nodes if n.is_source}
    v = {n.id: m.continuous(f"v_{n.id}", n.v_min, n.v_max) for n in net.nodes}
    P, Q = {}, {}
    for b in net.branches:
        lim = b.s_cap / s_base * sec
        P[b.id] = m.continuous(f"P_{b.id}", -lim, lim)
        Q[b.id] = m.continuous(f"Q_{b.id}", -lim, lim)
    big_m = big_m_values(net, variant.big_m)
    h = MgHandles(net, scenario, variant, alpha, delta, eps, pg, qg, v, P, Q, big_m)

    m.set_objective({delta[n.id]: n.weight * n.p_demand for n in net.nodes if n.p_demand}, "max")

    # nodal power balance with demand gated by pickup
    for n in net.nodes:
        for flow, gen, dem, tag in ((P, pg, n.p_demand, "p"), (Q, qg, n.q_demand, "q")):
            terms = [(delta[n.id], -dem / s_base)]
            if n.id in gen:
                terms.append((gen[n.id], 1.0))
            for k in net.incident[n.id]:
                b = net.branches[k]
                terms.append((flow[b.id], 1.0 if b.to_node == n.id else -1.0))
            m.add_constr(terms, "=", 0.0, f"bal_{tag}[{n.id}]")

    # linearized DistFlow voltage drop, relaxed on open branches
    for b in net.branches:
        i, j, M = b.from_node, b.to_node, big_m[b.id]
        drop = {v[i]: 1.0, v[j]: -1.0, P[b.id]: -2 * b.r, Q[b.id]: -2 * b.x}
        m.add_constr({**drop, alpha[b.id]: -M}, ">=", -M, f"vdrop_lo[{b.id}]")
        m.add_constr({**drop, alpha[b.id]: M}, "<=", M, f"vdrop_hi[{b.id}]")
        polygonal_capacity_cuts(m, P[b.id], Q[b.id], b.s_cap / s_base, alpha[b.id], variant.segments)

    for bid in scenario.open_branches:
        m.add_constr({alpha[bid]: 1}, "=", 0, f"fault_open[{bid}]")
    for bid in scenario.closed_branches:
        m.add_constr({alpha[bid]: 1}, "=", 1, f"fault_closed[{bid}]")
    for b in net.branches:
        if not b.switchable and _unfaulted(b.id, scenario):
            m.add_constr({alpha[b.id]: 1}, "=", 0 if b.normally_open else 1, f"fixed[{b.id}]")
    for nid in scenario.open_loads:
        m.add_constr({delta[nid]: 1}, "=", 0, f"switch_open[{nid}]")

    if variant.tag == "proposed":
        _add_proposed(m, h)
    else:
        _add_fixed_islands(m, h)
    return m, h


def _unfaulted(bid: int, scenario: FaultScenario) -> bool:
    return bid not in scenario.open_branches and bid not in scenario.closed_branches


def _add_proposed(m: MilpModel, h: MgHandles) -> None:
    net, eps, alpha, delta = h.net, h.eps, h.alpha, h.delta
    for nid in h.scenario.closed_loads:
        m.add_constr({delta[nid]: 1, eps[nid]: -1}, ">=", 0, f"switch_closed[{nid}]")
    for nid in net.sources:
        m.add_constr({eps[nid]: 1}, "=", 1, f"energized_source[{nid}]")

    # a non-source node is energized iff some closed neighbour is
    for n in net.nodes:
        if n.is_source:
            continue
        products = []
        for k in net.incident[n.id]:
            b = net.branches[k]
            other = b.to_node if b.from_node == n.id else b.from_node
            products.append(mccormick_binary_product(m, eps[other], alpha[b.id], f"en_{b.id}_{other}"))
        deg = net.degree(n.id)
        m.add_constr([(z, 1.0) for z in products] + [(eps[n.id], -deg)], "<=", 0, f"energize_lo[{n.id}]")
        m.add_constr([(z, -1.0) for z in products] + [(eps[n.id], 1.0)], "<=", 0, f"energize_hi[{n.id}]")

    merged = merge_substations(net)
    rad = build_radiality(m, merged.topology, merged.root, h.variant.radiality)
    add_subgraph_coupling(m, rad, {b.id: alpha[b.id] for b in merged.topology.branches})
    for bid in merged.dropped:
        m.add_constr({alpha[bid]: 1}, "=", 0, f"substation_tie[{bid}]")
    h.merged, h.radiality = merged, rad


def _add_fixed_islands(m: MilpModel, h: MgHandles) -> None:
    """One island per source, every node energized, loads behind faulted-closed switches served."""
    net, alpha, delta = h.net, h.alpha, h.delta
    sources = net.sources
    for nid in h.scenario.closed_loads:
        m.add_constr({delta[nid]: 1}, "=", 1, f"switch_closed[{nid}]")

    y = {(n.id, k): m.binary(f"assign_{n.id}_{k}") for n in net.nodes for k in sources}
    for n in net.nodes:
        m.add_constr([(y[n.id, k], 1.0) for k in sources], "=", 1, f"assign_one[{n.id}]")
    for k in sources:
        m.add_constr({y[k, k]: 1}, "=", 1, f"assign_self[{k}]")
    for b in net.branches:
        for k in sources:
            yi, yj = y[b.from_node, k], y[b.to_node, k]
            m.add_constr({yi: 1, yj: -1, alpha[b.id]: 1}, "<=", 1, f"assign_eq_a[{b.id},{k}]")
            m.add_constr({yj: 1, yi: -1, alpha[b.id]: 1}, "<=", 1, f"assign_eq_b[{b.id},{k}]")

    # single-commodity flow from the sources: every node draws one unit
    big = net.n_nodes
    fwd = {b.id: m.continuous(f"isl_{b.id}_fwd") for b in net.branches}
    rev = {b.id: m.continuous(f"isl_{b.id}_rev") for b in net.branches}
    supply = {k: m.continuous(f"isl_supply_{k}") for k in sources}
    for b in net.branches:
        m.add_constr({fwd[b.id]: 1, alpha[b.id]: -big}, "<=", 0, f"isl_cap_fwd[{b.id}]")
        m.add_constr({rev[b.id]: 1, alpha[b.id]: -big}, "<=", 0, f"isl_cap_rev[{b.id}]")
    for n in net.nodes:
        terms = [(supply[n.id], 1.0)] if n.id in supply else []
        for k in net.incident[n.id]:
            b = net.branches[k]
            inflow, outflow = (fwd[b.id], rev[b.id]) if b.to_node == n.id else (rev[b.id], fwd[b.id])
            terms += [(inflow, 1.0), (outflow, -1.0)]
        m.add_constr(terms, "=", 1, f"isl_bal[{n.id}]")
    m.add_constr([(a, 1.0) for a in alpha.values()], "=", net.n_nodes - len(sources), "isl_card")

    if h.variant.tag == "radial_baseline":
        for b in net.branches:
            if b.normally_open:
                m.add_constr({alpha[b.id]: 1}, "=", 0, f"tie_open[{b.id}]")
    h.assign = y


# ---------------------------------------------------------------------------
# solutions


@dataclass(frozen=True)
class ComponentReport:
    nodes: tuple[int, ...]
    sources: tuple[int, ...]
    energized: bool


@dataclass
class RestorationSolution:
    variant: str
    radiality: str
    objective: float
    alpha: dict[int, int]
    delta: dict[int, int]
    eps: dict[int, int]
    pg: dict[int, float]  # kW
    qg: dict[int, float]  # kvar
    v: dict[int, float]  # squared pu
    P: dict[int, float]  # kW
    Q: dict[int, float]  # kvar
    components: list[ComponentReport]
    net: Network = field(repr=False)

    @property
    def kappa(self) -> int:
        return len(self.components)

    @property
    def closed(self) -> EdgeSelection:
        return EdgeSelection(tuple(self.alpha[b.id] for b in self.net.branches))

    def to_dict(self) -> dict:
        def keyed(d):
            return {str(k): v for k, v in sorted(d.items())}

        util = dg_utilization(self)
        return {
            "variant": self.variant,
            "radiality": self.radiality,
            "objective": self.objective,
            "restored_kw": restored_load(self),
            "utilization": None if math.isnan(util) else util,
            "alpha": keyed(self.alpha),
            "delta": keyed(self.delta),
            "eps": keyed(self.eps),
            "pg_kw": keyed(self.pg),
            "qg_kvar": keyed(self.qg),
            "v": keyed(self.v),
            "P_kw": keyed(self.P),
            "Q_kvar": keyed(self.Q),
            "components": [
                {"nodes": list(c.nodes), "sources": list(c.sources), "energized": c.energized}
                for c in self.components
            ],
        }


def _binary(outcome: SolveOutcome, var: Var) -> int:
    x = outcome.value(var)
    r = round(x)
    if abs(x - r) > BINARY_TOL or r not in (0, 1):
        raise VerificationError(f"{var.name}={x} is not integral")
    return int(r)


def extract_solution(outcome: SolveOutcome, h: MgHandles, tol: float = 1e-6) -> RestorationSolution:
    """Read an optimal outcome back and check every model equation on it.

    Sourceless islands that the solver left marked energized (the energization
    rows admit that, and it is objective-neutral) are reported with ``eps=0``.
    """
    if not outcome.optimal:
        raise ModelError(f"cannot extract a solution from status {outcome.status!r}")
    net, sc = h.net, h.scenario
    s_base = 1000.0 * net.base_mva
    alpha = {bid: _binary(outcome, a) for bid, a in h.alpha.items()}
    delta = {nid: _binary(outcome, d) for nid, d in h.delta.items()}
    closed = EdgeSelection(tuple(alpha[b.id] for b in net.branches))
    comps = connected_components(net, closed)
    source_set = set(net.sources)

    if h.eps:
        eps = {nid: _binary(outcome, e) for nid, e in h.eps.items()}
        _check_energization(net, alpha, eps, "energization propagation (as solved)")
        for comp in comps:
            if not source_set.intersection(comp):
                for nid in comp:
                    eps[nid] = 0
    else:
        eps = {n.id: 1 for n in net.nodes}

    pg = {nid: outcome.value(x) * s_base for nid, x in h.pg.items()}
    qg = {nid: outcome.value(x) * s_base for nid, x in h.qg.items()}
    v = {nid: outcome.value(x) for nid, x in h.v.items()}
    P = {bid: outcome.value(x) * s_base for bid, x in h.P.items()}
    Q = {bid: outcome.value(x) * s_base for bid, x in h.Q.items()}

    report = [
        ComponentReport(
            tuple(c),
            tuple(i for i in c if i in source_set),
            bool(eps[c[0]]),
        )
        for c in comps
    ]
    sol = RestorationSolution(
        h.variant.tag, h.variant.radiality, float(outcome.objective), alpha, delta, eps, pg, qg, v, P, Q, report, net
    )

    # radiality
    if h.merged is not None:
        topo = h.merged.topology
        sel = EdgeSelection(tuple(alpha[b.id] for b in topo.branches))
        if not is_spanning_forest(topo, sel) or any(alpha[b] for b in h.merged.dropped):
            raise VerificationError("radiality: closed branches contain a cycle on the merged topology")
    if not is_spanning_forest(net, closed):
        raise VerificationError("radiality: closed branches contain a cycle")
    subs = set(net.substations)
    for c in comps:
        if len(subs.intersection(c)) > 1:
            raise VerificationError(f"substation separation: component {c} holds several substations")

    # nodal balance, checked in pu
    for n in net.nodes:
        for flow, gen, dem, tag in ((P, pg, n.p_demand, "real"), (Q, qg, n.q_demand, "reactive")):
            res = gen.get(n.id, 0.0) - delta[n.id] * dem
            for k in net.incident[n.id]:
                b = net.branches[k]
                res += flow[b.id] if b.to_node == n.id else -flow[b.id]
            if abs(res) / s_base > tol:
                raise VerificationError(f"{tag} power balance at node {n.id}: residual {res / s_base:.3e} pu")

    for b in net.branches:
        gap = v[b.from_node] - v[b.to_node] - 2 * (P[b.id] * b.r + Q[b.id] * b.x) / s_base
        if alpha[b.id] and abs(gap) > tol:
            raise VerificationError(f"voltage drop on closed branch {b.id}: mismatch {gap:.3e}")
        if not alpha[b.id] and (abs(P[b.id]) + abs(Q[b.id])) / s_base > tol:
            raise VerificationError(f"capacity gate: open branch {b.id} carries flow")
    for n in net.nodes:
        if not n.v_min - tol <= v[n.id] <= n.v_max + tol:
            raise VerificationError(f"voltage limits at node {n.id}")

    if any(alpha[b] for b in sc.open_branches) or not all(alpha[b] for b in sc.closed_branches):
        raise VerificationError("faulted branch status")
    if any(delta[i] for i in sc.open_loads) or any(delta[i] < eps[i] for i in sc.closed_loads):
        raise VerificationError("faulted load switch status")
    if any(eps[i] != 1 for i in source_set):
        raise VerificationError("source energization")
    _check_energization(net, alpha, eps, "energization propagation")
    for n in net.nodes:
        if n.p_demand > 0 and delta[n.id] and not eps[n.id]:
            raise VerificationError(f"pickup without energization at node {n.id}")
    return sol


def _check_energization(net: Network, alpha: dict, eps: dict, label: str) -> None:
    for n in net.nodes:
        if n.is_source:
            continue
        lit = [
            eps[net.branches[k].to_node if net.branches[k].from_node == n.id else net.branches[k].from_node]
            for k in net.incident[n.id]
            if alpha[net.branches[k].id]
        ]
        if eps[n.id] and not any(lit):
            raise VerificationError(f"{label}: node {n.id} energized without an energized closed neighbour")
        if not eps[n.id] and any(lit):
            raise VerificationError(f"{label}: node {n.id} dark next to an energized closed neighbour")


def restored_load(sol: RestorationSolution) -> float:
    """Picked-up real load in kW, unweighted."""
    return sum(sol.delta[n.id] * n.p_demand for n in sol.net.nodes)


def dg_utilization(sol: RestorationSolution) -> float:
    """DG real output over DG real capacity; substations excluded. NaN without DGs."""
    dgs = sol.net.dgs
    cap = sum(sol.net.node(i).p_cap for i in dgs)
    if cap <= 0:
        return math.nan
    return sum(sol.pg.get(i, 0.0) for i in dgs) / cap


def solve_restoration(
    net: Network,
    scenario: FaultScenario,
    variant: ModelVariant = ModelVariant(),
    opts: SolveOptions = SolveOptions(),
) -> tuple[SolveOutcome, RestorationSolution | None]:
    model, h = build_mg_formation(net, scenario, variant)
    outcome = solve(model, opts)
    return outcome, (extract_solution(outcome, h) if outcome.optimal else None)
