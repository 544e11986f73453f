"""Two-step radiality constraints.

Step one forces a fictitious layer ``beta`` to be a spanning tree of the
topology graph; step two lets the real switch layer ``alpha`` pick any subset
of it (``alpha <= beta``). Integer-feasible ``alpha`` are then exactly the
spanning forests of the graph.

Two explicit spanning-tree formulations are provided: the compact
single-commodity flow (``scf``) and the tight directed multicommodity flow
(``dmcf``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .graph import EdgeSelection, GraphError, Network, is_spanning_forest, is_spanning_tree
from .milp import HighsSession, MilpModel, ModelError, Var, lp_relaxation

FORMULATIONS = ("scf", "dmcf")


@dataclass
class MergedTopology:
    topology: Network
    root: int
    node_map: dict[int, int]  # original node id -> topology node id
    dropped: tuple[int, ...] = ()  # substation-to-substation branch ids

    @property
    def is_identity(self) -> bool:
        return all(k == v for k, v in self.node_map.items()) and not self.dropped


def merge_substations(net: Network) -> MergedTopology:
    """Collapse all substations into one root node for the radiality layer.

    The root keeps the smallest substation id. Branches joining two
    substations would become self-loops; they are dropped from the topology
    and reported so the caller can keep them open. With no substation the
    lowest-id DG node serves as root.
    """
    subs = sorted(net.substations)
    if not subs:
        dgs = sorted(net.dgs)
        if not dgs:
            raise GraphError("network has neither substation nor DG nodes; no root candidate")
        return MergedTopology(net, dgs[0], {n.id: n.id for n in net.nodes})
    root = subs[0]
    sub_set = set(subs)
    node_map = {n.id: (root if n.id in sub_set else n.id) for n in net.nodes}
    if len(subs) == 1:
        return MergedTopology(net, root, node_map)
    nodes = tuple(n for n in net.nodes if n.id not in sub_set or n.id == root)
    branches, dropped = [], []
    for b in net.branches:
        i, j = node_map[b.from_node], node_map[b.to_node]
        if i == j:
            dropped.append(b.id)
            continue
        branches.append(replace(b, from_node=i, to_node=j))
    topo = Network(nodes, tuple(branches), net.base_kv, net.base_mva, net.name + "_merged")
    return MergedTopology(topo, root, node_map, tuple(dropped))


@dataclass
class RadialityHandles:
    model: MilpModel
    formulation: str
    root: int
    topology: Network
    beta: dict[int, Var]
    alpha: dict[int, Var] = field(default_factory=dict)
    arcs: dict[tuple[int, str], Var] = field(default_factory=dict)


def _check(topology: Network, root: int) -> None:
    if root not in topology.node_pos:
        raise GraphError(f"root {root} is not a topology node")
    if not topology.is_connected:
        raise GraphError("topology graph is disconnected; a spanning tree cannot exist")


def build_radiality_scf(model: MilpModel, topology: Network, root: int) -> RadialityHandles:
    """Single-commodity flow: the root ships one unit to every other node.

    Adds ``3|L|`` variables (beta and two directed flows per branch) and
    ``|N| + 2|L|`` rows (balance at non-root nodes, flow gating, cardinality).
    """
    _check(topology, root)
    big = topology.n_nodes - 1
    beta, fwd, rev = {}, {}, {}
    for b in topology.branches:
        beta[b.id] = model.binary(f"beta_{b.id}")
        fwd[b.id] = model.continuous(f"scf_{b.id}_fwd")
        rev[b.id] = model.continuous(f"scf_{b.id}_rev")
    for b in topology.branches:
        model.add_constr({fwd[b.id]: 1, beta[b.id]: -big}, "<=", 0, f"scf_cap_fwd[{b.id}]")
        model.add_constr({rev[b.id]: 1, beta[b.id]: -big}, "<=", 0, f"scf_cap_rev[{b.id}]")
    for n in topology.nodes:
        if n.id == root:
            continue
        terms = []
        for k in topology.incident[n.id]:
            b = topology.branches[k]
            inflow, outflow = (fwd[b.id], rev[b.id]) if b.to_node == n.id else (rev[b.id], fwd[b.id])
            terms += [(inflow, 1.0), (outflow, -1.0)]
        model.add_constr(terms, "=", 1, f"scf_bal[{n.id}]")
    model.add_constr([(v, 1.0) for v in beta.values()], "=", big, "scf_card")
    arcs = {(bid, "fwd"): v for bid, v in fwd.items()} | {(bid, "rev"): v for bid, v in rev.items()}
    return RadialityHandles(model, "scf", root, topology, beta, arcs=arcs)


def build_radiality_dmcf(model: MilpModel, topology: Network, root: int) -> RadialityHandles:
    """Directed multicommodity flow: one fictitious commodity per non-root node.

    Each commodity ``k`` leaves the root with one unit and is absorbed at
    ``k``; it may only use arcs selected by the directed tree ``lam``.
    """
    _check(topology, root)
    beta, lam = {}, {}
    for b in topology.branches:
        beta[b.id] = model.binary(f"beta_{b.id}")
    for b in topology.branches:
        for d in ("fwd", "rev"):
            lam[b.id, d] = model.binary(f"lam_{b.id}_{d}")
    commodities = [n.id for n in topology.nodes if n.id != root]
    flow: dict[tuple[int, int, str], Var] = {}
    for k in commodities:
        for b in topology.branches:
            for d in ("fwd", "rev"):
                flow[k, b.id, d] = model.continuous(f"dmcf_{k}_{b.id}_{d}")
    for k in commodities:
        for n in topology.nodes:
            terms = []
            for pos in topology.incident[n.id]:
                b = topology.branches[pos]
                into, out = ("fwd", "rev") if b.to_node == n.id else ("rev", "fwd")
                terms += [(flow[k, b.id, into], 1.0), (flow[k, b.id, out], -1.0)]
            rhs = -1 if n.id == root else (1 if n.id == k else 0)
            model.add_constr(terms, "=", rhs, f"dmcf_bal[{k},{n.id}]")
    for k in commodities:
        for b in topology.branches:
            for d in ("fwd", "rev"):
                model.add_constr({flow[k, b.id, d]: 1, lam[b.id, d]: -1}, "<=", 0, f"dmcf_cap[{k},{b.id},{d}]")
    model.add_constr([(v, 1.0) for v in lam.values()], "=", topology.n_nodes - 1, "dmcf_card")
    for b in topology.branches:
        model.add_constr(
            {lam[b.id, "fwd"]: 1, lam[b.id, "rev"]: 1, beta[b.id]: -1}, "=", 0, f"dmcf_undir[{b.id}]"
        )
    return RadialityHandles(model, "dmcf", root, topology, beta, arcs=lam)


BUILDERS: dict[str, Callable[[MilpModel, Network, int], RadialityHandles]] = {
    "scf": build_radiality_scf,
    "dmcf": build_radiality_dmcf,
}


def build_radiality(model: MilpModel, topology: Network, root: int, formulation: str) -> RadialityHandles:
    try:
        builder = BUILDERS[formulation]
    except KeyError:
        raise ModelError(f"unknown radiality formulation {formulation!r}") from None
    return builder(model, topology, root)


def add_subgraph_coupling(
    model: MilpModel, handles: RadialityHandles, alpha: Mapping[int, Var] | None = None
) -> None:
    """Add ``alpha <= beta`` per branch, creating ``alpha`` binaries if none are given."""
    if handles.model is not model:
        raise ModelError("radiality handles belong to a different model")
    if alpha is None:
        alpha = {bid: model.binary(f"alpha_{bid}") for bid in handles.beta}
    missing = set(handles.beta) - set(alpha)
    if missing:
        raise ModelError(f"no alpha variable for branches {sorted(missing)}")
    for bid, b in handles.beta.items():
        a = alpha[bid]
        if not model.owns(a):
            raise ModelError(f"{a!r} belongs to a different model")
        model.add_constr({a: 1, b: -1}, "<=", 0, f"couple[{bid}]")
        handles.alpha[bid] = a


@dataclass
class LpVertexReport:
    formulation: str
    coupled: bool
    trials: int
    max_fractionality: float
    failures: list[int]  # trial indices whose optimum is fractional or not a tree/forest

    @property
    def passed(self) -> bool:
        return not self.failures


def random_objective_lp_test(
    topology: Network,
    root: int,
    formulation: str = "dmcf",
    trials: int = 100,
    seed: int = 0,
    coupled: bool = False,
    tol: float = 1e-6,
) -> LpVertexReport:
    """Optimize the LP relaxation along random directions and inspect the optima.

    Uncoupled: objective on ``beta``, optimum must be a spanning tree vector.
    Coupled (with ``alpha <= beta``): objective on ``alpha``, optimum must be a
    spanning forest vector.
    """
    model = MilpModel(f"lp_{formulation}")
    handles = build_radiality(model, topology, root, formulation)
    if coupled:
        add_subgraph_coupling(model, handles)
    relaxed = lp_relaxation(model)
    layer = handles.alpha if coupled else handles.beta
    cols = [relaxed.vars[layer[b.id].index] for b in topology.branches]
    session = HighsSession(relaxed)
    rng = np.random.Generator(np.random.PCG64(seed))
    worst, failures = 0.0, []
    for t in range(trials):
        c = rng.uniform(-1.0, 1.0, len(cols))
        session.set_objective(dict(zip(cols, c)))
        out = session.solve()
        if not out.optimal:
            failures.append(t)
            continue
        x = [out.value(v) for v in cols]
        frac = max((abs(xi - round(xi)) for xi in x), default=0.0)
        worst = max(worst, frac)
        sel = EdgeSelection(tuple(int(round(xi)) for xi in x), "actual" if coupled else "fictitious")
        ok = is_spanning_forest(topology, sel) if coupled else is_spanning_tree(topology, sel)
        if frac > tol or not ok:
            failures.append(t)
    return LpVertexReport(formulation, coupled, trials, worst, failures)
