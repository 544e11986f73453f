"""Distribution network graph and exhaustive radiality oracles.

The oracles here are deliberately naive (union-find plus backtracking) so the
MILP formulations in :mod:`gridforest.radiality` can be checked against them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

NODE_KINDS = ("substation", "dg", "load", "junction")
SOURCE_KINDS = ("substation", "dg")
ROLES = ("actual", "fictitious", "directed")

MAX_TREE_ENUM_BRANCHES = 25
MAX_FOREST_ENUM_BRANCHES = 20


class GraphError(ValueError):
    pass


class EnumerationLimitError(GraphError):
    pass


@dataclass(frozen=True)
class NodeRecord:
    id: int
    kind: str = "load"
    p_demand: float = 0.0  # kW
    q_demand: float = 0.0  # kvar
    p_cap: float = 0.0  # kW
    q_cap: float = 0.0  # kvar
    weight: float = 1.0
    v_min: float = 0.95**2  # squared pu
    v_max: float = 1.05**2

    @property
    def is_source(self) -> bool:
        return self.kind in SOURCE_KINDS


@dataclass(frozen=True)
class BranchRecord:
    id: int
    from_node: int
    to_node: int
    r: float = 0.0  # pu
    x: float = 0.0  # pu
    s_cap: float = float("inf")  # kVA
    switchable: bool = True
    normally_open: bool = False

    @property
    def ends(self) -> tuple[int, int]:
        return (self.from_node, self.to_node)


@dataclass(frozen=True)
class Network:
    """Immutable distribution network.

    Structural invariants (unique ids, known endpoints, no self-loops, zero
    capacity at non-source nodes) are enforced on construction. Connectivity
    is *not*: the counting oracles must accept disconnected graphs, so callers
    that need it check :attr:`is_connected`.
    """

    nodes: tuple[NodeRecord, ...]
    branches: tuple[BranchRecord, ...]
    base_kv: float = 12.66
    base_mva: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "branches", tuple(self.branches))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise GraphError("duplicate node ids")
        bids = [b.id for b in self.branches]
        if len(set(bids)) != len(bids):
            raise GraphError("duplicate branch ids")
        known = set(ids)
        for n in self.nodes:
            if n.kind not in NODE_KINDS:
                raise GraphError(f"node {n.id}: unknown kind {n.kind!r}")
            if not n.is_source and (n.p_cap != 0 or n.q_cap != 0):
                raise GraphError(f"node {n.id}: non-source node with nonzero capacity")
            if n.v_min > n.v_max:
                raise GraphError(f"node {n.id}: v_min > v_max")
        for b in self.branches:
            missing = [e for e in (b.from_node, b.to_node) if e not in known]
            if missing:
                raise GraphError(f"branch {b.id}: unknown endpoint node {missing[0]}")
            if b.from_node == b.to_node:
                raise GraphError(f"branch {b.id}: self-loop")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @cached_property
    def node_pos(self) -> dict[int, int]:
        return {n.id: k for k, n in enumerate(self.nodes)}

    @cached_property
    def branch_pos(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.branches)}

    def node(self, node_id: int) -> NodeRecord:
        return self.nodes[self.node_pos[node_id]]

    def branch(self, branch_id: int) -> BranchRecord:
        return self.branches[self.branch_pos[branch_id]]

    @cached_property
    def incident(self) -> dict[int, tuple[int, ...]]:
        """Node id -> positions of incident branches (parallel branches repeat)."""
        acc: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for k, b in enumerate(self.branches):
            acc[b.from_node].append(k)
            acc[b.to_node].append(k)
        return {i: tuple(v) for i, v in acc.items()}

    def degree(self, node_id: int) -> int:
        return len(self.incident[node_id])

    @property
    def substations(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind == "substation"]

    @property
    def dgs(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind == "dg"]

    @property
    def sources(self) -> list[int]:
        return [n.id for n in self.nodes if n.is_source]

    @cached_property
    def is_connected(self) -> bool:
        full = EdgeSelection.full(self)
        return len(connected_components(self, full)) == 1

    @property
    def total_demand_kw(self) -> float:
        return sum(n.p_demand for n in self.nodes)


@dataclass(frozen=True)
class EdgeSelection:
    """0/1 vector over the branches of a network, in branch order.

    Directed selections carry two entries per branch: ``(i->j, j->i)``.
    """

    bits: tuple[int, ...]
    role: str = "actual"

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("selection entries must be 0 or 1")

    @classmethod
    def empty(cls, net: Network, role: str = "actual") -> "EdgeSelection":
        return cls((0,) * net.n_branches, role)

    @classmethod
    def full(cls, net: Network, role: str = "actual") -> "EdgeSelection":
        return cls((1,) * net.n_branches, role)

    @classmethod
    def from_ids(cls, net: Network, ids: Iterable[int], role: str = "actual") -> "EdgeSelection":
        chosen = set(ids)
        unknown = chosen - set(net.branch_pos)
        if unknown:
            raise GraphError(f"unknown branch ids {sorted(unknown)}")
        return cls(tuple(int(b.id in chosen) for b in net.branches), role)

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    @property
    def count(self) -> int:
        return sum(self.bits)

    def positions(self) -> list[int]:
        return [k for k, b in enumerate(self.bits) if b]

    def ids(self, net: Network) -> list[int]:
        return [net.branches[k].id for k in self.positions()]

    def within(self, other: "EdgeSelection") -> bool:
        """Componentwise ``self <= other``."""
        if len(self) != len(other):
            raise ValueError("length mismatch")
        return all(a <= b for a, b in zip(self.bits, other.bits))


class _UnionFind:
    def __init__(self, items: Iterable[int]):
        self.parent = {i: i for i in items}

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        # smaller id becomes the representative
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def _check_dims(net: Network, sel: EdgeSelection) -> None:
    if sel.role == "directed":
        raise GraphError("expected an undirected selection (actual or fictitious)")
    if len(sel) != net.n_branches:
        raise GraphError(f"selection has {len(sel)} entries, network has {net.n_branches} branches")


def is_spanning_forest(net: Network, sel: EdgeSelection) -> bool:
    _check_dims(net, sel)
    uf = _UnionFind(n.id for n in net.nodes)
    for k in sel.positions():
        b = net.branches[k]
        if not uf.union(b.from_node, b.to_node):
            return False
    return True


def is_spanning_tree(net: Network, sel: EdgeSelection) -> bool:
    _check_dims(net, sel)
    return sel.count == net.n_nodes - 1 and is_spanning_forest(net, sel)


def connected_components(net: Network, sel: EdgeSelection) -> list[tuple[int, ...]]:
    """Node partition induced by the selected branches.

    Each component is sorted; components are ordered by their smallest id.
    """
    _check_dims(net, sel)
    uf = _UnionFind(n.id for n in net.nodes)
    for k in sel.positions():
        b = net.branches[k]
        uf.union(b.from_node, b.to_node)
    groups: dict[int, list[int]] = {}
    for n in net.nodes:
        groups.setdefault(uf.find(n.id), []).append(n.id)
    comps = [tuple(sorted(g)) for g in groups.values()]
    return sorted(comps, key=lambda c: c[0])


def enumerate_spanning_trees(
    net: Network, max_branches: int = MAX_TREE_ENUM_BRANCHES
) -> set[EdgeSelection]:
    if net.n_branches > max_branches:
        raise EnumerationLimitError(
            f"{net.n_branches} branches exceeds the tree enumeration limit of {max_branches}"
        )
    if not net.is_connected:
        return set()
    m, need = net.n_branches, net.n_nodes - 1
    ends = [b.ends for b in net.branches]
    node_ids = [n.id for n in net.nodes]
    out: set[EdgeSelection] = set()

    def can_connect(chosen: list[int], start: int) -> bool:
        uf = _UnionFind(node_ids)
        comps = len(node_ids)
        for k in list(chosen) + list(range(start, m)):
            if uf.union(*ends[k]):
                comps -= 1
        return comps == 1

    def rec(k: int, chosen: list[int]) -> None:
        if len(chosen) == need:
            bits = [0] * m
            for c in chosen:
                bits[c] = 1
            out.add(EdgeSelection(tuple(bits), "fictitious"))
            return
        if k == m or m - k < need - len(chosen):
            return
        uf = _UnionFind(node_ids)
        for c in chosen:
            uf.union(*ends[c])
        if uf.find(ends[k][0]) != uf.find(ends[k][1]):
            chosen.append(k)
            rec(k + 1, chosen)
            chosen.pop()
        if can_connect(chosen, k + 1):
            rec(k + 1, chosen)

    rec(0, [])
    return out


def _bareiss_det(mat: list[list[int]]) -> int:
    """Exact integer determinant by fraction-free elimination."""
    a = [row[:] for row in mat]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def count_spanning_trees(net: Network) -> int:
    """Matrix-tree theorem on the multigraph Laplacian (parallel branches counted)."""
    n = net.n_nodes
    if n == 0:
        return 0
    lap = [[0] * n for _ in range(n)]
    pos = net.node_pos
    for b in net.branches:
        i, j = pos[b.from_node], pos[b.to_node]
        lap[i][i] += 1
        lap[j][j] += 1
        lap[i][j] -= 1
        lap[j][i] -= 1
    minor = [row[1:] for row in lap[1:]]
    return _bareiss_det(minor)


def enumerate_spanning_forests(
    net: Network, max_branches: int = MAX_FOREST_ENUM_BRANCHES
) -> set[EdgeSelection]:
    if net.n_branches > max_branches:
        raise EnumerationLimitError(
            f"{net.n_branches} branches exceeds the forest enumeration limit of {max_branches}"
        )
    m = net.n_branches
    ends = [b.ends for b in net.branches]
    node_ids = [n.id for n in net.nodes]
    out: set[EdgeSelection] = set()

    def rec(k: int, chosen: list[int], uf: _UnionFind) -> None:
        if k == m:
            bits = [0] * m
            for c in chosen:
                bits[c] = 1
            out.add(EdgeSelection(tuple(bits), "actual"))
            return
        rec(k + 1, chosen, uf)
        a, b = uf.find(ends[k][0]), uf.find(ends[k][1])
        if a != b:
            child = _UnionFind(())
            child.parent = dict(uf.parent)
            child.union(a, b)
            chosen.append(k)
            rec(k + 1, chosen, child)
            chosen.pop()

    rec(0, [], _UnionFind(node_ids))
    return out


def is_subgraph_of_some_tree(net: Network, forest: EdgeSelection) -> EdgeSelection:
    """Return a spanning tree containing ``forest``.

    Grows the forest by repeatedly adding a branch (in branch order) that
    joins two of its components, until one component is left.
    """
    if not is_spanning_forest(net, forest):
        raise GraphError("selection is not a spanning forest")
    if not net.is_connected:
        raise GraphError("network is not connected")
    uf = _UnionFind(n.id for n in net.nodes)
    bits = list(forest.bits)
    for k in forest.positions():
        uf.union(*net.branches[k].ends)
    for k, b in enumerate(net.branches):
        if not bits[k] and uf.union(*b.ends):
            bits[k] = 1
    return EdgeSelection(tuple(bits), "fictitious")


def make_network(
    n_nodes: int,
    edges: Sequence[tuple[int, int]],
    *,
    substations: Sequence[int] = (1,),
    **branch_kw,
) -> Network:
    """Small graph helper: nodes ``1..n_nodes`` and one branch per edge pair."""
    subs = set(substations)
    nodes = [NodeRecord(i, "substation" if i in subs else "load") for i in range(1, n_nodes + 1)]
    branches = [BranchRecord(k + 1, a, b, **branch_kw) for k, (a, b) in enumerate(edges)]
    return Network(tuple(nodes), tuple(branches))
