"""Batch experiments over random fault scenarios and their summary tables."""
from __future__ import annotations

import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data_io import write_batch_csv
from .graph import Network
from .milp import SolveOptions
from .mgform import VARIANTS, ModelVariant, dg_utilization, restored_load, solve_restoration
from .radiality import FORMULATIONS
from .scenario import FaultScenario, generate_scenario, load_switch_population

log = logging.getLogger(__name__)

# smallest to largest search space
NESTING = ("radial_baseline", "fixed_islands", "proposed")


@dataclass(frozen=True)
class BatchConfig:
    n_scenarios: int = 200
    seed: int = 0
    variants: tuple[str, ...] = VARIANTS
    radiality: tuple[str, ...] = ("scf", "dmcf")
    min_branch_faults: int = 5
    max_branch_fault_frac: float = 0.8
    max_load_fault_frac: float = 0.2
    open_prob: float = 0.5
    workers: int = 1
    solve: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}")
        for r in self.radiality:
            if r not in FORMULATIONS:
                raise ValueError(f"unknown radiality formulation {r!r}")


def model_pairs(cfg: BatchConfig) -> list[tuple[str, str]]:
    """(variant, radiality) pairs to solve per scenario.

    The baselines build their own island connectivity, so they are solved once
    and tagged ``scf``; only ``proposed`` is crossed with every formulation.
    """
    pairs = []
    for v in cfg.variants:
        if v == "proposed":
            pairs += [(v, r) for r in cfg.radiality]
        else:
            pairs.append((v, "scf"))
    return pairs


def draw_scenarios(net: Network, cfg: BatchConfig) -> list[FaultScenario]:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    hi_b = max(cfg.min_branch_faults, int(cfg.max_branch_fault_frac * net.n_branches))
    hi_b = min(hi_b, net.n_branches)
    lo_b = min(cfg.min_branch_faults, hi_b)
    hi_n = int(cfg.max_load_fault_frac * len(load_switch_population(net)))
    out = []
    for k in range(cfg.n_scenarios):
        nb = int(rng.integers(lo_b, hi_b + 1))
        nn = int(rng.integers(0, hi_n + 1))
        seed = int(rng.integers(0, 2**31 - 1))
        out.append(generate_scenario(net, seed, nb, nn, cfg.open_prob, label=f"s{k}"))
    return out


def solve_case(
    net: Network, index: int, scenario: FaultScenario, variant: str, radiality: str, opts: SolveOptions
) -> dict:
    row = {"scenario": index, "variant": variant, "radiality": radiality, "seed": scenario.seed}
    t0 = time.perf_counter()
    try:
        outcome, sol = solve_restoration(net, scenario, ModelVariant(variant, radiality), opts)
    except Exception as exc:  # recorded per row; a batch never aborts
        log.warning("scenario %d %s/%s failed: %s", index, variant, radiality, exc)
        row.update(status="error", wall_ms=(time.perf_counter() - t0) * 1e3)
        return row
    row.update(status=outcome.status, nodes_explored=outcome.nodes, wall_ms=outcome.wall_time * 1e3)
    if sol is not None:
        row.update(objective=sol.objective, restored_kw=restored_load(sol), utilization=dg_utilization(sol))
    elif outcome.status == "limit":
        row["objective"] = outcome.objective
    return row


def _scenario_rows(args) -> list[dict]:
    net, index, scenario, pairs, opts = args
    return [solve_case(net, index, scenario, v, r, opts) for v, r in pairs]


@dataclass
class BatchResult:
    config: BatchConfig
    scenarios: list[FaultScenario]
    rows: list[dict]

    @property
    def metadata(self) -> dict:
        cfg = asdict(self.config)
        cfg["fault_count_rule"] = "branch faults ~ U[min_branch_faults, max_branch_fault_frac*|L|], load-switch faults ~ U[0, max_load_fault_frac*|loads|]"
        return cfg


def run_batch(net: Network, cfg: BatchConfig, csv_path=None) -> BatchResult:
    scenarios = draw_scenarios(net, cfg)
    pairs = model_pairs(cfg)
    jobs = [(net, k, sc, pairs, cfg.solve) for k, sc in enumerate(scenarios)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_scenario_rows, jobs))
    else:
        chunks = [_scenario_rows(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    order = {p: i for i, p in enumerate(pairs)}
    rows.sort(key=lambda r: (r["scenario"], order[r["variant"], r["radiality"]]))
    if csv_path is not None:
        write_batch_csv(rows, csv_path)
    return BatchResult(cfg, scenarios, rows)


# ---------------------------------------------------------------------------
# summaries


def tag(row: dict) -> str:
    return f"{row['variant']}/{row['radiality']}"


@dataclass(frozen=True)
class Stats:
    avg: float
    std: float
    max: float
    med: float
    min: float

    @classmethod
    def of(cls, xs: Sequence[float]) -> "Stats | None":
        xs = [x for x in xs if x is not None and not math.isnan(x)]
        if not xs:
            return None
        return cls(statistics.fmean(xs), statistics.pstdev(xs), max(xs), statistics.median_low(xs), min(xs))


@dataclass
class TagSummary:
    tag: str
    cases: int
    optimal: int
    infeasible: int
    other: int
    restored: Stats | None
    utilization: Stats | None
    avg_nodes: float | None
    avg_wall_ms: float | None


def summarize(rows: Iterable[dict]) -> dict[str, TagSummary]:
    groups: dict[str, list[dict]] = {}
    for r in rows:
        groups.setdefault(tag(r), []).append(r)
    out = {}
    for t, rs in groups.items():
        opt = [r for r in rs if r["status"] == "optimal"]
        nodes = [r["nodes_explored"] for r in rs if r.get("nodes_explored") is not None]
        walls = [r["wall_ms"] for r in rs if r.get("wall_ms") is not None]
        out[t] = TagSummary(
            tag=t,
            cases=len(rs),
            optimal=len(opt),
            infeasible=sum(r["status"] == "infeasible" for r in rs),
            other=sum(r["status"] not in ("optimal", "infeasible") for r in rs),
            restored=Stats.of([r["restored_kw"] for r in opt]),
            utilization=Stats.of([r["utilization"] for r in opt]),
            avg_nodes=statistics.fmean(nodes) if nodes else None,
            avg_wall_ms=statistics.fmean(walls) if walls else None,
        )
    return out


def _by_scenario(rows: Iterable[dict], t: str) -> dict[int, dict]:
    return {r["scenario"]: r for r in rows if tag(r) == t}


@dataclass
class NodeComparison:
    tag_a: str
    tag_b: str
    fewer: int  # N_a < N_b
    equal: int
    more: int
    avg_a: float | None
    avg_b: float | None

    @property
    def total(self) -> int:
        return self.fewer + self.equal + self.more


def compare_nodes(rows: Sequence[dict], tag_a: str, tag_b: str) -> NodeComparison:
    """Case counts of explored-node comparisons over scenarios where both solved optimally."""
    a, b = _by_scenario(rows, tag_a), _by_scenario(rows, tag_b)
    na, nb = [], []
    for k in sorted(set(a) & set(b)):
        ra, rb = a[k], b[k]
        if ra["status"] != "optimal" or rb["status"] != "optimal":
            continue
        if ra.get("nodes_explored") is None or rb.get("nodes_explored") is None:
            continue
        na.append(ra["nodes_explored"])
        nb.append(rb["nodes_explored"])
    return NodeComparison(
        tag_a,
        tag_b,
        sum(x < y for x, y in zip(na, nb)),
        sum(x == y for x, y in zip(na, nb)),
        sum(x > y for x, y in zip(na, nb)),
        statistics.fmean(na) if na else None,
        statistics.fmean(nb) if nb else None,
    )


def _rel_diff(x: float, y: float) -> float:
    return abs(x - y) / max(1.0, abs(x), abs(y))


def objective_mismatches(rows: Sequence[dict], tag_a: str, tag_b: str, rtol: float = 1e-6) -> list[int]:
    """Scenarios where two tags disagree on status or on the optimum beyond ``rtol``."""
    a, b = _by_scenario(rows, tag_a), _by_scenario(rows, tag_b)
    bad = []
    for k in sorted(set(a) & set(b)):
        ra, rb = a[k], b[k]
        if ra["status"] != rb["status"]:
            bad.append(k)
        elif ra["status"] == "optimal" and _rel_diff(ra["objective"], rb["objective"]) > rtol:
            bad.append(k)
    return bad


def nesting_violations(rows: Sequence[dict], rtol: float = 1e-6) -> list[tuple[int, str, str, str]]:
    """Row-wise search-space nesting: a larger model is never worse or less feasible.

    Returns ``(scenario, smaller_tag, larger_tag, reason)`` tuples.
    """
    by_tag: dict[str, dict[int, dict]] = {}
    for r in rows:
        by_tag.setdefault(tag(r), {})[r["scenario"]] = r
    ranked = sorted(
        by_tag, key=lambda t: (NESTING.index(t.split("/")[0]), t)
    )
    out = []
    for i, small in enumerate(ranked):
        for large in ranked[i + 1 :]:
            if small.split("/")[0] == large.split("/")[0]:
                continue
            for k, rs in by_tag[small].items():
                rl = by_tag[large].get(k)
                if rl is None or rs["status"] != "optimal":
                    continue
                if rl["status"] != "optimal":
                    out.append((k, small, large, f"larger model {rl['status']}"))
                elif rl["objective"] < rs["objective"] - rtol * max(1.0, abs(rs["objective"])):
                    out.append((k, small, large, f"{rl['objective']} < {rs['objective']}"))
    return out


def format_summary(summary: dict[str, TagSummary]) -> str:
    lines = [
        f"{'model':<24}{'cases':>6}{'infeas':>8}{'avg kW':>9}{'std':>7}{'max':>7}{'med':>7}{'min':>7}"
        f"{'avg util':>10}{'std':>7}{'max':>7}{'med':>7}{'min':>7}{'avg nodes':>11}{'avg ms':>9}"
    ]
    for t in sorted(summary):
        s = summary[t]
        r, u = s.restored, s.utilization
        rk = f"{r.avg:9.0f}{r.std:7.0f}{r.max:7.0f}{r.med:7.0f}{r.min:7.0f}" if r else f"{'-':>37}"
        uk = (
            f"{u.avg:10.1%}{u.std:7.1%}{u.max:7.1%}{u.med:7.1%}{u.min:7.1%}" if u else f"{'-':>38}"
        )
        nodes = f"{s.avg_nodes:11.1f}" if s.avg_nodes is not None else f"{'-':>11}"
        wall = f"{s.avg_wall_ms:9.1f}" if s.avg_wall_ms is not None else f"{'-':>9}"
        lines.append(f"{t:<24}{s.cases:>6}{s.infeasible:>8}{rk}{uk}{nodes}{wall}")
    return "\n".join(lines)


def format_node_comparison(c: NodeComparison) -> str:
    avg = lambda x: "-" if x is None else f"{x:.1f}"
    return (
        f"avg N[{c.tag_a}]={avg(c.avg_a)}  avg N[{c.tag_b}]={avg(c.avg_b)}  "
        f"cases N_a<N_b: {c.fewer}/{c.total}  N_a=N_b: {c.equal}/{c.total}  N_a>N_b: {c.more}/{c.total}"
    )
