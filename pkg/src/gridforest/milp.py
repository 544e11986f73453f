"""Solver-agnostic MILP container and backends.

Models are plain data: variables, sparse rows and a sparse objective. A backend
(HiGHS through ``highspy`` by default, ``scipy.optimize.milp`` as a fallback)
turns one into a :class:`SolveOutcome`.
"""
from __future__ import annotations

import copy
import json
import math
import re
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

INF = math.inf
SENSES = ("<=", "=", ">=")
STATUSES = ("optimal", "infeasible", "unbounded", "limit")


class ModelError(ValueError):
    pass


class BackendUnavailable(RuntimeError):
    pass


@dataclass(eq=False)
class Var:
    name: str
    kind: str
    lb: float
    ub: float
    index: int

    def __repr__(self) -> str:
        return f"Var({self.name})"


@dataclass
class Constraint:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    name: str = ""


Terms = Union[Mapping[Var, float], Iterable[tuple[Var, float]]]


class MilpModel:
    """Mutable model builder. Single-threaded per instance."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.vars: list[Var] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.sense = "max"
        self._by_name: dict[str, Var] = {}

    # -- variables -------------------------------------------------------
    def add_var(self, name: str, kind: str = "continuous", lb: float = 0.0, ub: float = INF) -> Var:
        if kind not in ("continuous", "binary"):
            raise ModelError(f"unknown variable kind {kind!r}")
        if name in self._by_name:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind == "binary":
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ModelError(f"{name}: lower bound {lb} above upper bound {ub}")
        v = Var(name, kind, float(lb), float(ub), len(self.vars))
        self.vars.append(v)
        self._by_name[name] = v
        return v

    def binary(self, name: str) -> Var:
        return self.add_var(name, "binary", 0.0, 1.0)

    def continuous(self, name: str, lb: float = 0.0, ub: float = INF) -> Var:
        return self.add_var(name, "continuous", lb, ub)

    def var(self, name: str) -> Var:
        return self._by_name[name]

    def owns(self, v: Var) -> bool:
        return v.index < len(self.vars) and self.vars[v.index] is v

    # -- rows ------------------------------------------------------------
    def _collect(self, terms: Terms) -> dict[int, float]:
        items = terms.items() if isinstance(terms, Mapping) else terms
        row: dict[int, float] = {}
        for v, c in items:
            if not self.owns(v):
                raise ModelError(f"{v!r} does not belong to model {self.name!r}")
            row[v.index] = row.get(v.index, 0.0) + float(c)
        return {k: c for k, c in row.items() if c != 0.0}

    def add_constr(self, terms: Terms, sense: str, rhs: float, name: str = "") -> Constraint:
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        con = Constraint(self._collect(terms), sense, float(rhs), name)
        self.constraints.append(con)
        return con

    def set_objective(self, terms: Terms, sense: str = "max") -> None:
        if sense not in ("max", "min"):
            raise ModelError(f"unknown objective sense {sense!r}")
        self.objective = self._collect(terms)
        self.sense = sense

    # -- counters ----------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.vars)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def num_binaries(self) -> int:
        return sum(v.kind == "binary" for v in self.vars)

    def copy(self) -> "MilpModel":
        return copy.deepcopy(self)

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        def num(x: float):
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "name": self.name,
            "sense": self.sense,
            "variables": [[v.name, v.kind, num(v.lb), num(v.ub)] for v in self.vars],
            "constraints": [
                [c.name, sorted(c.coeffs.items()), c.sense, c.rhs] for c in self.constraints
            ],
            "objective": sorted(self.objective.items()),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MilpModel":
        m = cls(doc["name"])
        for name, kind, lb, ub in doc["variables"]:
            m.add_var(name, kind, float(lb), float(ub))
        for name, coeffs, sense, rhs in doc["constraints"]:
            m.add_constr([(m.vars[int(i)], c) for i, c in coeffs], sense, rhs, name)
        m.set_objective([(m.vars[int(i)], c) for i, c in doc["objective"]], doc["sense"])
        return m

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MilpModel":
        return cls.from_dict(json.loads(text))

    def to_lp(self) -> str:
        """CPLEX LP-format text."""
        names = _lp_names(self.vars)

        def expr(row: dict[int, float]) -> str:
            if not row:
                return "0 " + names[0] if names else "0"
            parts = []
            for k, c in sorted(row.items()):
                parts.append(f"{'-' if c < 0 else '+'} {abs(c):.17g} {names[k]}")
            s = " ".join(parts)
            return s[2:] if s.startswith("+ ") else s

        out = [f"\\ {self.name}", "Maximize" if self.sense == "max" else "Minimize"]
        out.append(f" obj: {expr(self.objective)}")
        out.append("Subject To")
        for k, c in enumerate(self.constraints):
            op = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
            out.append(f" c{k}: {expr(c.coeffs)} {op} {c.rhs:.17g}")
        out.append("Bounds")
        for v, nm in zip(self.vars, names):
            if v.kind == "binary":
                continue
            lo = "-inf" if v.lb == -INF else f"{v.lb:.17g}"
            hi = "+inf" if v.ub == INF else f"{v.ub:.17g}"
            if v.lb == -INF and v.ub == INF:
                out.append(f" {nm} free")
            else:
                out.append(f" {lo} <= {nm} <= {hi}")
        bins = [nm for v, nm in zip(self.vars, names) if v.kind == "binary"]
        if bins:
            out.append("Binary")
            out.extend(f" {nm}" for nm in bins)
        out.append("End")
        return "\n".join(out) + "\n"


_LP_SAFE = re.compile(r"^[A-DF-Za-df-z_][A-Za-z0-9_.]*$")  # a leading e/E reads as an exponent
_LP_RESERVED = {"free", "inf", "infinity", "st", "end", "bounds", "binary", "binaries", "general", "generals"}


def _lp_names(vars: list[Var]) -> list[str]:
    return [
        v.name if _LP_SAFE.match(v.name) and v.name.lower() not in _LP_RESERVED else f"x{v.index}"
        for v in vars
    ]


def lp_relaxation(model: MilpModel) -> MilpModel:
    relaxed = model.copy()
    for v in relaxed.vars:
        if v.kind == "binary":
            v.kind = "continuous"
            v.lb, v.ub = max(v.lb, 0.0), min(v.ub, 1.0)
    relaxed.name = model.name + "_lp"
    return relaxed


# ---------------------------------------------------------------------------
# linearization helpers


def mccormick_binary_product(model: MilpModel, a: Var, b: Var, name: str | None = None) -> Var:
    """Continuous ``z`` with ``z == a*b`` at every integer point of binaries a, b."""
    for v in (a, b):
        if v.kind != "binary":
            raise ModelError(f"{v.name} is not binary")
    z = model.continuous(name or f"prod_{a.name}_{b.name}", 0.0, 1.0)
    model.add_constr({z: 1, a: -1}, "<=", 0, f"mc_a[{z.name}]")
    model.add_constr({z: 1, b: -1}, "<=", 0, f"mc_b[{z.name}]")
    model.add_constr({z: 1, a: -1, b: -1}, ">=", -1, f"mc_ab[{z.name}]")
    return z


def polygonal_capacity_cuts(
    model: MilpModel, p: Var, q: Var, s_cap: float, gate: Var, segments: int = 12
) -> list[Constraint]:
    """Outer polygon of the disc ``p^2 + q^2 <= (gate * s_cap)^2``.

    One tangent half-plane per angle ``2*pi*k/segments``. The polygon's
    vertices sit at radius ``s_cap / cos(pi/segments)``.
    """
    if segments < 4 or segments % 2:
        raise ModelError("segments must be an even integer >= 4")
    if not math.isfinite(s_cap) or s_cap < 0:
        raise ModelError("s_cap must be finite and non-negative")
    cuts = []
    for k in range(segments):
        th = 2 * math.pi * k / segments
        c, s = _snap(math.cos(th)), _snap(math.sin(th))
        cuts.append(
            model.add_constr({p: c, q: s, gate: -s_cap}, "<=", 0.0, f"cap[{p.name},{k}]")
        )
    return cuts


def _snap(x: float) -> float:
    return 0.0 if abs(x) < 1e-15 else x


# ---------------------------------------------------------------------------
# solving


@dataclass(frozen=True)
class SolveOptions:
    integrality_tol: float = 1e-6
    rel_gap: float = 0.0
    time_limit: float | None = None
    seed: int = 0
    threads: int = 1
    backend: str = "highs"


@dataclass(frozen=True)
class SolveOutcome:
    status: str
    objective: float | None = None
    values: dict[str, float] | None = None
    nodes: int | None = None  # None when the backend cannot report it
    wall_time: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def value(self, v: Var | str) -> float:
        if self.values is None:
            raise ModelError(f"no values for status {self.status!r}")
        return self.values[v if isinstance(v, str) else v.name]


def _row_arrays(model: MilpModel):
    starts, idx, val, lo, hi = [0], [], [], [], []
    for c in model.constraints:
        for k, a in sorted(c.coeffs.items()):
            idx.append(k)
            val.append(a)
        starts.append(len(idx))
        lo.append(c.rhs if c.sense in ("=", ">=") else -INF)
        hi.append(c.rhs if c.sense in ("=", "<=") else INF)
    return (
        np.array(starts, dtype=np.int32),
        np.array(idx, dtype=np.int32),
        np.array(val, dtype=float),
        np.array(lo, dtype=float),
        np.array(hi, dtype=float),
    )


class HighsSession:
    """A model loaded once into HiGHS, re-solvable after bound/objective edits.

    Used by the oracle tests, which solve thousands of small variations.
    """

    def __init__(self, model: MilpModel, opts: SolveOptions = SolveOptions()):
        try:
            import highspy
        except ImportError as exc:  # pragma: no cover
            raise BackendUnavailable("highspy is not installed") from exc
        self._hs = highspy
        self.model = model
        self.opts = opts
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("random_seed", int(opts.seed))
        h.setOptionValue("threads", int(opts.threads))
        h.setOptionValue("mip_rel_gap", float(opts.rel_gap))
        h.setOptionValue("mip_abs_gap", 0.0 if opts.rel_gap == 0 else 1e-6)
        h.setOptionValue("mip_feasibility_tolerance", float(opts.integrality_tol))
        if opts.time_limit is not None:
            h.setOptionValue("time_limit", float(opts.time_limit))
        lp = highspy.HighsLp()
        n = model.num_vars
        lp.num_col_ = n
        lp.num_row_ = model.num_constraints
        cost = np.zeros(n)
        for k, c in model.objective.items():
            cost[k] = c
        lp.col_cost_ = cost
        lp.col_lower_ = np.array([v.lb for v in model.vars], dtype=float)
        lp.col_upper_ = np.array([v.ub for v in model.vars], dtype=float)
        starts, idx, val, lo, hi = _row_arrays(model)
        lp.row_lower_ = lo
        lp.row_upper_ = hi
        lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
        lp.a_matrix_.start_ = starts
        lp.a_matrix_.index_ = idx
        lp.a_matrix_.value_ = val
        lp.a_matrix_.num_col_ = n
        lp.a_matrix_.num_row_ = model.num_constraints
        lp.sense_ = highspy.ObjSense.kMaximize if model.sense == "max" else highspy.ObjSense.kMinimize
        if model.num_binaries:
            lp.integrality_ = [
                highspy.HighsVarType.kInteger if v.kind == "binary" else highspy.HighsVarType.kContinuous
                for v in model.vars
            ]
        status = h.passModel(lp)
        if status == highspy.HighsStatus.kError:
            raise ModelError("HiGHS rejected the model")
        self.h = h

    def set_bounds(self, v: Var, lb: float, ub: float) -> None:
        self.h.changeColBounds(v.index, float(lb), float(ub))

    def set_objective(self, coeffs: Mapping[Var, float]) -> None:
        n = self.model.num_vars
        cost = np.zeros(n)
        for v, c in coeffs.items():
            cost[v.index] += c
        self.h.changeColsCost(n, np.arange(n, dtype=np.int32), cost)

    def solve(self) -> SolveOutcome:
        hs, h = self._hs, self.h
        t0 = time.perf_counter()
        h.clearSolver()
        h.run()
        st = h.getModelStatus()
        if st == hs.HighsModelStatus.kUnboundedOrInfeasible:
            h.setOptionValue("presolve", "off")
            h.clearSolver()
            h.run()
            h.setOptionValue("presolve", "choose")
            st = h.getModelStatus()
        wall = time.perf_counter() - t0
        info = h.getInfo()
        nodes = int(info.mip_node_count) if self.model.num_binaries else 0
        if st == hs.HighsModelStatus.kModelEmpty:
            return SolveOutcome("optimal", 0.0, {}, nodes, wall)
        if st == hs.HighsModelStatus.kOptimal:
            x = h.getSolution().col_value
            values = {v.name: float(x[v.index]) for v in self.model.vars}
            return SolveOutcome("optimal", float(info.objective_function_value), values, nodes, wall)
        if st == hs.HighsModelStatus.kInfeasible:
            return SolveOutcome("infeasible", None, None, nodes, wall)
        if st in (hs.HighsModelStatus.kUnbounded, hs.HighsModelStatus.kUnboundedOrInfeasible):
            return SolveOutcome("unbounded", None, None, nodes, wall)
        if st in (
            hs.HighsModelStatus.kTimeLimit,
            hs.HighsModelStatus.kIterationLimit,
            hs.HighsModelStatus.kSolutionLimit,
            hs.HighsModelStatus.kInterrupt,
        ):
            incumbent = None
            if info.primal_solution_status == 2:
                incumbent = float(info.objective_function_value)
            return SolveOutcome("limit", incumbent, None, nodes, wall)
        raise RuntimeError(f"HiGHS ended with status {h.modelStatusToString(st)}")


def _solve_scipy(model: MilpModel, opts: SolveOptions) -> SolveOutcome:
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import csr_matrix

    n = model.num_vars
    c = np.zeros(n)
    for k, a in model.objective.items():
        c[k] = a
    if model.sense == "max":
        c = -c
    starts, idx, val, lo, hi = _row_arrays(model)
    cons = []
    if model.num_constraints:
        a = csr_matrix((val, idx, starts), shape=(model.num_constraints, n))
        cons.append(LinearConstraint(a, lo, hi))
    integrality = np.array([v.kind == "binary" for v in model.vars], dtype=int)
    bounds = Bounds([v.lb for v in model.vars], [v.ub for v in model.vars])
    options = {"mip_rel_gap": opts.rel_gap, "disp": False}
    if opts.time_limit is not None:
        options["time_limit"] = opts.time_limit
    t0 = time.perf_counter()
    res = milp(c, constraints=cons, integrality=integrality, bounds=bounds, options=options)
    wall = time.perf_counter() - t0
    if res.status == 0:
        obj = float(res.fun) * (-1 if model.sense == "max" else 1)
        values = {v.name: float(res.x[v.index]) for v in model.vars}
        return SolveOutcome("optimal", obj, values, None, wall)
    if res.status == 2:
        return SolveOutcome("infeasible", None, None, None, wall)
    if res.status == 3:
        return SolveOutcome("unbounded", None, None, None, wall)
    if res.status == 1:
        obj = None if res.fun is None else float(res.fun) * (-1 if model.sense == "max" else 1)
        return SolveOutcome("limit", obj, None, None, wall)
    raise RuntimeError(f"scipy.milp failed: {res.message}")


BACKENDS = ("highs", "scipy")


def solve(model: MilpModel, opts: SolveOptions = SolveOptions()) -> SolveOutcome:
    if opts.backend == "highs":
        return HighsSession(model, opts).solve()
    if opts.backend == "scipy":
        return _solve_scipy(model, opts)
    raise BackendUnavailable(f"unknown backend {opts.backend!r}")
