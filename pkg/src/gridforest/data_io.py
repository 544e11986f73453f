"""Network, scenario, solution and batch-table files."""
from __future__ import annotations

import csv
import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import jsonschema

from .graph import BranchRecord, GraphError, Network, NodeRecord
from .scenario import FaultScenario

BATCH_COLUMNS = (
    "scenario",
    "variant",
    "radiality",
    "seed",
    "status",
    "objective",
    "restored_kw",
    "utilization",
    "nodes_explored",
    "wall_ms",
)


class SchemaError(ValueError):
    pass


@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    text = resources.files("gridforest").joinpath("schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def bundled_network_path(name: str = "ieee33") -> Path:
    return Path(str(resources.files("gridforest").joinpath("data").joinpath(f"{name}.json")))


def _validate(doc, schema_name: str, source: str) -> None:
    validator = jsonschema.Draft202012Validator(schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors[:10]:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"  {where}: {e.message}")
        raise SchemaError(f"{source}: {len(errors)} schema error(s)\n" + "\n".join(lines))


def _read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


# -- networks -----------------------------------------------------------------


def parse_network(doc: Mapping, source: str = "<document>") -> Network:
    _validate(doc, "network", source)
    kv, mva = doc["base"]["kv"], doc["base"]["mva"]
    z_base = kv**2 / mva if doc["units"]["impedance"] == "ohm" else 1.0
    volt = doc.get("voltage", {})
    vmin, vmax = volt.get("vmin_pu", 0.95), volt.get("vmax_pu", 1.05)
    nodes = []
    for n in doc["nodes"]:
        nodes.append(
            NodeRecord(
                id=n["id"],
                kind=n["kind"],
                p_demand=float(n.get("p_kw", 0.0)),
                q_demand=float(n.get("q_kvar", 0.0)),
                p_cap=float(n.get("pcap_kw", 0.0)),
                q_cap=float(n.get("qcap_kvar", 0.0)),
                weight=float(n.get("weight", 1.0)),
                v_min=n.get("vmin_pu", vmin) ** 2,
                v_max=n.get("vmax_pu", vmax) ** 2,
            )
        )
    branches = [
        BranchRecord(
            id=b["id"],
            from_node=b["from"],
            to_node=b["to"],
            r=b["r"] / z_base,
            x=b["x"] / z_base,
            s_cap=float(b["scap_kva"]),
            switchable=b.get("switchable", True),
            normally_open=b.get("normally_open", False),
        )
        for b in doc["branches"]
    ]
    try:
        net = Network(tuple(nodes), tuple(branches), kv, mva, doc.get("name", ""))
    except GraphError as exc:
        raise SchemaError(f"{source}: {exc}") from None
    if not net.is_connected:
        raise SchemaError(f"{source}: network graph is disconnected")
    return net


def load_network(path) -> Network:
    return parse_network(_read_json(path), str(path))


def network_document(net: Network, impedance_units: str = "pu") -> dict:
    z_base = net.base_kv**2 / net.base_mva if impedance_units == "ohm" else 1.0
    nodes = []
    for n in net.nodes:
        d = {"id": n.id, "kind": n.kind, "p_kw": n.p_demand, "q_kvar": n.q_demand}
        if n.is_source:
            d["pcap_kw"], d["qcap_kvar"] = n.p_cap, n.q_cap
        d["weight"] = n.weight
        d["vmin_pu"], d["vmax_pu"] = math.sqrt(n.v_min), math.sqrt(n.v_max)
        nodes.append(d)
    branches = [
        {
            "id": b.id,
            "from": b.from_node,
            "to": b.to_node,
            "r": b.r * z_base,
            "x": b.x * z_base,
            "scap_kva": b.s_cap,
            "normally_open": b.normally_open,
            "switchable": b.switchable,
        }
        for b in net.branches
    ]
    return {
        "version": 1,
        "name": net.name,
        "base": {"kv": net.base_kv, "mva": net.base_mva},
        "units": {"impedance": impedance_units},
        "nodes": nodes,
        "branches": branches,
    }


def save_network(net: Network, path, impedance_units: str = "pu") -> None:
    Path(path).write_text(json.dumps(network_document(net, impedance_units), indent=1))


# -- scenarios ----------------------------------------------------------------


def parse_scenario(doc: Mapping, source: str = "<document>") -> FaultScenario:
    _validate(doc, "scenario", source)
    return FaultScenario.from_dict(doc)


def load_scenario(path) -> FaultScenario:
    return parse_scenario(_read_json(path), str(path))


def save_scenario(scenario: FaultScenario, path) -> None:
    Path(path).write_text(scenario.to_json())


# -- solutions ----------------------------------------------------------------


def validate_solution_document(doc: Mapping) -> None:
    _validate(doc, "solution", "<solution>")


def save_solution(doc: Mapping, path) -> None:
    validate_solution_document(doc)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


# -- batch tables -------------------------------------------------------------


def write_batch_csv(rows: Iterable[Mapping], path) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BATCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k)) for k in BATCH_COLUMNS})
            n += 1
    return n


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(round(x, 9))
    return str(x)


def read_batch_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != BATCH_COLUMNS:
            raise SchemaError(f"{path}: expected columns {','.join(BATCH_COLUMNS)}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            try:
                rows.append(
                    {
                        "scenario": int(raw["scenario"]),
                        "variant": raw["variant"],
                        "radiality": raw["radiality"],
                        "seed": int(raw["seed"]),
                        "status": raw["status"],
                        "objective": _num(raw["objective"]),
                        "restored_kw": _num(raw["restored_kw"]),
                        "utilization": _num(raw["utilization"]),
                        "nodes_explored": None if raw["nodes_explored"] == "" else int(raw["nodes_explored"]),
                        "wall_ms": _num(raw["wall_ms"]),
                    }
                )
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: malformed row at line {lineno}: {exc}") from None
        return rows


def _num(s: str) -> float | None:
    return None if s == "" else float(s)
