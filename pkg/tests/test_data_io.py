import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridforest import data_io
from gridforest.data_io import (
    BATCH_COLUMNS,
    SchemaError,
    load_network,
    network_document,
    parse_network,
    read_batch_csv,
    save_network,
    write_batch_csv,
)


def doc33():
    return json.loads(data_io.bundled_network_path("ieee33").read_text())


def test_bundled_feeder_totals(ieee33):
    assert sum(n.p_demand for n in ieee33.nodes) == pytest.approx(3715.0)
    assert sum(n.q_demand for n in ieee33.nodes) == pytest.approx(2300.0)
    assert sum(b.normally_open for b in ieee33.branches) == 5
    # branch 1-2 is 0.0922 ohm on a 12.66 kV / 1 MVA base
    assert ieee33.branch(1).r == pytest.approx(0.0922 / 12.66**2)
    assert ieee33.node(2).v_min == pytest.approx(0.95**2)


def test_ohm_and_pu_documents_agree(ieee33, tmp_path):
    save_network(ieee33, tmp_path / "ohm.json", impedance_units="ohm")
    save_network(ieee33, tmp_path / "pu.json")
    a, b = load_network(tmp_path / "ohm.json"), load_network(tmp_path / "pu.json")
    for x, y in zip(a.branches, b.branches):
        assert abs(x.r - y.r) < 1e-9 and abs(x.x - y.x) < 1e-9
    assert a.nodes == b.nodes


def test_save_load_is_idempotent(ieee33, tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_network(ieee33, p1)
    save_network(load_network(p1), p2)
    assert p1.read_text() == p2.read_text()
    assert load_network(p1) == load_network(p2)


@pytest.mark.parametrize(
    "mutate, where",
    [
        (lambda d: d.pop("branches"), "<root>"),
        (lambda d: d["nodes"][3].update(kind="motor"), "nodes/3/kind"),
        (lambda d: d["branches"][0].update(colour="red"), "branches/0"),
        (lambda d: d["branches"][4].update(r=-1.0), "branches/4/r"),
        (lambda d: d.update(version=2), "version"),
    ],
)
def test_schema_errors_point_at_the_field(mutate, where):
    d = doc33()
    mutate(d)
    with pytest.raises(SchemaError, match=where):
        parse_network(d)


def test_semantic_errors():
    d = doc33()
    d["branches"][0]["to"] = 99
    with pytest.raises(SchemaError, match="99"):
        parse_network(d)
    d = doc33()
    d["branches"] = [b for b in d["branches"] if b["id"] not in (1, 33, 34, 35, 36, 37)]
    with pytest.raises(SchemaError, match="disconnected"):
        parse_network(d)


def test_invalid_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"version": 1,\n  "nodes": [}')
    with pytest.raises(SchemaError, match="line 2"):
        load_network(p)


row_strategy = st.fixed_dictionaries(
    {
        "scenario": st.integers(0, 500),
        "variant": st.sampled_from(["proposed", "fixed_islands", "radial_baseline"]),
        "radiality": st.sampled_from(["scf", "dmcf"]),
        "seed": st.integers(0, 2**31),
        "status": st.sampled_from(["optimal", "infeasible", "limit", "error"]),
        "objective": st.none() | st.floats(0, 1e4, allow_nan=False),
        "restored_kw": st.none() | st.floats(0, 1e4, allow_nan=False),
        "utilization": st.none() | st.floats(0, 1, allow_nan=False),
        "nodes_explored": st.none() | st.integers(0, 10**6),
        "wall_ms": st.floats(0, 1e5, allow_nan=False),
    }
)


@settings(max_examples=30, deadline=None)
@given(st.lists(row_strategy, max_size=15))
def test_batch_csv_round_trip(tmp_path_factory, rows):
    p = tmp_path_factory.mktemp("csv") / "b.csv"
    assert write_batch_csv(rows, p) == len(rows)
    back = read_batch_csv(p)
    assert len(back) == len(rows)
    for a, b in zip(rows, back):
        for k in BATCH_COLUMNS:
            if isinstance(a[k], float):
                assert b[k] == pytest.approx(a[k], abs=1e-8)
            else:
                assert b[k] == a[k]


def test_nan_written_blank(tmp_path):
    p = tmp_path / "b.csv"
    write_batch_csv([{"scenario": 0, "variant": "proposed", "radiality": "scf", "seed": 1, "status": "optimal", "utilization": math.nan}], p)
    assert read_batch_csv(p)[0]["utilization"] is None


def test_csv_header_and_rows_checked(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError, match="expected columns"):
        read_batch_csv(p)
    p.write_text(",".join(BATCH_COLUMNS) + "\n" + "x,proposed,scf,1,optimal,,,,,\n")
    with pytest.raises(SchemaError, match="line 2"):
        read_batch_csv(p)


def test_solution_schema_rejects_junk():
    with pytest.raises(SchemaError):
        data_io.validate_solution_document({"variant": "proposed"})
