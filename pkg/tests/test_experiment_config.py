"""Experiment config parsing, fixtures and tabulated CSV sources."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from app.adapters.fixtures import DEMO_FIXTURES, FixtureError, FixtureRegistry, load_fixture
from app.adapters.table_source import TabulatedCsvSource, write_table
from app.domain.errors import GraphError, ParseError, SchemaError
from app.domain.experiment import load_config, parse_config
from app.domain.taxonomy import ModelKind, OutputFormat
from app.pipelines.experiment import build_model
from app.services.distortion import LayeredExponentialModel, TabulatedModel


def _write(path: Path, payload: object) -> Path:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_diamond_fixture_round_trip() -> None:
    config = load_fixture("diamond3")
    assert config.dag.node_count == 3
    assert config.budget == 1.0
    assert config.model.kind is ModelKind.LAYERED_EXPONENTIAL
    assert OutputFormat.PLOTDATA in config.outputs.formats


def test_every_demo_fixture_loads() -> None:
    registry = FixtureRegistry()
    assert set(DEMO_FIXTURES) <= set(registry.names())
    for name in DEMO_FIXTURES:
        config = registry.load(name)
        dag = config.build_dag()
        assert dag.node_count == config.dag.node_count


def test_unknown_fixture() -> None:
    with pytest.raises(FixtureError, match="unknown fixture"):
        load_fixture("no-such-fixture")


def test_defaults_are_applied() -> None:
    config = load_config(
        {"dag": {"node_count": 2, "arcs": [[0, 1]]}, "budget": 2, "grid_step": 0.5}
    )
    assert config.weight_resolution == 64
    assert config.tolerances.tie == 1e-12
    assert config.match_tolerance == 1.0
    assert config.gap_threshold == 2.0
    assert config.outputs.formats == [OutputFormat.CSV, OutputFormat.JSON]
    model = build_model(config, config.build_dag())
    assert isinstance(model, LayeredExponentialModel)
    assert model.gains.tolist() == [[1, 0], [1, 1]]


def test_partial_gain_map_in_config() -> None:
    config = load_config(
        {
            "dag": {"node_count": 2, "arcs": [[0, 1]]},
            "model": {"gains": [{"0": 1.0}, {"1": 2.0}]},
            "budget": 1,
            "grid_step": 0.5,
        }
    )
    model = build_model(config, config.build_dag())
    assert model.gains.tolist() == [[1, 0], [1, 2]]


def test_gain_outside_subgraph_names_resolution_and_node() -> None:
    data = {
        "dag": {"node_count": 3, "arcs": [[0, 1], [0, 2]]},
        "model": {"gains": [None, {"2": 1.0}, None]},
        "budget": 1,
        "grid_step": 0.1,
    }
    with pytest.raises(SchemaError, match=r"model.gains\[1\]: resolution 1 has a gain on node 2"):
        load_config(data)


def test_missing_and_invalid_fields() -> None:
    with pytest.raises(SchemaError, match="budget"):
        load_config({"dag": {"node_count": 2, "arcs": [[0, 1]]}, "grid_step": 0.5})
    with pytest.raises(SchemaError, match="grid_step"):
        load_config({"dag": {"node_count": 1}, "budget": 1, "grid_step": -0.5})
    with pytest.raises(SchemaError, match="surprise"):
        load_config({"dag": {"node_count": 1}, "budget": 1, "grid_step": 1, "surprise": 1})
    with pytest.raises(SchemaError, match="model.bases"):
        load_config(
            {
                "dag": {"node_count": 2, "arcs": [[0, 1]]},
                "model": {"bases": [1]},
                "budget": 1,
                "grid_step": 1,
            }
        )


def test_graph_errors_pass_through() -> None:
    with pytest.raises(GraphError):
        load_config(
            {"dag": {"node_count": 2, "arcs": [[0, 1], [1, 0]]}, "budget": 1, "grid_step": 1}
        )


def test_parse_error_has_location(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text('{\n  "budget": 1,\n  oops\n}', encoding="utf-8")
    with pytest.raises(ParseError, match=r"broken.json:3:3"):
        parse_config(path)
    with pytest.raises(ParseError, match="cannot read"):
        parse_config(tmp_path / "missing.json")
    with pytest.raises(SchemaError, match="JSON object"):
        parse_config(_write(tmp_path / "list.json", [1, 2]))


def test_tabulated_config_resolves_table_path(tmp_path: Path) -> None:
    write_table(
        tmp_path / "table.csv",
        np.array([[0.0, 0.0], [1.0, 0.0]]),
        np.array([[2.0, 2.0], [1.0, 1.5]]),
    )
    config = parse_config(
        _write(
            tmp_path / "tab.json",
            {
                "dag": {"node_count": 2, "arcs": [[0, 1]]},
                "model": {"kind": "tabulated", "table": "table.csv"},
                "budget": 1,
                "grid_step": 1,
            },
        )
    )
    assert Path(config.model.table) == (tmp_path / "table.csv").resolve()
    model = build_model(config, config.build_dag())
    assert isinstance(model, TabulatedModel)
    assert model.evaluate(np.array([[1.0, 0.0]])).tolist() == [[1.0, 1.5]]


def test_tabulated_model_needs_a_table() -> None:
    with pytest.raises(SchemaError, match="table"):
        load_config(
            {"dag": {"node_count": 1}, "model": {"kind": "tabulated"}, "budget": 1, "grid_step": 1}
        )


def test_table_source_errors(tmp_path: Path) -> None:
    bad_header = tmp_path / "header.csv"
    bad_header.write_text("b_0,g_0\n0,1\n", encoding="utf-8")
    with pytest.raises(ParseError, match="missing columns"):
        TabulatedCsvSource(bad_header).read(2)
    bad_value = tmp_path / "value.csv"
    bad_value.write_text("b_0,g_0\n0,1\n0.5,abc\n", encoding="utf-8")
    with pytest.raises(ParseError, match="value.csv:3"):
        TabulatedCsvSource(bad_value).read(1)
    empty = tmp_path / "empty.csv"
    empty.write_text("b_0,g_0\n", encoding="utf-8")
    with pytest.raises(ParseError, match="no rows"):
        TabulatedCsvSource(empty).read(1)


def test_shipped_nonconvex_table() -> None:
    config = load_fixture("nonconvex3")
    model = build_model(config, config.build_dag())
    assert model.distortions.tolist() == [[1.0, 5.0], [3.5, 3.5], [5.0, 1.0]]
