"""Result files: atomic writes, CSV/JSON layouts and plot data."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import pytest

from app.domain.taxonomy import OutputFormat
from app.services.conditions import check_minkowski_convexity, compare_S0_vs_weak_pareto
from app.services.pareto import filter_front
from app.services.report_generator import ReportGenerator, psnr
from app.services.scalarize import scalarize_discrete, sweep_S0
from app.services.storage import ArtifactStore

ALL_FORMATS = (OutputFormat.CSV, OutputFormat.JSON, OutputFormat.PLOTDATA)


def _rows(path: Path) -> list:
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def test_store_writes_atomically(tmp_path: Path) -> None:
    store = ArtifactStore(tmp_path / "out")
    target = store.write_json("a.json", {"b": 1, "a": [1, 2]})
    assert target.read_text(encoding="utf-8").startswith('{\n  "a"')
    assert [p.name for p in (tmp_path / "out").iterdir()] == ["a.json"]
    assert store.written == [target]


def test_psnr() -> None:
    assert psnr(1.0, 255.0) == pytest.approx(20 * math.log10(255.0))
    assert psnr(0.0, 255.0) == math.inf


def test_front_files(tmp_path: Path, nonconvex_cloud) -> None:
    reporter = ReportGenerator(ArtifactStore(tmp_path), ALL_FORMATS)
    front = filter_front(nonconvex_cloud)
    written = reporter.front(front)
    assert {p.name for p in written} == {"front.csv", "front.json", "plot_front.csv"}

    rows = _rows(tmp_path / "front.csv")
    assert rows[0] == ["b_0", "b_1", "g_0", "g_1", "label"]
    assert rows[2] == ["0.5", "0.5", "3.5", "3.5", "pareto"]

    payload = json.loads((tmp_path / "front.json").read_text(encoding="utf-8"))
    assert payload["kind"] == "front"
    assert payload["counts"] == {"pareto": 3, "weak_only": 0, "dominated": 0}
    assert payload["points"][0]["alloc"] == [1.0, 0.0]

    plot = _rows(tmp_path / "plot_front.csv")
    assert plot[0] == ["g_0", "g_1"]
    assert [row[0] for row in plot[1:]] == ["1.0", "3.5", "5.0"]


def test_psnr_columns_only_in_exports(tmp_path: Path, nonconvex_cloud) -> None:
    reporter = ReportGenerator(ArtifactStore(tmp_path), [OutputFormat.CSV], peak=255.0)
    reporter.cloud(nonconvex_cloud)
    rows = _rows(tmp_path / "cloud.csv")
    assert rows[0] == ["b_0", "b_1", "g_0", "g_1", "psnr_0", "psnr_1"]
    assert float(rows[1][4]) == pytest.approx(psnr(1.0, 255.0))
    assert not (tmp_path / "cloud.json").exists()


def test_sweep_and_scalarization_files(tmp_path: Path, nonconvex_cloud) -> None:
    reporter = ReportGenerator(ArtifactStore(tmp_path), ALL_FORMATS, metadata={"name": "nc"})
    s0 = sweep_S0(nonconvex_cloud, 4)
    reporter.sweep(s0)
    rows = _rows(tmp_path / "sweep.csv")
    assert rows[0] == ["w_0", "w_1", "objective", "b_0", "b_1", "g_0", "g_1"]
    # The (0.5, 0.5) weight ties between both extremes
    assert sum(1 for row in rows[1:] if row[:2] == ["0.5", "0.5"]) == 2
    payload = json.loads((tmp_path / "sweep.json").read_text(encoding="utf-8"))
    assert payload["metadata"] == {"name": "nc"}
    assert payload["weight_resolution"] == 4
    assert len(_rows(tmp_path / "plot_s0.csv")) == 3

    reporter.scalarization(scalarize_discrete((1.0, 0.0), nonconvex_cloud))
    result = json.loads((tmp_path / "scalarize.json").read_text(encoding="utf-8"))
    assert result["objective"] == 1.0
    assert "residual" not in result


def test_check_and_coverage_reports(tmp_path: Path, nonconvex_cloud) -> None:
    reporter = ReportGenerator(ArtifactStore(tmp_path))
    front = filter_front(nonconvex_cloud)
    reporter.checks([check_minkowski_convexity(front)])
    reporter.coverage(compare_S0_vs_weak_pareto(sweep_S0(front, 8), front, 0.5))
    checks = json.loads((tmp_path / "checks.json").read_text(encoding="utf-8"))
    assert checks["passed"] is False
    assert checks["reports"][0]["check_name"] == "minkowski_convexity"
    assert checks["reports"][0]["witnesses"][0]["point"] == [3.5, 3.5]
    coverage = json.loads((tmp_path / "coverage.json").read_text(encoding="utf-8"))
    assert coverage["full"] is False
    assert coverage["missed"] == [[3.5, 3.5]]


def test_outputs_are_byte_identical(tmp_path: Path, diamond_cloud) -> None:
    for name in ("one", "two"):
        reporter = ReportGenerator(ArtifactStore(tmp_path / name), ALL_FORMATS)
        front = filter_front(diamond_cloud)
        reporter.front(front)
        reporter.sweep(sweep_S0(front, 8))
    for file in ("front.csv", "front.json", "plot_front.csv", "sweep.csv", "sweep.json"):
        assert (tmp_path / "one" / file).read_bytes() == (tmp_path / "two" / file).read_bytes()
