"""JSON experiment configs: schema, defaults and parsing."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from app.domain.errors import ParseError, SchemaError
from app.domain.graph import LayerDag, build_dag
from app.domain.taxonomy import ModelKind, OutputFormat


class DagSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    node_count: PositiveInt
    arcs: List[Tuple[int, int]] = Field(default_factory=list)


class ModelSpec(BaseModel):
    """Layered-exponential parameters, or the path of a tabulated CSV."""

    model_config = ConfigDict(extra="forbid")

    kind: ModelKind = ModelKind.LAYERED_EXPONENTIAL
    bases: Optional[List[PositiveFloat]] = None
    gains: Optional[List[Optional[Dict[int, NonNegativeFloat]]]] = None
    table: Optional[str] = None
    table_step: Optional[PositiveFloat] = None

    @model_validator(mode="after")
    def _parameters_match_kind(self) -> "ModelSpec":
        if self.kind is ModelKind.TABULATED:
            if not self.table:
                raise ValueError("tabulated models need a 'table' CSV path")
            if self.bases is not None or self.gains is not None:
                raise ValueError("tabulated models take no 'bases' or 'gains'")
        elif self.table is not None:
            raise ValueError("'table' is only valid for tabulated models")
        return self


class Tolerances(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tie: NonNegativeFloat = 1e-12
    match: Optional[NonNegativeFloat] = None  # defaults to 2 x grid_step
    envelope: NonNegativeFloat = 1e-12
    continuity_factor: PositiveFloat = 4.0
    support: NonNegativeFloat = 1e-7
    pareto_eps: NonNegativeFloat = 0.0
    lemma: NonNegativeFloat = 1e-12


class Outputs(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: Optional[str] = None
    formats: List[OutputFormat] = Field(
        default_factory=lambda: [OutputFormat.CSV, OutputFormat.JSON]
    )


class ExperimentConfig(BaseModel):
    """One experiment: DAG, distortion model, budget, grid and sweep settings."""

    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    description: Optional[str] = None
    dag: DagSpec
    model: ModelSpec = Field(default_factory=ModelSpec)
    budget: PositiveFloat
    grid_step: PositiveFloat
    weight_resolution: PositiveInt = 64
    tolerances: Tolerances = Field(default_factory=Tolerances)
    outputs: Outputs = Field(default_factory=Outputs)

    @property
    def match_tolerance(self) -> float:
        if self.tolerances.match is not None:
            return self.tolerances.match
        return 2.0 * self.grid_step

    @property
    def gap_threshold(self) -> float:
        return self.tolerances.continuity_factor * self.grid_step

    def build_dag(self) -> LayerDag:
        return build_dag(self.dag.node_count, self.dag.arcs)

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "node_count": self.dag.node_count,
            "arcs": len(self.dag.arcs),
            "model": self.model.kind.value,
            "budget": self.budget,
            "grid_step": self.grid_step,
            "weight_resolution": self.weight_resolution,
        }


def _field_path(location: Tuple[Union[int, str], ...]) -> str:
    path = ""
    for part in location:
        path += f"[{part}]" if isinstance(part, int) else (f".{part}" if path else str(part))
    return path or "<root>"


def _check_parameters(config: ExperimentConfig, dag: LayerDag) -> None:
    n = dag.node_count
    spec = config.model
    if spec.bases is not None and len(spec.bases) != n:
        raise SchemaError(f"model.bases: expected {n} entries, got {len(spec.bases)}")
    if spec.gains is None:
        return
    if len(spec.gains) != n:
        raise SchemaError(f"model.gains: expected {n} entries, got {len(spec.gains)}")
    for i, gain_map in enumerate(spec.gains):
        if not gain_map:
            continue
        members = dag.members(i)
        for node in gain_map:
            if node not in members:
                raise SchemaError(
                    f"model.gains[{i}]: resolution {i} has a gain on node {node}, "
                    f"outside its subgraph {list(members)}"
                )
        if max(gain_map.values()) <= 0:
            raise SchemaError(f"model.gains[{i}]: resolution {i} needs a positive gain")


def load_config(data: Dict[str, Any], base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Validate a decoded config document; relative table paths resolve against base_dir."""
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise SchemaError(f"{_field_path(first['loc'])}: {first['msg']}") from exc
    _check_parameters(config, config.build_dag())
    if config.model.table and base_dir is not None:
        table = Path(config.model.table)
        if not table.is_absolute():
            resolved = str((base_dir / table).resolve())
            config = config.model_copy(
                update={"model": config.model.model_copy(update={"table": resolved})}
            )
    return config


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read config ({exc.strerror or exc})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be a JSON object")
    return load_config(data, base_dir=path.parent)


__all__ = [
    "DagSpec",
    "ExperimentConfig",
    "ModelSpec",
    "Outputs",
    "Tolerances",
    "load_config",
    "parse_config",
]
