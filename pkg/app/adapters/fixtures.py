from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import List

from app.domain.errors import ToolkitError
from app.domain.experiment import ExperimentConfig, parse_config
from app.infra import get_logger

DEMO_FIXTURES = (
    "qcif-chain",
    "dag5",
    "svc-fig3",
    "svc-fig4",
    "diamond3",
    "nonconvex3",
    "uniform-chain",
    "cif-pair",
)


class FixtureError(ToolkitError):
    pass


class FixtureRegistry:
    """Experiment configs shipped inside the app.fixtures package."""

    PACKAGE = "app.fixtures"

    def __init__(self) -> None:
        self.logger = get_logger(__name__)

    def names(self) -> List[str]:
        root = resources.files(self.PACKAGE)
        return sorted(
            entry.name[: -len(".json")] for entry in root.iterdir() if entry.name.endswith(".json")
        )

    def path(self, name: str) -> Path:
        entry = resources.files(self.PACKAGE) / f"{name}.json"
        if not entry.is_file():
            raise FixtureError(f"unknown fixture {name!r}; choose from {', '.join(self.names())}")
        return Path(str(entry))

    def load(self, name: str) -> ExperimentConfig:
        path = self.path(name)
        self.logger.debug("Loading fixture %s from %s", name, path)
        return parse_config(path)


def load_fixture(name: str) -> ExperimentConfig:
    return FixtureRegistry().load(name)


__all__ = ["DEMO_FIXTURES", "FixtureError", "FixtureRegistry", "load_fixture"]
