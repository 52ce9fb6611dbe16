from __future__ import annotations

from typing import Sequence


class ToolkitError(RuntimeError):
    pass


# Graph


class GraphError(ToolkitError):
    pass


class CycleError(GraphError):
    def __init__(self, cycle: Sequence[int]) -> None:
        self.cycle = list(cycle)
        path = " -> ".join(str(node) for node in [*self.cycle, self.cycle[0]])
        super().__init__(f"directed cycle found: {path}")


class UnreachableError(GraphError):
    def __init__(self, nodes: Sequence[int]) -> None:
        self.nodes = sorted(nodes)
        super().__init__(f"nodes unreachable from source 0: {self.nodes}")


class SourceError(GraphError):
    def __init__(self, predecessors: Sequence[int]) -> None:
        self.predecessors = sorted(predecessors)
        super().__init__(f"source node 0 has incoming arcs from {self.predecessors}")


class NodeIndexError(GraphError, IndexError):
    pass


# Distortion models and envelopes


class ModelError(ToolkitError, ValueError):
    pass


class InfeasibleAllocation(ToolkitError):
    pass


class OffGrid(ToolkitError):
    pass


class EmptySlice(ToolkitError):
    pass


class OutOfRange(ToolkitError):
    pass


class NotMonotone(ToolkitError):
    pass


# Fronts, scalarization and checks


class DimensionMismatch(ToolkitError, ValueError):
    pass


class EmptyInput(ToolkitError, ValueError):
    pass


class InvalidGrid(ToolkitError, ValueError):
    pass


class GridTooLarge(ToolkitError):
    def __init__(self, estimate: int, cap: int, what: str = "grid") -> None:
        self.estimate = estimate
        self.cap = cap
        super().__init__(f"{what} would hold {estimate} points, cap is {cap}")


class NotConvexModel(ToolkitError):
    pass


class NoConvergence(ToolkitError):
    def __init__(self, message: str, residual: float) -> None:
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class TooFewSamples(ToolkitError, ValueError):
    pass


class EmptyFront(ToolkitError):
    pass


# Experiment configs


class ConfigError(ToolkitError):
    pass


class ParseError(ConfigError):
    pass


class SchemaError(ConfigError):
    pass


__all__ = [
    "ConfigError",
    "CycleError",
    "DimensionMismatch",
    "EmptyFront",
    "EmptyInput",
    "EmptySlice",
    "GraphError",
    "GridTooLarge",
    "InfeasibleAllocation",
    "InvalidGrid",
    "ModelError",
    "NoConvergence",
    "NodeIndexError",
    "NotConvexModel",
    "NotMonotone",
    "OffGrid",
    "OutOfRange",
    "ParseError",
    "SchemaError",
    "SourceError",
    "TooFewSamples",
    "ToolkitError",
    "UnreachableError",
]
