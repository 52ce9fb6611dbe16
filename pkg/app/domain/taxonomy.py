from __future__ import annotations

from enum import Enum
from typing import Dict


class Order(str, Enum):
    """Relations of the nonnegative-orthant partial order between two distortion vectors."""

    EQUAL = "equal"
    LEQ = "leq"
    LT = "lt"
    LL = "ll"
    GEQ = "geq"
    GT = "gt"
    GG = "gg"
    INCOMPARABLE = "incomparable"


MIRRORED_ORDER: Dict[Order, Order] = {
    Order.EQUAL: Order.EQUAL,
    Order.LEQ: Order.GEQ,
    Order.LT: Order.GT,
    Order.LL: Order.GG,
    Order.GEQ: Order.LEQ,
    Order.GT: Order.LT,
    Order.GG: Order.LL,
    Order.INCOMPARABLE: Order.INCOMPARABLE,
}


class PointLabel(str, Enum):
    PARETO = "pareto"
    WEAK_ONLY = "weak_only"
    DOMINATED = "dominated"


# Compact codes used in label arrays
LABEL_CODES: Dict[PointLabel, int] = {
    PointLabel.PARETO: 0,
    PointLabel.WEAK_ONLY: 1,
    PointLabel.DOMINATED: 2,
}
LABELS_BY_CODE: Dict[int, PointLabel] = {code: label for label, code in LABEL_CODES.items()}


class ModelKind(str, Enum):
    LAYERED_EXPONENTIAL = "layered_exponential"
    TABULATED = "tabulated"


class CheckName(str, Enum):
    ENVELOPE = "envelope"
    ENVELOPE_DOMINANCE = "envelope_dominance"
    INVERSE_CONCAVITY = "inverse_concavity"
    FRONT_CONTINUITY = "front_continuity"
    BOUNDING_BOX = "bounding_box"
    MINKOWSKI_CONVEXITY = "minkowski_convexity"
    LEMMA1 = "lemma1"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    PLOTDATA = "plotdata"


__all__ = [
    "CheckName",
    "LABELS_BY_CODE",
    "LABEL_CODES",
    "MIRRORED_ORDER",
    "ModelKind",
    "Order",
    "OutputFormat",
    "PointLabel",
]
