"""Executable checks for the hypotheses and conclusions of the scalarization coverage results.

Every checker returns a ConditionReport whose witnesses are the counterexamples found;
a report passes exactly when it has none.
"""

from __future__ import annotations

from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from app.domain.errors import (
    DimensionMismatch,
    EmptyFront,
    EmptyInput,
    NotMonotone,
    OutOfRange,
    TooFewSamples,
    ToolkitError,
)
from app.domain.graph import LayerDag
from app.domain.schemas import ConditionReport, CoverageReport
from app.domain.taxonomy import CheckName
from app.domain.validators import dedupe_rows
from app.infra import get_logger, get_settings
from app.services.distortion import RdEnvelope, inverse_rate, subgraph_rates
from app.services.pareto import (
    DOMINATED,
    ParetoFront,
    PointCloud,
    dominance_labels,
    filter_front,
    lattice_size,
    pareto_set,
)
from app.services.scalarize import S0Set, weight_lattice

logger = get_logger(__name__)

ENVELOPE_TOL = 1e-12
CONCAVITY_TOL = 1e-9
BOX_SLACK = 1e-9
SUPPORT_TOL = 1e-7
SUPPORT_RESOLUTION = 64
LEMMA1_TOL = 1e-12
MAX_WITNESSES = 100

_BLOCK_CELLS = 4_000_000
# Bisection tolerance for the inverse-map concavity probe
_PROBE_TOL = 1e-14


def _vector(row: np.ndarray) -> List[float]:
    return [float(v) for v in row]


def _truncation_note(found: int) -> Optional[str]:
    if found > MAX_WITNESSES:
        return f"{found} violations found, first {MAX_WITNESSES} listed"
    return None


def check_envelope(
    samples: Union[RdEnvelope, Iterable[Tuple[float, float]]], tol: float = ENVELOPE_TOL
) -> ConditionReport:
    """Strict decrease of consecutive samples and nonnegative slope increments."""
    points = samples.samples() if isinstance(samples, RdEnvelope) else list(samples)
    if len(points) < 3:
        raise TooFewSamples(f"envelope check needs at least 3 samples, got {len(points)}")
    data = np.array(sorted(points), dtype=float)
    rates, values = data[:, 0], data[:, 1]
    gaps = np.diff(rates)
    if np.any(gaps <= 0):
        index = int(np.flatnonzero(gaps <= 0)[0])
        raise TooFewSamples(f"duplicate rate {rates[index]} in envelope samples")

    witnesses: List[Dict[str, Any]] = []
    drops = np.diff(values)
    for index in np.flatnonzero(drops >= 0):
        witnesses.append(
            {
                "kind": "not_decreasing",
                "pair": [_vector(data[index]), _vector(data[index + 1])],
                "difference": float(drops[index]),
            }
        )
    slopes = drops / gaps
    bends = np.diff(slopes)
    for index in np.flatnonzero(bends < -tol):
        witnesses.append(
            {
                "kind": "not_convex",
                "triple": [_vector(data[index + k]) for k in range(3)],
                "second_difference": float(bends[index]),
            }
        )
    found = len(witnesses)
    return ConditionReport.from_witnesses(
        CheckName.ENVELOPE,
        witnesses[:MAX_WITNESSES],
        {"tol": tol},
        _truncation_note(found),
    )


def check_envelope_dominance(
    cloud: PointCloud,
    envelopes: Sequence[RdEnvelope],
    dag: LayerDag,
    tol: float = ENVELOPE_TOL,
) -> ConditionReport:
    """D_i(r_i(b)) <= g_i(b) + tol for every cloud allocation b and resolution i."""
    if len(envelopes) != cloud.dimension or dag.node_count != cloud.dimension:
        raise DimensionMismatch(
            f"{len(envelopes)} envelopes for {cloud.dimension} resolutions"
        )
    rates = subgraph_rates(dag, cloud.allocations)
    witnesses: List[Dict[str, Any]] = []
    found = 0
    for envelope in envelopes:
        i = envelope.resolution
        try:
            bounds = envelope.values_at(rates[:, i])
        except OutOfRange as exc:
            found += 1
            witnesses.append(
                {"kind": "rate_outside_envelope", "resolution": i, "error": str(exc)}
            )
            continue
        excess = bounds - cloud.distortions[:, i]
        bad = np.flatnonzero(excess > tol)
        found += bad.size
        for index in bad[: max(0, MAX_WITNESSES - len(witnesses))]:
            witnesses.append(
                {
                    "kind": "above_distortion",
                    "resolution": i,
                    "point": int(index),
                    "rate": float(rates[index, i]),
                    "envelope": float(bounds[index]),
                    "distortion": float(cloud.distortions[index, i]),
                }
            )
    return ConditionReport.from_witnesses(
        CheckName.ENVELOPE_DOMINANCE, witnesses, {"tol": tol}, _truncation_note(found)
    )


def probe_pairs(envelope: RdEnvelope, count: int = 100, seed: int = 0) -> np.ndarray:
    """Deterministic distortion pairs inside the envelope image."""
    lo, hi = envelope.domain
    top = envelope.continuous_value(lo)
    bottom = envelope.continuous_value(hi)
    rng = np.random.default_rng(seed)
    return rng.uniform(bottom, top, size=(count, 2))


def check_inverse_concavity(
    envelope: RdEnvelope,
    pairs: Optional[Iterable[Tuple[float, float]]] = None,
    tol: float = CONCAVITY_TOL,
) -> ConditionReport:
    """Midpoint curvature of the inverse rate map q_i on distortion pairs.

    q_i inverts a strictly decreasing convex envelope, so it is decreasing and -q_i is
    concave: q_i((d1 + d2) / 2) <= (q_i(d1) + q_i(d2)) / 2 + tol on every pair.
    """
    pairs = probe_pairs(envelope) if pairs is None else np.asarray(list(pairs), dtype=float)
    witnesses: List[Dict[str, Any]] = []
    found = 0
    for d1, d2 in pairs:
        q1 = inverse_rate(envelope, d1, tol=_PROBE_TOL)
        q2 = inverse_rate(envelope, d2, tol=_PROBE_TOL)
        mid = inverse_rate(envelope, 0.5 * (d1 + d2), tol=_PROBE_TOL)
        excess = mid - 0.5 * (q1 + q2)
        if excess > tol:
            found += 1
            if len(witnesses) < MAX_WITNESSES:
                witnesses.append(
                    {
                        "kind": "midpoint_above_chord",
                        "resolution": envelope.resolution,
                        "distortions": [float(d1), float(d2)],
                        "excess": float(excess),
                    }
                )
    return ConditionReport.from_witnesses(
        CheckName.INVERSE_CONCAVITY,
        witnesses,
        {"tol": tol, "bisection_tol": _PROBE_TOL},
        _truncation_note(found),
    )


def _minimum_spanning_edges(points: np.ndarray) -> List[Tuple[int, int, float]]:
    # Prim on the complete Euclidean graph
    m = points.shape[0]
    in_tree = np.zeros(m, dtype=bool)
    in_tree[0] = True
    best = np.linalg.norm(points - points[0], axis=1)
    link = np.zeros(m, dtype=np.int64)
    edges: List[Tuple[int, int, float]] = []
    for _ in range(m - 1):
        candidates = np.where(in_tree, np.inf, best)
        node = int(np.argmin(candidates))
        edges.append((int(link[node]), node, float(best[node])))
        in_tree[node] = True
        distance = np.linalg.norm(points - points[node], axis=1)
        closer = distance < best
        best = np.where(closer, distance, best)
        link = np.where(closer, node, link)
    return edges


def check_front_continuity(front: ParetoFront, gap_threshold: float) -> ConditionReport:
    """Largest minimum-spanning-tree edge between distinct weakly Pareto distortions."""
    points = front.distinct_weak_distortions()
    if points.shape[0] == 0:
        raise EmptyFront("front has no weakly Pareto points")
    edges = _minimum_spanning_edges(points)
    longest = max((gap for _, _, gap in edges), default=0.0)
    gaps = sorted((edge for edge in edges if edge[2] > gap_threshold), key=lambda e: -e[2])
    witnesses = [
        {"from": _vector(points[a]), "to": _vector(points[b]), "gap": gap}
        for a, b, gap in gaps[:MAX_WITNESSES]
    ]
    return ConditionReport.from_witnesses(
        CheckName.FRONT_CONTINUITY,
        witnesses,
        {"gap_threshold": float(gap_threshold)},
        f"longest gap {longest:.6g} over {points.shape[0]} distinct points",
    )


def _curve_order(points: np.ndarray) -> np.ndarray:
    # First coordinate ascending, ties by later coordinates descending
    keys = [-points[:, k] for k in range(points.shape[1] - 1, 0, -1)] + [points[:, 0]]
    return np.lexsort(keys)


def _box_violations(
    points: np.ndarray, slack: float, limit: int
) -> Tuple[List[Tuple[int, int, int]], int]:
    """Triples (a, c, b) with c between a and b in curve order but outside their box."""
    triples: List[Tuple[int, int, int]] = []
    found = 0
    m = points.shape[0]
    for a in range(m - 2):
        between = points[a + 1 : m - 1]
        running_min = np.minimum.accumulate(between, axis=0)
        running_max = np.maximum.accumulate(between, axis=0)
        ends = points[a + 2 :]
        low = np.minimum(points[a], ends) - slack
        high = np.maximum(points[a], ends) + slack
        bad = np.any(running_min < low, axis=1) | np.any(running_max > high, axis=1)
        for offset in np.flatnonzero(bad):
            b = a + 2 + int(offset)
            inner = points[a + 1 : b]
            outside = np.any(inner < low[offset], axis=1) | np.any(inner > high[offset], axis=1)
            for c in np.flatnonzero(outside):
                found += 1
                if len(triples) < limit:
                    triples.append((a, a + 1 + int(c), b))
    return triples, found


def check_bounding_box(front: ParetoFront, slack: float = BOX_SLACK) -> ConditionReport:
    """Points between two weakly Pareto points along the front lie in their bounding box.

    Two resolutions use the front's own labels; with more, the check runs on the weakly
    Pareto set of every coordinate-pair projection.
    """
    if len(front) == 0 or not np.any(front.weak_mask):
        raise EmptyFront("front has no weakly Pareto points")
    weak = front.weak_distortions
    n = weak.shape[1]
    if n == 1:
        return ConditionReport.from_witnesses(
            CheckName.BOUNDING_BOX, [], {"slack": slack}, "single resolution"
        )
    if n == 2:
        projections = [((0, 1), weak)]
    else:
        projections = []
        for p in range(n):
            for q in range(p + 1, n):
                plane = dedupe_rows(weak[:, [p, q]], 0.0)
                labels = dominance_labels(plane)
                projections.append(((p, q), plane[labels != DOMINATED]))

    witnesses: List[Dict[str, Any]] = []
    found = 0
    for pair, points in projections:
        ordered = points[_curve_order(points)]
        triples, count = _box_violations(ordered, slack, MAX_WITNESSES - len(witnesses))
        found += count
        for a, c, b in triples:
            witnesses.append(
                {
                    "pair": list(pair),
                    "a": _vector(ordered[a]),
                    "c": _vector(ordered[c]),
                    "b": _vector(ordered[b]),
                }
            )
    return ConditionReport.from_witnesses(
        CheckName.BOUNDING_BOX, witnesses, {"slack": slack}, _truncation_note(found)
    )


def _support_margin(point: np.ndarray, others: np.ndarray) -> float:
    """min over normalized w >= 0 of max_x w . (point - x), via linear programming."""
    n = point.shape[0]
    a_ub = np.hstack([point - others, -np.ones((others.shape[0], 1))])
    result = linprog(
        c=np.r_[np.zeros(n), 1.0],
        A_ub=a_ub,
        b_ub=np.zeros(others.shape[0]),
        A_eq=np.r_[np.ones(n), 0.0][None, :],
        b_eq=[1.0],
        bounds=[(0.0, None)] * n + [(None, None)],
        method="highs",
    )
    if not result.success:
        raise ToolkitError(f"support LP failed for {point.tolist()}: {result.message}")
    return float(result.fun)


def _support_resolution(dimension: int, requested: int) -> int:
    cap = get_settings().support_lattice_cap
    resolution = requested
    while resolution > 1 and lattice_size(resolution, dimension - 1) > cap:
        resolution //= 2
    return resolution


def check_minkowski_convexity(
    cloud: Union[PointCloud, ParetoFront, Iterable[Any]],
    tol: float = SUPPORT_TOL,
    resolution: int = SUPPORT_RESOLUTION,
) -> ConditionReport:
    """Every weakly Pareto point of the cloud is supported by a nonnegative hyperplane."""
    if isinstance(cloud, ParetoFront):
        front = cloud
    elif isinstance(cloud, PointCloud):
        front = filter_front(cloud)
    else:
        rows = list(cloud)
        if not rows:
            raise EmptyInput("no distortion vectors given")
        front = filter_front(PointCloud.from_distortions(rows))
    weak = front.distinct_weak_distortions()
    n = weak.shape[1]

    lattice_resolution = _support_resolution(n, resolution)
    if lattice_resolution < resolution:
        logger.warning(
            "Support lattice reduced from %d to %d for N=%d", resolution, lattice_resolution, n
        )
    weights = weight_lattice(n, lattice_resolution, cap=get_settings().support_lattice_cap)
    supported = np.zeros(weak.shape[0], dtype=bool)
    chunk = max(1, _BLOCK_CELLS // max(weak.shape[0], 1))
    for start in range(0, weights.shape[0], chunk):
        objectives = weights[start : start + chunk] @ weak.T
        minima = objectives.min(axis=1, keepdims=True)
        supported |= np.any(objectives <= minima + tol, axis=0)

    witnesses: List[Dict[str, Any]] = []
    unsettled = np.flatnonzero(~supported)
    for index in unsettled:
        margin = _support_margin(weak[index], weak)
        if margin > tol:
            witnesses.append({"point": _vector(weak[index]), "margin": margin})
    logger.info(
        "Support check: %d weak points, %d settled by lattice, %d unsupported",
        weak.shape[0],
        int(supported.sum()),
        len(witnesses),
    )
    found = len(witnesses)
    return ConditionReport.from_witnesses(
        CheckName.MINKOWSKI_CONVEXITY,
        witnesses[:MAX_WITNESSES],
        {"tol": tol, "lattice_resolution": float(lattice_resolution)},
        _truncation_note(found),
    )


def _nearest_distances(points: np.ndarray, targets: np.ndarray) -> np.ndarray:
    distances = np.empty(points.shape[0])
    chunk = max(1, _BLOCK_CELLS // max(targets.shape[0] * targets.shape[1], 1))
    for start in range(0, points.shape[0], chunk):
        block = points[start : start + chunk, None, :] - targets[None, :, :]
        distances[start : start + chunk] = np.sqrt((block**2).sum(axis=2)).min(axis=1)
    return distances


def compare_S0_vs_weak_pareto(
    s0: S0Set, front: ParetoFront, match_tol: float
) -> CoverageReport:
    """Match every distinct weakly Pareto distortion to its nearest S0 distortion."""
    weak = front.distinct_weak_distortions()
    found = s0.matrix()
    if found.size == 0:
        raise EmptyInput("S0 set has no distortions")
    if found.shape[1] != weak.shape[1]:
        raise DimensionMismatch(
            f"S0 distortions have {found.shape[1]} components, front has {weak.shape[1]}"
        )
    distances = _nearest_distances(weak, found)
    covered = distances <= match_tol
    report = CoverageReport(
        weak_pareto_count=int(weak.shape[0]),
        covered_count=int(covered.sum()),
        missed=[tuple(float(v) for v in row) for row in weak[~covered]],
        match_tolerance=float(match_tol),
    )
    logger.info(
        "Coverage %d/%d at match tolerance %g",
        report.covered_count,
        report.weak_pareto_count,
        match_tol,
    )
    return report


def check_lemma1(
    front: ParetoFront,
    budget: Optional[float] = None,
    tol: float = LEMMA1_TOL,
    step: Optional[float] = None,
    require_saturation: bool = False,
) -> ConditionReport:
    """Cloud = weak set + cone on a finite grid, cross-checking the front's labels.

    Every weak-labelled point must be genuinely weakly Pareto, and every cloud point must
    lie above (slack tol) a weak-labelled point. With require_saturation the covering point
    must also spend the budget to within one grid step, which holds for strictly decreasing
    models only; it is skipped when the grid step is unknown.
    """
    if len(front) == 0:
        raise EmptyInput("front is empty")
    budget = front.budget if budget is None else budget
    step = front.grid_step if step is None else step
    distortions = front.cloud.distortions
    truth = pareto_set(distortions)
    witnesses: List[Dict[str, Any]] = []
    found = 0

    for index in front.weak_indices:
        row = distortions[index]
        below = np.all(truth < row - tol, axis=1)
        if np.any(below):
            found += 1
            if len(witnesses) < MAX_WITNESSES:
                witnesses.append(
                    {
                        "kind": "not_weakly_pareto",
                        "point": int(index),
                        "distortion": _vector(row),
                        "dominated_by": _vector(truth[np.flatnonzero(below)[0]]),
                    }
                )

    anchor_sets = [("not_above_weak_set", front.weak_mask)]
    saturating = require_saturation and step is not None
    if saturating:
        totals = front.cloud.allocations.sum(axis=1)
        full = totals > budget - step + 1e-9 * max(budget, 1.0)
        anchor_sets.append(("not_above_saturated_point", front.weak_mask & full))
    # Every cloud point lies above a Pareto point, so covering the Pareto set covers the cloud
    for kind, anchors in anchor_sets:
        anchor_rows = distortions[anchors]
        for row in dedupe_rows(truth, 0.0):
            covered = anchor_rows.size and np.any(np.all(anchor_rows <= row + tol, axis=1))
            if not covered:
                found += 1
                if len(witnesses) < MAX_WITNESSES:
                    witnesses.append({"kind": kind, "distortion": _vector(row)})

    tolerances = {"tol": tol, "budget": float(budget)}
    if saturating:
        tolerances["saturation_step"] = float(step)
    return ConditionReport.from_witnesses(
        CheckName.LEMMA1, witnesses, tolerances, _truncation_note(found)
    )


def _precondition_report(name: CheckName, exc: ToolkitError, **context: Any) -> ConditionReport:
    return ConditionReport.from_witnesses(
        name, [{"kind": "precondition", "error": str(exc), **context}], {}
    )


def run_checks(
    front: ParetoFront,
    envelopes: Sequence[RdEnvelope],
    dag: Optional[LayerDag] = None,
    *,
    envelope_tol: float = ENVELOPE_TOL,
    concavity_tol: float = CONCAVITY_TOL,
    gap_threshold: Optional[float] = None,
    support_tol: float = SUPPORT_TOL,
    lemma_tol: float = LEMMA1_TOL,
    require_saturation: bool = False,
) -> List[ConditionReport]:
    """All hypothesis and conclusion checks of one experiment, in a fixed order.

    Per-resolution envelope and concavity reports come first, ordered by resolution.
    A check whose preconditions do not hold is reported as failed with the reason.
    """
    reports: List[ConditionReport] = []
    for envelope in envelopes:
        try:
            reports.append(check_envelope(envelope, envelope_tol))
        except TooFewSamples as exc:
            reports.append(
                _precondition_report(CheckName.ENVELOPE, exc, resolution=envelope.resolution)
            )
    if dag is not None:
        reports.append(check_envelope_dominance(front.cloud, envelopes, dag, envelope_tol))
    for envelope in envelopes:
        try:
            reports.append(check_inverse_concavity(envelope, tol=concavity_tol))
        except (NotMonotone, OutOfRange) as exc:
            reports.append(
                _precondition_report(
                    CheckName.INVERSE_CONCAVITY, exc, resolution=envelope.resolution
                )
            )
    if gap_threshold is None:
        gap_threshold = 4.0 * (front.grid_step or 1.0)
    reports.append(check_front_continuity(front, gap_threshold))
    reports.append(check_bounding_box(front))
    reports.append(check_minkowski_convexity(front, support_tol))
    reports.append(check_lemma1(front, tol=lemma_tol, require_saturation=require_saturation))
    failed = [r.check_name.value for r in reports if not r.passed]
    logger.info("Ran %d checks, %d failed %s", len(reports), len(failed), failed or "")
    return reports


__all__ = [
    "BOX_SLACK",
    "CONCAVITY_TOL",
    "ENVELOPE_TOL",
    "LEMMA1_TOL",
    "MAX_WITNESSES",
    "SUPPORT_TOL",
    "check_bounding_box",
    "check_envelope",
    "check_envelope_dominance",
    "check_front_continuity",
    "check_inverse_concavity",
    "check_lemma1",
    "check_minkowski_convexity",
    "compare_S0_vs_weak_pareto",
    "probe_pairs",
    "run_checks",
]
