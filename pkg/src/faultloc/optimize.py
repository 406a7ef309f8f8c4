"""Parameter search loop: sample DBSCAN candidates, score clusters by
confidence, shrink the search space toward high scores, and emit the best
cluster's centroid as the predicted fault location."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .cluster import (
    ClusterAssignment,
    ClusterSummary,
    DbscanParams,
    dbscan,
    detect_elbow,
    k_distance_curve,
    summarize_clusters,
)
from .errors import NoCluster, TooFewPings
from .geo import GeoPoint, pairwise_distance_matrix
from .ingest import OutageContext, OutageEvent, motion_features

MIN_PINGS = 8
EPS_FLOOR_M = 10.0
EPS_CEIL_M = 1000.0
MIN_PTS_FLOOR = 4
MIN_PTS_CEIL = 100

# Above this many pings the full pairwise matrix is not worth its memory;
# dbscan falls back to the grid index.
MATRIX_LIMIT = 3000


@dataclass(frozen=True)
class SearchSpace:
    eps_range_m: tuple[float, float]
    min_pts_range: tuple[int, int]

    def __post_init__(self) -> None:
        if not (0 < self.eps_range_m[0] <= self.eps_range_m[1]):
            raise ValueError("eps range must satisfy 0 < lo <= hi")
        if not (0 < self.min_pts_range[0] <= self.min_pts_range[1]):
            raise ValueError("min_pts range must satisfy 0 < lo <= hi")

    def contains(self, other: "SearchSpace") -> bool:
        return (
            self.eps_range_m[0] <= other.eps_range_m[0]
            and other.eps_range_m[1] <= self.eps_range_m[1]
            and self.min_pts_range[0] <= other.min_pts_range[0]
            and other.min_pts_range[1] <= self.min_pts_range[1]
        )


@dataclass(frozen=True)
class ScoreWeights:
    w_dwell: float = 1.0
    w_vehicles: float = 1.0
    w_temporal: float = 1.0
    w_compact: float = 1.0

    def __post_init__(self) -> None:
        ws = (self.w_dwell, self.w_vehicles, self.w_temporal, self.w_compact)
        if any(w < 0 for w in ws) or sum(ws) <= 0:
            raise ValueError("weights must be non-negative with positive sum")


@dataclass
class Candidate:
    params: DbscanParams
    best_summary: ClusterSummary | None
    confidence: float
    assignment: ClusterAssignment | None = None


@dataclass(frozen=True)
class Prediction:
    outage_id: str
    location: GeoPoint
    confidence: float
    params: DbscanParams
    cluster: ClusterSummary
    noise_count: int
    rounds_run: int
    seed: int


@dataclass(frozen=True)
class OptimizeConfig:
    rounds: int = 5
    samples_per_round: int = 24
    keep_fraction: float = 0.25
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    seed: int = 0


def confidence_score(
    summary: ClusterSummary, outage: OutageEvent, weights: ScoreWeights, eps_m: float
) -> float:
    """Weighted mean of dwell, vehicle-count, temporal, and compactness terms."""
    dwell_total = sum(summary.dwell_by_vehicle.values())
    c_dwell = min(dwell_total / outage.duration_s, 1.0)
    c_vehicles = min(summary.unique_vehicles / 3.0, 1.0)
    c_temporal = summary.in_window_fraction
    c_compact = max(0.0, 1.0 - summary.rms_radius_m / eps_m)
    total = weights.w_dwell + weights.w_vehicles + weights.w_temporal + weights.w_compact
    return (
        weights.w_dwell * c_dwell
        + weights.w_vehicles * c_vehicles
        + weights.w_temporal * c_temporal
        + weights.w_compact * c_compact
    ) / total


def initial_search_space(
    context: OutageContext, dist_matrix: np.ndarray | None = None
) -> SearchSpace:
    """Seed the eps range from step-distance quantiles and the k-distance elbow."""
    n = len(context.pings)
    if n < MIN_PINGS:
        raise TooFewPings(f"outage {context.outage.outage_id}: {n} pings < {MIN_PINGS}")
    steps = [f.step_m for f in motion_features(context.pings)]
    p10 = float(np.percentile(steps, 10)) if steps else EPS_FLOOR_M
    curve = k_distance_curve([p.position for p in context.pings], k=4, dist_matrix=dist_matrix)
    elbow = detect_elbow(curve)
    eps_lo = max(EPS_FLOOR_M, p10)
    eps_hi = min(EPS_CEIL_M, 2.0 * elbow)
    if eps_hi < eps_lo:
        eps_hi = eps_lo
    mp_hi = min(MIN_PTS_CEIL, max(MIN_PTS_FLOOR, int(0.05 * n)))
    return SearchSpace(eps_range_m=(eps_lo, eps_hi), min_pts_range=(MIN_PTS_FLOOR, mp_hi))


def sample_candidates(space: SearchSpace, n: int, seed: int) -> list[DbscanParams]:
    """Log-uniform eps, uniform-integer min_pts; deterministic per seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = random.Random(seed)
    lo, hi = space.eps_range_m
    out = []
    for _ in range(n):
        eps = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        eps = min(max(eps, lo), hi)
        mp = rng.randint(space.min_pts_range[0], space.min_pts_range[1])
        out.append(DbscanParams(eps_m=eps, min_pts=mp))
    return out


def refine_search_space(
    space: SearchSpace, scored: Sequence[Candidate], keep_fraction: float
) -> SearchSpace:
    """Shrink ranges around the top candidates, re-widen 10%, clamp to space."""
    if not scored:
        raise ValueError("scored candidate list must be nonempty")
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must be in (0, 1]")
    if all(c.confidence == 0 for c in scored):
        return space
    k = math.ceil(keep_fraction * len(scored))
    top = sorted(scored, key=lambda c: c.confidence, reverse=True)[:k]
    eps_lo = min(c.params.eps_m for c in top) * 0.9
    eps_hi = max(c.params.eps_m for c in top) * 1.1
    mp_lo = math.floor(min(c.params.min_pts for c in top) * 0.9)
    mp_hi = math.ceil(max(c.params.min_pts for c in top) * 1.1)
    eps_lo = min(max(eps_lo, space.eps_range_m[0]), space.eps_range_m[1])
    eps_hi = min(max(eps_hi, space.eps_range_m[0]), space.eps_range_m[1])
    mp_lo = min(max(mp_lo, space.min_pts_range[0]), space.min_pts_range[1])
    mp_hi = min(max(mp_hi, space.min_pts_range[0]), space.min_pts_range[1])
    return SearchSpace(eps_range_m=(eps_lo, eps_hi), min_pts_range=(mp_lo, mp_hi))


def _candidate_key(c: Candidate) -> tuple:
    """Tie-break chain: score, point count, compactness, then smaller eps."""
    s = c.best_summary
    return (
        c.confidence,
        s.point_count if s else -1,
        -(s.rms_radius_m if s else math.inf),
        -c.params.eps_m,
    )


def evaluate_candidate(
    context: OutageContext,
    params: DbscanParams,
    weights: ScoreWeights,
    dist_matrix: np.ndarray | None = None,
) -> Candidate:
    """One dbscan + summarize + score pass; confidence is the best cluster's."""
    points = [p.position for p in context.pings]
    assignment = dbscan(points, params, dist_matrix=dist_matrix)
    summaries = summarize_clusters(assignment, context.pings, context.window)
    best: ClusterSummary | None = None
    best_score = 0.0
    for s in summaries:
        score = confidence_score(s, context.outage, weights, params.eps_m)
        if best is None or (score, s.point_count, -s.rms_radius_m) > (
            best_score, best.point_count, -best.rms_radius_m
        ):
            best, best_score = s, score
    return Candidate(
        params=params,
        best_summary=best,
        confidence=best_score if best is not None else 0.0,
        assignment=assignment,
    )


def optimize(
    context: OutageContext,
    cfg: OptimizeConfig = OptimizeConfig(),
    trace: list | None = None,
) -> Prediction:
    """Run the sample / cluster / score / refine loop and return the winner."""
    points = [p.position for p in context.pings]
    dist_matrix = pairwise_distance_matrix(points) if len(points) <= MATRIX_LIMIT else None
    space = initial_search_space(context, dist_matrix=dist_matrix)
    initial_space = space
    rng = random.Random(cfg.seed)

    best: Candidate | None = None
    rounds_run = 0
    for rnd in range(cfg.rounds):
        prev_best_score = best.confidence if best is not None else None
        params_list = sample_candidates(space, cfg.samples_per_round, seed=rng.randrange(2**31))
        scored = [
            evaluate_candidate(context, params, cfg.weights, dist_matrix=dist_matrix)
            for params in params_list
        ]
        for c in scored:
            if c.best_summary is None:
                continue
            if best is None or _candidate_key(c) > _candidate_key(best):
                best = c
        rounds_run = rnd + 1
        space = refine_search_space(space, scored, cfg.keep_fraction)
        if not initial_space.contains(space):
            raise AssertionError("refined space escaped the initial bounds")
        if trace is not None:
            trace.append(
                {
                    "round": rnd,
                    "space": space,
                    "best_confidence": best.confidence if best is not None else 0.0,
                }
            )
        if (
            prev_best_score is not None
            and best is not None
            and best.confidence - prev_best_score < 1e-3
        ):
            break

    if best is None or best.best_summary is None or best.assignment is None:
        raise NoCluster(f"outage {context.outage.outage_id}: no candidate formed a cluster")
    return Prediction(
        outage_id=context.outage.outage_id,
        location=best.best_summary.centroid,
        confidence=best.confidence,
        params=best.params,
        cluster=best.best_summary,
        noise_count=best.assignment.noise_count,
        rounds_run=rounds_run,
        seed=cfg.seed,
    )


def min_pts_sensitivity(
    context: OutageContext,
    eps_m: float,
    min_pts_values: Sequence[int],
    weights: ScoreWeights = ScoreWeights(),
) -> dict[int, dict[str, float]]:
    """Cluster count and best confidence at fixed eps across min_pts values."""
    if not min_pts_values:
        raise ValueError("min_pts_values must be nonempty")
    points = [p.position for p in context.pings]
    dist_matrix = pairwise_distance_matrix(points) if len(points) <= MATRIX_LIMIT else None
    table: dict[int, dict[str, float]] = {}
    for mp in min_pts_values:
        cand = evaluate_candidate(
            context, DbscanParams(eps_m=eps_m, min_pts=mp), weights, dist_matrix=dist_matrix
        )
        assert cand.assignment is not None
        table[mp] = {
            "cluster_count": cand.assignment.n_clusters,
            "best_confidence": cand.confidence,
            "noise_count": cand.assignment.noise_count,
        }
    return table
