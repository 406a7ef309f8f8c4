"""DBSCAN over geographic points, k-distance curves, and cluster summaries.

Conventions (fixed so results are reproducible and oracle-checkable):
  - neighborhoods are inclusive (distance <= eps) and count the point itself;
  - points are scanned in ascending ordinal; clusters are numbered in
    creation order; a border point belongs to the first cluster whose
    expansion reaches it, i.e. the cluster with the smallest minimal core
    ordinal among its core neighbors.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime
from typing import Sequence

import numpy as np

from .errors import InsufficientPoints
from .geo import GeoPoint, SpatialIndex, haversine_m, pairwise_distance_matrix, spherical_centroid
from .ingest import VehiclePing, stay_points

NOISE = -1
_UNVISITED = -2


@dataclass(frozen=True)
class DbscanParams:
    eps_m: float
    min_pts: int

    def __post_init__(self) -> None:
        if not self.eps_m > 0:
            raise ValueError("eps_m must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be at least 1")


@dataclass(frozen=True)
class ClusterAssignment:
    labels: tuple[int, ...]
    params: DbscanParams

    @property
    def n_clusters(self) -> int:
        return max(self.labels, default=NOISE) + 1

    @property
    def noise_count(self) -> int:
        return sum(1 for lb in self.labels if lb == NOISE)


@dataclass(frozen=True)
class KDistanceCurve:
    k: int
    sorted_dists_m: tuple[float, ...]


@dataclass(frozen=True)
class ClusterSummary:
    cluster_ordinal: int
    centroid: GeoPoint
    point_count: int
    unique_vehicles: int
    dwell_by_vehicle: dict[str, float]
    arrival_order: tuple[str, ...]
    departure_order: tuple[str, ...]
    rms_radius_m: float
    in_window_fraction: float


def dbscan(
    points: Sequence[GeoPoint],
    params: DbscanParams,
    dist_matrix: np.ndarray | None = None,
) -> ClusterAssignment:
    """Density-based clustering with the haversine metric.

    A precomputed pairwise distance matrix may be passed to skip the
    spatial index; results are identical either way.
    """
    n = len(points)
    if n == 0:
        return ClusterAssignment(labels=(), params=params)

    if dist_matrix is not None:
        adj = dist_matrix <= params.eps_m

        def neighbors(i: int) -> np.ndarray:
            return np.nonzero(adj[i])[0]

    else:
        index = SpatialIndex(points, cell_hint_m=params.eps_m)

        def neighbors(i: int) -> list[int]:
            return index.range_query(points[i], params.eps_m)

    labels = [_UNVISITED] * n
    cluster_id = 0
    for i in range(n):
        if labels[i] != _UNVISITED:
            continue
        nb = neighbors(i)
        if len(nb) < params.min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster_id
        seeds = deque(j for j in nb if labels[j] in (_UNVISITED, NOISE))
        while seeds:
            j = seeds.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster_id  # border point
                continue
            if labels[j] != _UNVISITED:
                continue
            labels[j] = cluster_id
            nb_j = neighbors(j)
            if len(nb_j) >= params.min_pts:
                seeds.extend(k for k in nb_j if labels[k] in (_UNVISITED, NOISE))
        cluster_id += 1
    return ClusterAssignment(labels=tuple(labels), params=params)


def k_distance_curve(
    points: Sequence[GeoPoint],
    k: int,
    dist_matrix: np.ndarray | None = None,
) -> KDistanceCurve:
    """Sorted distances from each point to its k-th nearest other point."""
    n = len(points)
    if k < 1 or k >= n:
        raise InsufficientPoints(f"k-distance needs 1 <= k < n (k={k}, n={n})")
    if dist_matrix is None:
        dist_matrix = pairwise_distance_matrix(points)
    # k-th nearest *other* point: column k after sorting each row (column 0
    # is the zero self-distance).
    part = np.partition(dist_matrix, k, axis=1)[:, k]
    return KDistanceCurve(k=k, sorted_dists_m=tuple(sorted(part.tolist())))


def elbow_index(curve: KDistanceCurve) -> int:
    """Index of maximal perpendicular distance from the normalized chord."""
    v = curve.sorted_dists_m
    n = len(v)
    if n < 3:
        raise InsufficientPoints("elbow detection needs at least 3 curve values")
    lo, hi = v[0], v[-1]
    if hi - lo < 1e-9:
        return 0
    best_i, best_d = 0, -1.0
    for i in range(n):
        x = i / (n - 1)
        y = (v[i] - lo) / (hi - lo)
        d = abs(x - y)  # chord of the normalized curve is y = x
        if d > best_d:
            best_i, best_d = i, d
    return best_i


def detect_elbow(curve: KDistanceCurve) -> float:
    """Curve value at the elbow; flat curves return the common value."""
    v = curve.sorted_dists_m
    if len(v) < 3:
        raise InsufficientPoints("elbow detection needs at least 3 curve values")
    if v[-1] - v[0] < 1e-9:
        return v[0]
    return v[elbow_index(curve)]


def summarize_clusters(
    assignment: ClusterAssignment,
    pings: Sequence[VehiclePing],
    window: tuple[datetime, datetime],
    stay_max_roam_m: float = 50.0,
    stay_min_dwell_s: float = 300.0,
) -> list[ClusterSummary]:
    """Per-cluster attributes: centroid, dwell, vehicle counts, orderings."""
    if len(assignment.labels) != len(pings):
        raise ValueError("labels and pings must be index-aligned")
    summaries: list[ClusterSummary] = []
    t0, t1 = window
    for cid in range(assignment.n_clusters):
        members = [p for p, lb in zip(pings, assignment.labels) if lb == cid]
        if not members:
            continue
        centroid = spherical_centroid([p.position for p in members])
        sq = [haversine_m(p.position, centroid) ** 2 for p in members]
        rms = math.sqrt(sum(sq) / len(sq))

        by_vehicle: dict[str, list[VehiclePing]] = {}
        for p in members:
            by_vehicle.setdefault(p.vehicle_id, []).append(p)
        dwell: dict[str, float] = {}
        for vid, track in by_vehicle.items():
            track.sort(key=lambda p: p.time)
            sps = stay_points(track, max_roam_m=stay_max_roam_m, min_dwell_s=stay_min_dwell_s)
            if sps:
                dwell[vid] = sum(sp.dwell_s for sp in sps)
            else:
                dwell[vid] = (track[-1].time - track[0].time).total_seconds()

        arrival = sorted(by_vehicle, key=lambda v: (by_vehicle[v][0].time, v))
        departure = sorted(by_vehicle, key=lambda v: (by_vehicle[v][-1].time, v))
        in_window = sum(1 for p in members if t0 <= p.time <= t1) / len(members)
        summaries.append(
            ClusterSummary(
                cluster_ordinal=cid,
                centroid=centroid,
                point_count=len(members),
                unique_vehicles=len(by_vehicle),
                dwell_by_vehicle=dwell,
                arrival_order=tuple(arrival),
                departure_order=tuple(departure),
                rms_radius_m=rms,
                in_window_fraction=in_window,
            )
        )
    return summaries
