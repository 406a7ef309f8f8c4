"""Geodesic primitives on a spherical Earth model.

All coordinates are WGS84 latitude/longitude in degrees; all distances are
meters on a sphere of radius 6,371,000 m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateCentroid, EmptyInput, PoleProximity

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEG_LAT = 111_194.9  # EARTH_RADIUS_M * pi / 180, rounded

# Below this many points a grid buys nothing; a vectorized scan wins.
LINEAR_SCAN_THRESHOLD = 256


@dataclass(frozen=True)
class GeoPoint:
    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat_deg) and math.isfinite(self.lon_deg)):
            raise ValueError("coordinates must be finite")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat_deg}")
        if not -180.0 <= self.lon_deg < 180.0:
            raise ValueError(f"longitude out of range: {self.lon_deg}")


@dataclass(frozen=True)
class BoundingBox:
    min_lat_deg: float
    max_lat_deg: float
    min_lon_deg: float
    max_lon_deg: float

    def __post_init__(self) -> None:
        if self.min_lat_deg > self.max_lat_deg or self.min_lon_deg > self.max_lon_deg:
            raise ValueError("bounding box min must not exceed max")

    def contains(self, p: GeoPoint) -> bool:
        return (
            self.min_lat_deg <= p.lat_deg <= self.max_lat_deg
            and self.min_lon_deg <= p.lon_deg <= self.max_lon_deg
        )


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two points."""
    phi1 = math.radians(a.lat_deg)
    phi2 = math.radians(b.lat_deg)
    dphi = math.radians(b.lat_deg - a.lat_deg)
    dlam = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def haversine_m_vec(lats_deg: np.ndarray, lons_deg: np.ndarray, center: GeoPoint) -> np.ndarray:
    """Vectorized haversine from many points to one center."""
    phi1 = np.radians(lats_deg)
    phi2 = math.radians(center.lat_deg)
    dphi = np.radians(center.lat_deg - lats_deg)
    dlam = np.radians(center.lon_deg - lons_deg)
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * math.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def pairwise_distance_matrix(points: Sequence[GeoPoint]) -> np.ndarray:
    """All-pairs haversine distances, shape (n, n)."""
    lat = np.radians([p.lat_deg for p in points])
    lon = np.radians([p.lon_deg for p in points])
    dphi = lat[:, None] - lat[None, :]
    dlam = lon[:, None] - lon[None, :]
    h = np.sin(dphi / 2.0) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def spherical_centroid(points: Sequence[GeoPoint]) -> GeoPoint:
    """Mean of 3D unit vectors, renormalized back to lat/lon."""
    if not points:
        raise EmptyInput("spherical_centroid requires at least one point")
    x = y = z = 0.0
    for p in points:
        phi = math.radians(p.lat_deg)
        lam = math.radians(p.lon_deg)
        x += math.cos(phi) * math.cos(lam)
        y += math.cos(phi) * math.sin(lam)
        z += math.sin(phi)
    n = len(points)
    x, y, z = x / n, y / n, z / n
    norm = math.sqrt(x * x + y * y + z * z)
    if norm < 1e-9:
        raise DegenerateCentroid("mean vector vanishes (antipodal inputs)")
    lat = math.degrees(math.asin(max(-1.0, min(1.0, z / norm))))
    lon = math.degrees(math.atan2(y, x))
    if lon >= 180.0:
        lon -= 360.0
    return GeoPoint(lat, lon)


def buffered_bbox(geometry: Sequence[GeoPoint], buffer_m: float) -> BoundingBox:
    """Envelope of the vertices expanded by buffer_m on all sides."""
    if not geometry:
        raise EmptyInput("buffered_bbox requires at least one vertex")
    if buffer_m < 0:
        raise ValueError("buffer_m must be non-negative")
    min_lat = min(p.lat_deg for p in geometry)
    max_lat = max(p.lat_deg for p in geometry)
    min_lon = min(p.lon_deg for p in geometry)
    max_lon = max(p.lon_deg for p in geometry)
    if max(abs(min_lat), abs(max_lat)) > 85.0:
        raise PoleProximity("bounding boxes are unreliable above 85 degrees latitude")
    dlat = buffer_m / METERS_PER_DEG_LAT
    mid_lat = (min_lat + max_lat) / 2.0
    dlon = dlat / math.cos(math.radians(mid_lat))
    return BoundingBox(min_lat - dlat, max_lat + dlat, min_lon - dlon, max_lon + dlon)


class SpatialIndex:
    """Uniform lat/lon grid over an immutable point list.

    Falls back to a vectorized linear scan for small point sets. Query
    results are always exactly the set a linear scan would return.
    """

    def __init__(self, points: Sequence[GeoPoint], cell_hint_m: float = 250.0):
        self._points = tuple(points)
        self._lats = np.array([p.lat_deg for p in points], dtype=float)
        self._lons = np.array([p.lon_deg for p in points], dtype=float)
        self._cell_deg = max(cell_hint_m, 1.0) / METERS_PER_DEG_LAT
        self._grid: dict[tuple[int, int], list[int]] | None = None
        if len(points) >= LINEAR_SCAN_THRESHOLD:
            grid: dict[tuple[int, int], list[int]] = {}
            for i, p in enumerate(points):
                key = (
                    math.floor(p.lat_deg / self._cell_deg),
                    math.floor(p.lon_deg / self._cell_deg),
                )
                grid.setdefault(key, []).append(i)
            self._grid = {k: v for k, v in grid.items()}

    def __len__(self) -> int:
        return len(self._points)

    def point(self, ordinal: int) -> GeoPoint:
        return self._points[ordinal]

    def _candidates(self, center: GeoPoint, radius_m: float) -> np.ndarray | None:
        """Conservative candidate set from grid cells, or None for full scan."""
        if self._grid is None:
            return None
        # Latitude half-width is exact; longitude uses the worst-case
        # cos(lat) over the band, padded, so no true neighbor is missed.
        lat_half = math.degrees(radius_m / EARTH_RADIUS_M) + 1e-12
        band_max_abs = min(90.0, max(abs(center.lat_deg - lat_half), abs(center.lat_deg + lat_half)))
        cos_min = math.cos(math.radians(band_max_abs))
        if cos_min < 1e-6:
            return None
        lon_half = math.degrees(radius_m / (EARTH_RADIUS_M * cos_min)) * (math.pi / 2.0) + 1e-12
        if center.lon_deg - lon_half < -180.0 or center.lon_deg + lon_half >= 180.0:
            return None
        i0 = math.floor((center.lat_deg - lat_half) / self._cell_deg)
        i1 = math.floor((center.lat_deg + lat_half) / self._cell_deg)
        j0 = math.floor((center.lon_deg - lon_half) / self._cell_deg)
        j1 = math.floor((center.lon_deg + lon_half) / self._cell_deg)
        if (i1 - i0 + 1) * (j1 - j0 + 1) > max(64, len(self._grid)):
            return None
        out: list[int] = []
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                hit = self._grid.get((i, j))
                if hit:
                    out.extend(hit)
        return np.array(out, dtype=int)

    def range_query(self, center: GeoPoint, radius_m: float) -> list[int]:
        """Ordinals of all points within radius_m (inclusive) of center."""
        if radius_m < 0:
            raise ValueError("radius_m must be non-negative")
        if len(self._points) == 0:
            return []
        cand = self._candidates(center, radius_m)
        if cand is None:
            d = haversine_m_vec(self._lats, self._lons, center)
            return np.nonzero(d <= radius_m)[0].tolist()
        if cand.size == 0:
            return []
        d = haversine_m_vec(self._lats[cand], self._lons[cand], center)
        return sorted(cand[d <= radius_m].tolist())


def build_index(points: Sequence[GeoPoint], cell_hint_m: float = 250.0) -> SpatialIndex:
    return SpatialIndex(points, cell_hint_m=cell_hint_m)


def range_query(index: SpatialIndex, center: GeoPoint, radius_m: float) -> list[int]:
    return index.range_query(center, radius_m)


def offset_point(origin: GeoPoint, north_m: float, east_m: float) -> GeoPoint:
    """Shift a point by local north/east meters (small-offset tangent plane)."""
    lat = origin.lat_deg + north_m / METERS_PER_DEG_LAT
    lon = origin.lon_deg + east_m / (METERS_PER_DEG_LAT * math.cos(math.radians(origin.lat_deg)))
    return GeoPoint(lat, lon)
