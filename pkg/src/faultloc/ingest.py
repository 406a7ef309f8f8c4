"""Source dataset parsing, per-outage context assembly, and motion features.

File schemas:
  outages.csv  outage_id,feeder_id,lat,lon,start_time_utc,end_time_utc,cause,customers_affected,crew_comment
  pings.csv    vehicle_id,time_utc,lat,lon
  assets.geojson  FeatureCollection of Point/LineString features with
                  properties asset_id, kind (optional voltage_class, feeder_id)

Timestamps are ISO-8601 UTC with a Z suffix.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Sequence

from . import geo
from .errors import MissingId, UnsupportedGeometry
from .geo import BoundingBox, GeoPoint, buffered_bbox, haversine_m, spherical_centroid

log = logging.getLogger(__name__)

ASSET_KINDS = ("feeder_line", "switch", "cutout", "substation", "other")


@dataclass(frozen=True)
class OutageEvent:
    outage_id: str
    feeder_id: str
    reported_location: GeoPoint
    start_time: datetime
    end_time: datetime
    cause: str | None = None
    customers_affected: int | None = None
    crew_comment: str | None = None

    def __post_init__(self) -> None:
        if self.start_time >= self.end_time:
            raise ValueError("start_time must precede end_time")

    @property
    def duration_s(self) -> float:
        return (self.end_time - self.start_time).total_seconds()


@dataclass(frozen=True)
class VehiclePing:
    vehicle_id: str
    time: datetime
    position: GeoPoint


@dataclass(frozen=True)
class AssetFeature:
    asset_id: str
    kind: str
    geometry: tuple[GeoPoint, ...]
    voltage_class: str | None = None
    feeder_id: str | None = None

    def __post_init__(self) -> None:
        if not self.geometry:
            raise ValueError("asset geometry must be nonempty")
        if self.kind not in ASSET_KINDS:
            raise ValueError(f"unknown asset kind: {self.kind}")


@dataclass(frozen=True)
class OutageContext:
    outage: OutageEvent
    pings: tuple[VehiclePing, ...]
    assets: tuple[AssetFeature, ...]
    bbox: BoundingBox
    window: tuple[datetime, datetime]


@dataclass(frozen=True)
class MotionFeature:
    vehicle_id: str
    from_time: datetime
    to_time: datetime
    gap_s: float
    step_m: float


@dataclass(frozen=True)
class StayPoint:
    vehicle_id: str
    centroid: GeoPoint
    arrive: datetime
    depart: datetime
    dwell_s: float


@dataclass(frozen=True)
class ContextConfig:
    pad_before_s: float = 0.0
    pad_after_s: float = 1800.0
    bbox_buffer_m: float = 500.0

    def __post_init__(self) -> None:
        if self.pad_before_s < 0 or self.pad_after_s < 0 or self.bbox_buffer_m < 0:
            raise ValueError("context config values must be non-negative")


@dataclass(frozen=True)
class MalformedRow:
    line: int
    reason: str


@dataclass
class ParseResult:
    records: list
    errors: list[MalformedRow] = field(default_factory=list)


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp ('...Z' or offset form)."""
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        raise ValueError("timestamp must carry a UTC offset")
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _text_stream(stream: IO) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if hasattr(stream, "read") and "b" in getattr(stream, "mode", ""):
        return io.TextIOWrapper(stream, encoding="utf-8")
    return stream


OUTAGE_COLUMNS = [
    "outage_id", "feeder_id", "lat", "lon", "start_time_utc", "end_time_utc",
    "cause", "customers_affected", "crew_comment",
]
PING_COLUMNS = ["vehicle_id", "time_utc", "lat", "lon"]


def parse_outages(stream: IO | str | bytes) -> ParseResult:
    """Parse outages.csv; malformed rows are collected, not fatal."""
    reader = csv.DictReader(_text_stream(stream))
    if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != OUTAGE_COLUMNS:
        raise ValueError(f"outages.csv header must be {','.join(OUTAGE_COLUMNS)}")
    result = ParseResult(records=[])
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        try:
            outage_id = row["outage_id"].strip()
            if not outage_id:
                raise ValueError("empty outage_id")
            if outage_id in seen:
                raise ValueError(f"duplicate outage_id {outage_id}")
            affected_raw = (row["customers_affected"] or "").strip()
            affected = int(affected_raw) if affected_raw else None
            if affected is not None and affected < 0:
                raise ValueError("customers_affected must be non-negative")
            event = OutageEvent(
                outage_id=outage_id,
                feeder_id=row["feeder_id"].strip(),
                reported_location=GeoPoint(float(row["lat"]), float(row["lon"])),
                start_time=parse_timestamp(row["start_time_utc"]),
                end_time=parse_timestamp(row["end_time_utc"]),
                cause=(row["cause"] or "").strip() or None,
                customers_affected=affected,
                crew_comment=(row["crew_comment"] or "").strip() or None,
            )
        except (ValueError, KeyError, TypeError) as exc:
            result.errors.append(MalformedRow(lineno, str(exc)))
            continue
        seen.add(outage_id)
        result.records.append(event)
    return result


def parse_pings(stream: IO | str | bytes) -> ParseResult:
    reader = csv.DictReader(_text_stream(stream))
    if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != PING_COLUMNS:
        raise ValueError(f"pings.csv header must be {','.join(PING_COLUMNS)}")
    result = ParseResult(records=[])
    for lineno, row in enumerate(reader, start=2):
        try:
            ping = VehiclePing(
                vehicle_id=row["vehicle_id"].strip(),
                time=parse_timestamp(row["time_utc"]),
                position=GeoPoint(float(row["lat"]), float(row["lon"])),
            )
            if not ping.vehicle_id:
                raise ValueError("empty vehicle_id")
        except (ValueError, KeyError, TypeError) as exc:
            result.errors.append(MalformedRow(lineno, str(exc)))
            continue
        result.records.append(ping)
    return result


def parse_assets(stream: IO | str | bytes) -> list[AssetFeature]:
    """Parse a GeoJSON FeatureCollection of Point/LineString assets."""
    text = _text_stream(stream).read()
    doc = json.loads(text)
    if doc.get("type") != "FeatureCollection":
        raise ValueError("assets file must be a GeoJSON FeatureCollection")
    assets: list[AssetFeature] = []
    for feature in doc.get("features", []):
        props = feature.get("properties") or {}
        asset_id = props.get("asset_id")
        if not asset_id:
            raise MissingId("asset feature missing properties.asset_id")
        geom = feature.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Point":
            coords = [geom["coordinates"]]
        elif gtype == "LineString":
            coords = geom["coordinates"]
        else:
            raise UnsupportedGeometry(f"asset {asset_id}: unsupported geometry {gtype}")
        kind = props.get("kind")
        if kind not in ASSET_KINDS:
            kind = "other"
        assets.append(
            AssetFeature(
                asset_id=str(asset_id),
                kind=kind,
                geometry=tuple(GeoPoint(lat, lon) for lon, lat in coords),
                voltage_class=props.get("voltage_class"),
                feeder_id=props.get("feeder_id"),
            )
        )
    return assets


def assemble_context(
    outage: OutageEvent,
    pings: Sequence[VehiclePing],
    assets: Sequence[AssetFeature],
    cfg: ContextConfig = ContextConfig(),
) -> OutageContext:
    """Join one outage with its time- and space-filtered pings and assets."""
    from datetime import timedelta

    t0 = outage.start_time - timedelta(seconds=cfg.pad_before_s)
    t1 = outage.end_time + timedelta(seconds=cfg.pad_after_s)

    feeder_vertices: list[GeoPoint] = []
    for a in assets:
        if a.feeder_id == outage.feeder_id:
            feeder_vertices.extend(a.geometry)
    if not feeder_vertices:
        log.warning("outage %s: no feeder assets; bbox from reported location only", outage.outage_id)
    vertices = feeder_vertices + [outage.reported_location]
    bbox = buffered_bbox(vertices, cfg.bbox_buffer_m)

    kept_pings = tuple(
        p for p in pings if t0 <= p.time <= t1 and bbox.contains(p.position)
    )
    kept_assets = tuple(
        a for a in assets if any(bbox.contains(v) for v in a.geometry)
    )
    return OutageContext(outage=outage, pings=kept_pings, assets=kept_assets, bbox=bbox, window=(t0, t1))


def _by_vehicle(pings: Iterable[VehiclePing]) -> dict[str, list[VehiclePing]]:
    groups: dict[str, list[VehiclePing]] = {}
    for p in pings:
        groups.setdefault(p.vehicle_id, []).append(p)
    for vid in groups:
        groups[vid].sort(key=lambda p: p.time)
    return groups


def motion_features(pings: Sequence[VehiclePing]) -> list[MotionFeature]:
    """Time gap and step distance between consecutive pings of each vehicle."""
    features: list[MotionFeature] = []
    for vid, track in sorted(_by_vehicle(pings).items()):
        for prev, cur in zip(track, track[1:]):
            gap = (cur.time - prev.time).total_seconds()
            if gap <= 0:
                log.warning("vehicle %s: duplicate timestamp %s dropped", vid, cur.time)
                continue
            features.append(
                MotionFeature(
                    vehicle_id=vid,
                    from_time=prev.time,
                    to_time=cur.time,
                    gap_s=gap,
                    step_m=haversine_m(prev.position, cur.position),
                )
            )
    return features


def stay_points(
    pings: Sequence[VehiclePing],
    max_roam_m: float = 50.0,
    min_dwell_s: float = 300.0,
) -> list[StayPoint]:
    """Maximal runs where a vehicle stays within max_roam_m of the running centroid."""
    if max_roam_m <= 0 or min_dwell_s <= 0:
        raise ValueError("max_roam_m and min_dwell_s must be positive")
    out: list[StayPoint] = []
    for vid, track in sorted(_by_vehicle(pings).items()):
        run: list[VehiclePing] = []

        def flush() -> None:
            if len(run) < 2:
                return
            dwell = (run[-1].time - run[0].time).total_seconds()
            if dwell >= min_dwell_s:
                out.append(
                    StayPoint(
                        vehicle_id=vid,
                        centroid=spherical_centroid([p.position for p in run]),
                        arrive=run[0].time,
                        depart=run[-1].time,
                        dwell_s=dwell,
                    )
                )

        for p in track:
            if not run:
                run = [p]
                continue
            centroid = spherical_centroid([q.position for q in run])
            if haversine_m(p.position, centroid) <= max_roam_m:
                run.append(p)
            else:
                flush()
                run = [p]
        flush()
    return out


def distance_histogram(
    features: Sequence[MotionFeature], bin_m: float, max_m: float
) -> dict[float, int]:
    """Counts of step distances, binned; steps beyond max_m land in the last bin."""
    if bin_m <= 0:
        raise ValueError("bin_m must be positive")
    n_bins = max(1, int(max_m // bin_m) + (1 if max_m % bin_m else 0))
    table = {i * bin_m: 0 for i in range(n_bins)}
    last = (n_bins - 1) * bin_m
    for f in features:
        step = min(f.step_m, max_m)
        b = min(int(step // bin_m) * bin_m, last)
        table[b] += 1
    return table


def ping_count_report(contexts: Sequence[OutageContext]) -> list[tuple[str, int]]:
    """(outage_id, ping count) pairs, descending count, ties by outage_id."""
    rows = [(c.outage.outage_id, len(c.pings)) for c in contexts]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows
