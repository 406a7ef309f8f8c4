"""Synthetic outage scenarios with planted ground truth.

Crew vehicles drive to a fault point on a feeder and dwell there; noise
vehicles transit the area at constant velocity. Everything is deterministic
per seed, and the emitted records round-trip through the ingest parsers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

from .geo import GeoPoint, offset_point
from .ingest import AssetFeature, OutageEvent, VehiclePing, format_timestamp

EPOCH = datetime(2024, 3, 1, tzinfo=timezone.utc)
DWELL_ROAM_M = 20.0


@dataclass(frozen=True)
class ScenarioSpec:
    n_crew: int = 2
    n_noise_vehicles: int = 5
    outage_duration_s: float = 3600.0
    dwell_fraction: float = 0.6
    gps_sigma_m: float = 10.0
    ping_interval_s: float = 60.0
    feeder_length_m: float = 4000.0
    region_center: GeoPoint = field(default_factory=lambda: GeoPoint(39.3, -76.6))
    fault_offset_m: float = 30.0

    def __post_init__(self) -> None:
        if self.n_crew < 1 or self.n_noise_vehicles < 0:
            raise ValueError("vehicle counts out of range")
        if not 0 < self.dwell_fraction <= 1:
            raise ValueError("dwell_fraction must be in (0, 1]")
        if self.gps_sigma_m < 0 or self.fault_offset_m < 0:
            raise ValueError("noise/offset magnitudes must be non-negative")
        if self.ping_interval_s <= 0 or self.feeder_length_m <= 0 or self.outage_duration_s <= 0:
            raise ValueError("intervals and lengths must be positive")


@dataclass(frozen=True)
class GroundTruth:
    outage_id: str
    true_location: GeoPoint


@dataclass(frozen=True)
class Scenario:
    outage: OutageEvent
    pings: tuple[VehiclePing, ...]
    assets: tuple[AssetFeature, ...]
    truth: GroundTruth


def _jitter(rng: random.Random, p: GeoPoint, sigma_m: float) -> GeoPoint:
    if sigma_m == 0:
        return p
    return offset_point(p, rng.gauss(0, sigma_m), rng.gauss(0, sigma_m))


def _along(center: GeoPoint, bearing_rad: float, dist_m: float) -> GeoPoint:
    return offset_point(center, dist_m * math.cos(bearing_rad), dist_m * math.sin(bearing_rad))


def generate_scenario(
    spec: ScenarioSpec, seed: int, outage_id: str | None = None
) -> Scenario:
    rng = random.Random(seed)
    oid = outage_id if outage_id is not None else f"OUT-{seed & 0xFFFFFFFF:08X}"
    feeder_id = f"FDR-{oid}"

    start = EPOCH + timedelta(seconds=(seed % 100_000) * 60)
    end = start + timedelta(seconds=spec.outage_duration_s)

    # Feeder: straight polyline through the region center.
    bearing = rng.uniform(0, 2 * math.pi)
    half = spec.feeder_length_m / 2.0
    feeder_start = _along(spec.region_center, bearing, -half)
    n_vertices = 5
    feeder_vertices = [
        _along(feeder_start, bearing, spec.feeder_length_m * i / (n_vertices - 1))
        for i in range(n_vertices)
    ]

    # Fault somewhere along the feeder, offset laterally.
    fault_along = rng.uniform(0.15, 0.85) * spec.feeder_length_m
    lateral = rng.choice((-1.0, 1.0)) * spec.fault_offset_m
    on_feeder = _along(feeder_start, bearing, fault_along)
    fault = _along(on_feeder, bearing + math.pi / 2.0, lateral)

    # Reported device sits upstream along the feeder, not at the fault.
    reported_along = max(0.0, fault_along - rng.uniform(200.0, 3000.0))
    reported = _along(feeder_start, bearing, reported_along)

    outage = OutageEvent(
        outage_id=oid,
        feeder_id=feeder_id,
        reported_location=reported,
        start_time=start,
        end_time=end,
        cause=rng.choice(("equipment_failure", "vegetation", "weather", "unknown")),
        customers_affected=rng.randint(5, 2500),
    )

    assets = [
        AssetFeature(
            asset_id=f"{feeder_id}-LINE",
            kind="feeder_line",
            geometry=tuple(feeder_vertices),
            voltage_class=rng.choice(("13.8 kV", "34.5 kV")),
            feeder_id=feeder_id,
        ),
        AssetFeature(
            asset_id=f"{feeder_id}-SW1",
            kind="switch",
            geometry=(reported,),
            feeder_id=feeder_id,
        ),
        AssetFeature(
            asset_id=f"{feeder_id}-CO1",
            kind="cutout",
            geometry=(_along(feeder_start, bearing, rng.uniform(0.0, spec.feeder_length_m)),),
            feeder_id=feeder_id,
        ),
    ]

    pings: list[VehiclePing] = []

    dwell_s = spec.dwell_fraction * spec.outage_duration_s
    for ci in range(spec.n_crew):
        vid = f"{oid}-CREW-{ci:02d}"
        depot_bearing = rng.uniform(0, 2 * math.pi)
        depot_dist = rng.uniform(1000.0, 3000.0)
        depot = _along(fault, depot_bearing, depot_dist)
        speed = rng.uniform(8.0, 15.0)
        depart_depot = rng.uniform(60.0, 480.0)  # seconds after outage start
        travel_s = depot_dist / speed
        arrive = depart_depot + travel_s
        leave = arrive + dwell_s

        t = 0.0
        while t <= leave + 600.0 and t <= spec.outage_duration_s + 1500.0:
            if t < depart_depot:
                pos = depot
            elif t < arrive:
                frac = (t - depart_depot) / travel_s
                pos = _along(fault, depot_bearing, depot_dist * (1.0 - frac))
            elif t <= leave:
                roam = rng.uniform(0, DWELL_ROAM_M)
                pos = _along(fault, rng.uniform(0, 2 * math.pi), roam)
            else:
                pos = _along(fault, depot_bearing, speed * (t - leave))
            pings.append(
                VehiclePing(
                    vehicle_id=vid,
                    time=start + timedelta(seconds=t),
                    position=_jitter(rng, pos, spec.gps_sigma_m),
                )
            )
            t += spec.ping_interval_s

    window_s = spec.outage_duration_s + 1800.0
    for ni in range(spec.n_noise_vehicles):
        vid = f"{oid}-TRK-{ni:02d}"
        # Straight constant-velocity transit passing near the region.
        transit_bearing = rng.uniform(0, 2 * math.pi)
        speed = rng.uniform(8.0, 20.0)
        offset = rng.uniform(-1500.0, 1500.0)
        near_point = _along(spec.region_center, transit_bearing + math.pi / 2.0, offset)
        pass_time = rng.uniform(0.2, 0.8) * window_s
        t = 0.0
        while t <= window_s:
            pos = _along(near_point, transit_bearing, speed * (t - pass_time))
            pings.append(
                VehiclePing(
                    vehicle_id=vid,
                    time=start + timedelta(seconds=t),
                    position=_jitter(rng, pos, spec.gps_sigma_m),
                )
            )
            t += spec.ping_interval_s

    pings.sort(key=lambda p: (p.time, p.vehicle_id))
    return Scenario(
        outage=outage,
        pings=tuple(pings),
        assets=tuple(assets),
        truth=GroundTruth(outage_id=oid, true_location=fault),
    )


def generate_suite(
    n_scenarios: int, spec: ScenarioSpec, master_seed: int
) -> list[Scenario]:
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be at least 1")
    rng = random.Random(master_seed)
    scenarios = []
    for i in range(n_scenarios):
        seed = rng.randrange(2**32)
        scenarios.append(generate_scenario(spec, seed, outage_id=f"OUT-{i:04d}"))
    return scenarios


def noise_tracks(
    spec: ScenarioSpec, scenario: Scenario, n_tracks: int, seed: int
) -> list[VehiclePing]:
    """Extra pass-through transit tracks for noise-injection experiments."""
    extra_spec = replace(spec, n_crew=1, n_noise_vehicles=n_tracks)
    donor = generate_scenario(extra_spec, seed, outage_id="NOISE")
    shift = scenario.outage.start_time - donor.outage.start_time
    out = []
    for p in donor.pings:
        if "-TRK-" not in p.vehicle_id:
            continue
        out.append(
            VehiclePing(
                vehicle_id=p.vehicle_id.replace("NOISE", scenario.outage.outage_id + "-X"),
                time=p.time + shift,
                position=p.position,
            )
        )
    return out


def outages_csv(outages: Sequence[OutageEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["outage_id", "feeder_id", "lat", "lon", "start_time_utc", "end_time_utc",
         "cause", "customers_affected", "crew_comment"]
    )
    for o in outages:
        w.writerow(
            [
                o.outage_id,
                o.feeder_id,
                f"{o.reported_location.lat_deg:.7f}",
                f"{o.reported_location.lon_deg:.7f}",
                format_timestamp(o.start_time),
                format_timestamp(o.end_time),
                o.cause or "",
                "" if o.customers_affected is None else o.customers_affected,
                o.crew_comment or "",
            ]
        )
    return buf.getvalue()


def pings_csv(pings: Sequence[VehiclePing]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vehicle_id", "time_utc", "lat", "lon"])
    for p in pings:
        w.writerow(
            [p.vehicle_id, format_timestamp(p.time),
             f"{p.position.lat_deg:.7f}", f"{p.position.lon_deg:.7f}"]
        )
    return buf.getvalue()


def assets_geojson(assets: Sequence[AssetFeature]) -> str:
    features = []
    for a in assets:
        if len(a.geometry) == 1:
            geom = {
                "type": "Point",
                "coordinates": [
                    round(a.geometry[0].lon_deg, 7), round(a.geometry[0].lat_deg, 7)
                ],
            }
        else:
            geom = {
                "type": "LineString",
                "coordinates": [
                    [round(p.lon_deg, 7), round(p.lat_deg, 7)] for p in a.geometry
                ],
            }
        props = {"asset_id": a.asset_id, "kind": a.kind}
        if a.voltage_class is not None:
            props["voltage_class"] = a.voltage_class
        if a.feeder_id is not None:
            props["feeder_id"] = a.feeder_id
        features.append({"type": "Feature", "geometry": geom, "properties": props})
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=1)


def truth_csv(truths: Sequence[GroundTruth]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["outage_id", "lat", "lon"])
    for t in truths:
        w.writerow(
            [t.outage_id, f"{t.true_location.lat_deg:.7f}", f"{t.true_location.lon_deg:.7f}"]
        )
    return buf.getvalue()


def write_suite(scenarios: Sequence[Scenario], out_dir: Path) -> None:
    """Write outages.csv, pings.csv, assets.geojson, truth.csv atomically."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_pings = [p for s in scenarios for p in s.pings]
    all_assets = [a for s in scenarios for a in s.assets]
    files = {
        "outages.csv": outages_csv([s.outage for s in scenarios]),
        "pings.csv": pings_csv(all_pings),
        "assets.geojson": assets_geojson(all_assets),
        "truth.csv": truth_csv([s.truth for s in scenarios]),
    }
    for name, content in files.items():
        tmp = out_dir / (name + ".tmp")
        tmp.write_text(content, encoding="utf-8")
        tmp.replace(out_dir / name)
