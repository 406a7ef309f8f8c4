import random
from datetime import datetime, timedelta, timezone

import pytest

from faultloc.geo import GeoPoint, offset_point
from faultloc.ingest import VehiclePing

T0 = datetime(2024, 3, 1, 12, 0, tzinfo=timezone.utc)


def random_points(rng: random.Random, n: int, center=GeoPoint(39.3, -76.6), spread_m=2000.0):
    return [
        offset_point(center, rng.uniform(-spread_m, spread_m), rng.uniform(-spread_m, spread_m))
        for _ in range(n)
    ]


def ping(vehicle_id: str, t_offset_s: float, pos: GeoPoint) -> VehiclePing:
    return VehiclePing(vehicle_id=vehicle_id, time=T0 + timedelta(seconds=t_offset_s), position=pos)


@pytest.fixture
def rng():
    return random.Random(12345)
