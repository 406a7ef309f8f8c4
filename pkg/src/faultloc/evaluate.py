"""Prediction scoring against ground truth and GeoJSON layer export."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

from .cluster import ClusterAssignment, NOISE
from .errors import UnknownOutage
from .geo import GeoPoint, haversine_m
from .ingest import OutageContext, format_timestamp
from .optimize import Prediction
from .synth import GroundTruth

LAYER_NAMES = ("reported_outage", "ping_cluster", "ping_noise", "predicted_centroid", "asset")


@dataclass(frozen=True)
class EvalRow:
    outage_id: str
    error_m: float | None
    hit: bool
    confidence: float | None
    failure_reason: str | None


@dataclass(frozen=True)
class EvalReport:
    n_outages: int
    n_predicted: int
    n_hits: int
    hit_rate: float
    mean_error_m: float | None
    median_error_m: float | None
    p90_error_m: float | None
    rows: tuple[EvalRow, ...]


def _quantile(sorted_vals: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile over an ascending list."""
    n = len(sorted_vals)
    if n == 1:
        return sorted_vals[0]
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac


def evaluate(
    predictions: Sequence[Prediction],
    truths: Sequence[GroundTruth],
    hit_radius_m: float,
    failures: dict[str, str] | None = None,
) -> EvalReport:
    """Per-outage error and hit accounting; unpredicted outages count as misses."""
    if hit_radius_m <= 0:
        raise ValueError("hit_radius_m must be positive")
    truth_by_id = {t.outage_id: t for t in truths}
    pred_by_id: dict[str, Prediction] = {}
    for p in predictions:
        if p.outage_id not in truth_by_id:
            raise UnknownOutage(f"prediction for unknown outage {p.outage_id}")
        pred_by_id[p.outage_id] = p
    failures = failures or {}

    rows: list[EvalRow] = []
    errors: list[float] = []
    for oid in sorted(truth_by_id):
        truth = truth_by_id[oid]
        pred = pred_by_id.get(oid)
        if pred is None:
            rows.append(
                EvalRow(
                    outage_id=oid,
                    error_m=None,
                    hit=False,
                    confidence=None,
                    failure_reason=failures.get(oid, "NoPrediction"),
                )
            )
            continue
        err = haversine_m(pred.location, truth.true_location)
        errors.append(err)
        rows.append(
            EvalRow(
                outage_id=oid,
                error_m=err,
                hit=err <= hit_radius_m,
                confidence=pred.confidence,
                failure_reason=None,
            )
        )
    n_hits = sum(1 for r in rows if r.hit)
    n_outages = len(rows)
    errors.sort()
    return EvalReport(
        n_outages=n_outages,
        n_predicted=len(errors),
        n_hits=n_hits,
        hit_rate=n_hits / n_outages if n_outages else 0.0,
        mean_error_m=sum(errors) / len(errors) if errors else None,
        median_error_m=_quantile(errors, 0.5) if errors else None,
        p90_error_m=_quantile(errors, 0.9) if errors else None,
        rows=tuple(rows),
    )


def export_layers(
    context: OutageContext,
    prediction: Prediction | None,
    assignment: ClusterAssignment | None,
) -> dict:
    """GeoJSON FeatureCollection of dashboard layers (RFC 7946 lon-lat order)."""
    labels: Sequence[int]
    if assignment is not None:
        if len(assignment.labels) != len(context.pings):
            raise ValueError("assignment not aligned with context pings")
        labels = assignment.labels
    else:
        labels = [NOISE] * len(context.pings)

    features: list[dict] = []
    rep = context.outage.reported_location
    features.append(
        {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [rep.lon_deg, rep.lat_deg]},
            "properties": {
                "layer": "reported_outage",
                "outage_id": context.outage.outage_id,
                "feeder_id": context.outage.feeder_id,
            },
        }
    )
    for ping, label in zip(context.pings, labels):
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [ping.position.lon_deg, ping.position.lat_deg],
                },
                "properties": {
                    "layer": "ping_noise" if label == NOISE else "ping_cluster",
                    "vehicle_id": ping.vehicle_id,
                    "time": format_timestamp(ping.time),
                    "cluster": None if label == NOISE else label,
                },
            }
        )
    if prediction is not None:
        loc = prediction.location
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [loc.lon_deg, loc.lat_deg]},
                "properties": {
                    "layer": "predicted_centroid",
                    "confidence": prediction.confidence,
                    "eps_m": prediction.params.eps_m,
                    "min_pts": prediction.params.min_pts,
                },
            }
        )
    for asset in context.assets:
        if len(asset.geometry) == 1:
            geom = {
                "type": "Point",
                "coordinates": [asset.geometry[0].lon_deg, asset.geometry[0].lat_deg],
            }
        else:
            geom = {
                "type": "LineString",
                "coordinates": [[p.lon_deg, p.lat_deg] for p in asset.geometry],
            }
        features.append(
            {
                "type": "Feature",
                "geometry": geom,
                "properties": {
                    "layer": "asset",
                    "asset_id": asset.asset_id,
                    "kind": asset.kind,
                    "voltage_class": asset.voltage_class,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def report_to_csv(report: EvalReport) -> str:
    """Rows plus a comment footer with the summary numbers."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["outage_id", "error_m", "hit", "confidence", "failure_reason"])
    for r in report.rows:
        w.writerow(
            [
                r.outage_id,
                "" if r.error_m is None else f"{r.error_m:.2f}",
                "1" if r.hit else "0",
                "" if r.confidence is None else f"{r.confidence:.4f}",
                r.failure_reason or "",
            ]
        )
    buf.write(
        f"# hit_rate={report.hit_rate:.4f} n_outages={report.n_outages} "
        f"n_hits={report.n_hits} n_predicted={report.n_predicted}\n"
    )
    return buf.getvalue()


def parse_report_csv(text: str) -> list[EvalRow]:
    """Round-trip reader for report_to_csv output (footer comment skipped)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    rows = []
    for row in reader:
        rows.append(
            EvalRow(
                outage_id=row["outage_id"],
                error_m=float(row["error_m"]) if row["error_m"] else None,
                hit=row["hit"] == "1",
                confidence=float(row["confidence"]) if row["confidence"] else None,
                failure_reason=row["failure_reason"] or None,
            )
        )
    return rows
