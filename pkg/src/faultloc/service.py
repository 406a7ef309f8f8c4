"""HTTP/JSON review facade: browse outages, fetch layers, re-predict,
record verdicts. State lives in an append-only JSONL store that is
replayed on startup, so a hard kill never loses acknowledged writes."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import evaluate as ev
from . import ingest
from .cluster import ClusterAssignment, DbscanParams, dbscan, summarize_clusters
from .errors import NoCluster, TooFewPings
from .geo import GeoPoint
from .optimize import OptimizeConfig, ScoreWeights, confidence_score, optimize

VERDICTS = ("accurate", "inaccurate", "unsure")


class PredictionStore:
    """Append-only line-delimited JSON log with an in-memory latest view."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.predictions: dict[str, dict] = {}
        self.verdicts: list[dict] = []
        self._lock = threading.Lock()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        self._apply(json.loads(line))

    def _apply(self, record: dict) -> None:
        if record["type"] == "prediction":
            self.predictions[record["outage_id"]] = record
        elif record["type"] == "verdict":
            self.verdicts.append(record)

    def append(self, record: dict) -> None:
        with self._lock:
            line = json.dumps(record, sort_keys=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
                f.flush()
                os.fsync(f.fileno())
            self._apply(record)

    def latest_verdicts(self) -> dict[str, dict[str, dict]]:
        """outage_id -> reviewer -> their latest verdict record."""
        out: dict[str, dict[str, dict]] = {}
        for v in self.verdicts:
            out.setdefault(v["outage_id"], {})[v["reviewer"]] = v
        return out

    def outage_verdict(self, outage_id: str) -> str | None:
        """Majority of reviewers' latest verdicts; ties or all-unsure -> unsure."""
        per_reviewer = self.latest_verdicts().get(outage_id)
        if not per_reviewer:
            return None
        acc = sum(1 for v in per_reviewer.values() if v["verdict"] == "accurate")
        inacc = sum(1 for v in per_reviewer.values() if v["verdict"] == "inaccurate")
        if acc > inacc:
            return "accurate"
        if inacc > acc:
            return "inaccurate"
        return "unsure"

    def stats(self) -> dict:
        verdicts = self.latest_verdicts()
        n_accurate = 0
        n_inaccurate = 0
        for oid in verdicts:
            verdict = self.outage_verdict(oid)
            if verdict == "accurate":
                n_accurate += 1
            elif verdict == "inaccurate":
                n_inaccurate += 1
        denom = n_accurate + n_inaccurate
        return {
            "n_verified": len(verdicts),
            "n_accurate": n_accurate,
            "accuracy": (n_accurate / denom) if denom else None,
        }


class PredictBody(BaseModel):
    eps_m: Optional[float] = Field(default=None, gt=0)
    min_pts: Optional[int] = Field(default=None, ge=1)
    auto: bool = False
    seed: int = 0


class VerdictBody(BaseModel):
    verdict: Literal["accurate", "inaccurate", "unsure"]
    reviewer: str = Field(min_length=1)
    note: Optional[str] = Field(default=None, max_length=2000)


def _etag(record: dict | None) -> str:
    payload = json.dumps(record, sort_keys=True) if record else "none"
    return '"' + hashlib.sha1(payload.encode("utf-8")).hexdigest() + '"'


def create_app(run_dir: Path) -> FastAPI:
    run_dir = Path(run_dir)
    outages_path = run_dir / "outages.csv"
    if not outages_path.exists():
        raise FileNotFoundError(f"run dir missing outages.csv: {run_dir}")
    with open(outages_path, newline="", encoding="utf-8") as f:
        outages = {o.outage_id: o for o in ingest.parse_outages(f).records}
    pings_path = run_dir / "pings.csv"
    all_pings = []
    if pings_path.exists():
        with open(pings_path, newline="", encoding="utf-8") as f:
            all_pings = ingest.parse_pings(f).records
    assets_path = run_dir / "assets.geojson"
    all_assets = []
    if assets_path.exists():
        with open(assets_path, encoding="utf-8") as f:
            all_assets = ingest.parse_assets(f)

    store = PredictionStore(run_dir / "store.jsonl")
    contexts: dict[str, ingest.OutageContext] = {}
    context_lock = threading.Lock()
    predict_locks: dict[str, threading.Lock] = {oid: threading.Lock() for oid in outages}

    def get_context(outage_id: str) -> ingest.OutageContext:
        with context_lock:
            if outage_id not in contexts:
                contexts[outage_id] = ingest.assemble_context(
                    outages[outage_id], all_pings, all_assets
                )
            return contexts[outage_id]

    def prediction_view(record: dict | None) -> tuple[object | None, ClusterAssignment | None]:
        """Rebuild Prediction-ish view + assignment from a store record."""
        if not record or record.get("failure_reason"):
            return None, None
        params = DbscanParams(eps_m=record["eps_m"], min_pts=record["min_pts"])
        labels = record.get("labels")
        assignment = (
            ClusterAssignment(labels=tuple(labels), params=params) if labels is not None else None
        )

        class _View:
            location = GeoPoint(record["lat"], record["lon"])
            confidence = record["confidence"]

        view = _View()
        view.params = params  # type: ignore[attr-defined]
        return view, assignment

    app = FastAPI(title="faultloc review service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/outages")
    def list_outages(offset: int = Query(0, ge=0), limit: int = Query(1000, ge=1)):
        items = []
        for oid in sorted(outages):
            o = outages[oid]
            record = store.predictions.get(oid)
            has_pred = bool(record) and not record.get("failure_reason")
            items.append(
                {
                    "outage_id": oid,
                    "start": ingest.format_timestamp(o.start_time),
                    "end": ingest.format_timestamp(o.end_time),
                    "has_prediction": has_pred,
                    "confidence": record.get("confidence") if has_pred else None,
                    "latest_verdict": store.outage_verdict(oid),
                }
            )
        return items[offset : offset + limit]

    @app.get("/outages/{outage_id}/layers")
    def get_layers(outage_id: str, response: Response):
        if outage_id not in outages:
            raise HTTPException(status_code=404, detail="unknown outage")
        record = store.predictions.get(outage_id)
        pred, assignment = prediction_view(record)
        context = get_context(outage_id)
        if assignment is not None and len(assignment.labels) != len(context.pings):
            assignment = None
        response.headers["ETag"] = _etag(record)
        return ev.export_layers(context, pred, assignment)

    @app.post("/outages/{outage_id}/predict")
    def post_predict(outage_id: str, body: PredictBody, response: Response):
        if outage_id not in outages:
            raise HTTPException(status_code=404, detail="unknown outage")
        if not body.auto and (body.eps_m is None or body.min_pts is None):
            raise HTTPException(status_code=422, detail="need eps_m+min_pts or auto=true")
        lock = predict_locks[outage_id]
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="prediction already running")
        try:
            context = get_context(outage_id)
            record: dict
            if body.auto:
                try:
                    pred = optimize(context, OptimizeConfig(seed=body.seed))
                except (TooFewPings, NoCluster) as exc:
                    record = {
                        "type": "prediction", "outage_id": outage_id,
                        "failure_reason": type(exc).__name__, "seed": body.seed,
                    }
                    store.append(record)
                    response.headers["ETag"] = _etag(record)
                    return record
                assignment = dbscan([p.position for p in context.pings], pred.params)
                record = {
                    "type": "prediction", "outage_id": outage_id,
                    "lat": pred.location.lat_deg, "lon": pred.location.lon_deg,
                    "confidence": pred.confidence, "eps_m": pred.params.eps_m,
                    "min_pts": pred.params.min_pts, "noise_count": pred.noise_count,
                    "rounds_run": pred.rounds_run, "seed": pred.seed,
                    "labels": list(assignment.labels), "failure_reason": None,
                }
            else:
                params = DbscanParams(eps_m=body.eps_m, min_pts=body.min_pts)
                assignment = dbscan([p.position for p in context.pings], params)
                summaries = summarize_clusters(assignment, context.pings, context.window)
                weights = ScoreWeights()
                best, best_score = None, 0.0
                for s in summaries:
                    score = confidence_score(s, context.outage, weights, params.eps_m)
                    if best is None or (score, s.point_count) > (best_score, best.point_count):
                        best, best_score = s, score
                if best is None:
                    record = {
                        "type": "prediction", "outage_id": outage_id,
                        "failure_reason": "NoCluster", "seed": body.seed,
                        "eps_m": params.eps_m, "min_pts": params.min_pts,
                    }
                else:
                    record = {
                        "type": "prediction", "outage_id": outage_id,
                        "lat": best.centroid.lat_deg, "lon": best.centroid.lon_deg,
                        "confidence": best_score, "eps_m": params.eps_m,
                        "min_pts": params.min_pts, "noise_count": assignment.noise_count,
                        "rounds_run": 0, "seed": body.seed,
                        "labels": list(assignment.labels), "failure_reason": None,
                    }
            store.append(record)
            response.headers["ETag"] = _etag(record)
            return {k: v for k, v in record.items() if k != "labels"}
        finally:
            lock.release()

    @app.post("/outages/{outage_id}/verdict", status_code=201)
    def post_verdict(outage_id: str, body: VerdictBody):
        if outage_id not in outages:
            raise HTTPException(status_code=404, detail="unknown outage")
        from datetime import datetime, timezone

        record = {
            "type": "verdict",
            "outage_id": outage_id,
            "verdict": body.verdict,
            "reviewer": body.reviewer,
            "note": body.note,
            "time": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
        }
        store.append(record)
        return record

    @app.get("/stats")
    def get_stats():
        return store.stats()

    app.state.store = store
    return app
