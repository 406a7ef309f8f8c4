"""Command-line entry point: synth, predict, eval, sweep, serve.

Exit codes: 0 ok, 2 parse failure, 3 evaluation id mismatch, 4 lookup
failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import evaluate as ev
from . import ingest, synth
from .errors import NoCluster, TooFewPings, UnknownOutage
from .geo import GeoPoint
from .optimize import OptimizeConfig, ScoreWeights, min_pts_sensitivity, optimize

PREDICTION_COLUMNS = [
    "outage_id", "lat", "lon", "confidence", "eps_m", "min_pts",
    "noise_count", "rounds_run", "seed", "failure_reason",
]


def _atomic_write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    tmp.replace(path)


def _load_inputs(outages_path: Path, pings_path: Path, assets_path: Path | None):
    """Parse the three source files; malformed rows are fatal here (exit 2)."""
    with open(outages_path, newline="", encoding="utf-8") as f:
        outages = ingest.parse_outages(f)
    with open(pings_path, newline="", encoding="utf-8") as f:
        pings = ingest.parse_pings(f)
    problems = [("outages", e) for e in outages.errors] + [("pings", e) for e in pings.errors]
    if problems:
        for name, err in problems:
            print(f"{name}: line {err.line}: {err.reason}", file=sys.stderr)
        raise SystemExit(2)
    assets = []
    if assets_path is not None and assets_path.exists():
        with open(assets_path, encoding="utf-8") as f:
            assets = ingest.parse_assets(f)
    return outages.records, pings.records, assets


def _predict_one(args: tuple) -> dict:
    """Worker: one outage context -> one predictions.csv row dict."""
    context, opt_cfg = args
    oid = context.outage.outage_id
    try:
        pred = optimize(context, opt_cfg)
    except (TooFewPings, NoCluster) as exc:
        return {
            "outage_id": oid,
            "failure_reason": type(exc).__name__,
            "labels": None,
            "n_pings": len(context.pings),
        }
    return {
        "outage_id": oid,
        "lat": f"{pred.location.lat_deg:.7f}",
        "lon": f"{pred.location.lon_deg:.7f}",
        "confidence": f"{pred.confidence:.6f}",
        "eps_m": f"{pred.params.eps_m:.3f}",
        "min_pts": pred.params.min_pts,
        "noise_count": pred.noise_count,
        "rounds_run": pred.rounds_run,
        "seed": pred.seed,
        "failure_reason": "",
        "labels": None,  # filled below from the recomputed assignment
        "prediction": pred,
    }


def cmd_synth(args: argparse.Namespace) -> int:
    spec = synth.ScenarioSpec(
        n_crew=args.crew,
        n_noise_vehicles=args.noise_vehicles,
        outage_duration_s=args.duration_s,
        dwell_fraction=args.dwell_fraction,
        gps_sigma_m=args.gps_sigma_m,
        ping_interval_s=args.ping_interval_s,
        region_center=GeoPoint(args.center_lat, args.center_lon),
    )
    scenarios = synth.generate_suite(args.n, spec, args.seed)
    out_dir = Path(args.out)
    synth.write_suite(scenarios, out_dir)
    total_pings = sum(len(s.pings) for s in scenarios)
    print(f"wrote {len(scenarios)} scenarios, {total_pings} pings to {out_dir}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    data_dir = Path(args.data)
    out_dir = Path(args.out) if args.out else data_dir
    outages, pings, assets = _load_inputs(
        data_dir / "outages.csv", data_dir / "pings.csv", data_dir / "assets.geojson"
    )
    ctx_cfg = ingest.ContextConfig(
        pad_before_s=args.pad_before_s,
        pad_after_s=args.pad_after_s,
        bbox_buffer_m=args.bbox_buffer_m,
    )
    opt_cfg = OptimizeConfig(
        rounds=args.rounds,
        samples_per_round=args.samples,
        seed=args.seed,
    )
    contexts = [
        ingest.assemble_context(o, pings, assets, ctx_cfg)
        for o in sorted(outages, key=lambda o: o.outage_id)
    ]
    jobs = [(c, opt_cfg) for c in contexts]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_predict_one, jobs, chunksize=4))
    else:
        results = [_predict_one(j) for j in jobs]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PREDICTION_COLUMNS)
    store_lines = []
    for ctx, row in zip(contexts, results):
        if row["failure_reason"]:
            w.writerow([row["outage_id"], "", "", "", "", "", "", "", args.seed,
                        row["failure_reason"]])
            store_lines.append(json.dumps({
                "type": "prediction", "outage_id": row["outage_id"],
                "failure_reason": row["failure_reason"], "seed": args.seed,
            }, sort_keys=True))
            layers = ev.export_layers(ctx, None, None)
        else:
            w.writerow([row[c] for c in PREDICTION_COLUMNS])
            pred = row["prediction"]
            # Recompute the winning assignment for layer export and the store.
            from .cluster import dbscan
            assignment = dbscan([p.position for p in ctx.pings], pred.params)
            store_lines.append(json.dumps({
                "type": "prediction", "outage_id": row["outage_id"],
                "lat": pred.location.lat_deg, "lon": pred.location.lon_deg,
                "confidence": pred.confidence, "eps_m": pred.params.eps_m,
                "min_pts": pred.params.min_pts, "noise_count": pred.noise_count,
                "rounds_run": pred.rounds_run, "seed": pred.seed,
                "labels": list(assignment.labels), "failure_reason": None,
            }, sort_keys=True))
            layers = ev.export_layers(ctx, pred, assignment)
        _atomic_write(out_dir / "layers" / f"{row['outage_id']}.geojson",
                      json.dumps(layers))
    _atomic_write(out_dir / "predictions.csv", buf.getvalue())
    _atomic_write(out_dir / "store.jsonl", "\n".join(store_lines) + ("\n" if store_lines else ""))
    n_ok = sum(1 for r in results if not r["failure_reason"])
    print(f"predicted {n_ok}/{len(results)} outages -> {out_dir / 'predictions.csv'}")
    return 0


@dataclass(frozen=True)
class _PredRow:
    outage_id: str
    location: GeoPoint
    confidence: float


def read_predictions_csv(path: Path) -> tuple[list[_PredRow], dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != PREDICTION_COLUMNS:
            raise ValueError("unexpected predictions.csv header")
        preds, failures = [], {}
        for row in reader:
            if row["failure_reason"]:
                failures[row["outage_id"]] = row["failure_reason"]
            else:
                preds.append(
                    _PredRow(
                        outage_id=row["outage_id"],
                        location=GeoPoint(float(row["lat"]), float(row["lon"])),
                        confidence=float(row["confidence"]),
                    )
                )
    return preds, failures


def read_truth_csv(path: Path) -> list[synth.GroundTruth]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        return [
            synth.GroundTruth(
                outage_id=row["outage_id"],
                true_location=GeoPoint(float(row["lat"]), float(row["lon"])),
            )
            for row in reader
        ]


def cmd_eval(args: argparse.Namespace) -> int:
    preds, failures = read_predictions_csv(Path(args.predictions))
    truths = read_truth_csv(Path(args.truth))
    try:
        report = ev.evaluate(preds, truths, args.hit_radius_m, failures=failures)
    except UnknownOutage as exc:
        print(str(exc), file=sys.stderr)
        return 3
    if args.out:
        _atomic_write(Path(args.out), ev.report_to_csv(report))
    print(
        f"hit_rate={report.hit_rate:.4f} n_outages={report.n_outages} "
        f"n_hits={report.n_hits} n_predicted={report.n_predicted}"
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    data_dir = Path(args.data)
    outages, pings, assets = _load_inputs(
        data_dir / "outages.csv", data_dir / "pings.csv", data_dir / "assets.geojson"
    )
    matching = [o for o in outages if o.outage_id == args.outage_id]
    if not matching:
        print(f"unknown outage_id {args.outage_id}", file=sys.stderr)
        return 4
    context = ingest.assemble_context(matching[0], pings, assets)
    table = min_pts_sensitivity(context, args.eps_m, args.min_pts)
    print(f"{'min_pts':>8} {'clusters':>9} {'noise':>7} {'best_conf':>10}")
    for mp in args.min_pts:
        row = table[mp]
        print(
            f"{mp:>8} {int(row['cluster_count']):>9} {int(row['noise_count']):>7} "
            f"{row['best_confidence']:>10.4f}"
        )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.run_dir))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="faultloc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic scenario suite")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--crew", type=int, default=2)
    sp.add_argument("--noise-vehicles", type=int, default=5)
    sp.add_argument("--duration-s", type=float, default=3600.0)
    sp.add_argument("--dwell-fraction", type=float, default=0.6)
    sp.add_argument("--gps-sigma-m", type=float, default=10.0)
    sp.add_argument("--ping-interval-s", type=float, default=60.0)
    sp.add_argument("--center-lat", type=float, default=39.3)
    sp.add_argument("--center-lon", type=float, default=-76.6)
    sp.set_defaults(func=cmd_synth)

    pp = sub.add_parser("predict", help="predict fault locations for every outage")
    pp.add_argument("--data", required=True, help="directory with outages/pings/assets files")
    pp.add_argument("--out", help="output directory (default: data dir)")
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--rounds", type=int, default=5)
    pp.add_argument("--samples", type=int, default=24)
    pp.add_argument("--jobs", type=int, default=1)
    pp.add_argument("--pad-before-s", type=float, default=0.0)
    pp.add_argument("--pad-after-s", type=float, default=1800.0)
    pp.add_argument("--bbox-buffer-m", type=float, default=500.0)
    pp.set_defaults(func=cmd_predict)

    ep = sub.add_parser("eval", help="score predictions against ground truth")
    ep.add_argument("--predictions", required=True)
    ep.add_argument("--truth", required=True)
    ep.add_argument("--hit-radius-m", type=float, default=100.0)
    ep.add_argument("--out", help="report CSV path")
    ep.set_defaults(func=cmd_eval)

    wp = sub.add_parser("sweep", help="min_pts sensitivity table for one outage")
    wp.add_argument("--data", required=True)
    wp.add_argument("--outage-id", required=True)
    wp.add_argument("--eps-m", type=float, required=True)
    wp.add_argument("--min-pts", type=int, nargs="+", required=True)
    wp.set_defaults(func=cmd_sweep)

    vp = sub.add_parser("serve", help="run the review service over a run directory")
    vp.add_argument("--run-dir", required=True)
    vp.add_argument("--host", default="127.0.0.1")
    vp.add_argument("--port", type=int, default=8800)
    vp.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except (ValueError, OSError) as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
