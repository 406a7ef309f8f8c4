import math
import random
from datetime import timedelta

import pytest

from faultloc.cluster import ClusterSummary, DbscanParams
from faultloc.errors import NoCluster, TooFewPings
from faultloc.geo import GeoPoint, haversine_m, offset_point
from faultloc.ingest import OutageEvent, assemble_context
from faultloc.optimize import (
    Candidate,
    OptimizeConfig,
    ScoreWeights,
    SearchSpace,
    confidence_score,
    initial_search_space,
    min_pts_sensitivity,
    optimize,
    refine_search_space,
    sample_candidates,
)
from conftest import T0, ping

CENTER = GeoPoint(39.3, -76.6)


def make_outage(duration_s=3600.0):
    return OutageEvent("O1", "F1", CENTER, T0, T0 + timedelta(seconds=duration_s))


def make_summary(dwell_s, vehicles, temporal, rms_m):
    dwell = {f"V{i}": dwell_s / vehicles for i in range(vehicles)}
    order = tuple(sorted(dwell))
    return ClusterSummary(
        cluster_ordinal=0,
        centroid=CENTER,
        point_count=50,
        unique_vehicles=vehicles,
        dwell_by_vehicle=dwell,
        arrival_order=order,
        departure_order=order,
        rms_radius_m=rms_m,
        in_window_fraction=temporal,
    )


def blob_context(n=100, spread_m=10.0, duration_s=3600.0, extra=(), seed=7):
    rng = random.Random(seed)
    outage = make_outage(duration_s)
    pings = [
        ping("V1" if i % 2 else "V2", i * duration_s / n,
             offset_point(CENTER, rng.uniform(-spread_m, spread_m), rng.uniform(-spread_m, spread_m)))
        for i in range(n)
    ]
    pings.extend(extra)
    return assemble_context(outage, pings, [])


class TestConfidenceScore:
    def test_all_components_one(self):
        s = make_summary(dwell_s=3600, vehicles=3, temporal=1.0, rms_m=0.0)
        assert confidence_score(s, make_outage(), ScoreWeights(), eps_m=100) == pytest.approx(1.0)

    def test_single_vehicle_component(self):
        s = make_summary(dwell_s=0.0, vehicles=1, temporal=0.0, rms_m=1e9)
        score = confidence_score(s, make_outage(), ScoreWeights(), eps_m=100)
        assert score == pytest.approx((1 / 3) / 4)

    def test_hand_computed_fixture(self):
        # components: dwell 0.5, vehicles 2/3, temporal 1.0, compact 0.8
        s = make_summary(dwell_s=1800, vehicles=2, temporal=1.0, rms_m=20.0)
        score = confidence_score(s, make_outage(), ScoreWeights(), eps_m=100)
        oracle = (0.5 + 2 / 3 + 1.0 + 0.8) / 4.0
        assert score == pytest.approx(oracle, abs=1e-9)

    def test_weight_normalization(self):
        s = make_summary(dwell_s=1800, vehicles=2, temporal=1.0, rms_m=20.0)
        a = confidence_score(s, make_outage(), ScoreWeights(1, 1, 1, 1), eps_m=100)
        b = confidence_score(s, make_outage(), ScoreWeights(2, 2, 2, 2), eps_m=100)
        assert a == pytest.approx(b)

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            ScoreWeights(0, 0, 0, 0)


class TestInitialSearchSpace:
    def test_too_few_pings(self):
        ctx = blob_context(n=7)
        with pytest.raises(TooFewPings):
            initial_search_space(ctx)

    def test_uniform_steps_formula(self):
        # pings spaced exactly 30 m apart in a chain: p10 of steps = 30,
        # k-distance elbow is ~30 too (flat curve except edges)
        outage = make_outage()
        pings = [ping("V1", i * 60, offset_point(CENTER, 0, i * 30.0)) for i in range(40)]
        ctx = assemble_context(outage, pings, [])
        space = initial_search_space(ctx)
        assert space.eps_range_m[0] == pytest.approx(30.0, abs=0.5)
        # elbow of a near-flat curve stays near the common value
        assert space.eps_range_m[1] <= 2 * 130  # 4th neighbor is 120 m away
        assert space.min_pts_range[0] == 4

    def test_min_pts_cap(self):
        ctx = blob_context(n=3000, spread_m=300)
        space = initial_search_space(ctx)
        assert space.min_pts_range == (4, 100)

    def test_small_context_min_pts_floor(self):
        ctx = blob_context(n=20)
        space = initial_search_space(ctx)
        assert space.min_pts_range == (4, 4)


class TestSampleCandidates:
    def test_degenerate_space(self):
        space = SearchSpace((50.0, 50.0), (4, 4))
        cands = sample_candidates(space, 5, seed=1)
        assert all(c == DbscanParams(50.0, 4) for c in cands)

    def test_deterministic(self):
        space = SearchSpace((10.0, 1000.0), (4, 20))
        assert sample_candidates(space, 20, seed=9) == sample_candidates(space, 20, seed=9)

    def test_log_uniform_quantiles(self):
        space = SearchSpace((10.0, 1000.0), (4, 20))
        cands = sample_candidates(space, 10000, seed=0)
        eps = sorted(c.eps_m for c in cands)
        # log-uniform: median at geometric mean, quartiles one half-decade apart
        assert eps[5000] == pytest.approx(100.0, rel=0.05)
        assert eps[2500] == pytest.approx(10 ** 1.5, rel=0.05)
        assert eps[7500] == pytest.approx(10 ** 2.5, rel=0.05)
        for c in cands:
            assert 10.0 <= c.eps_m <= 1000.0
            assert 4 <= c.min_pts <= 20


class TestRefineSearchSpace:
    def space(self):
        return SearchSpace((10.0, 1000.0), (4, 40))

    def cand(self, eps, mp, conf):
        return Candidate(params=DbscanParams(eps, mp), best_summary=None, confidence=conf)

    def test_all_zero_unchanged(self):
        scored = [self.cand(100, 10, 0.0) for _ in range(8)]
        assert refine_search_space(self.space(), scored, 0.25) == self.space()

    def test_single_dominant_candidate(self):
        scored = [
            self.cand(200, 10, 0.9),
            self.cand(50, 5, 0.1),
            self.cand(500, 30, 0.1),
            self.cand(900, 35, 0.1),
        ]
        refined = refine_search_space(self.space(), scored, 0.25)
        assert refined.eps_range_m == (pytest.approx(180.0), pytest.approx(220.0))
        assert refined.min_pts_range == (9, 11)

    def test_never_exceeds_original(self, rng):
        space = self.space()
        for _ in range(50):
            scored = [
                self.cand(rng.uniform(10, 1000), rng.randint(4, 40), rng.random())
                for _ in range(12)
            ]
            refined = refine_search_space(space, scored, 0.25)
            assert space.contains(refined)


class TestOptimize:
    def test_tight_blob_prediction(self):
        ctx = blob_context(n=100, spread_m=10.0)
        pred = optimize(ctx, OptimizeConfig(seed=3))
        assert haversine_m(pred.location, CENTER) < 10.0
        assert pred.confidence > 0.5
        assert pred.noise_count + pred.cluster.point_count <= len(ctx.pings)

    def test_deterministic(self):
        ctx = blob_context(n=80)
        a = optimize(ctx, OptimizeConfig(seed=11))
        b = optimize(ctx, OptimizeConfig(seed=11))
        assert a == b

    def test_no_cluster(self):
        # 10 isolated points, far apart: nothing can cluster at eps <= 1 km
        outage = make_outage()
        pings = [ping(f"V{i}", i * 300, offset_point(CENTER, 0, i * 2500.0)) for i in range(10)]
        ctx = assemble_context(outage, pings, [],)
        with pytest.raises((NoCluster, TooFewPings)):
            optimize(ctx, OptimizeConfig(seed=0))

    def test_trace_best_nondecreasing(self):
        ctx = blob_context(n=120, spread_m=40.0)
        trace = []
        optimize(ctx, OptimizeConfig(seed=5), trace=trace)
        best = [t["best_confidence"] for t in trace]
        assert best == sorted(best)

    def test_noise_count_invariant(self):
        far = [ping("TRK", i * 60, offset_point(CENTER, 400, i * 300.0)) for i in range(8)]
        ctx = blob_context(n=60, spread_m=10.0, extra=far)
        pred = optimize(ctx, OptimizeConfig(seed=2))
        # noise + clustered = total pings for the winning assignment
        from faultloc.cluster import dbscan
        assignment = dbscan([p.position for p in ctx.pings], pred.params)
        clustered = sum(1 for lb in assignment.labels if lb >= 0)
        assert pred.noise_count + clustered == len(ctx.pings)


class TestMinPtsSensitivity:
    def test_min_pts_one_no_noise(self):
        ctx = blob_context(n=30, spread_m=200)
        table = min_pts_sensitivity(ctx, eps_m=50.0, min_pts_values=[1])
        assert table[1]["noise_count"] == 0

    def test_min_pts_above_count_no_clusters(self):
        ctx = blob_context(n=20)
        table = min_pts_sensitivity(ctx, eps_m=50.0, min_pts_values=[100])
        assert table[100]["cluster_count"] == 0

    def test_coverage_non_increasing(self, rng):
        for seed in range(5):
            ctx = blob_context(n=60, spread_m=150, seed=seed)
            values = [2, 4, 8, 16, 32]
            table = min_pts_sensitivity(ctx, eps_m=80.0, min_pts_values=values)
            coverage = [len(ctx.pings) - table[v]["noise_count"] for v in values]
            assert coverage == sorted(coverage, reverse=True)
