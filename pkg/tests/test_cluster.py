import math
import random
from collections import deque

import pytest

from faultloc.cluster import (
    NOISE,
    ClusterAssignment,
    DbscanParams,
    KDistanceCurve,
    dbscan,
    detect_elbow,
    elbow_index,
    k_distance_curve,
    summarize_clusters,
)
from faultloc.errors import InsufficientPoints
from faultloc.geo import GeoPoint, haversine_m, offset_point, pairwise_distance_matrix
from conftest import T0, ping, random_points
from oracles import dbscan_oracle

CENTER = GeoPoint(39.3, -76.6)


class TestDbscan:
    def test_empty(self):
        assert dbscan([], DbscanParams(10, 3)).labels == ()

    def test_identical_points_one_cluster(self):
        pts = [CENTER] * 5
        labels = dbscan(pts, DbscanParams(1.0, 3)).labels
        assert labels == (0, 0, 0, 0, 0)

    def test_blob_plus_far_noise(self, rng):
        pts = [offset_point(CENTER, rng.uniform(-10, 10), rng.uniform(-10, 10)) for _ in range(10)]
        pts.append(offset_point(CENTER, 10000, 0))
        labels = dbscan(pts, DbscanParams(100.0, 4)).labels
        assert set(labels[:10]) == {0}
        assert labels[10] == NOISE

    def test_oracle_equivalence_random(self):
        for seed in range(30):
            rng = random.Random(seed)
            n = rng.randint(5, 200)
            pts = random_points(rng, n, spread_m=rng.uniform(200, 3000))
            eps = math.exp(rng.uniform(math.log(10), math.log(1000)))
            min_pts = rng.randint(2, 20)
            got = list(dbscan(pts, DbscanParams(eps, min_pts)).labels)
            assert got == dbscan_oracle(pts, eps, min_pts), f"seed {seed}"

    def test_matrix_and_index_paths_agree(self, rng):
        pts = random_points(rng, 300, spread_m=1000)
        params = DbscanParams(80.0, 5)
        a = dbscan(pts, params).labels
        b = dbscan(pts, params, dist_matrix=pairwise_distance_matrix(pts)).labels
        assert a == b

    def test_core_noise_partition_order_invariant(self, rng):
        pts = random_points(rng, 120, spread_m=400)
        params = DbscanParams(60.0, 4)
        base = dbscan(pts, params).labels
        perm = list(range(len(pts)))
        rng.shuffle(perm)
        shuffled = [pts[i] for i in perm]
        shuf_labels = dbscan(shuffled, params).labels
        for new_pos, orig in enumerate(perm):
            assert (shuf_labels[new_pos] == NOISE) == (base[orig] == NOISE)

    def test_density_connectivity_graph_check(self, rng):
        # every pair in a cluster must be density-connected: path through
        # eps-adjacent core points touching both
        pts = random_points(rng, 60, spread_m=300)
        params = DbscanParams(80.0, 4)
        assignment = dbscan(pts, params)
        dist = pairwise_distance_matrix(pts)
        n = len(pts)
        core = [sum(1 for j in range(n) if dist[i][j] <= params.eps_m) >= params.min_pts
                for i in range(n)]
        for cid in range(assignment.n_clusters):
            members = [i for i, lb in enumerate(assignment.labels) if lb == cid]
            cores = [i for i in members if core[i]]
            assert cores, "every cluster has a core point"
            # BFS over core points from the first core
            reached = {cores[0]}
            queue = deque([cores[0]])
            while queue:
                i = queue.popleft()
                for j in cores:
                    if j not in reached and dist[i][j] <= params.eps_m:
                        reached.add(j)
                        queue.append(j)
            assert reached == set(cores)
            for i in members:
                assert any(dist[i][j] <= params.eps_m for j in cores)

    def test_growing_eps_keeps_core_points(self, rng):
        pts = random_points(rng, 100, spread_m=500)
        small = dbscan(pts, DbscanParams(50.0, 4)).labels
        large = dbscan(pts, DbscanParams(150.0, 4)).labels
        for lb_small, lb_large in zip(small, large):
            if lb_small != NOISE:
                assert lb_large != NOISE


class TestKDistanceCurve:
    def test_uniform_chain(self):
        pts = [offset_point(CENTER, 0, i * 100.0) for i in range(10)]
        curve = k_distance_curve(pts, 1)
        for v in curve.sorted_dists_m:
            assert v == pytest.approx(100.0, abs=0.5)

    def test_two_points(self):
        pts = [CENTER, offset_point(CENTER, 0, 250)]
        curve = k_distance_curve(pts, 1)
        assert len(curve.sorted_dists_m) == 2
        assert curve.sorted_dists_m[0] == pytest.approx(curve.sorted_dists_m[1])

    def test_matches_all_pairs_oracle(self, rng):
        pts = random_points(rng, 200, spread_m=1500)
        k = 5
        curve = k_distance_curve(pts, k)
        oracle = sorted(
            sorted(haversine_m(p, q) for j, q in enumerate(pts) if j != i)[k - 1]
            for i, p in enumerate(pts)
        )
        for got, want in zip(curve.sorted_dists_m, oracle):
            assert got == pytest.approx(want, abs=1e-6)

    def test_nondecreasing_in_k(self, rng):
        pts = random_points(rng, 50, spread_m=500)
        c2 = k_distance_curve(pts, 2).sorted_dists_m
        c5 = k_distance_curve(pts, 5).sorted_dists_m
        assert sum(c2) <= sum(c5)
        assert max(c2) <= max(c5)

    def test_k_too_large(self):
        with pytest.raises(InsufficientPoints):
            k_distance_curve([CENTER, CENTER], 2)


class TestDetectElbow:
    def test_flat_curve(self):
        assert detect_elbow(KDistanceCurve(1, (5.0, 5.0, 5.0, 5.0))) == 5.0

    def test_piecewise_knee(self):
        flat = [10.0] * 50
        ramp = [10.0 + (500.0 - 10.0) * i / 49 for i in range(50)]
        curve = KDistanceCurve(4, tuple(flat + ramp))
        idx = elbow_index(curve)
        assert abs(idx - 50) <= 2
        assert detect_elbow(curve) == curve.sorted_dists_m[idx]

    def test_linear_ramp_no_crash(self):
        curve = KDistanceCurve(1, tuple(float(i) for i in range(20)))
        assert detect_elbow(curve) in curve.sorted_dists_m

    def test_too_short(self):
        with pytest.raises(InsufficientPoints):
            detect_elbow(KDistanceCurve(1, (1.0, 2.0)))


class TestSummarizeClusters:
    def window(self, t0=0, t1=3600):
        from datetime import timedelta
        return (T0 + timedelta(seconds=t0), T0 + timedelta(seconds=t1))

    def test_single_vehicle_dwell(self):
        pings = [ping("V1", i * 60, CENTER) for i in range(11)]  # 600 s span
        assignment = ClusterAssignment(labels=(0,) * 11, params=DbscanParams(50, 4))
        summaries = summarize_clusters(assignment, pings, self.window())
        assert len(summaries) == 1
        s = summaries[0]
        assert s.dwell_by_vehicle == {"V1": 600.0}
        assert s.rms_radius_m < 1.0
        assert s.unique_vehicles == 1
        assert s.in_window_fraction == 1.0

    def test_arrival_order(self):
        pings = [ping("A", 0, CENTER), ping("B", 100, CENTER), ping("A", 200, CENTER),
                 ping("B", 300, CENTER)]
        assignment = ClusterAssignment(labels=(0, 0, 0, 0), params=DbscanParams(50, 2))
        s = summarize_clusters(assignment, pings, self.window())[0]
        assert s.arrival_order == ("A", "B")
        assert s.departure_order == ("A", "B")

    def test_two_cluster_per_label_oracle(self, rng):
        site_a = CENTER
        site_b = offset_point(CENTER, 5000, 0)
        pings, labels = [], []
        for i in range(20):
            pings.append(ping("V1", i * 60, offset_point(site_a, rng.uniform(-5, 5), 0)))
            labels.append(0)
        for i in range(15):
            pings.append(ping("V2", i * 60, offset_point(site_b, rng.uniform(-5, 5), 0)))
            labels.append(1)
        pings.append(ping("V3", 0, offset_point(site_a, 2000, 0)))
        labels.append(NOISE)
        assignment = ClusterAssignment(labels=tuple(labels), params=DbscanParams(50, 4))
        summaries = summarize_clusters(assignment, pings, self.window())
        assert [s.point_count for s in summaries] == [20, 15]
        for s, site in zip(summaries, (site_a, site_b)):
            assert haversine_m(s.centroid, site) < 10.0
        assert summaries[0].unique_vehicles == 1

    def test_noise_only_empty(self):
        pings = [ping("V1", 0, CENTER)]
        assignment = ClusterAssignment(labels=(NOISE,), params=DbscanParams(50, 4))
        assert summarize_clusters(assignment, pings, self.window()) == []
