"""Instantaneous wireless graph construction and interference sums."""

import csv
import math
import random

import numpy as np
import pytest

from manetsim.config import ScenarioConfig
from manetsim.mobility import NodeState, init_mobility, link_expiration_time
from manetsim.topology import dump_edges, snapshot, traffic_interference


def make_states(positions, battery=1500.0, speed=0.0, heading=0.0):
    return [NodeState(id=i, pos=p, speed=speed, heading=heading,
                      waypoint=p, battery=battery)
            for i, p in enumerate(positions)]


def random_states(rng, n=50, area=1000.0, v_max=20.0):
    return [NodeState(id=i,
                      pos=(rng.uniform(0, area), rng.uniform(0, area)),
                      speed=rng.uniform(0.01, v_max),
                      heading=rng.uniform(0, 2 * math.pi),
                      waypoint=(0.0, 0.0), battery=1500.0)
            for i in range(n)]


class TestSnapshotEdges:
    def test_boundary_distance_inclusive(self):
        snap = snapshot(make_states([(0.0, 0.0), (0.0, 250.0)]), 250.0, 0.0)
        assert snap.has_edge(0, 1)
        assert snap.distance(0, 1) == pytest.approx(250.0)

    def test_boundary_distance_exclusive(self):
        snap = snapshot(make_states([(0.0, 0.0), (0.0, 250.01)]), 250.0, 0.0)
        assert not snap.has_edge(0, 1)

    def test_no_self_loops(self):
        snap = snapshot(make_states([(0.0, 0.0), (10.0, 0.0)]), 250.0, 0.0)
        assert not snap.has_edge(0, 0)
        assert 0 not in snap.neighbors(0)

    def test_dead_nodes_carry_no_edges(self):
        states = make_states([(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)])
        states[1].battery = 0.0
        snap = snapshot(states, 250.0, 0.0)
        assert snap.neighbors(1) == []
        assert snap.neighbors(0) == [2]

    def test_empty_states_rejected(self):
        with pytest.raises(ValueError):
            snapshot([], 250.0, 0.0)

    def test_symmetry_random(self):
        rng = random.Random(8)
        for _ in range(10):
            snap = snapshot(random_states(rng), 250.0, 0.0)
            assert (snap.in_range == snap.in_range.T).all()
            for i, nbrs in snap.adjacency.items():
                for j, dist, let in nbrs:
                    assert dist <= 250.0
                    back = {k: (d, l) for k, d, l in snap.adjacency[j]}
                    assert i in back
                    assert back[i] == (dist, let)

    def test_let_matrix_matches_scalar_formula(self):
        rng = random.Random(9)
        states = random_states(rng)
        snap = snapshot(states, 250.0, 0.0)
        for i in range(snap.n):
            for j in snap.neighbors(i):
                expected = link_expiration_time(states[i], states[j], 250.0)
                got = snap.let[i, j]
                if math.isinf(expected):
                    assert math.isinf(got)
                else:
                    assert got == pytest.approx(expected, rel=1e-9)

    def test_mean_degree_matches_density(self):
        # 50 uniform nodes in 1000 m^2 at r=250 average about 10 neighbors
        degrees = []
        for seed in range(20):
            cfg = ScenarioConfig(node_count=50)
            states = init_mobility(cfg, random.Random(seed))
            snap = snapshot(states, 250.0, 0.0)
            degrees.append(snap.degrees().mean())
        assert abs(sum(degrees) / len(degrees) - 10.0) <= 3.0

    def test_degree_monotone_in_density(self):
        def mean_degree(n):
            vals = []
            for seed in range(10):
                states = init_mobility(ScenarioConfig(node_count=n),
                                       random.Random(seed))
                vals.append(snapshot(states, 250.0, 0.0).degrees().mean())
            return sum(vals) / len(vals)

        assert mean_degree(100) >= mean_degree(50)


class TestTrafficInterference:
    def test_isolated_node(self):
        snap = snapshot(make_states([(0.0, 0.0), (900.0, 900.0)]), 250.0, 0.0)
        states = make_states([(0.0, 0.0), (900.0, 900.0)])
        assert traffic_interference(snap, states, 0) == 0

    def test_direct_sum(self):
        states = make_states([(0.0, 0.0), (100.0, 0.0), (0.0, 100.0),
                              (-100.0, 0.0), (900.0, 900.0)])
        for node, act in zip(states[1:4], (2, 0, 3)):
            node.activity = act
        snap = snapshot(states, 250.0, 0.0)
        assert traffic_interference(snap, states, 0) == 5

    def test_unknown_node_rejected(self):
        states = make_states([(0.0, 0.0), (10.0, 0.0)])
        snap = snapshot(states, 250.0, 0.0)
        with pytest.raises(KeyError):
            traffic_interference(snap, states, 7)

    def test_matches_recount_from_route_table(self):
        # activities derived from a random live-route list, then interference
        # cross-checked against a brute-force recount over that list
        rng = random.Random(13)
        states = random_states(rng, n=8, area=400.0)
        routes = []
        for _ in range(6):
            nodes = rng.sample(range(8), rng.randint(2, 5))
            routes.append(nodes)
            for m in nodes[1:-1]:
                states[m].activity += 1
        snap = snapshot(states, 250.0, 0.0)
        for node in range(8):
            expected = sum(sum(1 for r in routes if m in r[1:-1])
                           for m in snap.neighbors(node))
            assert traffic_interference(snap, states, node) == expected


class TestDumpEdges:
    def test_csv_lists_each_edge_once(self, tmp_path):
        states = make_states([(0.0, 0.0), (100.0, 0.0), (600.0, 600.0)])
        snap = snapshot(states, 250.0, 1.5)
        path = tmp_path / "edges.csv"
        dump_edges(snap, path)
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 1
        row = rows[0]
        assert (int(row["i"]), int(row["j"])) == (0, 1)
        assert float(row["dist_m"]) == pytest.approx(100.0)
        assert float(row["time_s"]) == 1.5
        assert float(row["let_s"]) == math.inf  # static nodes never separate
