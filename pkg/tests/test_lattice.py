import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phl import lattice as lat
from phl.errors import ConfigError, DomainError, MarginError, StructureError

from util import brute_force_hole, dijkstra


class TestBondConfig:
    def test_p_one_opens_every_edge(self):
        cfg = lat.gen_bond_config(2, 4, 1.0, 7)
        assert cfg.n_edges == 24
        assert cfg.open_mask().sum() == 24

    def test_p_zero_opens_nothing(self):
        cfg = lat.gen_bond_config(2, 4, 0.0, 7)
        assert cfg.open_mask().sum() == 0

    def test_edge_count_formula(self):
        for d, L in [(2, 5), (2, 8), (3, 4), (3, 6)]:
            cfg = lat.gen_bond_config(d, L, 0.5, 1)
            assert cfg.n_edges == d * L ** (d - 1) * (L - 1)

    def test_open_fraction_within_3_sigma(self):
        cfg = lat.gen_bond_config(2, 64, 0.5, 42)
        n = cfg.n_edges
        frac = cfg.open_mask().sum() / n
        sigma = np.sqrt(0.5 * 0.5 / n)
        assert abs(frac - 0.5) < 3 * sigma

    def test_determinism_bit_exact(self):
        a = lat.gen_bond_config(2, 32, 0.37, 99)
        b = lat.gen_bond_config(2, 32, 0.37, 99)
        assert np.array_equal(a.state, b.state)

    def test_seeds_differ(self):
        a = lat.gen_bond_config(2, 32, 0.5, 1)
        b = lat.gen_bond_config(2, 32, 0.5, 2)
        assert not np.array_equal(a.state, b.state)

    def test_nested_boxes_share_central_edges(self):
        # centre-relative edge ids make the small box a restriction of the
        # large one
        small = lat.gen_bond_config(2, 16, 0.5, 5)
        big = lat.gen_bond_config(2, 32, 0.5, 5)
        from phl.lattice import _edge_ids
        ids_s = _edge_ids(2, 16, small.tails, small.axes)
        ids_b = _edge_ids(2, 32, big.tails, big.axes)
        lookup = dict(zip(ids_b.tolist(), big.state.tolist()))
        match = [lookup[i] == s for i, s in zip(ids_s.tolist(),
                                                small.state.tolist())]
        assert all(match)

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            lat.gen_bond_config(4, 8, 0.5, 1)
        with pytest.raises(ConfigError):
            lat.gen_bond_config(2, 3, 0.5, 1)
        with pytest.raises(ConfigError):
            lat.gen_bond_config(2, 8, 1.5, 1)


class TestConductanceConfig:
    def test_degenerate_bound_gives_unit_conductance(self):
        cfg = lat.gen_conductance_config(2, 8, 1.0, 3)
        assert np.all(cfg.state == 1.0)

    def test_support_constraint(self):
        cfg = lat.gen_conductance_config(2, 64, 4.0, 1)
        assert cfg.state.min() >= 0.25
        assert cfg.state.max() <= 4.0

    def test_mean_within_3_sigma_of_log_uniform(self):
        K = 4.0
        cfg = lat.gen_conductance_config(2, 64, K, 1)
        mean = lat.log_uniform_mean(K)
        # second moment of K^(2U-1): (K^2 - K^-2) / (4 ln K)
        m2 = (K ** 2 - K ** -2) / (4 * np.log(K))
        sigma = np.sqrt((m2 - mean ** 2) / cfg.n_edges)
        assert abs(cfg.state.mean() - mean) < 3 * sigma

    def test_k_below_one_rejected(self):
        with pytest.raises(ConfigError):
            lat.gen_conductance_config(2, 8, 0.5, 1)

    def test_optional_self_weights(self):
        cfg = lat.gen_conductance_config(2, 8, 3.0, 2)
        cluster = lat.extract_giant_cluster(cfg)
        sw = lat.gen_conductance_self_weights(cfg, cluster)
        assert sw.min() >= 1.0 / 3.0 and sw.max() <= 3.0
        assert np.array_equal(sw,
                              lat.gen_conductance_self_weights(cfg, cluster))
        g = lat.build_weighted_graph(cfg, cluster, "conductance",
                                     self_weights=sw)
        assert np.array_equal(g.mu_self, sw)
        from phl.lattice import _row_sums
        assert np.array_equal(g.mu, sw + _row_sums(g.adjacency()))
        # lazy walk still conserves kernel mass
        from phl import kernel as ker
        x0 = lat.closest_point(g, g.centre)
        sl = ker.kernel_slices(g, x0, [9])
        assert abs(sl[9].mass(g) - 1.0) < 1e-14

    def test_self_weights_rejected_for_ants(self):
        cfg = lat.gen_bond_config(2, 8, 1.0, 1)
        cluster = lat.extract_giant_cluster(cfg)
        with pytest.raises(ConfigError):
            lat.build_weighted_graph(cfg, cluster, "myopic",
                                     self_weights=np.ones(cluster.size))


class TestGiantCluster:
    def test_full_lattice_is_whole_box(self):
        cfg = lat.gen_bond_config(2, 8, 1.0, 1)
        cluster = lat.extract_giant_cluster(cfg)
        assert cluster.size == 64

    def test_no_open_edges_gives_none(self):
        cfg = lat.gen_bond_config(2, 8, 0.0, 1)
        assert lat.extract_giant_cluster(cfg) is None

    def test_matches_flood_fill_oracle(self):
        cfg = lat.gen_bond_config(2, 256, 0.7, 3)
        cluster = lat.extract_giant_cluster(cfg)
        comps = lat.flood_fill_components(cfg)
        biggest = max(comps, key=lambda c: (c.size, -c[0]))
        assert np.array_equal(cluster, biggest)

    def test_relabel_invariance(self):
        # permuting the edge enumeration must not change the winner
        cfg = lat.gen_bond_config(2, 32, 0.55, 9)
        perm = np.random.default_rng(0).permutation(cfg.n_edges)
        shuffled = lat.BondConfig(d=cfg.d, L=cfg.L, seed=cfg.seed, p=cfg.p,
                                  K=cfg.K, tails=cfg.tails[perm],
                                  axes=cfg.axes[perm], state=cfg.state[perm])
        assert np.array_equal(lat.extract_giant_cluster(cfg),
                              lat.extract_giant_cluster(shuffled))


class TestWeightedGraph:
    def test_blind_ant_masses(self, perc_graph_2d):
        cfg = lat.gen_bond_config(2, 64, 0.7, 3)
        cluster = lat.extract_giant_cluster(cfg)
        g = lat.build_weighted_graph(cfg, cluster, "blind")
        assert np.all(g.mu == 4.0)
        deg = np.diff(g.indptr)
        assert np.array_equal(g.mu_self, 4.0 - deg)

    def test_myopic_masses(self, perc_graph_2d):
        g = perc_graph_2d
        assert np.all(g.mu_self == 0.0)
        deg = np.diff(g.indptr)
        assert np.array_equal(g.mu, deg.astype(float))

    def test_weight_symmetry(self, perc_graph_2d):
        a = perc_graph_2d.adjacency()
        assert (a != a.T).nnz == 0

    def test_mass_identity_exact(self, perc_graph_2d):
        g = perc_graph_2d
        from phl.lattice import _row_sums
        assert np.array_equal(g.mu, g.mu_self + _row_sums(g.adjacency()))

    def test_full_lattice_blind_equals_myopic_off_the_hull(self):
        # the box hull has degree < 2d, so the blind ant keeps a self loop
        # there; away from it the two walks coincide at p = 1
        cfg = lat.gen_bond_config(2, 8, 1.0, 1)
        cluster = lat.extract_giant_cluster(cfg)
        gm = lat.build_weighted_graph(cfg, cluster, "myopic")
        gb = lat.build_weighted_graph(cfg, cluster, "blind")
        inner = gb.boundary_gap() >= 1
        assert np.array_equal(gm.mu[inner], gb.mu[inner])
        assert np.all(gb.mu_self[inner] == 0.0)
        assert np.all(gb.mu_self[~inner] > 0.0)

    def test_conductance_weights_copied(self):
        cfg = lat.gen_conductance_config(2, 8, 3.0, 2)
        cluster = lat.extract_giant_cluster(cfg)
        g = lat.build_weighted_graph(cfg, cluster, "conductance")
        assert cluster.size == 64          # all conductances positive
        assert g.weights.min() >= 1.0 / 3.0
        assert g.weights.max() <= 3.0

    def test_disconnected_cluster_rejected(self):
        cfg = lat.gen_bond_config(2, 8, 1.0, 1)
        bad = np.array([0, 63], dtype=np.int64)   # two far corners
        with pytest.raises(StructureError):
            lat.build_weighted_graph(cfg, bad, "myopic")

    def test_determinism(self):
        cfg = lat.gen_bond_config(2, 32, 0.6, 4)
        cluster = lat.extract_giant_cluster(cfg)
        g1 = lat.build_weighted_graph(cfg, cluster, "myopic")
        g2 = lat.build_weighted_graph(cfg, cluster, "myopic")
        assert np.array_equal(g1.weights, g2.weights)
        assert np.array_equal(g1.vertex_ids, g2.vertex_ids)


class TestGraphDistances:
    def test_distance_to_self_is_zero(self, perc_graph_2d, centre_vertex):
        dist = lat.graph_distances(perc_graph_2d, centre_vertex)
        assert dist[centre_vertex] == 0

    def test_full_lattice_is_l1(self, full_graph_2d):
        g = full_graph_2d
        x0 = lat.closest_point(g, (10, 10))
        dist = lat.graph_distances(g, x0)
        l1 = np.abs(g.coords - g.coords[x0]).sum(axis=1)
        assert np.array_equal(dist, l1)

    def test_matches_dijkstra_oracle(self, perc_graph_2d, centre_vertex):
        dist = lat.graph_distances(perc_graph_2d, centre_vertex)
        oracle = dijkstra(perc_graph_2d, centre_vertex)
        assert np.array_equal(dist, oracle)

    def test_sup_norm_lower_bound(self, perc_graph_2d, centre_vertex):
        g = perc_graph_2d
        dist = lat.graph_distances(g, centre_vertex)
        sup = np.abs(g.coords - g.coords[centre_vertex]).max(axis=1)
        assert np.all(sup <= dist)


class TestClosestPoint:
    def test_exact_vertex(self, perc_graph_2d):
        g = perc_graph_2d
        i = 17
        assert lat.closest_point(g, g.coords[i]) == i

    def test_tie_break_lexicographic(self):
        cfg = lat.gen_bond_config(2, 8, 1.0, 1)
        g = lat.build_weighted_graph(cfg, lat.extract_giant_cluster(cfg),
                                     "myopic")
        # (3, 3.5) is equidistant from (3,3) and (3,4); also from (2,4) etc?
        idx = lat.closest_point(g, (3.0, 3.5))
        assert tuple(g.coords[idx]) == (3, 3)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0, 63), st.floats(0, 63))
    def test_matches_scan_oracle(self, wx, wy):
        g = _scan_graph()
        assert lat.closest_point(g, (wx, wy)) == \
            lat.closest_point_scan(g, (wx, wy))


_SCAN_CACHE = {}


def _scan_graph():
    if "g" not in _SCAN_CACHE:
        cfg = lat.gen_bond_config(2, 16, 0.7, 8)
        _SCAN_CACHE["g"] = lat.build_weighted_graph(
            cfg, lat.extract_giant_cluster(cfg), "myopic")
    return _SCAN_CACHE["g"]


class TestHoleSize:
    def test_full_lattice_no_holes(self, full_graph_2d):
        for r in (4, 8, 12):
            assert lat.hole_size(full_graph_2d, r) == 0

    def test_single_vertex_cluster_hole_is_box_limited(self):
        from util import make_graph
        # lone vertex at the low corner of the 8x8 window: the opposite
        # (2r-1)-cube is empty, and nothing bigger fits
        g = make_graph([(4, 4)], [], L=16)
        assert lat.hole_size(g, 4) == 7
        # dead centre: every cube with side > r covers the vertex
        g2 = make_graph([(8, 8)], [], L=16)
        assert lat.hole_size(g2, 4) == 4

    def test_matches_brute_force(self, perc_graph_2d):
        g = perc_graph_2d
        r = 12
        from phl.lattice import _window_bounds
        lo, hi = _window_bounds(g, g.centre, r)
        occ = np.zeros(tuple(hi - lo), dtype=np.int64)
        inside = np.all((g.coords >= lo) & (g.coords < hi), axis=1)
        occ[tuple((g.coords[inside] - lo).T)] = 1
        assert lat.hole_size(g, r) == brute_force_hole(occ)

    def test_window_leaving_box_rejected(self, perc_graph_2d):
        with pytest.raises(DomainError):
            lat.hole_size(perc_graph_2d, 64)


class TestWindowMass:
    def test_full_lattice_density_is_2d(self, full_graph_2d):
        rep = lat.density_estimate(full_graph_2d)
        assert rep.a_hat == 4.0
        assert all(v == 4.0 for v in rep.densities)

    def test_blind_full_lattice_density(self):
        cfg = lat.gen_bond_config(2, 32, 1.0, 1)
        g = lat.build_weighted_graph(cfg, lat.extract_giant_cluster(cfg),
                                     "blind")
        assert lat.density_estimate(g).a_hat == 4.0

    def test_percolation_density_in_range_and_stable(self):
        cfg = lat.gen_bond_config(2, 256, 0.7, 3)
        g = lat.build_weighted_graph(cfg, lat.extract_giant_cluster(cfg),
                                     "myopic")
        rep = lat.density_estimate(g)
        assert 0.0 < rep.a_hat < 4.0
        d1, d2 = rep.densities[-2:]
        assert abs(d1 - d2) / d2 < 0.02

    def test_monotone_in_radius(self, perc_graph_2d):
        g = perc_graph_2d
        masses = [lat.window_mass(g, g.centre, r) for r in (4, 8, 12, 16)]
        assert all(a <= b for a, b in zip(masses, masses[1:]))

    def test_additive_over_disjoint_windows(self, perc_graph_2d):
        g = perc_graph_2d
        c = g.centre
        big = lat.window_mass(g, c, 8)
        quads = 0.0
        for dx in (-4, 4):
            for dy in (-4, 4):
                quads += lat.window_mass(g, c + np.array([dx, dy]), 4)
        assert quads == big

    def test_margin_rejection(self, perc_graph_2d):
        with pytest.raises(MarginError):
            lat.window_mass(perc_graph_2d, perc_graph_2d.centre, 30)

    def test_direct_count_oracle(self, perc_graph_2d):
        g = perc_graph_2d
        r = 10
        lo = np.ceil(g.centre - r).astype(int)
        hi = np.floor(g.centre + r).astype(int) + 1
        total = sum(float(g.mu[i]) for i in range(g.n_vertices)
                    if np.all(g.coords[i] >= lo) and np.all(g.coords[i] < hi))
        assert lat.window_mass(g, g.centre, r) == total


class TestSnapshot:
    def test_round_trip(self, tmp_path, perc_graph_2d):
        cfg = lat.gen_bond_config(2, 64, 0.7, 3)
        path = tmp_path / "snap.txt"
        lat.write_snapshot(path, cfg, perc_graph_2d)
        g2 = lat.read_snapshot(path)
        g1 = perc_graph_2d
        assert np.array_equal(g1.vertex_ids, g2.vertex_ids)
        assert np.array_equal(g1.indices, g2.indices)
        assert np.array_equal(g1.weights, g2.weights)
        assert np.array_equal(g1.mu, g2.mu)
        assert g2.kind == "myopic"

    def test_blind_self_weights_survive(self, tmp_path):
        cfg = lat.gen_bond_config(2, 16, 0.6, 2)
        g = lat.build_weighted_graph(cfg, lat.extract_giant_cluster(cfg),
                                     "blind")
        path = tmp_path / "snap.txt"
        lat.write_snapshot(path, cfg, g)
        g2 = lat.read_snapshot(path)
        assert np.array_equal(g.mu_self, g2.mu_self)
        assert np.array_equal(g.mu, g2.mu)
