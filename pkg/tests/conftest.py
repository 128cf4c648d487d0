import pytest

from phl import lattice as lat


@pytest.fixture(scope="session")
def perc_graph_2d():
    """d=2, p=0.7 percolation graph reused across tests (seed 3, L=64)."""
    cfg = lat.gen_bond_config(2, 64, 0.7, 3)
    cluster = lat.extract_giant_cluster(cfg)
    return lat.build_weighted_graph(cfg, cluster, "myopic")


@pytest.fixture(scope="session")
def full_graph_2d():
    """d=2 full lattice (p=1), L=64, myopic."""
    cfg = lat.gen_bond_config(2, 64, 1.0, 1)
    return lat.build_weighted_graph(cfg, lat.extract_giant_cluster(cfg),
                                    "myopic")


@pytest.fixture(scope="session")
def centre_vertex(perc_graph_2d):
    return lat.closest_point(perc_graph_2d, perc_graph_2d.centre)
