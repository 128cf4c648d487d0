"""Hand-built graphs and oracles shared by the test modules."""

import heapq

import numpy as np
import scipy.sparse as sp

from phl.lattice import WeightedGraph


def make_graph(coords, edges, kind="myopic", d=2, L=16, weights=None):
    """WeightedGraph from explicit coordinates and edge index pairs.

    Coordinates must be distinct points of {0..L-1}^d given in row-major
    order (the class keeps vertex ids sorted).
    """
    coords = np.asarray(coords, dtype=np.int32)
    n = coords.shape[0]
    ids = np.zeros(n, dtype=np.int64)
    for a in range(d):
        ids = ids * L + coords[:, a]
    assert (np.diff(ids) > 0).all(), "coords must be sorted row-major"
    if weights is None:
        weights = [1.0] * len(edges)
    ii = np.array([e[0] for e in edges] + [e[1] for e in edges])
    jj = np.array([e[1] for e in edges] + [e[0] for e in edges])
    ww = np.array(list(weights) * 2, dtype=np.float64)
    adj = sp.csr_matrix((ww, (ii, jj)), shape=(n, n))
    adj.sum_duplicates()
    adj.sort_indices()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    if kind == "blind":
        mu_self = 2.0 * d - np.diff(adj.indptr)
    else:
        mu_self = np.zeros(n)
    return WeightedGraph(d=d, L=L, kind=kind, vertex_ids=ids, coords=coords,
                         indptr=adj.indptr, indices=adj.indices,
                         weights=adj.data, mu_self=mu_self,
                         mu=mu_self + deg)


def path_graph(n, kind="myopic", L=32):
    coords = [(0, i) for i in range(n)]
    edges = [(i, i + 1) for i in range(n - 1)]
    return make_graph(coords, edges, kind=kind, L=L)


def cycle4(kind="myopic"):
    coords = [(0, 0), (0, 1), (1, 0), (1, 1)]
    edges = [(0, 1), (0, 2), (1, 3), (2, 3)]
    return make_graph(coords, edges, kind=kind, L=4)


def dijkstra(graph, source):
    """heapq shortest paths with unit edge lengths; distance oracle."""
    n = graph.n_vertices
    dist = [np.inf] * n
    dist[source] = 0
    heap = [(0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for k in range(graph.indptr[v], graph.indptr[v + 1]):
            w = int(graph.indices[k])
            if d + 1 < dist[w]:
                dist[w] = d + 1
                heapq.heappush(heap, (d + 1, w))
    return np.array([d if np.isfinite(d) else -1 for d in dist])


def brute_force_hole(occ):
    """Largest all-empty cube by direct scan over positions and sizes."""
    shape = occ.shape
    best = 0
    kmax = min(shape)
    for k in range(1, kmax + 1):
        found = False
        ranges = [range(s - k + 1) for s in shape]
        if occ.ndim == 2:
            for i in ranges[0]:
                for j in ranges[1]:
                    if not occ[i:i + k, j:j + k].any():
                        found = True
                        break
                if found:
                    break
        else:
            for i in ranges[0]:
                for j in ranges[1]:
                    for l in ranges[2]:
                        if not occ[i:i + k, j:j + k, l:l + k].any():
                            found = True
                            break
                    if found:
                        break
                if found:
                    break
        if found:
            best = k
        else:
            break
    return best


def mc_reduite(field, n, x_local, n_paths=100_000, seed=0):
    """Monte Carlo estimate of the reduite at one space-time point.

    Runs the space-time chain (clock decreasing) until it hits
    E = (0,T] x B_1 (collect u there) or leaves the cylinder (collect 0).
    Returns (estimate, standard_error).
    """
    cyl = field.cylinder
    graph = cyl.graph
    rng = np.random.default_rng(seed)

    p = graph.transition_matrix()
    # local transition rows over Bbar plus a sink for exits
    bbar = cyl.bbar
    local = np.full(graph.n_vertices, -1, dtype=np.int64)
    local[bbar] = np.arange(bbar.size)
    nb = cyl.n_b
    sink = bbar.size
    rows = []
    for v in cyl.b:
        cols = []
        probs = []
        row = p[v]
        for k in range(row.indptr[0], row.indptr[1]):
            j = int(row.indices[k])
            tgt = local[j] if local[j] >= 0 else sink
            cols.append(tgt)
            probs.append(row.data[k])
        rows.append((np.array(cols), np.cumsum(probs)))

    in_b1 = np.zeros(bbar.size + 1, dtype=bool)
    in_b1[:nb] = cyl.in_b1

    u_int = field.interior
    total = 0.0
    total_sq = 0.0
    pos0 = x_local
    for _ in range(n_paths):
        clock = n
        pos = pos0
        val = 0.0
        while True:
            if clock <= 0:
                break
            if in_b1[pos]:
                val = u_int[clock, pos]
                break
            if pos >= nb:
                break          # boundary or sink: outside Q
            cols, cum = rows[pos]
            u = rng.random() * cum[-1]
            pos = int(cols[np.searchsorted(cum, u)])
            clock -= 1
        total += val
        total_sq += val * val
    mean = total / n_paths
    var = max(total_sq / n_paths - mean * mean, 0.0)
    return mean, np.sqrt(var / n_paths)
