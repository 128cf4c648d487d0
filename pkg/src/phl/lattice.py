"""Bond percolation / random conductance samples on a finite box of Z^d.

A sample lives on the box {0, ..., L-1}^d with free boundary (no wrap, no
edges leaving the box).  The largest open component stands in for the
infinite cluster; all downstream measurements stay at least ``L/4`` away
from the box boundary and keep time horizons below ``(L/4)^2`` so that the
truncation error hides under Gaussian kernel tails.

Edge states are a pure function of (seed, canonical edge id).  Canonical ids
are built from box-centre-relative coordinates, so two boxes with different
side length but the same seed agree on every edge they share.  That is what
makes the nested-box diagnostics of the Green's-function module meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from collections import deque

import numpy as np
import scipy.sparse as sp

from .errors import (
    ConfigError,
    DomainError,
    LookupError_,
    MarginError,
    StructureError,
)
from .rng import (
    STREAM_BOND,
    STREAM_CONDUCTANCE,
    STREAM_SELF,
    counter_uniform,
)

_COORD_BIAS = 1 << 19          # supports |centered coordinate| < 2^19
_COORD_FIELD = 1 << 20

ANT_KINDS = ("myopic", "blind", "conductance")


# ---------------------------------------------------------------------------
# configs


@dataclass(frozen=True)
class BondConfig:
    """One sampled environment: per-edge open bits or conductances.

    ``tails``/``axes`` enumerate the nearest-neighbour edges of the box in a
    fixed row-major order: edge k joins vertex ``tails[k]`` to its neighbour
    one step along ``axes[k]``.  ``state`` holds the open bit (percolation)
    or the conductance value (random conductance model).
    """

    d: int
    L: int
    seed: int
    p: float | None
    K: float | None
    tails: np.ndarray
    axes: np.ndarray
    state: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.tails.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.L ** self.d

    def open_mask(self) -> np.ndarray:
        if self.state.dtype == np.bool_:
            return self.state
        return self.state > 0.0

    def heads(self) -> np.ndarray:
        """Linear index of the other endpoint of each edge."""
        return self.tails + self._strides()[self.axes]

    def _strides(self) -> np.ndarray:
        return np.array([self.L ** (self.d - 1 - a) for a in range(self.d)],
                        dtype=np.int64)


def _validate_box(d: int, L: int) -> None:
    if d not in (2, 3):
        raise ConfigError(f"dimension must be 2 or 3, got {d}")
    if L < 4:
        raise ConfigError(f"box side must be at least 4, got {L}")
    if L // 2 >= _COORD_BIAS:
        raise ConfigError(f"box side {L} exceeds the coordinate budget")


def _box_edges(d: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    """All nearest-neighbour edges as (tail linear index, axis)."""
    tails = []
    axes = []
    shape = (L,) * d
    idx = np.arange(L ** d, dtype=np.int64).reshape(shape)
    for a in range(d):
        sl = [slice(None)] * d
        sl[a] = slice(0, L - 1)
        t = idx[tuple(sl)].ravel()
        tails.append(t)
        axes.append(np.full(t.shape, a, dtype=np.uint8))
    return np.concatenate(tails), np.concatenate(axes)


def _edge_ids(d: int, L: int, tails: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """Canonical 64-bit edge ids from centre-relative tail coordinates."""
    centre = L // 2
    ids = np.zeros(tails.shape[0], dtype=np.uint64)
    rem = tails
    for a in range(d):
        stride = L ** (d - 1 - a)
        c = rem // stride - centre + _COORD_BIAS
        rem = rem % stride
        ids = ids * np.uint64(_COORD_FIELD) + c.astype(np.uint64)
    return ids * np.uint64(4) + axes.astype(np.uint64)


def gen_bond_config(d: int, L: int, p: float, seed: int) -> BondConfig:
    """i.i.d. Bernoulli(p) open edges, deterministic in (d, L, p, seed)."""
    _validate_box(d, L)
    if not (0.0 <= p <= 1.0):
        raise ConfigError(f"p must lie in [0, 1], got {p}")
    tails, axes = _box_edges(d, L)
    u = counter_uniform(seed, STREAM_BOND, _edge_ids(d, L, tails, axes))
    return BondConfig(d=d, L=L, seed=seed, p=p, K=None,
                      tails=tails, axes=axes, state=u < p)


def gen_conductance_config(d: int, L: int, K: float, seed: int) -> BondConfig:
    """i.i.d. conductances, log-uniform on [1/K, K].

    Any law supported on [1/K, K] would do for the bounded random
    conductance model; log-uniform is the documented default.  K = 1 is the
    degenerate case where every edge carries conductance exactly 1.
    """
    _validate_box(d, L)
    if K < 1.0:
        raise ConfigError(f"conductance bound K must be >= 1, got {K}")
    tails, axes = _box_edges(d, L)
    u = counter_uniform(seed, STREAM_CONDUCTANCE, _edge_ids(d, L, tails, axes))
    return BondConfig(d=d, L=L, seed=seed, p=None, K=K,
                      tails=tails, axes=axes, state=K ** (2.0 * u - 1.0))


def log_uniform_mean(K: float) -> float:
    """Exact mean of the log-uniform law on [1/K, K]."""
    if K == 1.0:
        return 1.0
    return (K - 1.0 / K) / (2.0 * np.log(K))


def gen_conductance_self_weights(config: BondConfig,
                                 vertex_ids: np.ndarray) -> np.ndarray:
    """i.i.d. vertex self weights on [1/K, K], log-uniform, counter-keyed.

    The bounded random conductance model allows a positive lazy component
    at every vertex; the default walk has none, but callers can attach
    these to build_weighted_graph.  Pure function of (seed, vertex
    coordinates), like the edge states.
    """
    if config.K is None:
        raise ConfigError("self weights need a conductance config")
    centre = config.L // 2
    coords = _coords_of(config, np.asarray(vertex_ids, dtype=np.int64))
    ids = np.zeros(coords.shape[0], dtype=np.uint64)
    for a in range(config.d):
        c = coords[:, a].astype(np.int64) - centre + _COORD_BIAS
        ids = ids * np.uint64(_COORD_FIELD) + c.astype(np.uint64)
    u = counter_uniform(config.seed, STREAM_SELF, ids)
    return config.K ** (2.0 * u - 1.0)


# ---------------------------------------------------------------------------
# giant cluster


class UnionFind:
    """Array-based union-find with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def extract_giant_cluster(config: BondConfig) -> np.ndarray | None:
    """Vertex set (sorted linear indices) of the largest open component.

    Ties between equal-sized components go to the one containing the
    smallest linear (= lexicographically smallest coordinate) vertex.
    Returns None when the sample has no open edge at all.
    """
    mask = config.open_mask()
    if not mask.any():
        return None
    tails = config.tails[mask]
    heads = config.heads()[mask]
    uf = UnionFind(config.n_vertices)
    find, union = uf.find, uf.union
    for a, b in zip(tails.tolist(), heads.tolist()):
        union(a, b)
    touched = np.unique(np.concatenate([tails, heads]))
    roots = np.fromiter((find(v) for v in touched.tolist()),
                        dtype=np.int64, count=touched.size)
    uniq, inverse, counts = np.unique(roots, return_inverse=True,
                                      return_counts=True)
    best = counts.max()
    # touched is sorted, so the first root attaining the maximal count is the
    # component with the smallest member vertex.
    winners = np.flatnonzero(counts == best)
    if winners.size == 1:
        w = winners[0]
    else:
        first_member = np.full(uniq.size, config.n_vertices, dtype=np.int64)
        np.minimum.at(first_member, inverse, touched)
        w = winners[np.argmin(first_member[winners])]
    return touched[inverse == w]


def flood_fill_components(config: BondConfig) -> list[np.ndarray]:
    """Independent BFS labelling; oracle for extract_giant_cluster."""
    mask = config.open_mask()
    tails = config.tails[mask]
    heads = config.heads()[mask]
    adj: dict[int, list[int]] = {}
    for a, b in zip(tails.tolist(), heads.tolist()):
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen: set[int] = set()
    comps = []
    for start in sorted(adj):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        dq = deque([start])
        while dq:
            v = dq.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    dq.append(w)
        comps.append(np.array(sorted(comp), dtype=np.int64))
    return comps


# ---------------------------------------------------------------------------
# weighted graphs


@dataclass
class WeightedGraph:
    """Cluster vertices with symmetric edge weights and vertex masses.

    ``weights`` is CSR over neighbours (self weights live in ``mu_self``);
    ``mu`` is exactly ``mu_self + row sum of weights`` by construction.
    Instances are immutable in spirit: nothing mutates them after build, so
    they are safe to share across workers.
    """

    d: int
    L: int
    kind: str
    vertex_ids: np.ndarray       # linear box indices, sorted ascending
    coords: np.ndarray           # (n, d) int32 box coordinates
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    mu_self: np.ndarray
    mu: np.ndarray
    _pmat: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return self.vertex_ids.shape[0]

    @property
    def centre(self) -> np.ndarray:
        """Geometric centre of the box (half-integer for even L)."""
        return np.full(self.d, (self.L - 1) / 2.0)

    def adjacency(self) -> sp.csr_matrix:
        n = self.n_vertices
        return sp.csr_matrix((self.weights, self.indices, self.indptr),
                             shape=(n, n))

    def transition_matrix(self) -> sp.csr_matrix:
        """Row-stochastic one-step matrix, including lazy self jumps."""
        if self._pmat is None:
            n = self.n_vertices
            a = sp.csr_matrix((self.weights / np.repeat(self.mu, np.diff(self.indptr)),
                               self.indices, self.indptr), shape=(n, n))
            if self.mu_self.any():
                a = (a + sp.diags(self.mu_self / self.mu)).tocsr()
            a.sort_indices()
            self._pmat = a
        return self._pmat

    def index_of(self, vertex_id: int) -> int:
        i = int(np.searchsorted(self.vertex_ids, vertex_id))
        if i >= self.n_vertices or self.vertex_ids[i] != vertex_id:
            raise LookupError_(f"vertex {vertex_id} not in graph")
        return i

    def boundary_gap(self) -> np.ndarray:
        """sup-norm distance of every vertex to the box boundary."""
        c = self.coords
        return np.minimum(c, self.L - 1 - c).min(axis=1)

    def interior_mask(self, margin: float | None = None) -> np.ndarray:
        """Vertices at least ``margin`` (default L/4) away from the boundary."""
        if margin is None:
            margin = self.L / 4.0
        return self.boundary_gap() >= margin


def build_weighted_graph(config: BondConfig, cluster: np.ndarray,
                         kind: str,
                         self_weights: np.ndarray | None = None) -> WeightedGraph:
    """Weighted walk graph on a connected cluster.

    myopic:       mu_xy = 1 on open edges, mu_xx = 0, mu_x = open degree.
    blind:        mu_xy = 1 on open edges, mu_xx = 2d - degree, mu_x = 2d,
                  using the full-lattice 2d even for box-boundary vertices
                  (those are excluded from measurements anyway).
    conductance:  mu_xy = sampled conductance; mu_xx = 0 by default, or the
                  supplied per-vertex self_weights (one entry per cluster
                  vertex in sorted id order, e.g. from
                  gen_conductance_self_weights).
    """
    if kind not in ANT_KINDS:
        raise ConfigError(f"unknown ant kind {kind!r}")
    if self_weights is not None and kind != "conductance":
        raise ConfigError("self weights only apply to the conductance walk")
    cluster = np.asarray(cluster, dtype=np.int64)
    if cluster.size == 0:
        raise StructureError("empty cluster")
    cluster = np.unique(cluster)

    mask = config.open_mask()
    tails = config.tails[mask]
    heads = config.heads()[mask]
    if config.state.dtype == np.bool_:
        vals = np.ones(tails.shape[0], dtype=np.float64)
    else:
        vals = config.state[mask].astype(np.float64)

    pos = np.searchsorted(cluster, tails)
    pos_ok = (pos < cluster.size) & (cluster[np.minimum(pos, cluster.size - 1)] == tails)
    keep = pos_ok.copy()
    hpos = np.searchsorted(cluster, heads)
    hpos_ok = (hpos < cluster.size) & (cluster[np.minimum(hpos, cluster.size - 1)] == heads)
    keep &= hpos_ok
    ti, hi, w = pos[keep], hpos[keep], vals[keep]

    n = cluster.size
    adj = sp.csr_matrix((np.concatenate([w, w]),
                         (np.concatenate([ti, hi]), np.concatenate([hi, ti]))),
                        shape=(n, n))
    adj.sum_duplicates()
    adj.sort_indices()
    deg_w = _row_sums(adj)

    if kind == "myopic":
        mu_self = np.zeros(n)
    elif kind == "blind":
        open_degree = np.diff(adj.indptr).astype(np.float64)
        mu_self = 2.0 * config.d - open_degree
        if (mu_self < 0).any():
            raise StructureError("vertex with degree above 2d")
    elif self_weights is not None:
        mu_self = np.asarray(self_weights, dtype=np.float64)
        if mu_self.shape != (n,):
            raise StructureError("one self weight per cluster vertex")
        if (mu_self < 0).any():
            raise StructureError("self weights must be nonnegative")
    else:
        mu_self = np.zeros(n)
    mu = mu_self + deg_w

    coords = _coords_of(config, cluster)
    g = WeightedGraph(d=config.d, L=config.L, kind=kind,
                      vertex_ids=cluster, coords=coords,
                      indptr=adj.indptr, indices=adj.indices,
                      weights=adj.data, mu_self=mu_self, mu=mu)
    if not _is_connected(g):
        raise StructureError("cluster is not connected")
    return g


def _row_sums(adj: sp.csr_matrix) -> np.ndarray:
    """Per-row weight sums in fixed CSR order (exact, reproducible)."""
    out = np.zeros(adj.shape[0])
    nonempty = np.diff(adj.indptr) > 0
    if adj.nnz:
        out[nonempty] = np.add.reduceat(adj.data, adj.indptr[:-1][nonempty])
    return out


def _coords_of(config: BondConfig, vertex_ids: np.ndarray) -> np.ndarray:
    coords = np.empty((vertex_ids.size, config.d), dtype=np.int32)
    rem = vertex_ids.copy()
    for a in range(config.d):
        stride = config.L ** (config.d - 1 - a)
        coords[:, a] = rem // stride
        rem = rem % stride
    return coords


def _is_connected(graph: WeightedGraph) -> bool:
    dist = graph_distances(graph, 0)
    return bool((dist >= 0).all())


# ---------------------------------------------------------------------------
# graph metric and geometry


def _neighbour_block(indptr: np.ndarray, indices: np.ndarray,
                     verts: np.ndarray) -> np.ndarray:
    starts = indptr[verts]
    counts = indptr[verts + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=indices.dtype)
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return indices[np.repeat(starts, counts) + offs]


def graph_distances(graph: WeightedGraph, x0: int) -> np.ndarray:
    """BFS distances from vertex index x0; -1 marks unreachable vertices."""
    n = graph.n_vertices
    if not (0 <= x0 < n):
        raise LookupError_(f"vertex index {x0} out of range")
    dist = np.full(n, -1, dtype=np.int32)
    dist[x0] = 0
    frontier = np.array([x0], dtype=np.int64)
    level = 0
    while frontier.size:
        nbrs = _neighbour_block(graph.indptr, graph.indices, frontier)
        nbrs = nbrs[dist[nbrs] < 0]
        if nbrs.size == 0:
            break
        frontier = np.unique(nbrs)
        level += 1
        dist[frontier] = level
    return dist


def closest_point(graph: WeightedGraph, w) -> int:
    """Index of the cluster vertex minimising |v - w|_inf, ties lexicographic."""
    if graph.n_vertices == 0:
        raise StructureError("empty graph")
    w = np.asarray(w, dtype=np.float64)
    gap = np.abs(graph.coords - w).max(axis=1)
    best = gap.min()
    cand = np.flatnonzero(gap == best)
    sub = graph.coords[cand]
    order = np.lexsort(tuple(sub[:, a] for a in reversed(range(graph.d))))
    return int(cand[order[0]])


def closest_point_scan(graph: WeightedGraph, w) -> int:
    """Plain-loop oracle for closest_point."""
    w = np.asarray(w, dtype=np.float64)
    best_idx = 0
    best_key = (float(np.abs(graph.coords[0] - w).max()),
                tuple(int(c) for c in graph.coords[0]))
    for i in range(1, graph.n_vertices):
        key = (float(np.abs(graph.coords[i] - w).max()),
               tuple(int(c) for c in graph.coords[i]))
        if key < best_key:
            best_key = key
            best_idx = i
    return best_idx


def hole_size(graph: WeightedGraph, r: int) -> int:
    """Largest k with an empty axis-aligned k-cube inside the window H(0, r).

    H(0, r) is the centred window of 2r lattice points per axis; "empty"
    means containing no cluster vertex.  Integer surrogate for the real
    supremum: same asymptotics, exactly computable.
    """
    lo, hi = _window_bounds(graph, graph.centre, r)
    occ = np.zeros(tuple(hi - lo), dtype=np.int64)
    inside = np.all((graph.coords >= lo) & (graph.coords < hi), axis=1)
    pts = graph.coords[inside] - lo
    if pts.size:
        occ[tuple(pts.T)] = 1
    return largest_empty_cube(occ)


def largest_empty_cube(occ: np.ndarray) -> int:
    """Side of the largest all-empty cube via prefix sums + binary search."""
    side = min(occ.shape)
    if side == 0:
        return 0
    pref = occ
    for a in range(occ.ndim):
        pref = np.cumsum(pref, axis=a)
    pref = np.pad(pref, [(1, 0)] * occ.ndim)

    def has_empty(k: int) -> bool:
        return bool((_box_counts(pref, k) == 0).any())

    if not has_empty(1):
        return 0
    lo_k, hi_k = 1, side
    while lo_k < hi_k:
        mid = (lo_k + hi_k + 1) // 2
        if has_empty(mid):
            lo_k = mid
        else:
            hi_k = mid - 1
    return lo_k


def _box_counts(pref: np.ndarray, k: int) -> np.ndarray:
    """Occupied counts of every k-cube, from the padded prefix-sum array."""
    nd = pref.ndim
    out = None
    for signs in range(1 << nd):
        sl = []
        bits = 0
        for a in range(nd):
            if (signs >> a) & 1:
                sl.append(slice(k, pref.shape[a]))
            else:
                sl.append(slice(0, pref.shape[a] - k))
                bits += 1
        term = pref[tuple(sl)]
        if out is None:
            out = term.astype(np.int64).copy() if bits % 2 == 0 else -term
        else:
            out = out + term if bits % 2 == 0 else out - term
    return out


def _window_bounds(graph: WeightedGraph, x, R,
                   margin: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    lo = np.ceil(x - R).astype(np.int64)
    hi = np.floor(x + R).astype(np.int64) + 1
    # half-open convention [x - R, x + R): drop the right endpoint when it
    # lands exactly on a lattice point, so the window holds 2R points per axis
    exact = (x + R) == np.floor(x + R)
    hi[exact] = (x[exact] + R).astype(np.int64)
    if (lo < 0).any() or (hi > graph.L).any():
        raise DomainError(f"window at {x} radius {R} leaves the box")
    if margin > 0.0:
        gap = min(lo.min(), graph.L - hi.max())
        if gap < margin - 1e-9:
            raise MarginError(
                f"window at {x} radius {R} violates the safety margin "
                f"{margin}")
    return lo, hi


def window_mass(graph: WeightedGraph, x, R) -> float:
    """mu(Lambda(x, R)): total vertex mass inside the window H(x, R).

    The window must respect the L/4 safety margin so that the free box
    boundary (reduced degrees, no blind-ant correction there) never enters
    a density measurement.
    """
    lo, hi = _window_bounds(graph, x, R, margin=graph.L / 4.0)
    inside = np.all((graph.coords >= lo) & (graph.coords < hi), axis=1)
    return float(graph.mu[inside].sum())


@dataclass
class GeometryReport:
    radii: list[int]
    masses: list[float]
    densities: list[float]
    a_hat: float
    hole_sizes: dict[int, int]


def density_estimate(graph: WeightedGraph, radii=None,
                     hole_radii=()) -> GeometryReport:
    """Window-mass density profile around the box centre.

    a_hat is mu(Lambda(0, R)) / (2R)^d at the largest margin-admissible R;
    the full profile is kept so reports can show how fast it settles.
    """
    if radii is None:
        rmax = graph.L // 4
        radii = sorted({max(2, rmax // 8), rmax // 4, rmax // 2, rmax})
    radii = [int(r) for r in radii if r >= 1]
    if not radii:
        raise ConfigError("no admissible window radii")
    centre = graph.centre
    masses = [window_mass(graph, centre, r) for r in radii]
    dens = [m / (2.0 * r) ** graph.d for r, m in zip(radii, masses)]
    holes = {int(r): hole_size(graph, int(r)) for r in hole_radii}
    return GeometryReport(radii=radii, masses=masses, densities=dens,
                          a_hat=dens[-1], hole_sizes=holes)


# ---------------------------------------------------------------------------
# snapshot io


def write_snapshot(path, config: BondConfig, graph: WeightedGraph) -> None:
    """Plain-text cluster snapshot: header plus 'x_id y_id weight' lines.

    Vertex ids encode box coordinates row-major (id = ((c0*L)+c1)*L+c2 ...).
    Self weights are emitted as x_id == y_id lines so the file alone
    reconstructs the walk.
    """
    param = f"p={config.p!r}" if config.p is not None else f"K={config.K!r}"
    with open(path, "w") as fh:
        fh.write(f"# phl cluster snapshot\n")
        fh.write(f"# d={graph.d} L={graph.L} {param} seed={config.seed} "
                 f"kind={graph.kind}\n")
        fh.write(f"# vertices={graph.n_vertices}\n")
        for i in range(graph.n_vertices):
            vid = graph.vertex_ids[i]
            if graph.mu_self[i] != 0.0:
                fh.write(f"{vid} {vid} {graph.mu_self[i]:.17g}\n")
            for k in range(graph.indptr[i], graph.indptr[i + 1]):
                j = graph.indices[k]
                if graph.vertex_ids[j] > vid:
                    fh.write(f"{vid} {graph.vertex_ids[j]} "
                             f"{graph.weights[k]:.17g}\n")


def read_snapshot(path) -> WeightedGraph:
    """Rebuild a WeightedGraph from a snapshot file."""
    header: dict[str, str] = {}
    xs, ys, ws = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        header[k] = v
                continue
            a, b, w = line.split()
            xs.append(int(a))
            ys.append(int(b))
            ws.append(float(w))
    try:
        d, L, kind = int(header["d"]), int(header["L"]), header["kind"]
    except KeyError as exc:
        raise StructureError(f"snapshot header missing {exc}") from exc
    xs = np.array(xs, dtype=np.int64)
    ys = np.array(ys, dtype=np.int64)
    ws = np.array(ws, dtype=np.float64)
    self_rows = xs == ys
    ids = np.unique(np.concatenate([xs, ys]))
    n = ids.size
    xi = np.searchsorted(ids, xs[~self_rows])
    yi = np.searchsorted(ids, ys[~self_rows])
    wv = ws[~self_rows]
    adj = sp.csr_matrix((np.concatenate([wv, wv]),
                         (np.concatenate([xi, yi]), np.concatenate([yi, xi]))),
                        shape=(n, n))
    adj.sum_duplicates()
    adj.sort_indices()
    mu_self = np.zeros(n)
    mu_self[np.searchsorted(ids, xs[self_rows])] = ws[self_rows]
    deg_w = _row_sums(adj)
    fake = BondConfig(d=d, L=L, seed=int(header.get("seed", 0)),
                      p=None, K=None,
                      tails=np.empty(0, np.int64), axes=np.empty(0, np.uint8),
                      state=np.empty(0, np.bool_))
    coords = _coords_of(fake, ids)
    return WeightedGraph(d=d, L=L, kind=kind, vertex_ids=ids, coords=coords,
                         indptr=adj.indptr, indices=adj.indices,
                         weights=adj.data, mu_self=mu_self,
                         mu=mu_self + deg_w)
