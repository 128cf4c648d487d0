"""Caloric functions on space-time cylinders and the balayage identity.

A cylinder couples a graph-metric ball B = B_d(x1, R) with a discrete time
horizon T.  Caloric means one-step averaging in time:

    u(n+1, x) = sum_y P(x, y) u(n, y)   for x in B, 0 <= n < T,

with the values of u on the exterior boundary of B supplied as data.  The
reduite u_E of a caloric u is its expected value at the space-time hitting
position of E = (0, T] x B_1 before the chain leaves the cylinder; it is
computed here two independent ways:

  * reduite_dp        - exact dynamic programming on the space-time chain;
  * balayage_reduite  - the killed-kernel convolution against the
                        nonnegative charge supported near the boundary of
                        B - B_1, built forward in time from u alone.

Their agreement to ~1e-12 on arbitrary cylinders is the module's central
check.  The identity is exact only when no vertex of B_1 touches the
exterior boundary of B, so the cylinder constructor enforces that
separation (the default radii R/2 and 2R/3 provide it for every R >= 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    ConfigError,
    DomainError,
    PreconditionError,
    StructureError,
)
from .lattice import WeightedGraph, graph_distances


@dataclass
class Cylinder:
    """Space-time region Q = (0, T] x B with its standard sub-regions.

    Vertex bookkeeping: ``b``, ``b1``, ``b0`` are graph vertex indices;
    cylinder-local arrays are indexed by position in ``b`` (interior) or in
    ``bbar = concat(b, boundary)``.  ``q_minus``/``q_plus`` are the time
    windows used for hatted fields, so the late window stops at T - 1.
    """

    graph: WeightedGraph
    x1: int
    R: int
    T: int
    b: np.ndarray
    b1: np.ndarray
    b0: np.ndarray
    boundary: np.ndarray
    in_b1: np.ndarray            # bool over b
    in_b0: np.ndarray            # bool over b
    charge_support: np.ndarray   # bool over b: B_1 vertices adjacent to B-B_1
    b0_separated: bool           # B_0 disjoint from the charge support
    dist: np.ndarray
    _p_interior: sp.csr_matrix | None = field(default=None, repr=False)
    _p_killed: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def n_b(self) -> int:
        return self.b.size

    @property
    def n_bbar(self) -> int:
        return self.b.size + self.boundary.size

    @property
    def bbar(self) -> np.ndarray:
        return np.concatenate([self.b, self.boundary])

    @property
    def q_minus(self) -> tuple[int, int]:
        return (self.T // 4, self.T // 2)

    @property
    def q_plus(self) -> tuple[int, int]:
        return ((3 * self.T) // 4, self.T - 1)

    def p_interior(self) -> sp.csr_matrix:
        """Rows for B over columns Bbar: the caloric update."""
        if self._p_interior is None:
            p = self.graph.transition_matrix()
            self._p_interior = p[self.b][:, self.bbar].tocsr()
        return self._p_interior

    def p_killed(self) -> sp.csr_matrix:
        """The killed one-step operator on B (zero Dirichlet outside)."""
        if self._p_killed is None:
            p = self.graph.transition_matrix()
            self._p_killed = p[self.b][:, self.b].tocsr()
        return self._p_killed


def make_cylinder(graph: WeightedGraph, x1: int, R: int, T: int | None = None,
                  b1_radius: float | None = None,
                  b0_radius: float | None = None) -> Cylinder:
    """Build Q(x1, R, T) with sub-balls B_1, B_0 (defaults 2R/3 and R/2).

    Balls use the strict graph-metric convention B_d(x, r) = {d(x, .) < r},
    with non-integer radii resolved by ceiling.
    """
    if R < 3:
        raise DomainError(f"cylinder radius must be >= 3, got {R}")
    if T is None:
        T = R * R
    if T < 4:
        raise DomainError(f"horizon must be >= 4, got {T}")
    r1 = float(b1_radius) if b1_radius is not None else 2.0 * R / 3.0
    r0 = float(b0_radius) if b0_radius is not None else R / 2.0
    if not (r0 <= r1 <= R):
        raise ConfigError("need b0_radius <= b1_radius <= R")

    dist = graph_distances(graph, x1)
    reach = dist >= 0
    b = np.flatnonzero(reach & (dist < R))
    b1 = np.flatnonzero(reach & (dist < np.ceil(r1)))
    b0 = np.flatnonzero(reach & (dist < np.ceil(r0)))
    if b.size == 0:
        raise DomainError("empty cylinder ball")

    in_b = np.zeros(graph.n_vertices, dtype=bool)
    in_b[b] = True
    nbrs = _neighbours_of(graph, b)
    boundary = nbrs[~in_b[nbrs]]

    in_b1_global = np.zeros(graph.n_vertices, dtype=bool)
    in_b1_global[b1] = True
    b1_nbrs = _neighbours_of(graph, b1)
    if (~in_b[b1_nbrs]).any():
        raise DomainError(
            "B_1 touches the exterior boundary of B; enlarge R or shrink "
            "b1_radius (the balayage identity needs the separation)")

    in_b1 = in_b1_global[b]
    in_b0 = np.zeros(graph.n_vertices, dtype=bool)
    in_b0[b0] = True
    in_b0 = in_b0[b]

    # charge support: B_1 vertices adjacent to B - B_1
    annulus = b[~in_b1]
    near_annulus = np.zeros(graph.n_vertices, dtype=bool)
    if annulus.size:
        near_annulus[_neighbours_of(graph, annulus)] = True
    charge_support = in_b1 & near_annulus[b]
    b0_separated = not bool((charge_support & in_b0).any())

    return Cylinder(graph=graph, x1=x1, R=R, T=T, b=b, b1=b1, b0=b0,
                    boundary=boundary, in_b1=in_b1, in_b0=in_b0,
                    charge_support=charge_support, b0_separated=b0_separated,
                    dist=dist)


def _neighbours_of(graph: WeightedGraph, verts: np.ndarray) -> np.ndarray:
    if verts.size == 0:
        return np.empty(0, dtype=np.int64)
    blocks = [graph.indices[graph.indptr[v]:graph.indptr[v + 1]]
              for v in verts]
    return np.unique(np.concatenate(blocks))


# ---------------------------------------------------------------------------
# caloric fields


@dataclass
class CaloricField:
    """u on [0, T] x Bbar, columns ordered (B vertices..., boundary...)."""

    cylinder: Cylinder
    values: np.ndarray            # (T+1, n_bbar)

    @property
    def interior(self) -> np.ndarray:
        return self.values[:, :self.cylinder.n_b]

    def hat(self) -> np.ndarray:
        """u-hat(n, .) = u(n+1, .) + u(n, .) on interior columns, n <= T-1."""
        inner = self.interior
        return inner[1:] + inner[:-1]

    def caloric_residual(self) -> float:
        """max over interior (n, x) of |u(n+1,x) - u(n,x) - Lu(n,x)|."""
        p = self.cylinder.p_interior()
        gaps = [np.abs(self.values[n + 1, :self.cylinder.n_b]
                       - p @ self.values[n]).max()
                for n in range(self.cylinder.T)]
        return float(max(gaps))


def evolve_caloric(cylinder: Cylinder, u0: np.ndarray,
                   boundary_data: np.ndarray) -> CaloricField:
    """Evolve initial data u0 on Bbar with boundary rows for times 1..T."""
    u0 = np.asarray(u0, dtype=np.float64)
    boundary_data = np.asarray(boundary_data, dtype=np.float64)
    if u0.shape != (cylinder.n_bbar,):
        raise StructureError(
            f"u0 must cover Bbar ({cylinder.n_bbar} vertices), "
            f"got shape {u0.shape}")
    if boundary_data.shape != (cylinder.T, cylinder.boundary.size):
        raise StructureError(
            f"boundary data must have shape "
            f"{(cylinder.T, cylinder.boundary.size)}, got {boundary_data.shape}")
    nb = cylinder.n_b
    u = np.zeros((cylinder.T + 1, cylinder.n_bbar))
    u[0] = u0
    p = cylinder.p_interior()
    for n in range(cylinder.T):
        u[n + 1, :nb] = p @ u[n]
        u[n + 1, nb:] = boundary_data[n]
    return CaloricField(cylinder, u)


# ---------------------------------------------------------------------------
# reduite: dynamic programming and balayage formula


def reduite_dp(field: CaloricField) -> np.ndarray:
    """Exact reduite by backward-in-clock dynamic programming.

    Returns (T+1, n_b): u_E = u on E = (0,T] x B_1, zero at time 0 and
    (implicitly) outside B, and one killed averaging step elsewhere.  This
    mirrors the space-time chain expectation exactly: the chain either hits
    E (collect u there) or leaves the cylinder (collect nothing).
    """
    cyl = field.cylinder
    pk = cyl.p_killed()
    nb = cyl.n_b
    ue = np.zeros((cyl.T + 1, nb))
    u_int = field.interior
    for n in range(1, cyl.T + 1):
        row = pk @ ue[n - 1]
        row[cyl.in_b1] = u_int[n, cyl.in_b1]
        ue[n] = row
    return ue


def balayage_charge(field: CaloricField, u_e: np.ndarray) -> np.ndarray:
    """Charge k(r, y) = sum_z p^B_1(y,z) (u - u_E)(r-1, z) mu_z on B_1.

    Rows r = 1..T (row 0 is zero filler).  Identically zero off B_1; for
    r >= 2 the support shrinks to the B_1 vertices adjacent to B - B_1,
    and the charge is nonnegative whenever u is nonnegative caloric.
    """
    cyl = field.cylinder
    pk = cyl.p_killed()
    diff = field.interior - u_e          # (T+1, n_b)
    k = np.zeros_like(u_e)
    for r in range(1, cyl.T + 1):
        row = pk @ diff[r - 1]
        row[~cyl.in_b1] = 0.0
        k[r] = row
    return k


def _kahan_add(acc: np.ndarray, comp: np.ndarray, term: np.ndarray) -> None:
    y = term - comp
    t = acc + y
    comp[...] = (t - acc) - y
    acc[...] = t


def balayage_reduite(field: CaloricField) -> np.ndarray:
    """Reduite via the balayage formula, built forward from u alone.

    At clock n the value is the double convolution
        u_E(n, x) = sum_{y in B} sum_{r=1..n} p^B_{n-r}(x, y) k(r, y) mu_y,
    evaluated literally: each charge row k(r, .) spawns a stream that is
    pushed with the killed operator, and streams are accumulated per time
    with compensated summation.  The charge row for clock r only needs
    u_E(r-1, .), already accumulated, so the construction never consults
    the dynamic program.
    """
    cyl = field.cylinder
    pk = cyl.p_killed()
    nb = cyl.n_b
    u_int = field.interior
    ue = np.zeros((cyl.T + 1, nb))
    comp = np.zeros(nb)
    streams: list[np.ndarray] = []
    for n in range(1, cyl.T + 1):
        for s in streams:
            s[:] = pk @ s
        k_n = pk @ (u_int[n - 1] - ue[n - 1])
        k_n[~cyl.in_b1] = 0.0
        streams.append(k_n)
        acc = np.zeros(nb)
        comp[:] = 0.0
        for s in streams:
            _kahan_add(acc, comp, s)
        ue[n] = acc
    return ue


def balayage_reduite_split(field: CaloricField,
                           u_e: np.ndarray | None = None) -> np.ndarray:
    """The split form: killed evolution of u(0, .) plus the r >= 2 charges.

        u_E(n, x) = sum_y p^B_n(x,y) u(0,y) mu_y
                    + sum_y sum_{r=2..n} p^B_{n-r}(x,y) k(r,y) mu_y.

    Exactly equal to the unsplit formula whenever u(0, .) vanishes on the
    1-neighbourhood of B - B_1 (in particular for boundary-driven fields
    with u(0, .) = 0): the rewriting of the r = 1 charge into the killed
    evolution of u(0, .) silently extends that charge from B_1 to all of
    B, and the extension is invisible exactly under that support condition.
    """
    cyl = field.cylinder
    pk = cyl.p_killed()
    nb = cyl.n_b
    if u_e is None:
        u_e = reduite_dp(field)
    k = balayage_charge(field, u_e)
    out = np.zeros((cyl.T + 1, nb))
    init = field.interior[0].copy()        # becomes (P^B)^n u(0, .)
    comp = np.zeros(nb)
    streams: list[np.ndarray] = []         # charge streams for r >= 2 only
    for n in range(1, cyl.T + 1):
        init = pk @ init
        for s in streams:
            s[:] = pk @ s
        if n >= 2:
            streams.append(k[n].copy())
        acc = init.copy()
        comp[:] = 0.0
        for s in streams:
            _kahan_add(acc, comp, s)
        out[n] = acc
    return out


# ---------------------------------------------------------------------------
# the representation lemma, checked directly


def reconstruct_from_charge(cylinder: Cylinder, w: np.ndarray) -> np.ndarray:
    """v(n, .) = sum_{r<=n} (P^B)^{n-r} w_r, literal stream evaluation."""
    pk = cylinder.p_killed()
    nb = cylinder.n_b
    v = np.zeros((cylinder.T + 1, nb))
    streams: list[np.ndarray] = []
    for n in range(1, cylinder.T + 1):
        for s in streams:
            s[:] = pk @ s
        streams.append(w[n].copy())
        v[n] = np.sum(streams, axis=0)
    return v


def verify_lemma_a1(cylinder: Cylinder, w: np.ndarray) -> dict:
    """Check the representation and uniqueness lemmas for a charge w.

    w must be nonnegative with rows 1..T supported in B_1 (row 0 zero).
    Builds v = sum_r (P^B)^{n-r} w_r and reports:
      h_residual      max |Hv - w| on Q, where Hv(n,x) = v(n,x) - Pv(n-1,x)
      membership      v >= 0, zero start row (both must hold)
      uniqueness_gap  max |v - v'| for v' rebuilt by the forward recursion
                      v'(n) = w(n) + P^B v'(n-1), the uniqueness argument
                      run as an algorithm
      perturbation    residual created by poking v off the charge's image,
                      demonstrating that equal H-images force equal fields
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (cylinder.T + 1, cylinder.n_b):
        raise StructureError("charge shape does not match the cylinder")
    if (w < 0).any():
        raise PreconditionError("charge must be nonnegative")
    if w[0].any():
        raise PreconditionError("charge must vanish at time zero")
    if w[:, ~cylinder.in_b1].any():
        raise PreconditionError("charge supported off E")

    pk = cylinder.p_killed()
    v = reconstruct_from_charge(cylinder, w)

    h_residual = 0.0
    for n in range(1, cylinder.T + 1):
        h_residual = max(h_residual,
                         float(np.abs(v[n] - pk @ v[n - 1] - w[n]).max()))

    v2 = np.zeros_like(v)
    for n in range(1, cylinder.T + 1):
        v2[n] = w[n] + pk @ v2[n - 1]
    uniqueness_gap = float(np.abs(v - v2).max())

    rng = np.random.default_rng(0)
    vp = v.copy()
    n_p = int(rng.integers(1, cylinder.T + 1))
    x_p = int(rng.integers(0, cylinder.n_b))
    eps = 1e-3
    vp[n_p, x_p] += eps
    pert = 0.0
    for n in range(1, cylinder.T + 1):
        pert = max(pert, float(np.abs(vp[n] - pk @ vp[n - 1] - w[n]).max()))

    return {
        "h_residual": h_residual,
        "nonnegative": bool((v >= 0).all()),
        "zero_start": bool(not v[0].any()),
        "uniqueness_gap": uniqueness_gap,
        "perturbation_residual": pert,
        "perturbation_size": eps,
    }


# ---------------------------------------------------------------------------
# caloric test families


def caloric_family(cylinder: Cylinder, n_interior: int = 4,
                   lateral_fractions=(0.0, 1.0 / 16.0, 1.0 / 8.0),
                   n_mixtures: int = 2, seed: int = 0,
                   lateral_mode: str = "diffuse") -> list[CaloricField]:
    """Nonnegative caloric test functions on the cylinder.

    Interior members are killed kernels started from time-0 deltas deep in
    B_0; lateral members inject mass on the exterior boundary at early
    times, either as a single-site delta or (default) as a random positive
    pulse across the whole boundary.  Diffuse pulses give scale-stable
    Harnack ratios; single-site deltas probe more extreme corners of the
    caloric cone but their ratios swing with local geometry.  Mixtures are
    random positive combinations of the previous members.
    """
    if lateral_mode not in ("diffuse", "delta"):
        raise ConfigError(f"unknown lateral mode {lateral_mode!r}")
    rng = np.random.default_rng(seed)
    nb, nbd = cylinder.n_b, cylinder.boundary.size
    fields: list[CaloricField] = []

    b0_local = np.flatnonzero(cylinder.in_b0)
    picks = sorted({int(b0_local[0]), int(b0_local[-1]),
                    int(b0_local[b0_local.size // 2]),
                    *(int(b0_local[i]) for i in
                      rng.integers(0, b0_local.size, size=max(0, n_interior)))}
                   )[:max(1, n_interior)]
    for loc in picks:
        u0 = np.zeros(cylinder.n_bbar)
        u0[loc] = 1.0
        fields.append(evolve_caloric(cylinder, u0, np.zeros((cylinder.T, nbd))))

    for frac in lateral_fractions:
        r0 = max(1, int(frac * cylinder.T))
        bdata = np.zeros((cylinder.T, nbd))
        if lateral_mode == "diffuse":
            bdata[r0 - 1] = rng.uniform(0.5, 1.5, size=nbd)
        else:
            bdata[r0 - 1, int(rng.integers(0, nbd))] = 1.0
        fields.append(evolve_caloric(cylinder, np.zeros(cylinder.n_bbar), bdata))

    base = list(fields)
    for _ in range(n_mixtures):
        coeff = rng.uniform(0.1, 1.0, size=len(base))
        mix = sum(c * f.values for c, f in zip(coeff, base))
        fields.append(CaloricField(cylinder, mix))
    return fields
