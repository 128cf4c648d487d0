"""Exact heat kernels on weighted cluster graphs.

Densities are stored against the vertex mass: a slice holds
``p_n(x0, y) = P(X_n = y) / mu_y`` for every cluster vertex y.  With that
normalisation the kernel is a symmetric function of (x0, y) and evolves by
the plain one-step averaging operator, the same operator that advances
functions.  Mass checks multiply back by mu.

Everything here is deterministic: the sparse matrix-vector products run in
a fixed (CSR) accumulation order, so repeated runs agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import stats

from .errors import (
    ConfigError,
    DomainError,
    SequencingError,
    StructureError,
)
from .lattice import WeightedGraph, graph_distances


@dataclass
class KernelSlice:
    """One time slice of a (possibly killed) transition density."""

    source: int
    time: float
    density: np.ndarray
    domain: np.ndarray | None = None     # bool mask when killed, else None
    tail_bound: float = 0.0              # Poisson truncation mass (continuous)

    def mass(self, graph: WeightedGraph) -> float:
        return float(self.density @ graph.mu)


def apply_transition(graph: WeightedGraph, f: np.ndarray) -> np.ndarray:
    """One walk step: f'(x) = sum_y P(x, y) f(y).

    By reversibility the same operator advances densities-against-mu, so
    this single routine drives both caloric evolution and kernel slices.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != graph.n_vertices:
        raise StructureError(
            f"function has {f.shape[-1]} entries, graph has "
            f"{graph.n_vertices} vertices")
    return graph.transition_matrix() @ f


def delta_density(graph: WeightedGraph, x0: int) -> np.ndarray:
    """p_0(x0, .): point mass at x0 divided by mu_x0."""
    p = np.zeros(graph.n_vertices)
    p[x0] = 1.0 / graph.mu[x0]
    return p


def kernel_slices(graph: WeightedGraph, x0: int, times,
                  domain: np.ndarray | None = None) -> dict[int, KernelSlice]:
    """Streaming kernel evolution, keeping only the requested time slices.

    ``domain`` switches on killing: after every step the density is zeroed
    outside the domain mask (absorption at the exterior boundary).
    """
    times = sorted({int(t) for t in times})
    if times and times[0] < 0:
        raise DomainError("negative kernel time")
    if domain is not None:
        domain = np.asarray(domain, dtype=bool)
        if not domain[x0]:
            raise DomainError("source vertex outside the killing domain")
    p = delta_density(graph, x0)
    out: dict[int, KernelSlice] = {}
    pmat = graph.transition_matrix()
    n = 0
    if times and times[0] == 0:
        out[0] = KernelSlice(x0, 0, p.copy(), domain)
    for target in times:
        while n < target:
            p = pmat @ p
            if domain is not None:
                p[~domain] = 0.0
            n += 1
        if target > 0:
            out[target] = KernelSlice(x0, target, p.copy(), domain)
    return out


def kernel_sequence(graph: WeightedGraph, x0: int, n_max: int,
                    domain: np.ndarray | None = None) -> np.ndarray:
    """Dense (n_max+1, n_vertices) array of slices p_0 .. p_n_max.

    Only for graphs small enough that the full sequence fits comfortably;
    large runs should use kernel_slices checkpoints instead.
    """
    if domain is not None:
        domain = np.asarray(domain, dtype=bool)
        if not domain[x0]:
            raise DomainError("source vertex outside the killing domain")
    seq = np.empty((n_max + 1, graph.n_vertices))
    seq[0] = delta_density(graph, x0)
    pmat = graph.transition_matrix()
    for n in range(n_max):
        nxt = pmat @ seq[n]
        if domain is not None:
            nxt[~domain] = 0.0
        seq[n + 1] = nxt
    return seq


def discrete_kernel(graph: WeightedGraph, x0: int, n_max: int) -> np.ndarray:
    """Alias for the full unkilled sequence p_0 .. p_n_max."""
    return kernel_sequence(graph, x0, n_max)


def killed_kernel(graph: WeightedGraph, domain: np.ndarray, x0: int,
                  n_max: int) -> np.ndarray:
    """Full killed sequence on the given domain mask."""
    return kernel_sequence(graph, x0, n_max, domain=domain)


def hat_kernel(slices: dict[int, KernelSlice], n: int) -> KernelSlice:
    """p-hat_n = p_n + p_{n+1}; smooths out bipartite parity."""
    if n not in slices or (n + 1) not in slices:
        raise SequencingError(f"need slices {n} and {n + 1} for the hat kernel")
    a, b = slices[n], slices[n + 1]
    return KernelSlice(a.source, n, a.density + b.density, a.domain)


def continuous_kernel(graph: WeightedGraph, x0: int, t: float,
                      tol: float = 1e-12) -> KernelSlice:
    """q_t(x0, .) by uniformization: Poisson(t) mixture of discrete slices.

    The series is truncated at the exact Poisson tail: the reported
    tail_bound is P(M_t > K) < tol, so the computed slice is missing at
    most tol of its mass and every pointwise value is exact up to that
    truncation.
    """
    if tol <= 0.0:
        raise ConfigError(f"tolerance must be positive, got {tol}")
    if t < 0.0:
        raise DomainError(f"negative time {t}")
    if t == 0.0:
        return KernelSlice(x0, 0.0, delta_density(graph, x0))
    dist = stats.poisson(t)
    k_hi = int(dist.isf(tol)) + 1
    while dist.sf(k_hi) >= tol:
        k_hi += 1
    weights = dist.pmf(np.arange(k_hi + 1))
    q = np.zeros(graph.n_vertices)
    p = delta_density(graph, x0)
    pmat = graph.transition_matrix()
    for k in range(k_hi + 1):
        if weights[k] > 0.0:
            q += weights[k] * p
        if k < k_hi:
            p = pmat @ p
    return KernelSlice(x0, float(t), q, tail_bound=float(dist.sf(k_hi)))


def matrix_exponential_kernel(graph: WeightedGraph, x0: int,
                              t: float) -> np.ndarray:
    """Dense expm oracle for q_t on tiny graphs (independent of the series)."""
    if graph.n_vertices > 64:
        raise StructureError("dense exponential oracle is for tiny graphs")
    pdense = graph.transition_matrix().toarray()
    gen = pdense - np.eye(graph.n_vertices)
    tmat = scipy.linalg.expm(t * gen)
    return tmat[x0] / graph.mu


def dirichlet_energy(graph: WeightedGraph, f: np.ndarray) -> float:
    """E(f, f) = 1/2 sum_{x,y} mu_xy (f(y) - f(x))^2 (self loops drop out)."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (graph.n_vertices,):
        raise StructureError("function shape does not match the graph")
    fi = np.repeat(f, np.diff(graph.indptr))
    diff = f[graph.indices] - fi
    return 0.5 * float(np.sum(graph.weights * diff * diff))


def dirichlet_form(graph: WeightedGraph, f: np.ndarray,
                   g: np.ndarray) -> float:
    """Bilinear E(f, g)."""
    fi = np.repeat(f, np.diff(graph.indptr))
    gi = np.repeat(g, np.diff(graph.indptr))
    return 0.5 * float(np.sum(graph.weights
                              * (f[graph.indices] - fi)
                              * (g[graph.indices] - gi)))


# ---------------------------------------------------------------------------
# exact-identity diagnostics


@dataclass
class IdentityCheck:
    name: str
    value: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.value < self.tol


def identity_checks(graph: WeightedGraph, x0: int, n_base: int = 32,
                    n_pairs: int = 8, seed: int = 0,
                    tol: float = 1e-12) -> list[IdentityCheck]:
    """The exact-identity suite at one source vertex.

    Covers symmetry of the density, mass conservation, Chapman-Kolmogorov,
    the discrete-time energy identity, the Cauchy-Schwarz diagonal bound,
    and on-diagonal monotonicity; every check reports a gap that must sit
    below tol (the monotonicity and Cauchy-Schwarz gaps are one-sided).
    """
    rng = np.random.default_rng(seed)
    out: list[IdentityCheck] = []
    n2 = 2 * n_base
    times = sorted({0, n_base, n_base + 1, n2, n2 + 1, n2 + 2, n2 + 3})
    sl = kernel_slices(graph, x0, times)

    mass_gap = max(abs(sl[n].mass(graph) - 1.0) for n in times)
    out.append(IdentityCheck("mass_conservation", mass_gap, tol))

    support = np.flatnonzero(sl[n_base].density > 0)
    pick = support[rng.integers(0, support.size, size=min(n_pairs,
                                                          support.size))]
    sym_gap = 0.0
    ck_gap = 0.0
    cs_gap = 0.0
    for y in np.unique(pick):
        sly = kernel_slices(graph, int(y), [n_base, n2])
        sym_gap = max(sym_gap, abs(sl[n_base].density[y]
                                   - sly[n_base].density[x0]))
        conv = float((sl[n_base].density * sly[n_base].density
                      * graph.mu).sum())
        ck_gap = max(ck_gap, abs(conv - sl[n2].density[y]))
        bound = math.sqrt(sl[n2].density[x0] * sly[n2].density[y])
        cs_gap = max(cs_gap, sl[n2].density[y] - bound)
    out.append(IdentityCheck("symmetry", sym_gap, tol))
    out.append(IdentityCheck("chapman_kolmogorov", ck_gap, tol))
    out.append(IdentityCheck("cauchy_schwarz", max(cs_gap, 0.0), tol))

    f_hat = sl[n_base].density + sl[n_base + 1].density
    lhs = (sl[n2 + 2].density[x0] + sl[n2 + 3].density[x0]) \
        - (sl[n2].density[x0] + sl[n2 + 1].density[x0])
    energy_gap = abs(lhs + dirichlet_energy(graph, f_hat))
    out.append(IdentityCheck("energy_identity", energy_gap, tol))

    mono_gap = max(0.0, sl[n2 + 2].density[x0] - sl[n2].density[x0])
    out.append(IdentityCheck("diagonal_monotonicity", mono_gap, tol))
    return out


# ---------------------------------------------------------------------------
# weak Poincare inequality


@dataclass
class PoincareReport:
    centre: int
    radius: int
    n_vertices: int
    constant: float       # extremal variance / energy ratio (grows ~ r^2)
    normalized: float     # constant / r^2, the constant in the inequality
    c_v: float            # mu(B) / r^d volume-regularity companion
    method: str


_DENSE_LIMIT = 2000


def poincare_constant(graph: WeightedGraph, centre: int,
                      r: int) -> PoincareReport:
    """Best constant in the ball Poincare inequality with C_W = 1.

    Maximises  sum_B (f - fbar)^2 mu  /  sum_{y,z in B, z~y} (f(y)-f(z))^2 mu_yz
    over nonconstant f, where fbar is the mu-weighted mean (the minimiser of
    the left side) and the energy counts ordered pairs.  Equivalently
    1 / lambda_1 of the generalized eigenproblem (2 L_B) f = lambda M f.
    """
    if r < 1:
        raise DomainError(f"ball radius must be >= 1, got {r}")
    dist = graph_distances(graph, centre)
    ball = np.flatnonzero((dist >= 0) & (dist < r))
    nb = ball.size
    mu_b = graph.mu[ball]
    c_v = float(mu_b.sum()) / float(r) ** graph.d
    if nb == 1:
        return PoincareReport(centre, r, 1, 0.0, 0.0, c_v, "singleton")

    lap = _ball_laplacian(graph, ball)
    a = 2.0 * lap
    if nb <= _DENSE_LIMIT:
        lam = scipy.linalg.eigh(a.toarray(), np.diag(mu_b),
                                eigvals_only=True,
                                subset_by_index=[0, 1])
        lam1 = float(lam[1])
        method = "dense"
    else:
        lam1 = _inverse_power_lambda1(a.tocsr(), mu_b)
        method = "inverse-power"
    constant = 1.0 / lam1
    return PoincareReport(centre, r, nb, constant, constant / float(r) ** 2,
                          c_v, method)


def _ball_laplacian(graph: WeightedGraph, ball: np.ndarray) -> sp.csr_matrix:
    """Combinatorial weighted Laplacian of the induced ball subgraph."""
    sub = graph.adjacency()[ball][:, ball].tocsr()
    deg = np.asarray(sub.sum(axis=1)).ravel()
    return (sp.diags(deg) - sub).tocsr()


def _inverse_power_lambda1(a: sp.csr_matrix, mu_b: np.ndarray,
                           tol: float = 1e-11, max_outer: int = 200) -> float:
    """Smallest nonzero generalized eigenvalue of a f = lambda diag(mu) f.

    Inverse power iteration with the constant mode deflated in the
    mu-inner product; each linear solve runs CG on the (consistent)
    singular system.
    """
    n = a.shape[0]
    mu_tot = mu_b.sum()

    def deflate(v):
        return v - (mu_b @ v) / mu_tot

    x = deflate(np.arange(n, dtype=np.float64))
    x /= np.sqrt(x @ (mu_b * x))
    lam_old = np.inf
    jacobi = 1.0 / a.diagonal()
    for _ in range(max_outer):
        rhs = mu_b * x
        y, _info = spla.cg(a, rhs, rtol=1e-10, atol=0.0, maxiter=10 * n,
                           M=spla.LinearOperator(a.shape,
                                                 matvec=lambda v: jacobi * v))
        y = deflate(y)
        norm = np.sqrt(y @ (mu_b * y))
        if norm == 0.0:
            break
        x = y / norm
        lam = float((x @ (a @ x)))
        if abs(lam - lam_old) <= tol * max(lam, 1e-300):
            return lam
        lam_old = lam
    return lam_old
