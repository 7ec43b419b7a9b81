"""Brute-force reference computations used to calibrate and check the fast paths."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import BLACK, WHITE, FisherTorus, HoneyTorus, build_honey_torus, fisher_edges


class OracleSizeError(ValueError):
    pass


MAX_ORACLE_PERIOD = 2
MAX_MATCHING_VERTICES = 26


@dataclass
class EnumerationReport:
    partition: float
    config_count: int
    marginals: dict = field(default_factory=dict)  # (i, j, color, "xyz") -> probability
    marginals_defined: bool = True


def local_config(h: HoneyTorus, occupied: np.ndarray, v: int) -> int:
    """Index 4*c_a + 2*c_b + c_c of the configuration seen by vertex v."""
    e = h.incidence[v]
    return int(4 * occupied[e[0]] + 2 * occupied[e[1]] + occupied[e[2]])


def _signature_table(model, n: int) -> np.ndarray:
    sig = np.asarray(model, dtype=float)
    if sig.shape == (8,):
        sig = np.broadcast_to(sig, (n, n, 2, 8))
    elif sig.shape == (2, 8):
        sig = np.broadcast_to(sig, (n, n, 2, 8))
    if sig.shape != (n, n, 2, 8):
        raise ValueError(f"model must have shape (n, n, 2, 8), got {sig.shape}")
    return sig.reshape(2 * n * n, 8)


def _config_indices(n: int) -> tuple[HoneyTorus, np.ndarray]:
    """All edge subsets as bit arrays, and the per-vertex local configuration index."""
    h = build_honey_torus(n)
    m = h.num_edges
    subsets = np.arange(2 ** m, dtype=np.int64)
    bits = (subsets[:, None] >> np.arange(m)) & 1
    inc = h.incidence
    idx = 4 * bits[:, inc[:, 0]] + 2 * bits[:, inc[:, 1]] + bits[:, inc[:, 2]]
    return h, idx


def configuration_weights(model, n: int) -> tuple[HoneyTorus, np.ndarray, np.ndarray]:
    """(lattice, local-config indices per subset, unnormalized weight per subset).

    Edge subset number s has edge e occupied iff bit e of s is set.
    """
    if n > MAX_ORACLE_PERIOD:
        raise OracleSizeError(f"exhaustive enumeration refused for n={n} (2^{3 * n * n} subsets)")
    sig = _signature_table(model, n)
    h, idx = _config_indices(n)
    per_vertex = sig[np.arange(sig.shape[0])[None, :], idx]
    return h, idx, np.prod(per_vertex, axis=1)


def _kahan_sum(values) -> float:
    return math.fsum(values)


def enumerate_vertex_model(model, n: int) -> EnumerationReport:
    h, idx, w = configuration_weights(model, n)
    z = _kahan_sum(w.tolist())
    report = EnumerationReport(partition=z, config_count=len(w))
    if z == 0:
        report.marginals_defined = False
        return report
    for v in range(h.num_vertices):
        i, j, color = h.vertices[v]
        for c in range(8):
            mass = _kahan_sum(w[idx[:, v] == c].tolist())
            report.marginals[(i, j, color, format(c, "03b"))] = mass / z
    return report


def enumerate_conditional(model, n: int, event) -> float:
    """Probability that every (i, j, color, config) in ``event`` holds simultaneously."""
    h, idx, w = configuration_weights(model, n)
    z = _kahan_sum(w.tolist())
    if z == 0:
        raise ZeroDivisionError("model has zero partition function")
    mask = np.ones(len(w), dtype=bool)
    for i, j, color, config in event:
        c = int(config, 2) if isinstance(config, str) else int(config)
        col = BLACK if color in (0, "black") else WHITE
        mask &= idx[:, h.vertex_index(i, j, col)] == c
    return _kahan_sum(w[mask].tolist()) / z


def transfer_matrix_partition(black, white, n: int, max_period: int = 7) -> float:
    """Vertex-model partition function of a 1x1-periodic model on the n x n torus.

    Rows of constant j are joined by c-edges. The state between two rows is
    the occupancy of their n c-edges; inside a row the a- and b-edges are
    summed out, which costs 4^n * 2^n * 2^n operations.
    """
    if n > max_period:
        raise OracleSizeError(f"transfer matrix refused for n={n}")
    black = np.asarray(black, dtype=float)
    white = np.asarray(white, dtype=float)
    bits = (np.arange(1 << n)[:, None] >> np.arange(n)) & 1  # (2^n, n)
    a = np.repeat(bits, 1 << n, axis=0)  # (4^n, n) a-edge occupancy
    b = np.tile(bits, (1 << n, 1))  # b-edge of black i, i.e. the b-edge of white i-1
    b_white = np.roll(b, -1, axis=1)
    black_idx = (4 * a + 2 * b)[:, None, :] + bits[None, :, :]
    white_idx = (4 * a + 2 * b_white)[:, None, :] + bits[None, :, :]
    fb = black[black_idx].prod(axis=2)  # (4^n, states in)
    fw = white[white_idx].prod(axis=2)  # (4^n, states out)
    t = fb.T @ fw
    return float(np.trace(np.linalg.matrix_power(t, n)))


# ------------------------------------------------------------- matchings


def enumerate_matchings(num_vertices: int, edges, max_vertices: int = MAX_MATCHING_VERTICES) -> float:
    """Weighted perfect-matching count by backtracking; ``edges`` is a list of (u, v, weight)."""
    if num_vertices > max_vertices:
        raise OracleSizeError(f"matching enumeration refused for {num_vertices} vertices")
    if num_vertices % 2:
        return 0.0
    adj: list[list[tuple[int, float]]] = [[] for _ in range(num_vertices)]
    for u, v, wt in edges:
        if u == v:
            continue
        adj[u].append((v, wt))
        adj[v].append((u, wt))
    used = [False] * num_vertices
    terms: list[float] = []

    def rec(start: int, acc: float) -> None:
        while start < num_vertices and used[start]:
            start += 1
        if start == num_vertices:
            terms.append(acc)
            return
        used[start] = True
        for v, wt in adj[start]:
            if not used[v]:
                used[v] = True
                rec(start + 1, acc * wt)
                used[v] = False
        used[start] = False

    rec(0, 1.0)
    return _kahan_sum(terms)


def fisher_matching_edges(f: FisherTorus) -> list[tuple[int, int, float]]:
    """Undirected weighted edge list of the normalized Fisher torus (parallel edges kept)."""
    return [(e.tail, e.head, e.weight) for e in fisher_edges(f)]


def fisher_matching_partition(f: FisherTorus) -> float:
    return enumerate_matchings(f.num_vertices, fisher_matching_edges(f))


def matching_probability(num_vertices: int, edges, required) -> float:
    """Probability that the listed vertex pairs are all matched, by enumeration."""
    total = enumerate_matchings(num_vertices, edges)
    required = [tuple(sorted(p)) for p in required]
    removed = {v for p in required for v in p}
    weight = 1.0
    for p in required:
        ws = [wt for u, v, wt in edges if tuple(sorted((u, v))) == p]
        if not ws:
            return 0.0
        weight *= sum(ws)
    rest = [(u, v, wt) for u, v, wt in edges if u not in removed and v not in removed]
    relabel = {v: k for k, v in enumerate(x for x in range(num_vertices) if x not in removed)}
    rest = [(relabel[u], relabel[v], wt) for u, v, wt in rest]
    return weight * enumerate_matchings(len(relabel), rest) / total


# ------------------------------------------------------- small helpers


def all_configurations(n: int, signature) -> tuple[HoneyTorus, np.ndarray, np.ndarray]:
    """Edge subsets with nonzero weight for a uniform signature, as bit arrays."""
    h, idx, w = configuration_weights(signature, n)
    keep = np.nonzero(w)[0]
    bits = (keep[:, None] >> np.arange(h.num_edges)) & 1
    return h, bits.astype(np.int8), w[keep]


def gadget_signature(num_vertices: int, edges, externals) -> np.ndarray:
    """Matchgate signature: entry at X0 is the matching count of the gadget minus X0.

    ``externals`` is the ordered list of external vertices; bit k of the index
    (most significant first) says whether externals[k] is removed.
    """
    k = len(externals)
    out = np.zeros(2 ** k)
    for idx, bits in enumerate(itertools.product((0, 1), repeat=k)):
        removed = {externals[t] for t in range(k) if bits[t]}
        keep = [v for v in range(num_vertices) if v not in removed]
        relabel = {v: i for i, v in enumerate(keep)}
        sub = [(relabel[u], relabel[v], wt) for u, v, wt in edges if u in relabel and v in relabel]
        out[idx] = enumerate_matchings(len(keep), sub)
    return out


# ------------------------------------------------- feasibility searches
#
# Independent of the algebraic criteria: search base-change parameters
# directly for the 1x1 torus carrying the same signature at both vertices.

FEASIBLE_TOL = 1e-7
INFEASIBLE_TOL = 1e-4
_ODD_ZERO = np.array([0, 3, 5, 6])


@dataclass
class FeasibilityResult:
    feasible: bool | None  # None when the residual falls between the two thresholds
    residual: float
    params: np.ndarray


def _verdict(res: float) -> bool | None:
    if res <= FEASIBLE_TOL:
        return True
    if res >= INFEASIBLE_TOL:
        return False
    return None


def _kron_batch(ta, tb, tc):
    return np.einsum("nai,nbj,nck->nabcijk", ta, tb, tc).reshape(-1, 8, 8)


def _rows(theta0, theta1):
    """Bases with unit rows at the given angles, shape (N, 2, 2)."""
    return np.stack([np.stack([np.cos(theta0), np.sin(theta0)], -1),
                     np.stack([np.cos(theta1), np.sin(theta1)], -1)], axis=-2)


def _perp_rows(t):
    """Row directions of the inverse transpose: perpendiculars of the swapped rows."""
    return np.stack([np.stack([t[:, 1, 1], -t[:, 1, 0]], -1), np.stack([-t[:, 0, 1], t[:, 0, 0]], -1)], axis=-2)


def _orth_residuals(params, r, extra_zero: bool):
    ts = [np.stack([[np.cos(a), np.sin(a)], [-np.sin(a), np.cos(a)]]).transpose(2, 0, 1) for a in params.T]
    m = _kron_batch(*ts) @ r
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    cols = list(_ODD_ZERO) + ([7] if extra_zero else [])
    return m[:, cols]


def _general_residuals(params, r, extra_zero: bool, min_det: float = 0.1):
    ts = [_rows(params[:, 2 * k], params[:, 2 * k + 1]) for k in range(3)]
    dets = np.stack([np.abs(np.linalg.det(t)) for t in ts], -1)
    mb = _kron_batch(*ts) @ r
    mw = _kron_batch(*[_perp_rows(t) for t in ts]) @ r
    mb /= np.linalg.norm(mb, axis=1, keepdims=True)
    mw /= np.linalg.norm(mw, axis=1, keepdims=True)
    cols = list(_ODD_ZERO) + ([7] if extra_zero else [])
    penalty = np.maximum(0.0, min_det - dets.min(axis=1))[:, None]
    return np.concatenate([mb[:, cols], mw[:, cols], penalty], axis=1)


def _search(residuals, dim: int, grid: int, starts: int) -> FeasibilityResult:
    from scipy.optimize import least_squares

    axes = [np.linspace(0, np.pi, grid, endpoint=False) + np.pi / (2 * grid)] * dim
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dim)
    vals = np.linalg.norm(residuals(pts), axis=1)
    order = np.argsort(vals)[:starts]
    best = (np.inf, None)
    for x0 in pts[order]:
        sol = least_squares(lambda x: residuals(x[None, :])[0], x0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        res = float(np.linalg.norm(residuals(sol.x[None, :])[0]))
        if res < best[0]:
            best = (res, sol.x)
        if res < FEASIBLE_TOL * 1e-3:
            break
    return FeasibilityResult(_verdict(best[0]), best[0], best[1])


def brute_force_orthogonal(r, grid: int = 16, starts: int = 12) -> FeasibilityResult:
    """Do rotations exist on the three edges turning r into an odd matchgate?"""
    r = np.asarray(r, dtype=float)
    return _search(lambda p: _orth_residuals(p, r, False), 3, grid, starts)


def brute_force_general_1x1(r, grid: int = 7, starts: int = 24) -> FeasibilityResult:
    """Do invertible bases exist making both vertices of the 1x1 torus odd matchgates?"""
    r = np.asarray(r, dtype=float)
    return _search(lambda p: _general_residuals(p, r, False), 6, grid, starts)


def brute_force_bipartite_1x1(r, grid: int = 7, starts: int = 24) -> FeasibilityResult:
    """As the general search, additionally requiring a vanishing 111 entry at both gadgets."""
    r = np.asarray(r, dtype=float)
    return _search(lambda p: _general_residuals(p, r, True), 6, grid, starts)
