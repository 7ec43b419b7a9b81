"""Characteristic polynomial of the 1x1 Fisher cell, spectral-curve classification,
free energy by torus quadrature, and infinite-volume local statistics.

Angles on the unit torus are sampled on a half-offset product grid so that
the real points (+-1, +-1), where a node can sit, fall on cell corners and
never on sample points. Cells next to a node are refined dyadically.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import DomainError
from .lattice import (BLACK, WHITE, _TRIANGLE_EDGES, FisherTorus,
                      build_fisher_torus, fisher_edges)
from .pfaffian import pfaffian


class InconsistentWeightsError(DomainError):
    pass


class DegenerateSpectrumError(DomainError):
    pass


class ClusterLimitationError(DomainError):
    pass


REAL_POINTS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
NODE_TOL = 1e-12


# ------------------------------------------------------------ polynomial


def char_poly(products, z, w):
    """Closed-form det K(z, w) for triangle-weight products (a, b, c).

    Accepts scalars or arrays for z, w. Returns a real value (array) on the
    unit torus; the imaginary part of the Laurent polynomial vanishes there.
    """
    a, b, c = map(float, products)
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    val = ((z + 1 / z) * (a * b - c) + (w + 1 / w) * (a * c - b) + (z / w + w / z) * (b * c - a)
           + a * a + b * b + c * c + 1)
    return np.real(val) if np.all(np.isclose(np.abs(z), 1)) and np.all(np.isclose(np.abs(w), 1)) else val


def is_degenerate(products, tol: float = 1e-14) -> bool:
    a, b, c = products
    return min(abs(a * b - c), abs(a * c - b), abs(b * c - a)) <= tol


def angle_form(products, theta, phi):
    """Q(theta, phi) = P(exp(i theta), exp(i phi)), vectorized."""
    a, b, c = map(float, products)
    return (2 * np.cos(theta) * (a * b - c) + 2 * np.cos(phi) * (a * c - b)
            + 2 * np.cos(theta - phi) * (b * c - a) + a * a + b * b + c * c + 1)


def discriminant(products) -> float:
    a, b, c = products
    return 64 * a * b * c * (a + b - c - 1) * (a + b + c + 1) * (a + 1 - b - c) * (a + c - b - 1)


# ------------------------------------------------------------ Bloch matrix


def _cell_weights(fisher) -> np.ndarray:
    if isinstance(fisher, FisherTorus):
        if fisher.n != 1:
            raise ValueError("spectral quantities need a 1 x 1 fundamental domain")
        return np.array(fisher.weights[0, 0])
    arr = np.asarray(fisher, dtype=float)
    if arr.shape == (1, 1, 2, 4):
        arr = arr[0, 0]
    if arr.shape != (2, 4):
        raise ValueError("cell weights must have shape (2, 4)")
    return arr


def bloch_coefficients(fisher) -> dict:
    """Matrices C[(pz, pw)] with K(z, w) = sum C[p] z^pz w^pw on the 1x1 cell."""
    f = build_fisher_torus(1, _cell_weights(fisher))
    out: dict = {}
    for e in fisher_edges(f):
        key = (e.wrap_z, e.wrap_w)
        out.setdefault(key, np.zeros((6, 6)))[e.tail, e.head] += e.weight
        back = (-e.wrap_z, -e.wrap_w)
        out.setdefault(back, np.zeros((6, 6)))[e.head, e.tail] -= e.weight
    return out


def kasteleyn_symbol(coeffs: dict, z, w) -> np.ndarray:
    """K(z, w) on arrays of points, shape (..., 6, 6)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    out = np.zeros(np.broadcast(z, w).shape + (6, 6), dtype=complex)
    for (pz, pw), mat in coeffs.items():
        out += (z ** pz * w ** pw)[..., None, None] * mat
    return out


@dataclass
class SpectralData:
    products: tuple
    cell_weights: np.ndarray = field(repr=False)
    classification: str  # "disjoint" or "node"
    node: tuple | None
    discriminant: float
    degenerate: bool
    real_values: dict = field(default_factory=dict, repr=False)

    @property
    def coefficients(self) -> dict:
        return bloch_coefficients(self.cell_weights)

    def symbol(self, z, w) -> np.ndarray:
        return kasteleyn_symbol(self.coefficients, z, w)

    def P(self, z, w):
        return char_poly(self.products, z, w)


def cell_products(fisher) -> tuple[float, float, float]:
    cw = _cell_weights(fisher)
    norm = cw[:, :3] / cw[:, 3:4]
    return tuple(float(norm[BLACK, k] * norm[WHITE, k]) for k in range(3))


def classify_spectral_curve(products, tol: float = NODE_TOL) -> tuple[str, tuple | None, dict]:
    """Return ("disjoint", None, values) or ("node", (z0, w0), values)."""
    a, b, c = products
    scale = a * a + b * b + c * c + 1
    vals = {p: float(char_poly(products, *p)) for p in REAL_POINTS}
    zeros = [p for p, v in vals.items() if abs(v) <= tol * scale]
    if len(zeros) > 1:
        raise InconsistentWeightsError(f"characteristic polynomial vanishes at several real points {zeros}")
    if any(v < -tol * scale for v in vals.values()):
        raise InconsistentWeightsError("characteristic polynomial is negative at a real point")
    if zeros:
        return "node", zeros[0], vals
    return "disjoint", None, vals


def spectral_data(fisher) -> SpectralData:
    cw = _cell_weights(fisher)
    prods = cell_products(cw)
    degenerate = is_degenerate(prods)
    if degenerate:
        warnings.warn("degenerate weights: some product coefficient of P vanishes", RuntimeWarning, stacklevel=2)
    cls, node, vals = classify_spectral_curve(prods)
    return SpectralData(prods, cw, cls, node, discriminant(prods), degenerate, vals)


@dataclass
class NodeCheck:
    gradient: tuple  # (dP/dz, dP/dw) at the node
    hessian: tuple  # (alpha, beta, gamma) of Q ~ alpha t^2 + beta t s + gamma s^2
    holds: bool


def node_conditions(products, node, step: float = 1e-5, tol: float = 1e-6) -> NodeCheck:
    """Central finite differences of P at a real node."""
    z0, w0 = complex(node[0]), complex(node[1])
    h = step
    dz = (char_poly(products, z0 + h, w0) - char_poly(products, z0 - h, w0)) / (2 * h)
    dw = (char_poly(products, z0, w0 + h) - char_poly(products, z0, w0 - h)) / (2 * h)
    t0 = 0.0 if node[0] > 0 else np.pi
    s0 = 0.0 if node[1] > 0 else np.pi
    q = lambda t, s: angle_form(products, t0 + t, s0 + s)  # noqa: E731
    q0 = q(0, 0)
    qtt = (q(h, 0) - 2 * q0 + q(-h, 0)) / h ** 2
    qss = (q(0, h) - 2 * q0 + q(0, -h)) / h ** 2
    qts = (q(h, h) - q(h, -h) - q(-h, h) + q(-h, -h)) / (4 * h ** 2)
    alpha, beta, gamma = qtt / 2, qts, qss / 2
    scale = max(1.0, abs(alpha), abs(gamma))
    grad_ok = abs(dz) <= tol * scale and abs(dw) <= tol * scale
    form_ok = beta ** 2 - 4 * alpha * gamma <= tol * scale ** 2 and alpha >= -tol * scale
    return NodeCheck((complex(dz), complex(dw)), (float(alpha), float(beta), float(gamma)), bool(grad_ok and form_ok))


# ------------------------------------------------------------ quadrature


@dataclass
class TorusRule:
    theta: np.ndarray
    phi: np.ndarray
    weight: np.ndarray  # fractions of the torus area, summing to 1


def _node_angles(node) -> tuple[float, float]:
    return (0.0 if node[0] > 0 else np.pi), (0.0 if node[1] > 0 else np.pi)


def torus_rule(grid: int, node=None, levels: int = 4) -> TorusRule:
    """Half-offset midpoint grid; with a node, the 4x4 block of cells meeting it is
    replaced by ``levels`` rounds of dyadic refinement toward the node."""
    if grid < 4 or grid % 2:
        raise ValueError("grid must be an even integer >= 4")
    h = 2 * np.pi / grid
    t = (np.arange(grid) + 0.5) * h
    th, ph = np.meshgrid(t, t, indexing="ij")
    wt = np.full(th.shape, 1.0 / grid ** 2)
    if node is None:
        return TorusRule(th.ravel(), ph.ravel(), wt.ravel())
    t0, s0 = _node_angles(node)
    dt = np.angle(np.exp(1j * (th - t0)))
    ds = np.angle(np.exp(1j * (ph - s0)))
    keep = ~((np.abs(dt) < 2 * h) & (np.abs(ds) < 2 * h))
    thetas, phis, weights = [th[keep]], [ph[keep]], [wt[keep]]
    half = 2 * h  # half-width of the excised square
    for level in range(levels + 1):
        sub = half / 2  # four sub-cells per side, each of width half/2
        centers = (np.arange(4) - 1.5) * sub
        cx, cy = np.meshgrid(centers, centers, indexing="ij")
        inner = (np.abs(cx) < sub) & (np.abs(cy) < sub)
        take = ~inner if level < levels else np.ones_like(inner)
        thetas.append(t0 + cx[take])
        phis.append(s0 + cy[take])
        weights.append(np.full(take.sum(), sub * sub / (4 * np.pi ** 2)))
        half = sub
    return TorusRule(np.concatenate(thetas), np.concatenate(phis), np.concatenate(weights))


@dataclass
class FreeEnergy:
    value: float
    error_estimate: float
    classification: str
    grid: int


def _log_p_mean(products, rule: TorusRule) -> float:
    q = angle_form(products, rule.theta, rule.phi)
    scale = sum(x * x for x in products) + 1
    if (q < -1e-10 * scale).any():
        raise InconsistentWeightsError("characteristic polynomial negative on the unit torus")
    q = np.maximum(q, np.finfo(float).tiny)
    return float(np.sum(rule.weight * np.log(q)))


def free_energy(products, grid: int = 256, node="auto") -> FreeEnergy:
    """(1/8 pi^2) times the torus integral of log P, i.e. half the mean of log P."""
    if node == "auto":
        cls, node, _ = classify_spectral_curve(products)
    cls = "node" if node is not None else "disjoint"
    fine = 0.5 * _log_p_mean(products, torus_rule(grid, node))
    coarse = 0.5 * _log_p_mean(products, torus_rule(max(4, grid // 2 + (grid // 2) % 2), node))
    return FreeEnergy(fine, abs(fine - coarse), cls, grid)


# ------------------------------------------------------------ inverse entries


@dataclass(frozen=True)
class InverseKasteleynEntry:
    u: int
    v: int
    offset: tuple
    value: float


def inverse_entries(data: SpectralData, requests, grid: int = 256, chunk: int = 16384) -> dict:
    """Infinite-volume inverse Kasteleyn entries for many (u, v, (dx, dy)) at once.

    The entry between Fisher vertex u in cell (x1, y1) and v in cell (x2, y2)
    is the torus average of z^(x1-x2) w^(y1-y2) [K(z, w)^-1]_{uv}, with
    dx = x1 - x2 and dy = y1 - y2. Labels u, v are the cell-local indices 0..5.
    """
    requests = [(int(u), int(v), (int(o[0]), int(o[1]))) for u, v, o in requests]
    rule = torus_rule(grid, data.node)
    coeffs = data.coefficients
    uniq = sorted(set(requests))
    us = np.array([r[0] for r in uniq])
    vs = np.array([r[1] for r in uniq])
    dx = np.array([r[2][0] for r in uniq])
    dy = np.array([r[2][1] for r in uniq])
    acc = np.zeros(len(uniq), dtype=complex)
    for lo in range(0, len(rule.weight), chunk):
        th = rule.theta[lo:lo + chunk]
        ph = rule.phi[lo:lo + chunk]
        wt = rule.weight[lo:lo + chunk]
        z, w = np.exp(1j * th), np.exp(1j * ph)
        sym = kasteleyn_symbol(coeffs, z, w)
        try:
            kinv = np.linalg.inv(sym)
        except np.linalg.LinAlgError as exc:
            raise DegenerateSpectrumError("K(z, w) is singular at a quadrature point") from exc
        phase = np.exp(1j * (np.outer(th, dx) + np.outer(ph, dy)))
        acc += np.einsum("p,pr,pr->r", wt, phase, kinv[:, us, vs])
    mag = np.maximum(np.abs(acc), 1.0)
    if (np.abs(acc.imag) > 1e-9 * mag).any():
        raise InconsistentWeightsError("inverse entries are not real; weights are not real-symmetric")
    return {r: float(x.real) for r, x in zip(uniq, acc)}


def k_inverse(data: SpectralData, u: int, v: int, offset=(0, 0), grid: int = 256) -> InverseKasteleynEntry:
    val = inverse_entries(data, [(u, v, offset)], grid)[(u, v, tuple(offset))]
    return InverseKasteleynEntry(u, v, tuple(offset), val)


# ------------------------------------------------------------ product formula


def finite_symbol_determinant(fisher_n: FisherTorus, z, w) -> complex:
    """det of the n x n torus Kasteleyn matrix with boundary phases z, w."""
    from .pfaffian import kasteleyn_bloch

    return complex(np.linalg.det(kasteleyn_bloch(fisher_n, z, w)))


def product_formula(products, n: int, z, w) -> complex:
    """prod of P over (u, v) with u^n = z, v^n = w."""
    rz = complex(z) ** (1 / n) * np.exp(2j * np.pi * np.arange(n) / n)
    rw = complex(w) ** (1 / n) * np.exp(2j * np.pi * np.arange(n) / n)
    uu, vv = np.meshgrid(rz, rw, indexing="ij")
    return complex(np.prod(char_poly(products, uu, vv).astype(complex)))


# ------------------------------------------------------------ local statistics


@dataclass(frozen=True)
class Target:
    """Forced local configuration at the vertex of the given color in cell (x, y)."""
    x: int
    y: int
    color: int
    config: str


def _edge_cells(x: int, y: int, color: int, t: int) -> tuple:
    """Key (black cell x, black cell y, type) of the type-t edge at a vertex on the plane."""
    if color == BLACK:
        return (x, y, t)
    return (x + (1 if t == 1 else 0), y + (1 if t == 2 else 0), t)


def _white_cell_of(edge) -> tuple:
    x, y, t = edge
    return (x - (1 if t == 1 else 0), y - (1 if t == 2 else 0))


def dimer_event(etype: int = 0) -> list[Target]:
    """Both ends of a type-``etype`` edge hold only that edge."""
    cfg = "".join("1" if k == etype else "0" for k in range(3))
    wx, wy = _white_cell_of((0, 0, etype))
    return [Target(0, 0, BLACK, cfg), Target(wx, wy, WHITE, cfg)]


def _bits(index: int) -> tuple:
    return ((index >> 2) & 1, (index >> 1) & 1, index & 1)


def _fix_parity(targets, internal, states):
    """Internal edges to complement so that every target state becomes odd.

    Returns None when the number of even states in a connected component is
    odd (such terms vanish); raises when the fix would need a path outside
    the target cluster.
    """
    ntar = len(targets)
    adj = {k: [] for k in range(ntar)}
    for e, (p, q) in internal.items():
        adj[p].append((q, e))
        adj[q].append((p, e))
    comp = [-1] * ntar
    parent: dict = {}
    order = []
    ncomp = 0
    for root in range(ntar):
        if comp[root] >= 0:
            continue
        comp[root] = ncomp
        parent[root] = (None, None)
        stack = [root]
        while stack:
            p = stack.pop()
            order.append(p)
            for q, e in adj[p]:
                if comp[q] < 0:
                    comp[q] = ncomp
                    parent[q] = (p, e)
                    stack.append(q)
        ncomp += 1
    need = [1 - (sum(_bits(s)) % 2) for s in states]  # 1 where the state is even
    odd_comps = {c for c in range(ncomp) if sum(need[k] for k in range(ntar) if comp[k] == c) % 2}
    if odd_comps:
        if ncomp == 1:
            return None
        raise ClusterLimitationError("targets must form a connected cluster of the honeycomb")
    flips = set()
    for p in reversed(order):
        par, e = parent[p]
        if par is not None and need[p]:
            flips ^= {e}
            need[p] ^= 1
            need[par] ^= 1
    return flips


@dataclass
class LocalProbability:
    value: float
    terms: list
    classification: str
    grid: int


def _reduced_cell(model, bases):
    from .reduction import EdgeBases, orthogonal_edge_bases, reduce_model, solve_base_change_1x1

    model = np.asarray(model, dtype=float).reshape(2, 8)
    if bases is None:
        try:
            bases = orthogonal_edge_bases(model, 1)
        except DomainError:
            bases = solve_base_change_1x1(model[WHITE], model[BLACK])
    red = reduce_model(model, 1, bases)
    return model, bases, red


def local_probability_infinite(model, targets, grid: int = 256, bases=None) -> LocalProbability:
    """Infinite-volume probability that every target vertex shows its configuration.

    ``model`` holds the (black, white) signatures of a 1x1-periodic vertex
    model. Each target signature is masked to its forced configuration and
    transformed by the same bases as the reduction; the masked products are
    expanded over the digits of the edges at the targets, each term becomes a
    forced set of Fisher edges, and its weight is a Pfaffian of inverse
    Kasteleyn entries.
    """
    from .reduction import transform_signatures

    model, bases, red = _reduced_cell(model, bases)
    cell = red.fisher.weights[0, 0]
    data = spectral_data(red.fisher)
    targets = [t if isinstance(t, Target) else Target(*t) for t in targets]
    if len({(t.x, t.y, t.color) for t in targets}) != len(targets):
        raise ValueError("target vertices must be distinct")

    # transformed masked signatures divided by the gadget constants d
    gadgets = []
    for t in targets:
        idx = int(t.config, 2)
        masked = np.zeros((2, 8))
        masked[t.color, idx] = model[t.color, idx]
        g = transform_signatures(masked, 1, bases)[0, 0, t.color]
        gadgets.append(g / cell[t.color, 3])

    # edges touching targets; internal edges join two targets
    edge_list = []
    ends: dict = {}
    for k, t in enumerate(targets):
        for typ in range(3):
            e = _edge_cells(t.x, t.y, t.color, typ)
            if e not in ends:
                ends[e] = []
                edge_list.append(e)
            ends[e].append(k)
    internal = {e: tuple(v) for e, v in ends.items() if len(v) == 2}

    plans = []
    requests = set()
    for digits in itertools.product((0, 1), repeat=len(edge_list)):
        sigma = dict(zip(edge_list, digits))
        states = []
        for t in targets:
            d = [sigma[_edge_cells(t.x, t.y, t.color, typ)] for typ in range(3)]
            states.append(4 * d[0] + 2 * d[1] + d[2])
        coef = float(np.prod([g[s] for g, s in zip(gadgets, states)]))
        if coef == 0.0:
            continue
        flips = _fix_parity(targets, internal, states)
        if flips is None:
            continue
        flipped = {e: (v ^ 1 if e in flips else v) for e, v in sigma.items()}
        pairs = []
        for e, v in flipped.items():
            if v:
                wx, wy = _white_cell_of(e)
                pairs.append(((wx, wy, 3 + e[2]), (e[0], e[1], e[2])))
        for t in targets:
            d = [flipped[_edge_cells(t.x, t.y, t.color, typ)] for typ in range(3)]
            if sum(d) == 1:
                slot = d.index(1)
                tail, head = next((a, b) for a, b, s in _TRIANGLE_EDGES if s == slot)
                off = 3 * t.color
                pairs.append(((t.x, t.y, off + tail), (t.x, t.y, off + head)))
        verts = [v for p in pairs for v in p]
        for p in verts:
            for q in verts:
                if p != q:
                    requests.add((p[2], q[2], (p[0] - q[0], p[1] - q[1])))
        plans.append((coef, pairs, digits, flips))

    table = inverse_entries(data, sorted(requests), grid) if requests else {}
    total = 0.0
    terms = []
    for coef, pairs, digits, flips in plans:
        verts = [v for p in pairs for v in p]
        m = len(verts)
        g = np.zeros((m, m))
        for r in range(m):
            for s in range(m):
                if r != s:
                    p, q = verts[r], verts[s]
                    g[r, s] = table[(p[2], q[2], (p[0] - q[0], p[1] - q[1]))]
        contrib = coef * (-1) ** len(pairs) * (pfaffian(g, check=False) if m else 1.0)
        total += contrib
        terms.append({"digits": digits, "flipped": sorted(flips), "coefficient": coef, "value": contrib})
    return LocalProbability(float(total), terms, data.classification, grid)


def vertex_config_distribution(model, color: int = BLACK, grid: int = 256, bases=None) -> dict:
    """Infinite-volume probabilities of all eight configurations at one vertex."""
    out = {}
    for idx in range(8):
        cfg = format(idx, "03b")
        if np.asarray(model, dtype=float).reshape(2, 8)[color, idx] == 0:
            out[cfg] = 0.0
            continue
        out[cfg] = local_probability_infinite(model, [Target(0, 0, color, cfg)], grid, bases).value
    return out

