"""Holographic reduction of honeycomb vertex models to Fisher-graph dimer models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import DomainError
from .lattice import BLACK, WHITE, FisherTorus, build_fisher_torus, build_honey_torus, white_neighbor
from .oracle import enumerate_matchings

# Entries forced to zero for an odd matchgate (configurations 000, 011, 101, 110)
# and for an even one (001, 010, 100, 111).
ODD_ZERO = np.array([0, 3, 5, 6])
EVEN_ZERO = np.array([1, 2, 4, 7])
PARITY_TOL = 1e-9


class InvalidBaseError(DomainError):
    pass


class NotAMatchgateError(DomainError):
    pass


class InfeasibleError(DomainError):
    pass


class DegenerateQuadraticError(DomainError):
    pass


def kron3(ta, tb, tc) -> np.ndarray:
    return np.kron(np.kron(ta, tb), tc)


def _check_base(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (2, 2):
        raise InvalidBaseError("base change must be 2x2")
    det = t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0]
    if abs(det) <= 1e-14 * max(np.abs(t).max(), 1e-300) ** 2:
        raise InvalidBaseError("singular base change matrix")
    return t


def apply_base_change(r, ta, tb, tc, side: str | int = "black") -> np.ndarray:
    """Black: (Ta x Tb x Tc) r. White: the inverse transpose of the same product applied to r."""
    ta, tb, tc = (_check_base(t) for t in (ta, tb, tc))
    r = np.asarray(r, dtype=float)
    if side in ("black", BLACK):
        return kron3(ta, tb, tc) @ r
    if side in ("white", WHITE):
        inv = [np.linalg.inv(t).T for t in (ta, tb, tc)]
        return kron3(*inv) @ r
    raise ValueError(f"unknown side {side!r}")


def parity_residual(m, odd: bool = True) -> float:
    """Largest entry that should vanish, relative to the largest entry overall."""
    m = np.asarray(m, dtype=float)
    scale = np.abs(m).max()
    if scale == 0:
        return 0.0
    zero = ODD_ZERO if odd else EVEN_ZERO
    return float(np.abs(m[zero]).max() / scale)


def fisher_weights(m, tol: float = PARITY_TOL) -> tuple[float, float, float, float]:
    """Triangle weights (a, b, c, d) of the odd gadget with signature m."""
    m = np.asarray(m, dtype=float)
    res = parity_residual(m, odd=True)
    if res > tol:
        raise NotAMatchgateError(f"signature violates the odd parity constraint (residual {res:.3g})")
    return float(m[4]), float(m[2]), float(m[1]), float(m[7])


def triangle_gadget(a: float, b: float, c: float):
    """Bare triangle with externals (a-side, b-side, c-side); each weight sits opposite its external."""
    return 3, [(1, 2, a), (0, 2, b), (0, 1, c)], [0, 1, 2]


def matchgate_signature_of_gadget(num_vertices: int, edges, externals) -> np.ndarray:
    """Entry at X0 = weighted perfect-matching count of the gadget with externals X0 removed.

    Bits of the index run over ``externals`` in order, most significant first.
    """
    k = len(externals)
    out = np.zeros(2 ** k)
    for idx in range(2 ** k):
        removed = {externals[t] for t in range(k) if (idx >> (k - 1 - t)) & 1}
        keep = [v for v in range(num_vertices) if v not in removed]
        relabel = {v: i for i, v in enumerate(keep)}
        sub = [(relabel[u], relabel[v], wt) for u, v, wt in edges if u in relabel and v in relabel]
        out[idx] = enumerate_matchings(len(keep), sub)
    return out


def complement_digits(m, digits) -> np.ndarray:
    """Signature after exchanging the roles of 0 and 1 on the given digit positions (0=a, 1=b, 2=c)."""
    m = np.asarray(m)
    mask = sum(1 << (2 - d) for d in digits)
    return m[np.arange(8) ^ mask]


def swap_basis(t) -> np.ndarray:
    """Exchange the two basis vectors of an edge (rows of T); flips that digit at both endpoints."""
    t = np.asarray(t, dtype=float)
    return t[::-1].copy()


# ----------------------------------------------------------- solving bases


@dataclass
class EdgeBases:
    """One base change per edge class for 1 x 1 periodic models."""

    ta: np.ndarray
    tb: np.ndarray
    tc: np.ndarray
    ratios: np.ndarray = field(default=None)  # ratios[l, m] = T_m[l, 0] / T_m[l, 1]
    residual: float = 0.0

    def as_tuple(self):
        return self.ta, self.tb, self.tc


def rotation(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, s], [-s, c]])


def orthogonal_bases(alphas) -> EdgeBases:
    ts = [rotation(a) for a in alphas]
    return EdgeBases(*ts)


def _quadratic_roots(qa: float, qb: float, qc: float) -> tuple[float, float]:
    scale = max(abs(qa), abs(qb), abs(qc))
    if abs(qa) <= 1e-14 * scale:
        raise DegenerateQuadraticError("leading coefficient vanishes")
    disc = qb * qb - 4 * qa * qc
    if disc < -1e-12 * scale * scale:
        raise InfeasibleError("complex roots: no real base change")
    sq = np.sqrt(max(disc, 0.0))
    q = -0.5 * (qb + np.copysign(sq, qb if qb != 0 else 1.0))
    r1 = q / qa
    r2 = qc / q if q != 0 else -r1
    return tuple(sorted((r1, r2), reverse=True))


def _bases_from_ratios(ratios: np.ndarray) -> list[np.ndarray]:
    # T_m = [[a_0m, 1], [a_1m, 1]] with the p column scaled to unit norm
    return [np.array([[ratios[0, k], 1.0], [ratios[1, k], 1.0]]) / np.sqrt(2.0) for k in range(3)]


def quadratic_coefficients(x, y):
    """Coefficients of the two quadratics whose roots are the c-edge and b-edge ratios."""
    x1, x2, x3, x4, x5, x6, x7, x8 = x
    y1, y2, y3, y4, y5, y6, y7, y8 = y
    c_edge = (x6 * y5 + y7 * x8 + y1 * x2 + y3 * x4,
              -y7 * x7 - y3 * x3 + y2 * x2 + y4 * x4 + x6 * y6 - x5 * y5 + y8 * x8 - y1 * x1,
              -y6 * x5 - x3 * y4 - y2 * x1 - x7 * y8)
    b_edge = (x3 * y1 + y6 * x8 + y2 * x4 + y5 * x7,
              y8 * x8 - x6 * y6 - x5 * y5 + y7 * x7 - y2 * x2 + y3 * x3 + y4 * x4 - y1 * x1,
              -y8 * x6 - y7 * x5 - x1 * y3 - y4 * x2)
    return c_edge, b_edge


def solve_base_change_1x1(x, y, tol: float = 1e-8) -> EdgeBases:
    """Real base changes reducing the 1 x 1 periodic model (white x, black y) to odd matchgates."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if (x < 0).any() or (y < 0).any():
        raise DomainError("solver expects nonnegative signatures")
    c_quad, b_quad = quadratic_coefficients(x, y)
    a03, a13 = _quadratic_roots(*c_quad)
    a02, a12 = _quadratic_roots(*b_quad)
    if (x > 0).all() and (y > 0).all():
        assert a03 * a13 < 0 and a02 * a12 < 0, "positive signatures give roots of opposite sign"
    t_vec, w_vec = y[4:], y[:4]
    best = None
    for r2, r3 in ((a02, a03), (a12, a03), (a02, a13), (a12, a13)):
        o2 = a12 if r2 == a02 else a02
        o3 = a13 if r3 == a03 else a03
        p = np.array([r2 * r3, r2, r3, 1.0])
        q = np.array([r2 * o3, r2, o3, 1.0])
        a01 = -(p @ t_vec) / (p @ w_vec)
        a11 = -(q @ t_vec) / (q @ w_vec)
        ratios = np.array([[a01, r2, r3], [a11, o2, o3]])
        if not np.isfinite(ratios).all() or np.isclose(a01, a11):
            continue
        ts = _bases_from_ratios(ratios)
        mb, mw = apply_base_change(y, *ts, "black"), apply_base_change(x, *ts, "white")
        res = max(parity_residual(mb), parity_residual(mw))
        # the pairings differ by exchanging digits on the b and c edges; all
        # consistent ones are equivalent, prefer the one where 111 dominates
        dominance = min(abs(g[7]) / np.abs(g).max() for g in (mb, mw))
        key = (res > tol, -dominance if res <= tol else res)
        if best is None or key < best[0]:
            best = (key, res, ratios, ts)
    if best is None or best[1] > tol:
        raise InfeasibleError(f"no consistent base change (parity residual {best[1] if best else np.inf:.3g})")
    _, res, ratios, ts = best
    return EdgeBases(*ts, ratios=ratios, residual=res)


# ---------------------------------------------------------------- reduce


@dataclass
class Reduction:
    fisher: FisherTorus
    matchgates: np.ndarray  # (n, n, 2, 8) transformed signatures
    worst_residual: float

    @property
    def log_scale(self):
        return self.fisher.log_scale


def _model_array(model, n: int) -> np.ndarray:
    sig = np.asarray(model, dtype=float)
    if sig.shape in ((8,), (2, 8)):
        sig = np.broadcast_to(sig, (n, n, 2, 8))
    if sig.shape != (n, n, 2, 8):
        raise ValueError(f"model must have shape (n, n, 2, 8), got {sig.shape}")
    return sig


def edge_basis_array(n: int, bases) -> np.ndarray:
    """Per-edge bases, shape (n, n, 3, 2, 2) indexed by the black endpoint's cell and edge type."""
    if isinstance(bases, EdgeBases):
        arr = np.empty((n, n, 3, 2, 2))
        arr[..., 0, :, :] = bases.ta
        arr[..., 1, :, :] = bases.tb
        arr[..., 2, :, :] = bases.tc
        return arr
    arr = np.asarray(bases, dtype=float)
    if arr.shape != (n, n, 3, 2, 2):
        raise ValueError("per-edge bases must have shape (n, n, 3, 2, 2)")
    return arr


def transform_signatures(model, n: int, bases) -> np.ndarray:
    sig = _model_array(model, n)
    tb = edge_basis_array(n, bases)
    out = np.empty((n, n, 2, 8))
    for i in range(n):
        for j in range(n):
            out[i, j, BLACK] = apply_base_change(sig[i, j, BLACK], *tb[i, j], side="black")
            # the white vertex (i, j) meets black (i, j), (i+1, j), (i, j+1)
            ws = (tb[i, j, 0], tb[(i + 1) % n, j, 1], tb[i, (j + 1) % n, 2])
            out[i, j, WHITE] = apply_base_change(sig[i, j, WHITE], *ws, side="white")
    return out


def reduce_model(model, n: int, bases, tol: float = PARITY_TOL) -> Reduction:
    """Fisher torus whose matching partition times prod(d) equals the vertex-model partition."""
    m = transform_signatures(model, n, bases)
    res = np.array([[[parity_residual(m[i, j, c]) for c in range(2)] for j in range(n)] for i in range(n)])
    worst = np.unravel_index(np.argmax(res), res.shape)
    if res[worst] > tol:
        i, j, c = worst
        raise NotAMatchgateError(
            f"bases do not realize the model: parity residual {res[worst]:.3g} at ({i}, {j}, {'black' if c == 0 else 'white'})")
    weights = np.stack([m[..., 4], m[..., 2], m[..., 1], m[..., 7]], axis=-1)
    return Reduction(build_fisher_torus(n, weights), m, float(res[worst]))


def reduce_1x1_periodic(white, black, n: int, bases: EdgeBases | None = None) -> Reduction:
    """Convenience wrapper: identical signatures per color, bases solved when absent."""
    bases = solve_base_change_1x1(white, black) if bases is None else bases
    model = np.empty((n, n, 2, 8))
    model[:, :, BLACK] = black
    model[:, :, WHITE] = white
    return reduce_model(model, n, bases)


def product_weights(f: FisherTorus) -> tuple[float, float, float]:
    """(a, b, c) products across the two triangles of a 1 x 1 periodic Fisher torus (d normalized)."""
    w = f.normalized[0, 0]
    return tuple(float(w[BLACK, k] * w[WHITE, k]) for k in range(3))


# ------------------------------------------------------------------ gauge


@dataclass
class GaugeResult:
    equivalent: bool
    multipliers: np.ndarray | None
    residual: float


def _weighted_edges(f: FisherTorus) -> dict:
    """Undirected Fisher edges with normalized weights; connecting edges have weight 1."""
    from .lattice import fisher_edges

    out = {}
    for e in fisher_edges(f):
        key = (min(e.tail, e.head), max(e.tail, e.head))
        out[key] = out.get(key, 0.0) + e.weight
    return out


def _phases_mod4(nv: int, keys, flips) -> np.ndarray | None:
    """Quarter-turn phases q(v) with q(u) + q(v) = 2 * flip (mod 4) on every edge, or None.

    Real multipliers only reach q in {0, 2}; an odd cycle of sign flips (a
    triangle whose three weights all change sign) needs q = 1 or 3.
    """
    adj = [[] for _ in range(nv)]
    for (u, v), f in zip(keys, flips):
        adj[u].append((v, f))
        adj[v].append((u, f))
    q = np.full(nv, -1, dtype=int)
    for root in range(nv):
        if q[root] >= 0:
            continue
        for start in (0, 1):
            comp = [root]
            q[root] = start
            stack = [root]
            ok = True
            while stack and ok:
                u = stack.pop()
                for v, f in adj[u]:
                    want = (2 * f - q[u]) % 4
                    if q[v] < 0:
                        q[v] = want
                        comp.append(v)
                        stack.append(v)
                    elif q[v] != want:
                        ok = False
                        break
            if ok:
                break
            q[comp] = -1
        else:
            return None
    return q


def check_gauge_equivalent(f1: FisherTorus, f2: FisherTorus, tol: float = 1e-9) -> GaugeResult:
    """Look for vertex multipliers g with w2(uv) = g(u) g(v) w1(uv) on every edge.

    Signs are settled first, allowing multipliers that are powers of i (a
    nonzero complex multiplier at a vertex rescales every matching by the
    same factor), then magnitudes by least squares on the logarithms.
    """
    if f1.n != f2.n:
        raise ValueError("different underlying graphs")
    e1, e2 = _weighted_edges(f1), _weighted_edges(f2)
    keys = sorted(e1)
    nv = f1.num_vertices
    ratios = []
    for k in keys:
        w1, w2 = e1[k], e2[k]
        if (w1 == 0) != (w2 == 0):
            return GaugeResult(False, None, np.inf)
        ratios.append(w2 / w1 if w1 != 0 else 1.0)
    ratios = np.array(ratios)
    q = _phases_mod4(nv, keys, (ratios < 0).astype(int))
    if q is None:
        return GaugeResult(False, None, np.inf)
    inc = np.zeros((len(keys), nv))
    for row, (u, v) in enumerate(keys):
        inc[row, u] += 1
        inc[row, v] += 1
    rhs = np.log(np.abs(ratios))
    phi, *_ = np.linalg.lstsq(inc, rhs, rcond=None)
    resid = float(np.abs(inc @ phi - rhs).max(initial=0.0))
    mult = (1j ** q) * np.exp(phi)
    if not (q % 2).any():
        mult = mult.real
    return GaugeResult(resid <= tol, mult if resid <= tol else None, resid)


# ------------------------------------------------------ orthogonal bases


def _parity_class(m, tol: float) -> str:
    if parity_residual(m, odd=True) <= tol:
        return "odd"
    if parity_residual(m, odd=False) <= tol:
        return "even"
    return "none"


def orthogonal_edge_bases(model, n: int, tol: float = 1e-8) -> np.ndarray:
    """Rotation bases, shape (n, n, 3, 2, 2), turning every gadget into an odd matchgate.

    Rotation angles come from the orthogonal criterion at each black vertex;
    they are determined modulo pi/2, and the quarter turns are then chosen so
    that every transformed signature has odd parity.
    """
    from .lattice import t_join
    from .signatures import periodic_edge_angles

    model = _model_array(model, n)
    # representative in [pi/2, pi); the uniform model sits at 3pi/4 on every edge
    angles = np.pi / 2 + np.mod(periodic_edge_angles(model) - np.pi / 2, np.pi / 2)
    bases = np.empty((n, n, 3, 2, 2))
    for i in range(n):
        for j in range(n):
            for t in range(3):
                bases[i, j, t] = rotation(angles[i, j, t])
    m = transform_signatures(model, n, bases)
    h = build_honey_torus(n)
    classes = {}
    for i in range(n):
        for j in range(n):
            for c in (BLACK, WHITE):
                classes[h.vertex_index(i, j, c)] = _parity_class(m[i, j, c], tol)
    if any(v == "none" for v in classes.values()):
        raise NotAMatchgateError("orthogonal bases do not give matchgates at every vertex")
    even = [v for v, cls in classes.items() if cls == "even"]
    if len(even) % 2:
        raise NotAMatchgateError("odd number of even gadgets; enlarge the fundamental domain")
    for e in t_join(h, even):
        i, j, t = h.edges[e][0], h.edges[e][1], "abc".index(h.edges[e][2])
        bases[i, j, t] = rotation(angles[i, j, t] + np.pi / 2)
    return bases


def orthogonal_reduction(model, n: int, tol: float = PARITY_TOL) -> Reduction:
    return reduce_model(model, n, orthogonal_edge_bases(model, n), tol)


# ------------------------------------------------------ random instances


def _random_odd_gadget(rng) -> np.ndarray:
    m = np.zeros(8)
    m[[1, 2, 4]] = rng.uniform(0.0, 1.5, 3)
    m[7] = -rng.uniform(1.5, 4.0)
    return m


def sample_orthogonal_model(n: int, rng=None, spread: float = 0.1, positive: bool = False,
                            max_tries: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    """A random model realizable by per-edge rotations, with those rotations.

    Edge angles scatter around 3 pi / 4 with standard deviation ``spread``.
    Each vertex gets a random odd matchgate pulled back through the rotations
    of its three edges. With ``positive`` the matchgate is redrawn until every
    signature entry is strictly positive.
    Returns (model of shape (n, n, 2, 8), bases of shape (n, n, 3, 2, 2)).
    """
    rng = np.random.default_rng(rng)
    angles = 3 * np.pi / 4 + spread * rng.standard_normal((n, n, 3))
    bases = np.empty((n, n, 3, 2, 2))
    for idx in np.ndindex(n, n, 3):
        bases[idx] = rotation(angles[idx])
    model = np.empty((n, n, 2, 8))
    for i in range(n):
        for j in range(n):
            sides = {BLACK: bases[i, j], WHITE: (bases[i, j, 0], bases[(i + 1) % n, j, 1], bases[i, (j + 1) % n, 2])}
            for color, ts in sides.items():
                pull = kron3(*ts).T  # rotations: inverse = transpose on both sides
                for _ in range(max_tries):
                    r = pull @ _random_odd_gadget(rng)
                    if not positive or (r > 0).all():
                        break
                else:
                    raise InfeasibleError("could not draw a positive signature; reduce the spread")
                model[i, j, color] = r
    return model, bases
