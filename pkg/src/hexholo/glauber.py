"""Single-edge Markov chain for 1-2 models on the honeycomb torus.

Each step picks one of the 3n^2 edges uniformly and proposes to toggle it.
Toggles that break the one-or-two-edges rule are held. A legal toggle that
leaves both endpoints with a single edge of the same type p (deleting a
q-edge), or starts from that situation (adding a q-edge), is accepted with
probability min(1, (p/r)^2) resp. min(1, (r/p)^2), r being the third type.
Every other legal toggle is accepted.

Random numbers come from numpy's counter-based Philox generator in blocks;
the update loop itself is compiled with numba.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from .lattice import EDGE_TYPES, HoneyTorus, build_honey_torus

INVALID, PLAIN, ADD_SAME, DELETE_SAME = 0, 1, 2, 3


@dataclass(frozen=True)
class OneTwoParams:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if min(self.a, self.b, self.c) <= 0:
            raise ValueError("1-2 weights must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c], dtype=float)

    def signature(self) -> np.ndarray:
        a, b, c = self.a, self.b, self.c
        return np.array([0, c, b, a, a, b, c, 0], dtype=float)


@dataclass
class ChainState:
    lattice: HoneyTorus = field(repr=False)
    occupied: np.ndarray
    seed: int
    step: int = 0


def init_dimer_state(lattice: HoneyTorus | int, seed: int = 0) -> ChainState:
    """All a-edges occupied: a perfect matching, hence a valid 1-2 configuration."""
    h = lattice if isinstance(lattice, HoneyTorus) else build_honey_torus(lattice)
    occ = np.zeros(h.num_edges, dtype=np.uint8)
    occ[0::3] = 1
    return ChainState(h, occ, int(seed))


def is_valid(h: HoneyTorus, occupied) -> bool:
    deg = np.asarray(occupied)[h.incidence].sum(axis=1)
    return bool(((deg == 1) | (deg == 2)).all())


# ------------------------------------------------------------ kernel


@numba.njit(cache=True)
def _classify(occ, inc, ends, e):
    """(kind, p, r) for toggling edge e; p, r are edge types, -1 when unused."""
    t = e % 3
    b = ends[e, 0]
    w = ends[e, 1]
    db = occ[inc[b, 0]] + occ[inc[b, 1]] + occ[inc[b, 2]]
    dw = occ[inc[w, 0]] + occ[inc[w, 1]] + occ[inc[w, 2]]
    if occ[e] == 0:
        if db != 1 or dw != 1:
            return INVALID, -1, -1
    else:
        if db != 2 or dw != 2:
            return INVALID, -1, -1
    # the single other occupied edge type at each endpoint
    pb = -1
    pw = -1
    for k in range(3):
        if k != t and occ[inc[b, k]] == 1:
            pb = k
        if k != t and occ[inc[w, k]] == 1:
            pw = k
    if pb != pw:
        return PLAIN, -1, -1
    r = 3 - pb - t
    if occ[e] == 0:
        return ADD_SAME, pb, r
    return DELETE_SAME, pb, r


def acceptance(kind: int, p: int, r: int, weights):
    """Acceptance probability; exact when ``weights`` are Fractions."""
    if kind == INVALID:
        return 0
    if kind == PLAIN:
        return 1
    wp, wr = weights[p], weights[r]
    if kind == ADD_SAME:
        return 1 if wr >= wp else (wr * wr) / (wp * wp)
    return 1 if wr <= wp else (wp * wp) / (wr * wr)


@numba.njit(cache=True)
def _accept_float(kind, p, r, weights):
    if kind == PLAIN:
        return 1.0
    wp = weights[p]
    wr = weights[r]
    if kind == ADD_SAME:
        return 1.0 if wr >= wp else (wr * wr) / (wp * wp)
    return 1.0 if wr <= wp else (wp * wp) / (wr * wr)


@numba.njit(cache=True)
def _vertex_config(occ, inc, v):
    return 4 * occ[inc[v, 0]] + 2 * occ[inc[v, 1]] + occ[inc[v, 2]]


@numba.njit(cache=True)
def _is_dimer(occ, inc, ends, e):
    if occ[e] == 0:
        return 0
    b = ends[e, 0]
    w = ends[e, 1]
    db = occ[inc[b, 0]] + occ[inc[b, 1]] + occ[inc[b, 2]]
    dw = occ[inc[w, 0]] + occ[inc[w, 1]] + occ[inc[w, 2]]
    return 1 if (db == 1 and dw == 1) else 0


@numba.njit(cache=True)
def _local(occ, inc, ends, e, cfg_counts, dimer_counts, sign):
    """Add (sign=+1) or remove (sign=-1) the observables touched by edge e."""
    b = ends[e, 0]
    w = ends[e, 1]
    cfg_counts[0, _vertex_config(occ, inc, b)] += sign
    cfg_counts[1, _vertex_config(occ, inc, w)] += sign
    for k in range(3):
        f = inc[b, k]
        dimer_counts[k] += sign * _is_dimer(occ, inc, ends, f)
        g = inc[w, k]
        if g != f:
            dimer_counts[k] += sign * _is_dimer(occ, inc, ends, g)


@numba.njit(cache=True)
def _run(occ, inc, ends, weights, picks, uniforms, record_from, batch_len, code,
         cfg_counts, dimer_counts, cfg_acc, dimer_acc, hist, step0):
    nsteps = picks.shape[0]
    for s in range(nsteps):
        e = picks[s]
        kind, p, r = _classify(occ, inc, ends, e)
        if kind != INVALID:
            if uniforms[s] < _accept_float(kind, p, r, weights):
                _local(occ, inc, ends, e, cfg_counts, dimer_counts, -1)
                occ[e] ^= 1
                _local(occ, inc, ends, e, cfg_counts, dimer_counts, 1)
                if hist.shape[0] > 0:
                    code ^= np.int64(1) << e
        t = step0 + s
        if t >= record_from:
            bidx = (t - record_from) // batch_len
            if bidx < cfg_acc.shape[0]:
                for c in range(2):
                    for k in range(8):
                        cfg_acc[bidx, c, k] += cfg_counts[c, k]
                for k in range(3):
                    dimer_acc[bidx, k] += dimer_counts[k]
                if hist.shape[0] > 0:
                    hist[code] += 1
    return code


def _initial_counts(h: HoneyTorus, occ: np.ndarray):
    cfg = np.zeros((2, 8), dtype=np.int64)
    idx = 4 * occ[h.incidence[:, 0]] + 2 * occ[h.incidence[:, 1]] + occ[h.incidence[:, 2]]
    for v, k in enumerate(idx):
        cfg[v % 2, k] += 1
    dim = np.zeros(3, dtype=np.int64)
    deg = occ[h.incidence].sum(axis=1)
    for e in range(h.num_edges):
        b, w = h.edge_ends[e]
        if occ[e] and deg[b] == 1 and deg[w] == 1:
            dim[e % 3] += 1
    return cfg, dim


def step(state: ChainState, params: OneTwoParams, rng: np.random.Generator) -> ChainState:
    """Advance one step in place using ``rng`` (slow path, for tests and illustration)."""
    h = state.lattice
    e = int(rng.integers(h.num_edges))
    u = float(rng.random())
    kind, p, r = _classify(state.occupied, h.incidence, h.edge_ends, e)
    if kind != INVALID and u < acceptance(kind, p, r, params.as_array()):
        state.occupied[e] ^= 1
    state.step += 1
    return state


@dataclass
class SampleResult:
    n: int
    steps: int
    seed: int
    params: OneTwoParams
    config_frequency: dict  # ("black"|"white", "xyz") -> (mean, stderr)
    dimer_frequency: dict  # edge type -> (mean, stderr): both ends hold only that edge
    final_state: ChainState = field(repr=False)
    state_histogram: np.ndarray | None = field(default=None, repr=False)
    batches: int = 100


def _batch_stats(acc: np.ndarray, batch_len: int, denom: int):
    means = acc / (batch_len * denom)
    mu = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / np.sqrt(means.shape[0])
    return mu, se


def sample(params: OneTwoParams, n: int, steps: int, seed: int = 0, batches: int = 100,
           histogram: bool | None = None, block: int = 1 << 20, state: ChainState | None = None,
           burn_in: int | None = None) -> SampleResult:
    """Run the chain, discard ``burn_in`` steps (default half) and record lattice-averaged observables.

    Frequencies are averaged over all vertices (or edges) of the torus and over
    time; standard errors come from batch means over the recorded steps.
    """
    record_from = steps // 2 if burn_in is None else int(burn_in)
    if not 0 <= record_from < steps or steps - record_from < batches:
        raise ValueError("need 0 <= burn_in and at least one recorded step per batch")
    h = build_honey_torus(n)
    state = init_dimer_state(h, seed) if state is None else state
    occ = state.occupied
    weights = params.as_array()
    batch_len = (steps - record_from) // batches
    histogram = (h.num_edges <= 20) if histogram is None else histogram
    if histogram and h.num_edges > 24:
        raise ValueError("state histogram only for tiny tori")
    hist = np.zeros(1 << h.num_edges if histogram else 0, dtype=np.int64)
    code = int(sum(int(occ[e]) << e for e in range(h.num_edges))) if histogram else 0
    cfg_counts, dimer_counts = _initial_counts(h, occ)
    cfg_acc = np.zeros((batches, 2, 8), dtype=np.int64)
    dimer_acc = np.zeros((batches, 3), dtype=np.int64)
    gen = np.random.Generator(np.random.Philox(seed))
    done = 0
    while done < steps:
        m = min(block, steps - done)
        picks = gen.integers(0, h.num_edges, size=m, dtype=np.int64)
        unif = gen.random(m)
        code = _run(occ, h.incidence, h.edge_ends, weights, picks, unif, record_from, batch_len,
                    np.int64(code), cfg_counts, dimer_counts, cfg_acc, dimer_acc, hist, done)
        done += m
    state.step += steps
    mu_c, se_c = _batch_stats(cfg_acc.astype(float), batch_len, n * n)
    mu_d, se_d = _batch_stats(dimer_acc.astype(float), batch_len, n * n)
    cfg = {(col, format(k, "03b")): (float(mu_c[ci, k]), float(se_c[ci, k]))
           for ci, col in enumerate(("black", "white")) for k in range(8)}
    dim = {EDGE_TYPES[k]: (float(mu_d[k]), float(se_d[k])) for k in range(3)}
    return SampleResult(n, steps, seed, params, cfg, dim, state, hist if histogram else None, batches)


# ------------------------------------------------------------ exact checks


def valid_configurations(n: int) -> list[int]:
    """Valid 1-2 configurations of the n x n torus as edge bitmasks (n <= 2)."""
    h = build_honey_torus(n)
    if h.num_edges > 20:
        raise ValueError("too many edges to enumerate")
    codes = np.arange(1 << h.num_edges, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(h.num_edges)) & 1
    deg = bits[:, h.incidence].sum(axis=2)
    ok = ((deg == 1) | (deg == 2)).all(axis=1)
    return [int(c) for c in codes[ok]]


def _bits_of(code: int, m: int) -> np.ndarray:
    return ((code >> np.arange(m)) & 1).astype(np.uint8)


def configuration_weight(h: HoneyTorus, code: int, weights) -> object:
    """Product of per-vertex 1-2 weights (exact for Fraction weights)."""
    occ = _bits_of(code, h.num_edges)
    a, b, c = weights
    table = [0, c, b, a, a, b, c, 0]
    out = 1
    for v in range(h.num_vertices):
        inc = h.incidence[v]
        out *= table[4 * occ[inc[0]] + 2 * occ[inc[1]] + occ[inc[2]]]
    return out


def transition_probability(h: HoneyTorus, code: int, e: int, weights) -> object:
    occ = _bits_of(code, h.num_edges)
    kind, p, r = _classify(occ, h.incidence, h.edge_ends, e)
    return Fraction(1, h.num_edges) * acceptance(int(kind), int(p), int(r), weights)


def detailed_balance_violations(n: int, weights) -> list:
    """Pairs (k, l) of configurations one toggle apart with lambda(k)P(l|k) != lambda(l)P(k|l)."""
    weights = tuple(Fraction(x) for x in weights)
    h = build_honey_torus(n)
    valid = set(valid_configurations(n))
    bad = []
    for k in valid:
        for e in range(h.num_edges):
            lcode = k ^ (1 << e)
            if lcode not in valid:
                continue
            lhs = configuration_weight(h, k, weights) * transition_probability(h, k, e, weights)
            rhs = configuration_weight(h, lcode, weights) * transition_probability(h, lcode, e, weights)
            if lhs != rhs:
                bad.append((k, lcode))
    return bad


def row_sums(n: int, weights) -> dict:
    """Off-diagonal outgoing mass per configuration (the hold mass is one minus this)."""
    weights = tuple(Fraction(x) for x in weights)
    h = build_honey_torus(n)
    return {k: sum(transition_probability(h, k, e, weights) for e in range(h.num_edges))
            for k in valid_configurations(n)}


def is_strongly_connected(n: int, weights) -> bool:
    h = build_honey_torus(n)
    valid = valid_configurations(n)
    vset = set(valid)

    def reach(start: int, reverse: bool) -> set:
        seen = {start}
        queue = deque([start])
        while queue:
            k = queue.popleft()
            for e in range(h.num_edges):
                l = k ^ (1 << e)
                if l not in vset or l in seen:
                    continue
                src = l if reverse else k
                if transition_probability(h, src, e, weights) > 0:
                    seen.add(l)
                    queue.append(l)
        return seen

    return len(reach(valid[0], False)) == len(valid) and len(reach(valid[0], True)) == len(valid)


def exact_distribution(n: int, weights) -> dict:
    h = build_honey_torus(n)
    lam = {k: float(configuration_weight(h, k, tuple(float(x) for x in weights))) for k in valid_configurations(n)}
    z = sum(lam.values())
    return {k: v / z for k, v in lam.items()}


def total_variation(hist: np.ndarray, exact: dict) -> float:
    total = hist.sum()
    emp = hist / total
    keys = set(exact) | set(np.nonzero(hist)[0].tolist())
    return 0.5 * sum(abs(emp[k] - exact.get(k, 0.0)) for k in keys)


# ------------------------------------------------------------ SVG


_COLORS = {0: "#c0392b", 1: "#2471a3", 2: "#229954"}


def render_svg(state: ChainState, scale: float = 12.0) -> str:
    """Occupied edges drawn on a sheared honeycomb, colored by edge type."""
    h = state.lattice
    n = h.n
    s3 = np.sqrt(3.0)
    delta = {0: (0.0, 1.0), 1: (-s3 / 2, -0.5), 2: (s3 / 2, -0.5)}
    u = (s3 / 2, 1.5)
    v = (-s3 / 2, 1.5)
    lines = []
    xs, ys = [], []
    for e in range(h.num_edges):
        cell, t = divmod(e, 3)
        i, j = divmod(cell, n)
        bx = i * u[0] + j * v[0]
        by = i * u[1] + j * v[1]
        ex, ey = bx + delta[t][0], by + delta[t][1]
        xs += [bx, ex]
        ys += [by, ey]
        if state.occupied[e]:
            lines.append((bx, by, ex, ey, t))
    x0, y0 = min(xs) - 1, min(ys) - 1
    width = (max(xs) - x0 + 1) * scale
    height = (max(ys) - y0 + 1) * scale
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}">']
    for bx, by, ex, ey, t in lines:
        out.append(f'<line x1="{(bx - x0) * scale:.2f}" y1="{height - (by - y0) * scale:.2f}" '
                   f'x2="{(ex - x0) * scale:.2f}" y2="{height - (ey - y0) * scale:.2f}" '
                   f'stroke="{_COLORS[t]}" stroke-width="{scale / 4:.2f}" stroke-linecap="round"/>')
    out.append("</svg>")
    return "\n".join(out)
