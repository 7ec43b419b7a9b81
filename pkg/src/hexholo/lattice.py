"""Toroidal honeycomb lattice and its Fisher matchgrid.

Conventions shared by every module:

* A local configuration at a vertex is a 3-digit binary string ``c1 c2 c3``
  where ``c1`` refers to the a-edge, ``c2`` to the b-edge and ``c3`` to the
  c-edge. Its index into an 8-vector is ``4*c1 + 2*c2 + c3``.
* Black vertex ``(i, j)`` meets white ``(i, j)`` through its a-edge, white
  ``(i-1, j)`` through its b-edge and white ``(i, j-1)`` through its c-edge
  (indices mod n). b-edges wind along the first cycle, c-edges along the second.
* Each honeycomb vertex becomes a triangle in the Fisher graph. Inside cell
  ``(i, j)`` the six Fisher vertices are numbered 0..5: 0, 1, 2 are the
  external vertices of the black triangle on its a, b, c sides and 3, 4, 5 those
  of the white triangle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EDGE_TYPES = ("a", "b", "c")
COLORS = ("black", "white")
BLACK, WHITE = 0, 1


class LatticeError(ValueError):
    pass


class DegenerateGadgetError(LatticeError):
    pass


@dataclass(frozen=True)
class HoneyTorus:
    n: int
    vertices: tuple = field(repr=False)
    edges: tuple = field(repr=False)
    # edge_ends[e] = (black vertex index, white vertex index)
    edge_ends: np.ndarray = field(repr=False)
    # incidence[v, t] = index of the type-t edge at vertex v
    incidence: np.ndarray = field(repr=False)

    def vertex_index(self, i: int, j: int, color: int) -> int:
        n = self.n
        return 2 * ((i % n) * n + (j % n)) + color

    def edge_index(self, i: int, j: int, etype: int) -> int:
        n = self.n
        return 3 * ((i % n) * n + (j % n)) + etype

    @property
    def num_vertices(self) -> int:
        return 2 * self.n * self.n

    @property
    def num_edges(self) -> int:
        return 3 * self.n * self.n


def white_neighbor(i: int, j: int, etype: int, n: int) -> tuple[int, int]:
    """Cell of the white vertex reached from black (i, j) along an edge of the given type."""
    if etype == 0:
        return i, j
    if etype == 1:
        return (i - 1) % n, j
    return i, (j - 1) % n


def black_neighbor(i: int, j: int, etype: int, n: int) -> tuple[int, int]:
    if etype == 0:
        return i, j
    if etype == 1:
        return (i + 1) % n, j
    return i, (j + 1) % n


def build_honey_torus(n: int) -> HoneyTorus:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise LatticeError(f"period must be a positive integer, got {n!r}")
    n = int(n)
    vertices = tuple((i, j, color) for i in range(n) for j in range(n) for color in COLORS)
    edges = tuple((i, j, t) for i in range(n) for j in range(n) for t in EDGE_TYPES)
    ends = np.zeros((3 * n * n, 2), dtype=np.int64)
    incidence = np.full((2 * n * n, 3), -1, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            b = 2 * (i * n + j)
            for t in range(3):
                e = 3 * (i * n + j) + t
                wi, wj = white_neighbor(i, j, t, n)
                w = 2 * (wi * n + wj) + 1
                ends[e] = (b, w)
                incidence[b, t] = e
                incidence[w, t] = e
    torus = HoneyTorus(n, vertices, edges, ends, incidence)
    _check_honey(torus)
    return torus


def _check_honey(h: HoneyTorus) -> None:
    if (h.incidence < 0).any():
        raise AssertionError("vertex missing an incident edge type")
    colors = h.edge_ends % 2
    if not ((colors[:, 0] == BLACK) & (colors[:, 1] == WHITE)).all():
        raise AssertionError("edge does not join black to white")
    deg = np.bincount(h.edge_ends.ravel(), minlength=h.num_vertices)
    if not (deg == 3).all():
        raise AssertionError("vertex degree differs from 3")


@dataclass(frozen=True)
class FisherEdge:
    tail: int  # Kasteleyn entry K[tail, head] = +weight
    head: int
    weight: float
    kind: str  # "triangle" or one of "a", "b", "c" for connecting edges
    wrap_z: int = 0  # +1 if the edge crosses the first cycle going tail -> head, -1 the reverse
    wrap_w: int = 0


@dataclass(frozen=True)
class FisherTorus:
    """Fisher matchgrid on the n x n torus.

    ``weights[i, j, color] = (a, b, c, d)``. The Kasteleyn weights of the
    triangle edges are ``a/d, b/d, c/d`` and ``prod(d)`` is the constant
    relating matching counts to the unnormalized gadget signatures.
    """

    n: int
    weights: np.ndarray = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return 6 * self.n * self.n

    def fisher_vertex(self, i: int, j: int, k: int) -> int:
        n = self.n
        return 6 * ((i % n) * n + (j % n)) + k

    @property
    def normalized(self) -> np.ndarray:
        """Triangle weights (a/d, b/d, c/d) with shape (n, n, 2, 3)."""
        return self.weights[..., :3] / self.weights[..., 3:4]

    @property
    def log_scale(self) -> tuple[float, float]:
        """(sign, log|prod d|): the matching-count to holant conversion constant."""
        d = self.weights[..., 3].ravel()
        return float(np.prod(np.sign(d))), float(np.sum(np.log(np.abs(d))))

    def edges(self) -> list[FisherEdge]:
        return fisher_edges(self)


def build_fisher_torus(h: HoneyTorus | int, weights) -> FisherTorus:
    """Assemble a Fisher torus from per-vertex triangle weights.

    ``weights`` is either an array of shape (n, n, 2, 4) or a mapping
    ``(i, j, color) -> (a, b, c, d)`` with color 0/1 or "black"/"white".
    """
    n = h.n if isinstance(h, HoneyTorus) else int(h)
    if isinstance(weights, dict):
        arr = np.full((n, n, 2, 4), np.nan)
        for (i, j, color), w in weights.items():
            c = COLORS.index(color) if isinstance(color, str) else int(color)
            arr[i, j, c] = w
    else:
        arr = np.array(weights, dtype=float)
        if arr.shape in ((4,), (2, 4)):
            arr = np.broadcast_to(arr, (n, n, 2, 4)).copy()
    if arr.shape != (n, n, 2, 4):
        raise LatticeError(f"weights must have shape {(n, n, 2, 4)}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise LatticeError("missing or non-finite triangle weights")
    bad = np.argwhere(arr[..., 3] == 0)
    if len(bad):
        i, j, c = bad[0]
        raise DegenerateGadgetError(f"d = 0 at vertex ({i}, {j}, {COLORS[c]})")
    arr.setflags(write=False)
    return FisherTorus(n, arr)


# Orientation inside one cell: (tail, head, weight slot) for triangle edges.
# Black triangle: K[0,1] = c, K[2,0] = b, K[1,2] = a. White likewise on 3..5.
_TRIANGLE_EDGES = ((0, 1, 2), (2, 0, 1), (1, 2, 0))


def fisher_edges(f: FisherTorus) -> list[FisherEdge]:
    n = f.n
    norm = f.normalized
    out: list[FisherEdge] = []
    for i in range(n):
        for j in range(n):
            for color in (BLACK, WHITE):
                off = 3 * color
                for tail, head, slot in _TRIANGLE_EDGES:
                    out.append(FisherEdge(f.fisher_vertex(i, j, off + tail), f.fisher_vertex(i, j, off + head),
                                          float(norm[i, j, color, slot]), "triangle"))
            # connecting edges are oriented white -> black
            for t in range(3):
                wi, wj = white_neighbor(i, j, t, n)
                wz = -1 if (t == 1 and i == 0) else 0
                ww = -1 if (t == 2 and j == 0) else 0
                # going white -> black the phase is opposite to black -> white
                out.append(FisherEdge(f.fisher_vertex(wi, wj, 3 + t), f.fisher_vertex(i, j, t), 1.0,
                                      EDGE_TYPES[t], -wz, -ww))
    return out


def triangle_edge_vertices(f: FisherTorus, i: int, j: int, color: int, slot: int) -> tuple[int, int]:
    """Fisher vertices of the triangle edge opposite external ``slot`` (0=a, 1=b, 2=c)."""
    off = 3 * color
    for tail, head, s in _TRIANGLE_EDGES:
        if s == slot:
            return f.fisher_vertex(i, j, off + tail), f.fisher_vertex(i, j, off + head)
    raise ValueError(slot)


def connecting_edge_vertices(f: FisherTorus, i: int, j: int, etype: int) -> tuple[int, int]:
    """(white external, black external) of the connecting edge of black (i, j) of the given type."""
    wi, wj = white_neighbor(i, j, etype, f.n)
    return f.fisher_vertex(wi, wj, 3 + etype), f.fisher_vertex(i, j, etype)


def uniform_weights(n: int, black, white=None) -> np.ndarray:
    """Broadcast one (a, b, c, d) per color over the n x n torus."""
    white = black if white is None else white
    arr = np.empty((n, n, 2, 4))
    arr[:, :, 0] = black
    arr[:, :, 1] = white
    return arr


def shortest_path_edges(h: HoneyTorus, src: int, dst: int) -> list[int]:
    """Edge indices along a breadth-first shortest path between two honeycomb vertices."""
    from collections import deque

    prev = {src: (None, None)}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        if v == dst:
            break
        for e in h.incidence[v]:
            b, w = h.edge_ends[e]
            u = w if v == b else b
            if u not in prev:
                prev[u] = (v, int(e))
                queue.append(u)
    path = []
    v = dst
    while prev[v][0] is not None:
        v, e = prev[v]
        path.append(e)
    return path


def t_join(h: HoneyTorus, vertices) -> set[int]:
    """Edge set whose odd-degree vertices are exactly ``vertices`` (which must be even in number)."""
    vertices = list(vertices)
    if len(vertices) % 2:
        raise LatticeError("a T-join needs an even number of terminals")
    edges: set[int] = set()
    for s, t in zip(vertices[0::2], vertices[1::2]):
        edges ^= set(shortest_path_edges(h, s, t))
    return edges
