"""Vertex signatures and realizability criteria.

A signature is an 8-vector indexed by local configurations in a-b-c digit
order. The orthogonal criterion works with eight linear combinations
``z_1..z_8`` of the entries and three angles (phi, psi, gamma). The
rotation angle on the a-edge is (psi+gamma)/2, on the b-edge (phi+gamma)/2
and on the c-edge (phi+psi)/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import DomainError
from .lattice import BLACK, WHITE, black_neighbor, white_neighbor

DEFAULT_TOL = 1e-9

# (numerator, denominator) index pairs into z for the four angle ratios
# tan(gamma) = -z7/z2, tan(psi) = -z6/z3, tan(phi) = -z4/z5, tan(-total) = -z1/z8
_PAIRS = {"gamma": (6, 1), "psi": (5, 2), "phi": (3, 4), "total": (0, 7)}
_EDGE_ANGLE_PAIRS = (("psi", "gamma"), ("phi", "gamma"), ("phi", "psi"))


class IndeterminateRatioError(DomainError):
    def __init__(self, pair: str, where=None):
        self.pair = pair
        self.where = where
        loc = f" at vertex {where}" if where is not None else ""
        super().__init__(f"both entries of the {pair} ratio pair vanish{loc}")


def as_signature(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (8,):
        raise ValueError(f"signature must have 8 entries, got shape {r.shape}")
    if not np.isfinite(r).all():
        raise ValueError("signature entries must be finite")
    return r


def one_two_signature(a: float, b: float, c: float) -> np.ndarray:
    """1-2 model: one or two occupied edges per vertex."""
    return np.array([0.0, c, b, a, a, b, c, 0.0])


@dataclass(frozen=True)
class IsingParams:
    j1: float
    j2: float
    j3: float


def ising_signature(p: IsingParams) -> np.ndarray:
    """Vertex signature of the Kagome Ising model with couplings (J1, J2, J3)."""
    j1, j2, j3 = p.j1, p.j2, p.j3
    e = np.exp
    return np.array([e(2 * (j1 + j2 + j3)), e(2 * j3), e(2 * j2), e(2 * j1),
                     e(2 * j1), e(2 * j2), e(2 * j3), e(2 * (j1 + j2 + j3))])


def z_vector(r) -> np.ndarray:
    x1, x2, x3, x4, x5, x6, x7, x8 = as_signature(r)
    return np.array([x4 + x6 + x7 - x1, x3 + x5 + x8 - x2, x2 + x5 + x8 - x3, x1 + x6 + x7 - x4,
                     x2 + x3 + x8 - x5, x1 + x4 + x7 - x6, x1 + x4 + x6 - x7, x2 + x3 + x5 - x8])


def _phasor(z: np.ndarray, name: str, where=None) -> complex:
    """Complex number whose argument has tangent -z[num]/z[den]."""
    num, den = _PAIRS[name]
    if z[num] == 0 and z[den] == 0:
        raise IndeterminateRatioError(f"(z{num + 1}, z{den + 1})", where)
    return complex(z[den], -z[num])


@dataclass
class OrthogonalResult:
    realizable: bool
    residual: float
    angles: tuple[float, float, float] | None = None  # (phi, psi, gamma)
    edge_angles: tuple[float, float, float] | None = None  # rotation angles on a, b, c edges
    positive: bool = False
    positive_residual: float = np.inf


def tt_residual(r, where=None) -> float:
    """Relative size of the tangent-sum numerator; zero exactly when the tt condition holds."""
    z = z_vector(r)
    prod = 1.0 + 0j
    mag = 1.0
    for name in ("gamma", "psi", "phi", "total"):
        p = _phasor(z, name, where)
        prod *= p
        mag *= abs(p)
    return abs(prod.imag) / mag


def orthogonal_angles(r) -> tuple[float, float, float]:
    """(phi, psi, gamma) fixed by the sine conditions of positive realizability."""
    z = z_vector(r)
    phi = np.arctan2(z[3], -z[4])
    psi = np.arctan2(z[5], -z[2])
    gamma = np.arctan2(z[6], -z[1])
    return float(phi), float(psi), float(gamma)


def edge_angles_from(angles) -> tuple[float, float, float]:
    phi, psi, gamma = angles
    return (psi + gamma) / 2, (phi + gamma) / 2, (phi + psi) / 2


def check_orthogonal(r, tol: float = DEFAULT_TOL, where=None) -> OrthogonalResult:
    r = as_signature(r)
    res = tt_residual(r, where)
    if res > tol:
        return OrthogonalResult(False, res)
    angles = orthogonal_angles(r)
    z = z_vector(r)
    radius = np.hypot(z[0], z[7])
    total = sum(angles)
    target = complex(-z[7], z[0]) / radius
    pos_res = abs(np.exp(-1j * total) - target)
    return OrthogonalResult(True, res, angles, edge_angles_from(angles), bool(pos_res <= np.sqrt(tol)), float(pos_res))


def _edge_phasor(r, etype: int, where=None) -> complex:
    z = z_vector(r)
    p, q = _EDGE_ANGLE_PAIRS[etype]
    return _phasor(z, p, where) * _phasor(z, q, where)


def edge_compatibility_residual(r_black, r_white, etype: int, where=None) -> float:
    """Zero when both endpoints ask for the same edge rotation modulo pi/2."""
    pb = _edge_phasor(r_black, etype, where)
    pw = _edge_phasor(r_white, etype, where)
    return abs((pb * pw.conjugate()).imag) / (abs(pb) * abs(pw))


def check_orthogonal_periodic(model, tol: float = DEFAULT_TOL) -> bool:
    """Every vertex passes the tt test and every edge gets a consistent rotation.

    ``model`` has shape (n, n, 2, 8) with color 0 black and 1 white.
    """
    model = np.asarray(model, dtype=float)
    n = model.shape[0]
    if model.shape != (n, n, 2, 8):
        raise ValueError("model must have shape (n, n, 2, 8)")
    for i in range(n):
        for j in range(n):
            for color in (BLACK, WHITE):
                if tt_residual(model[i, j, color], (i, j, color)) > tol:
                    return False
    for i in range(n):
        for j in range(n):
            for t in range(3):
                wi, wj = white_neighbor(i, j, t, n)
                res = edge_compatibility_residual(model[i, j, BLACK], model[wi, wj, WHITE], t, (i, j, t))
                if res > tol:
                    return False
    return True


def periodic_edge_angles(model) -> np.ndarray:
    """Rotation angle (mod pi/2) per edge, read from the black endpoint. Shape (n, n, 3)."""
    model = np.asarray(model, dtype=float)
    n = model.shape[0]
    out = np.empty((n, n, 3))
    for i in range(n):
        for j in range(n):
            out[i, j] = edge_angles_from(orthogonal_angles(model[i, j, BLACK]))
    return out


# --------------------------------------------------------- general criterion


def _x_coefficients(x) -> np.ndarray:
    x1, x2, x3, x4, x5, x6, x7, x8 = x
    c = np.empty((3, 3, 3))
    c[0, 0, 0] = x1**2 * (x3 * x6 + x2 * x7 + x4 * x5 - x1 * x8) - 2 * x1 * x2 * x3 * x5
    c[0, 0, 1] = x1**2 * (x6 * x4 - x2 * x8) + x2**2 * (x1 * x7 - x3 * x5)
    c[0, 0, 2] = x2**2 * (x2 * x7 - x1 * x8 - x3 * x6 - x4 * x5) + 2 * x1 * x2 * x4 * x6
    c[0, 1, 0] = x3**2 * (x1 * x6 - x2 * x5) + x1**2 * (x7 * x4 - x3 * x8)
    c[0, 1, 1] = x1 * x2 * (x4 * x7 - x3 * x8) + x3 * x4 * (x1 * x6 - x2 * x5)
    c[0, 1, 2] = x2**2 * (x4 * x7 - x3 * x8) + x4**2 * (x1 * x6 - x2 * x5)
    c[0, 2, 0] = x3**2 * (x3 * x6 - x2 * x7 - x4 * x5 - x1 * x8) + 2 * x1 * x4 * x3 * x7
    c[0, 2, 1] = x4**2 * (x1 * x7 - x3 * x5) + x3**2 * (x6 * x4 - x2 * x8)
    c[0, 2, 2] = x4**2 * (x2 * x7 + x1 * x8 + x3 * x6 - x4 * x5) - 2 * x2 * x3 * x4 * x8
    c[1, 0, 0] = x5**2 * (x1 * x4 - x2 * x3) + x1**2 * (x6 * x7 - x5 * x8)
    c[1, 0, 1] = x1 * x2 * (x6 * x7 - x5 * x8) + x5 * x6 * (x1 * x4 - x2 * x3)
    c[1, 0, 2] = x6**2 * (x1 * x4 - x2 * x3) + x2**2 * (x6 * x7 - x5 * x8)
    c[1, 1, 0] = x1 * x3 * (x7 * x6 - x5 * x8) + x5 * x7 * (x1 * x4 - x2 * x3)
    c[1, 1, 1] = x1 * x4 * x6 * x7 - x2 * x3 * x5 * x8
    c[1, 1, 2] = x4 * x8 * (x1 * x6 - x2 * x5) + x2 * x6 * (x4 * x7 - x3 * x8)
    c[1, 2, 0] = x7**2 * (x1 * x4 - x2 * x3) + x3**2 * (x6 * x7 - x5 * x8)
    c[1, 2, 1] = x3 * x7 * (x4 * x6 - x2 * x8) + x4 * x8 * (x1 * x7 - x3 * x5)
    c[1, 2, 2] = x8**2 * (x1 * x4 - x2 * x3) + x4**2 * (x6 * x7 - x5 * x8)
    c[2, 0, 0] = x5**2 * (x4 * x5 - x1 * x8 - x3 * x6 - x2 * x7) + 2 * x1 * x5 * x6 * x7
    c[2, 0, 1] = x5**2 * (x6 * x4 - x2 * x8) + x6**2 * (x1 * x7 - x3 * x5)
    c[2, 0, 2] = x6**2 * (x1 * x8 + x2 * x7 + x4 * x5 - x3 * x6) - 2 * x5 * x6 * x2 * x8
    c[2, 1, 0] = x5**2 * (x4 * x7 - x3 * x8) + x7**2 * (x1 * x6 - x2 * x5)
    c[2, 1, 1] = x6 * x8 * (x1 * x7 - x3 * x5) + x5 * x7 * (x4 * x6 - x2 * x8)
    c[2, 1, 2] = x8**2 * (x1 * x6 - x2 * x5) + x6**2 * (x4 * x7 - x3 * x8)
    c[2, 2, 0] = x7**2 * (x1 * x8 + x3 * x6 + x4 * x5 - x2 * x7) - 2 * x3 * x8 * x5 * x7
    c[2, 2, 1] = x8**2 * (x1 * x7 - x3 * x5) + x7**2 * (x6 * x4 - x2 * x8)
    c[2, 2, 2] = x8**2 * (x1 * x8 - x3 * x6 - x2 * x7 - x4 * x5) + 2 * x7 * x8 * x6 * x4
    return c


def _a_neighbor_terms(y):
    y1, y2, y3, y4, y5, y6, y7, y8 = y
    return np.array([y1 * y4 - y2 * y3, y1 * y8 + y4 * y5 - y2 * y7 - y3 * y6, y5 * y8 - y6 * y7])


def _b_neighbor_terms(z):
    z1, z2, z3, z4, z5, z6, z7, z8 = z
    return np.array([z1 * z6 - z2 * z5, z1 * z8 + z3 * z6 - z4 * z5 - z2 * z7, z3 * z8 - z4 * z7])


def _c_neighbor_terms(w):
    w1, w2, w3, w4, w5, w6, w7, w8 = w
    return np.array([w1 * w7 - w3 * w5, w1 * w8 + w2 * w7 - w5 * w4 - w3 * w6, w2 * w8 - w6 * w4])


def realizability_polynomial(x, y_a, z_b, w_c) -> tuple[float, float]:
    """(value, scale) of the degree-10 realizability polynomial at a vertex.

    ``scale`` is the largest magnitude among the 27 summands, used for
    relative comparisons.
    """
    coeffs = _x_coefficients(as_signature(x))
    ya = _a_neighbor_terms(as_signature(y_a))
    zb = _b_neighbor_terms(as_signature(z_b))
    wc = _c_neighbor_terms(as_signature(w_c))
    terms = coeffs * ya[:, None, None] * zb[None, :, None] * wc[None, None, :]
    return float(terms.sum()), float(np.abs(terms).max())


def check_realizable_general(x, y_a, z_b, w_c, tol: float = DEFAULT_TOL) -> bool:
    value, scale = realizability_polynomial(x, y_a, z_b, w_c)
    if scale == 0:
        return value == 0
    return abs(value) <= tol * scale


def check_realizable_periodic(model, tol: float = DEFAULT_TOL) -> bool:
    """Apply the general criterion at every vertex of an (n, n, 2, 8) model."""
    model = np.asarray(model, dtype=float)
    n = model.shape[0]
    for i in range(n):
        for j in range(n):
            nb = [model[(*white_neighbor(i, j, t, n), WHITE)] for t in range(3)]
            if not check_realizable_general(model[i, j, BLACK], *nb, tol=tol):
                return False
            nb = [model[(*black_neighbor(i, j, t, n), BLACK)] for t in range(3)]
            if not check_realizable_general(model[i, j, WHITE], *nb, tol=tol):
                return False
    return True


def generic_degeneracy(v) -> float:
    """Smallest of the three sums whose vanishing makes realizable-vs-orthogonal ambiguous, relative to |v|^2."""
    v1, v2, v3, v4, v5, v6, v7, v8 = as_signature(v)
    sums = (v4 * v8 + v1 * v5 + v3 * v7 + v2 * v6, v3 * v4 + v5 * v6 + v1 * v2 + v7 * v8,
            v4 * v2 + v7 * v5 + v3 * v1 + v8 * v6)
    scale = float(np.dot(v, v)) or 1.0
    return min(abs(s) for s in sums) / scale


# ------------------------------------------------------- bipartite criterion


def bipartite_discriminant(v) -> tuple[float, float]:
    """(value, scale) of the bipartite discriminant; scale is the largest monomial magnitude."""
    v1, v2, v3, v4, v5, v6, v7, v8 = as_signature(v)
    p = (v1 * v8, v2 * v7, v3 * v6, v4 * v5)
    monomials = [p[0] ** 2, p[1] ** 2, p[2] ** 2, p[3] ** 2]
    for s in range(4):
        for t in range(s + 1, 4):
            monomials.append(-2 * p[s] * p[t])
    monomials += [4 * v1 * v4 * v6 * v7, 4 * v2 * v3 * v5 * v8]
    return float(sum(monomials)), float(max(abs(m) for m in monomials))


def check_bipartite(v, tol: float = DEFAULT_TOL) -> bool:
    value, scale = bipartite_discriminant(v)
    if scale == 0:
        return True
    return abs(value) <= tol * scale
