"""Finite-torus probabilities of forced local configurations.

Forcing configuration ``s`` at a vertex replaces its signature by ``r * e_s``.
After the base change this becomes a product vector that is neither odd nor
even; it is split into its odd and even parts. Expanding over the targets,
only terms with an even number of even parts survive (a matching covers an
even number of vertices). In each surviving term the even gadgets are paired
by a T-join of honeycomb edges and the 0/1 roles of those edges are
exchanged, which turns every gadget back into an odd one. Each term is then a
plain Fisher-graph partition function.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import DomainError
from .lattice import BLACK, COLORS, WHITE, build_fisher_torus, build_honey_torus, t_join
from .pfaffian import partition_function
from .reduction import (EVEN_ZERO, ODD_ZERO, _model_array, complement_digits, edge_basis_array,
                        kron3, orthogonal_edge_bases, reduce_model, solve_base_change_1x1,
                        transform_signatures)


class DegenerateSplitError(DomainError):
    pass


class ConditioningError(DomainError):
    pass


# ------------------------------------------------------------ split table
#
# Bases here are written with rows indexed by the vertex-model digit and
# columns by the dimer digit, so that r = (T x T x T) m. A conditioned edge
# knows its vertex-model digit; the entry zeroed is (vertex digit, 1 - dimer digit).


def split_base_change(t, vertex_present: bool, dimer_present: bool) -> np.ndarray:
    t = np.array(t, dtype=float)
    t[int(vertex_present), 1 - int(dimer_present)] = 0.0
    return t


@dataclass
class SplitPart:
    dimer_digits: tuple  # dimer digits on the conditioned positions
    matchgate: np.ndarray  # part of m supported on those digits
    bases: tuple  # three 2x2 bases (split on conditioned positions)
    signature: np.ndarray  # (T1 x T2 x T3) matchgate


def split_neighbor_signature(m, bases, conditioned: dict) -> list[SplitPart]:
    """Split r = (T1 x T2 x T3) m by the dimer digits at conditioned positions.

    ``conditioned`` maps a digit position (0, 1, 2) to whether that edge is
    present in the forced vertex configuration. Parts with zero matchgate are
    dropped; the part signatures sum to the original.
    """
    m = np.asarray(m, dtype=float)
    pos = sorted(conditioned)
    parts = []
    for digits in itertools.product((0, 1), repeat=len(pos)):
        mask = np.array([all(((k >> (2 - p)) & 1) == d for p, d in zip(pos, digits)) for k in range(8)])
        part = np.where(mask, m, 0.0)
        if not part.any():
            continue
        ts = [np.asarray(t, dtype=float) for t in bases]
        for p, d in zip(pos, digits):
            ts[p] = split_base_change(ts[p], conditioned[p], bool(d))
        parts.append(SplitPart(tuple(digits), part, tuple(ts), kron3(*ts) @ part))
    return parts


# ------------------------------------------------------------ events


@dataclass(frozen=True)
class ConditionEvent:
    targets: tuple  # ((i, j, color, "xyz"), ...)

    def __post_init__(self):
        seen = set()
        norm = []
        for i, j, color, cfg in self.targets:
            col = COLORS.index(color) if isinstance(color, str) else int(color)
            cfg = format(int(cfg), "03b") if not isinstance(cfg, str) else cfg
            if len(cfg) != 3 or set(cfg) - {"0", "1"}:
                raise ValueError(f"bad configuration string {cfg!r}")
            if (i, j, col) in seen:
                raise ValueError("target vertices must be distinct")
            seen.add((i, j, col))
            norm.append((int(i), int(j), col, cfg))
        object.__setattr__(self, "targets", tuple(norm))

    @property
    def split_count(self) -> int:
        return len(self.targets)


def even_gadget_weight(even) -> float | None:
    """Weight t = w000 / (w011 + w101 + w110) of an even gadget, None if undefined."""
    den = even[3] + even[5] + even[6]
    if den == 0:
        return None
    return float(even[0] / den)


@dataclass
class Variant:
    even_targets: tuple  # targets carrying the even part
    flipped_edges: tuple  # honeycomb edges whose digits were exchanged
    gadgets: dict  # honeycomb vertex -> odd signature after the exchange
    even_weights: dict = field(default_factory=dict)  # target -> t of its even part
    log_holant: float = -np.inf
    sign: float = 0.0


@dataclass
class ModifiedGadgets:
    n: int
    variants: list
    local_weights: dict  # target -> transformed masked signature
    base_matchgates: np.ndarray = field(repr=False)
    bases: np.ndarray = field(repr=False)


def _bases_for(model: np.ndarray, n: int, bases):
    if bases is not None:
        return edge_basis_array(n, bases)
    try:
        return orthogonal_edge_bases(model, n)
    except DomainError:
        same = np.allclose(model, model[0, 0][None, None])
        if not same:
            raise
        return edge_basis_array(n, solve_base_change_1x1(model[0, 0, WHITE], model[0, 0, BLACK]))


def build_condition_variants(model, event: ConditionEvent, n: int, bases=None,
                             allow_n1: bool = False) -> ModifiedGadgets:
    if n == 1 and not allow_n1:
        raise ConditioningError("conditioning on the 1x1 torus identifies neighbors; pass allow_n1 to override")
    model = np.array(_model_array(model, n))
    tb = _bases_for(model, n, bases)
    base = transform_signatures(model, n, tb)
    h = build_honey_torus(n)
    local = {}
    splits = []
    for i, j, col, cfg in event.targets:
        idx = int(cfg, 2)
        masked = np.zeros((n, n, 2, 8))
        masked[i, j, col, idx] = model[i, j, col, idx]
        g = transform_signatures(masked, n, tb)[i, j, col]
        local[(i, j, col, cfg)] = g
        odd = g.copy()
        odd[ODD_ZERO] = 0
        even = g.copy()
        even[EVEN_ZERO] = 0
        splits.append((h.vertex_index(i, j, col), odd, even))
    variants = []
    p = len(splits)
    for choice in itertools.product((0, 1), repeat=p):
        if sum(choice) % 2:
            continue
        parts = [(v, even if c else odd) for (v, odd, even), c in zip(splits, choice)]
        if any(not part.any() for _, part in parts):
            continue
        gadgets = {v: part for v, part in parts}
        even_vs = [v for (v, _, _), c in zip(splits, choice) if c]
        flips = t_join(h, even_vs) if even_vs else set()
        touched: dict = {}
        for e in flips:
            b, w = h.edge_ends[e]
            t = e % 3
            touched.setdefault(int(b), []).append(t)
            touched.setdefault(int(w), []).append(t)
        for v, digits in touched.items():
            i, j, c = divmod(v // 2, n) + (v % 2,)
            sig = gadgets.get(v, base[i, j, c])
            # repeated digits cancel (an edge used twice by the join is not flipped)
            ds = [d for d in set(digits) if digits.count(d) % 2]
            gadgets[v] = complement_digits(sig, ds)
        tags = {tuple(event.targets[k][:3]): even_gadget_weight(splits[k][2])
                for k in range(p) if choice[k]}
        variants.append(Variant(tuple(event.targets[k] for k in range(p) if choice[k]),
                                tuple(sorted(int(e) for e in flips)), gadgets, tags))
    return ModifiedGadgets(n, variants, local, base, tb)


def _holant(n: int, matchgates: np.ndarray) -> tuple[float, float]:
    """(sign, log|holant|) of a field of odd signatures, splitting gadgets with d = 0."""
    scale = np.abs(matchgates).max()
    if scale == 0:
        return 0.0, -np.inf
    flat = matchgates.reshape(-1, 8)
    zero_d = [k for k in range(flat.shape[0]) if abs(flat[k, 7]) <= 1e-14 * scale]
    if len(zero_d) > 12:
        raise DegenerateSplitError("too many gadgets without a 111 entry")
    terms = []
    for pattern in itertools.product((0, 1), repeat=len(zero_d)):
        arr = flat.copy()
        sign = 1.0
        for k, which in zip(zero_d, pattern):
            if which:  # the e_111 correction with weight -scale
                arr[k] = 0.0
                arr[k, 7] = scale
                sign = -sign
            else:
                arr[k, 7] += scale
        weights = np.stack([arr[:, 4], arr[:, 2], arr[:, 1], arr[:, 7]], axis=-1).reshape(n, n, 2, 4)
        res = partition_function(build_fisher_torus(n, weights))
        if res.signed == 0:
            continue
        s, lg = res.log_scale
        terms.append((sign * s * np.sign(res.signed), res.log_Z + lg))
    if not terms:
        return 0.0, -np.inf
    top = max(l for _, l in terms)
    acc = sum(s * np.exp(l - top) for s, l in terms)
    if acc == 0:
        return 0.0, -np.inf
    return float(np.sign(acc)), float(top + np.log(abs(acc)))


@dataclass
class ConditionalResult:
    probability: float
    variants: ModifiedGadgets
    log_partition: float


def conditional_probability(model, event, n: int, bases=None, allow_n1: bool = False) -> ConditionalResult:
    """Probability that all targets of ``event`` show their configurations on the n x n torus."""
    if not isinstance(event, ConditionEvent):
        event = ConditionEvent(tuple(event))
    mg = build_condition_variants(model, event, n, bases, allow_n1)
    red = reduce_model(np.array(_model_array(model, n)), n, mg.bases)
    s0, l0 = _holant(n, red.matchgates)
    if s0 == 0:
        raise ConditioningError("the model has zero partition function")
    total = 0.0
    for var in mg.variants:
        field_ = np.array(mg.base_matchgates)
        for v, sig in var.gadgets.items():
            i, j, c = divmod(v // 2, n) + (v % 2,)
            field_[i, j, c] = sig
        var.sign, var.log_holant = _holant(n, field_)
        if var.sign:
            total += var.sign * s0 * np.exp(var.log_holant - l0)
    return ConditionalResult(float(total), mg, l0)
