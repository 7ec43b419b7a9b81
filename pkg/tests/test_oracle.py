import numpy as np
import pytest

from hexholo.lattice import build_fisher_torus, uniform_weights
from hexholo.oracle import (OracleSizeError, all_configurations, brute_force_orthogonal,
                            enumerate_conditional, enumerate_matchings, enumerate_vertex_model,
                            fisher_matching_partition, gadget_signature, matching_probability,
                            transfer_matrix_partition)
from hexholo.reduction import orthogonal_reduction
from hexholo.signatures import one_two_signature

UNIFORM = one_two_signature(1, 1, 1)
CRITICAL = one_two_signature(4, 1, 1)


def test_uniform_one_cell():
    rep = enumerate_vertex_model(UNIFORM, 1)
    assert rep.partition == 6
    assert rep.config_count == 8
    assert rep.marginals[(0, 0, "black", "011")] == pytest.approx(1 / 6)


def test_critical_one_cell():
    assert enumerate_vertex_model(CRITICAL, 1).partition == pytest.approx(CRITICAL @ CRITICAL) == 36


def test_zero_signature_flags_marginals():
    rep = enumerate_vertex_model(np.zeros(8), 1)
    assert rep.partition == 0 and not rep.marginals_defined


def test_marginals_sum_to_one(rng):
    model = rng.uniform(0.1, 1, (2, 2, 2, 8))
    rep = enumerate_vertex_model(model, 2)
    for v in [(0, 0, "black"), (1, 1, "white"), (0, 1, "black")]:
        assert sum(rep.marginals[v + (format(c, "03b"),)] for c in range(8)) == pytest.approx(1.0)


def test_conditional_examples():
    assert enumerate_conditional(UNIFORM, 1, [(0, 0, "black", "011")]) == pytest.approx(1 / 6)
    assert enumerate_conditional(UNIFORM, 2, [(0, 0, 0, "000")]) == 0.0
    total = sum(enumerate_conditional(CRITICAL, 2, [(1, 0, 1, format(c, "03b"))]) for c in range(8))
    assert total == pytest.approx(1.0)


def test_size_guards():
    with pytest.raises(OracleSizeError):
        enumerate_vertex_model(UNIFORM, 3)
    with pytest.raises(OracleSizeError):
        enumerate_matchings(28, [(0, 1, 1.0)])
    with pytest.raises(OracleSizeError):
        transfer_matrix_partition(UNIFORM, UNIFORM, 8)


def test_matching_examples():
    assert enumerate_matchings(2, [(0, 1, 2.5)]) == 2.5
    assert enumerate_matchings(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]) == 0.0
    assert enumerate_matchings(0, []) == 1.0
    # 4-cycle with a chord: two perfect matchings
    assert enumerate_matchings(4, [(0, 1, 2.0), (1, 2, 3.0), (2, 3, 5.0), (3, 0, 7.0), (0, 2, 11.0)]) == 2 * 5 + 3 * 7


def test_uniform_fisher_torus_holant(uniform_model):
    f = orthogonal_reduction(uniform_model, 1).fisher
    sign, log_d = f.log_scale
    assert sign * fisher_matching_partition(f) * np.exp(log_d) == pytest.approx(6.0)
    assert np.allclose(np.prod(f.weights[0, 0], axis=0), [0.5, 0.5, 0.5, 4.5])


def test_matching_probability():
    edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]
    assert matching_probability(4, edges, [(0, 1)]) == pytest.approx(0.5)
    assert matching_probability(4, edges, [(0, 2)]) == 0.0


def test_gadget_signature_triangle():
    a, b, c = 2.0, 3.0, 5.0
    sig = gadget_signature(3, [(1, 2, a), (0, 2, b), (0, 1, c)], [0, 1, 2])
    assert np.allclose(sig, [0, c, b, 0, a, 0, 0, 1])


def test_transfer_matrix_agrees_with_enumeration(rng):
    for n in (1, 2):
        x, y = rng.uniform(0.1, 2, (2, 8))
        assert transfer_matrix_partition(x, y, n) == pytest.approx(enumerate_vertex_model(np.array([x, y]), n).partition)


def test_all_configurations_uniform():
    h, bits, w = all_configurations(1, UNIFORM)
    assert len(w) == 6 and (w == 1).all()
    assert set(bits.sum(axis=1)) == {1, 2}


def test_brute_force_orthogonal_examples(rng):
    assert brute_force_orthogonal(UNIFORM).feasible is True
    assert brute_force_orthogonal(np.arange(1.0, 9.0)).feasible is False


def test_fisher_matching_small_torus_nonnegative(rng):
    f = build_fisher_torus(2, uniform_weights(2, (1, 2, 3, 1)))
    assert fisher_matching_partition(f) > 0
