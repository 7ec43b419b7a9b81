import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexholo.lattice import build_fisher_torus, triangle_edge_vertices, uniform_weights
from hexholo.oracle import (enumerate_matchings, fisher_matching_edges, fisher_matching_partition,
                            matching_probability, transfer_matrix_partition)
from hexholo.pfaffian import (SECTORS, PfaffianInputError, build_kasteleyn, calibrate_sign_pattern,
                              conditioned_partition, edge_probabilities, partition_function, pfaffian,
                              pfaffian_expansion, sign_pattern, slogpf)
from hexholo.reduction import orthogonal_reduction, sample_orthogonal_model


def random_skew(rng, m, complex_=False):
    a = rng.normal(size=(m, m))
    if complex_:
        a = a + 1j * rng.normal(size=(m, m))
    return a - a.T


def test_two_by_two():
    assert pfaffian(np.array([[0, 2.5], [-2.5, 0]])) == pytest.approx(2.5)


def test_four_by_four_formula(rng):
    a = random_skew(rng, 4)
    expected = a[0, 1] * a[2, 3] - a[0, 2] * a[1, 3] + a[0, 3] * a[1, 2]
    assert pfaffian(a) == pytest.approx(expected)
    assert pfaffian_expansion(a) == pytest.approx(expected)


@pytest.mark.parametrize("m", [6, 8, 10])
def test_matches_expansion(m, rng):
    a = random_skew(rng, m)
    assert pfaffian(a) == pytest.approx(pfaffian_expansion(a), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 90), st.integers(0, 2**31 - 1), st.booleans())
def test_square_is_determinant(half, seed, complex_):
    a = random_skew(np.random.default_rng(seed), 2 * half, complex_)
    sign, log_pf = slogpf(a)
    sdet, log_det = np.linalg.slogdet(a)
    assert log_det == pytest.approx(2 * log_pf, rel=1e-9, abs=1e-9)
    assert np.isclose(sign * sign, sdet, atol=1e-8)


def test_blocked_path_consistent(rng):
    # larger than one panel so the deferred updates are exercised
    a = random_skew(rng, 300)
    sign, log_pf = slogpf(a)
    assert 2 * log_pf == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-10)


def test_input_validation():
    with pytest.raises(PfaffianInputError):
        slogpf(np.ones((3, 3)))
    with pytest.raises(PfaffianInputError):
        slogpf(np.ones((2, 2)))
    assert slogpf(np.zeros((2, 2)))[1] == -np.inf


def test_sector_zero_one_cell():
    f = build_fisher_torus(1, uniform_weights(1, (1, 1, 1, 1)))
    k00 = build_kasteleyn(f, 0, 0).entries
    k10 = build_kasteleyn(f, 1, 0).entries
    diff = np.argwhere(~np.isclose(k00, k10))
    # only the b-type connecting entries (white 4 <-> black 1) change sign
    assert {tuple(x) for x in diff} == {(1, 4), (4, 1)}
    assert np.allclose(k10[1, 4], -k00[1, 4])


def test_two_cell_kasteleyn_structure():
    f = build_fisher_torus(2, uniform_weights(2, (1, 2, 3, 1)))
    for th, ta in SECTORS:
        k = build_kasteleyn(f, th, ta).entries
        assert k.shape == (24, 24)
        assert np.allclose(k, -k.T)
        # each Fisher vertex: two triangle edges and one connecting edge
        assert (np.count_nonzero(k, axis=1) == 3).all()


def test_uniform_one_cell_sectors(uniform_model):
    f = orthogonal_reduction(uniform_model, 1).fisher
    res = partition_function(f)
    assert sorted(np.abs(res.sector_pfaffians)) == pytest.approx([2 / 3, 10 / 9, 10 / 9, 10 / 9])
    assert res.Z == pytest.approx(4 / 3)
    assert res.holant == pytest.approx(6.0)


@pytest.mark.parametrize("n", [1, 2])
def test_against_matching_enumeration(n, rng):
    for _ in range(10):
        w = rng.uniform(0.1, 2.0, size=(n, n, 2, 4))
        f = build_fisher_torus(n, w)
        ref = fisher_matching_partition(f)
        assert partition_function(f).signed == pytest.approx(ref, rel=1e-9)


def test_sign_pattern_calibration(rng):
    fishers = [build_fisher_torus(2, rng.uniform(0.1, 2, (2, 2, 2, 4))) for _ in range(3)]
    refs = [fisher_matching_partition(f) for f in fishers]
    # a pattern and its negation give the same magnitude
    good = calibrate_sign_pattern(fishers, refs)
    assert len(good) == 2 and sign_pattern(2) in good
    assert tuple(-s for s in good[0]) == good[1]
    fishers = [build_fisher_torus(1, rng.uniform(0.1, 2, (1, 1, 2, 4))) for _ in range(3)]
    refs = [fisher_matching_partition(f) for f in fishers]
    assert sign_pattern(1) in calibrate_sign_pattern(fishers, refs)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_against_transfer_matrix(n, rng):
    model, _ = sample_orthogonal_model(1, rng, positive=True)
    expected = transfer_matrix_partition(model[0, 0, 0], model[0, 0, 1], n)
    got = partition_function(orthogonal_reduction(model[0, 0], n).fisher).holant
    assert got == pytest.approx(expected, rel=1e-10)


def test_pf_squared_is_det_on_kasteleyn(rng):
    f = build_fisher_torus(3, rng.uniform(0.2, 2, (3, 3, 2, 4)))
    for th, ta in SECTORS:
        k = build_kasteleyn(f, th, ta).entries
        s, l = slogpf(k)
        assert 2 * l == pytest.approx(np.linalg.slogdet(k)[1], rel=1e-9)


def test_edge_probabilities(rng):
    f = build_fisher_torus(1, rng.uniform(0.2, 2, (1, 1, 2, 4)))
    assert edge_probabilities(f, []) == 1.0
    u, v = triangle_edge_vertices(f, 0, 0, 0, 1)
    edges = fisher_matching_edges(f)
    assert edge_probabilities(f, [(u, v)]) == pytest.approx(matching_probability(6, edges, [(u, v)]))
    # the three dimers covering Fisher vertex 0
    covering = [(0, 1), (0, 2), (0, 3)]
    total = sum(matching_probability(6, edges, [p]) for p in covering)
    assert total == pytest.approx(1.0)
    assert sum(edge_probabilities(f, [p]) for p in covering) == pytest.approx(1.0)
    with pytest.raises(PfaffianInputError):
        edge_probabilities(f, [(0, 1), (1, 2)])


def test_edge_probability_two_cells(rng):
    f = build_fisher_torus(2, rng.uniform(0.2, 2, (2, 2, 2, 4)))
    edges = fisher_matching_edges(f)
    pair = [(0, 1), (f.fisher_vertex(1, 1, 3), f.fisher_vertex(1, 1, 4))]
    assert edge_probabilities(f, pair) == pytest.approx(matching_probability(24, edges, pair), rel=1e-9)


def test_conditioned_partition(uniform_model):
    f = orthogonal_reduction(uniform_model, 2).fisher
    assert conditioned_partition(f, {}).Z == pytest.approx(partition_function(f).Z)
    for gadget in [(1.0, 1.0, 1.0, 1.0), (0.0, 0.0, 0.0, 1.0), (0.3, -1.2, 0.0, 2.0)]:
        got = conditioned_partition(f, {(1, 0, 1): gadget})
        w = np.array(f.weights)
        w[1, 0, 1] = gadget
        ref = fisher_matching_partition(build_fisher_torus(2, w))
        assert got.signed == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_matching_enumerator_basics():
    assert enumerate_matchings(2, [(0, 1, 2.5)]) == 2.5
    assert enumerate_matchings(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]) == 0.0
