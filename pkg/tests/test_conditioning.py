import numpy as np
import pytest

from hexholo.conditioning import (ConditionEvent, ConditioningError, build_condition_variants,
                                  conditional_probability, even_gadget_weight, split_base_change,
                                  split_neighbor_signature)
from hexholo.oracle import enumerate_conditional
from hexholo.reduction import kron3, rotation, sample_orthogonal_model, solve_base_change_1x1
from hexholo.signatures import one_two_signature

UNIFORM = one_two_signature(1, 1, 1)
CRITICAL = one_two_signature(4, 1, 1)
ALLOWED = ["001", "010", "011", "100", "101", "110"]
Q = np.sqrt(2) / 4


def _reverse_digits(sig):
    return np.asarray(sig)[[int(format(k, "03b")[::-1], 2) for k in range(8)]]


def test_split_table():
    t = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(split_base_change(t, False, True), [[0, 2], [3, 4]])
    assert np.array_equal(split_base_change(t, False, False), [[1, 0], [3, 4]])
    assert np.array_equal(split_base_change(t, True, True), [[1, 2], [0, 4]])
    assert np.array_equal(split_base_change(t, True, False), [[1, 2], [3, 0]])
    # the input is left alone
    assert t[0, 0] == 1.0


@pytest.mark.parametrize("conditioned", [{0: True}, {1: False, 2: True}, {0: True, 1: True, 2: False}])
def test_split_completeness(conditioned, rng):
    m = rng.normal(size=8)
    bases = [rotation(a) for a in rng.uniform(0, np.pi, 3)]
    parts = split_neighbor_signature(m, bases, conditioned)
    assert len(parts) == 2 ** len(conditioned)
    total = sum(p.signature for p in parts)
    assert np.allclose(total, kron3(*bases) @ m, atol=1e-14)


def test_event_validation():
    with pytest.raises(ValueError):
        ConditionEvent(((0, 0, 0, "01"),))
    with pytest.raises(ValueError):
        ConditionEvent(((0, 0, 0, "001"), (0, 0, "black", "010")))
    assert ConditionEvent(((1, 0, "white", "011"),)).targets == ((1, 0, 1, "011"),)


def test_variant_counts():
    one = build_condition_variants(UNIFORM, ConditionEvent(((0, 0, 0, "011"),)), 2)
    assert len(one.variants) == 1 and not one.variants[0].even_targets
    two = build_condition_variants(UNIFORM, ConditionEvent(((0, 0, 0, "011"), (1, 0, 0, "011"))), 2)
    assert len(two.variants) == 2
    assert all(len(v.even_targets) % 2 == 0 for v in two.variants)


def test_uniform_dimer_gadgets():
    # a-edge dimer between black (0,0) and white (0,0): both ends hold only the a-edge
    event = ConditionEvent(((0, 0, 0, "100"), (0, 0, 1, "100")))
    mg = build_condition_variants(UNIFORM, event, 2)
    odd_expected = Q * np.array([0, -1, 1, 0, 1, 0, 0, -1])
    even_expected = Q * np.array([1, 0, 0, -1, 0, -1, 1, 0])
    for g in mg.local_weights.values():
        odd = np.where(np.isin(np.arange(8), [1, 2, 4, 7]), g, 0)
        even = g - odd
        # written with the a-digit last
        assert np.allclose(_reverse_digits(odd), odd_expected)
        assert np.allclose(_reverse_digits(even), even_expected)
    even_variant = next(v for v in mg.variants if v.even_targets)
    assert all(t == pytest.approx(-1.0) for t in even_variant.even_weights.values())


def test_even_gadget_weight():
    assert even_gadget_weight([2, 0, 0, 1, 0, 0.5, 0.5, 0]) == pytest.approx(1.0)
    assert even_gadget_weight([1, 0, 0, 1, 0, -1, 0, 0]) is None


def test_uniform_single_vertex_matches_oracle():
    for cfg in ALLOWED:
        got = conditional_probability(UNIFORM, [(0, 0, 0, cfg)], 2).probability
        assert got == pytest.approx(enumerate_conditional(UNIFORM, 2, [(0, 0, 0, cfg)]), abs=1e-9)


@pytest.mark.parametrize("signature", [UNIFORM, CRITICAL])
def test_single_vertex_events_sum_to_one(signature):
    total = sum(conditional_probability(signature, [(1, 0, 0, c)], 2).probability for c in ALLOWED)
    assert total == pytest.approx(1.0, abs=1e-9)


EVENTS = [
    [(0, 1, 0, "011")],
    [(0, 0, 0, "100"), (0, 0, 1, "110")],
    [(0, 0, 0, "111"), (1, 1, 1, "001")],
    [(0, 0, 0, "001"), (1, 0, 0, "010"), (0, 1, 1, "100")],
]


@pytest.mark.parametrize("seed", range(3))
def test_random_models_match_oracle(seed):
    model, _ = sample_orthogonal_model(2, np.random.default_rng(seed))
    for ev in EVENTS:
        exact = enumerate_conditional(model, 2, ev)
        got = conditional_probability(model, ev, 2).probability
        assert got == pytest.approx(exact, rel=1e-8, abs=1e-12)


def test_gauge_robustness():
    eb = solve_base_change_1x1(CRITICAL, CRITICAL)
    for ev in EVENTS[:2]:
        a = conditional_probability(CRITICAL, ev, 2).probability
        b = conditional_probability(CRITICAL, ev, 2, bases=eb).probability
        assert a == pytest.approx(b, abs=1e-9)


def test_one_cell_needs_override():
    with pytest.raises(ConditioningError):
        conditional_probability(UNIFORM, [(0, 0, 0, "011")], 1)
    res = conditional_probability(UNIFORM, [(0, 0, 0, "011")], 1, allow_n1=True)
    assert res.probability == pytest.approx(enumerate_conditional(UNIFORM, 1, [(0, 0, 0, "011")]), abs=1e-9)


@pytest.mark.slow
def test_critical_approaches_infinite_value():
    p = conditional_probability(CRITICAL, [(0, 0, 0, "011")], 16).probability
    assert abs(p - 0.3911) < 2e-2
