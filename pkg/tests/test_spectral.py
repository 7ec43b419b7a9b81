import numpy as np
import pytest

from hexholo.lattice import build_fisher_torus
from hexholo.pfaffian import build_kasteleyn
from hexholo.reduction import orthogonal_reduction
from hexholo.signatures import one_two_signature
from hexholo.spectral import (ClusterLimitationError, InconsistentWeightsError, Target, angle_form,
                              char_poly, classify_spectral_curve, dimer_event, free_energy,
                              inverse_entries, is_degenerate, k_inverse, local_probability_infinite,
                              node_conditions, spectral_data, torus_rule, vertex_config_distribution)

NINTH = 1 / 9


@pytest.fixture(scope="module")
def uniform_data(uniform_model):
    return spectral_data(orthogonal_reduction(uniform_model, 1).fisher)


@pytest.fixture(scope="module")
def critical_data(critical_model):
    return spectral_data(orthogonal_reduction(critical_model, 1).fisher)


def test_char_poly_at_real_points():
    p = (NINTH, NINTH, NINTH)
    assert char_poly(p, 1, 1) == pytest.approx(4 / 9)
    for point in [(1, -1), (-1, 1), (-1, -1)]:
        assert char_poly(p, *point) == pytest.approx(100 / 81)


def test_char_poly_constant_case():
    # with ab = c, ac = b, bc = a every Fourier coefficient vanishes
    zs = np.exp(1j * np.linspace(0, 6, 7))
    assert np.allclose(char_poly((1, 1, 1), zs, zs[::-1]), 4)
    assert is_degenerate((1, 1, 1))
    assert not is_degenerate((NINTH, NINTH, NINTH))


def test_classification(uniform_data, critical_data):
    assert uniform_data.classification == "disjoint" and uniform_data.node is None
    assert critical_data.classification == "node"
    assert critical_data.node == (1, 1)
    assert critical_data.products == pytest.approx((NINTH, 4 * NINTH, 4 * NINTH))


def test_node_conditions(critical_data):
    check = node_conditions(critical_data.products, critical_data.node)
    assert check.holds
    assert critical_data.P(1, 1) == pytest.approx(0, abs=1e-14)


def test_classification_rejects_two_zeros():
    # P(1, 1) = (a+b+c-1)^2 and P(1, -1) = (a+b-c+1)^2 both vanish
    with pytest.raises(InconsistentWeightsError):
        classify_spectral_curve((0.0, 0.0, 1.0))


@pytest.mark.parametrize("name", ["uniform", "critical"])
def test_nonnegative_on_torus(name, uniform_data, critical_data):
    data = uniform_data if name == "uniform" else critical_data
    t = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    th, ph = np.meshgrid(t, t)
    assert angle_form(data.products, th, ph).min() >= -1e-10


@pytest.mark.parametrize("name", ["uniform", "critical"])
def test_closed_form_matches_determinant(name, uniform_data, critical_data, rng):
    data = uniform_data if name == "uniform" else critical_data
    z = np.exp(1j * rng.uniform(0, 2 * np.pi, 100))
    w = np.exp(1j * rng.uniform(0, 2 * np.pi, 100))
    dets = np.linalg.det(data.symbol(z, w))
    assert np.allclose(dets, data.P(z, w), atol=1e-12)


def test_closed_form_random_weights(rng):
    cell = rng.uniform(0.2, 2.0, (2, 4))
    data = spectral_data(build_fisher_torus(1, cell))
    z, w = np.exp(1j * rng.uniform(0, 2 * np.pi, (2, 20)))
    assert np.allclose(np.linalg.det(data.symbol(z, w)), data.P(z, w), rtol=1e-10)


def _uniform_denominator(z, w):
    return 2 * (z * z + w * w) + 2 * (z + w) + 2 * z * w * (z + w) - 21 * z * w


def test_uniform_denominator_identity(uniform_data, rng):
    z, w = np.exp(1j * rng.uniform(0, 2 * np.pi, (2, 50)))
    assert np.allclose(-81 * z * w / 4 * uniform_data.P(z, w), _uniform_denominator(z, w))


def test_uniform_inverse_entry_rational_form(uniform_data, rng):
    z, w = np.exp(1j * rng.uniform(0, 2 * np.pi, (2, 30)))
    kinv = np.linalg.inv(uniform_data.symbol(z, w))
    expected = 0.75 * w * (z * w + 1 + z - 9 * w) / _uniform_denominator(z, w)
    assert np.allclose(-kinv[:, 1, 2], expected)


def test_inverse_entries_antisymmetric(critical_data):
    reqs = [(1, 2, (0, 0)), (2, 1, (0, 0)), (0, 4, (1, 0)), (4, 0, (-1, 0))]
    vals = inverse_entries(critical_data, reqs, grid=64)
    assert vals[(1, 2, (0, 0))] == pytest.approx(-vals[(2, 1, (0, 0))])
    assert vals[(0, 4, (1, 0))] == pytest.approx(-vals[(4, 0, (-1, 0))])


def test_inverse_entries_match_large_torus(uniform_data):
    # finite Fourier sum over the four boundary sectors reproduces a finite-torus inverse;
    # at n=32 the decay is fast enough that the n=32 periodic sum equals the infinite value
    n = 4
    f = build_fisher_torus(n, np.broadcast_to(uniform_data.cell_weights, (n, n, 2, 4)))
    kinv = np.linalg.inv(build_kasteleyn(f, 0, 0).entries)
    roots = np.exp(2j * np.pi * np.arange(n) / n)
    for (x1, y1, x2, y2, a, b) in [(0, 0, 0, 0, 1, 2), (1, 0, 0, 0, 0, 4), (2, 3, 0, 1, 3, 5)]:
        acc = sum(z ** (x1 - x2) * w ** (y1 - y2) * np.linalg.inv(uniform_data.symbol(z, w))[a, b]
                  for z in roots for w in roots) / n ** 2
        assert acc.real == pytest.approx(kinv[6 * (x1 * n + y1) + a, 6 * (x2 * n + y2) + b], abs=1e-12)
    n = 32
    roots = np.exp(2j * np.pi * np.arange(n) / n)
    zz, ww = np.meshgrid(roots, roots, indexing="ij")
    acc = np.mean(zz * np.linalg.inv(uniform_data.symbol(zz, ww))[..., 0, 4])
    assert acc.real == pytest.approx(k_inverse(uniform_data, 0, 4, (1, 0)).value, abs=1e-12)


def test_torus_rule_weights():
    assert torus_rule(16).weight.sum() == pytest.approx(1.0)
    rule = torus_rule(16, node=(1, -1), levels=3)
    assert rule.weight.sum() == pytest.approx(1.0)
    # no sample lands on the node itself
    d = np.hypot(np.angle(np.exp(1j * rule.theta)), np.angle(np.exp(1j * (rule.phi - np.pi))))
    assert d.min() > 0
    with pytest.raises(ValueError):
        torus_rule(7)


def test_free_energy_constant_polynomial():
    fe = free_energy((1.0, 1.0, 1.0), grid=8)
    assert fe.value == pytest.approx(0.5 * np.log(4))
    assert fe.error_estimate < 1e-14


def test_free_energy_uniform_value(uniform_data):
    fe = free_energy(uniform_data.products, grid=128)
    assert fe.value == pytest.approx(0.0014220969, abs=1e-10)
    assert fe.classification == "disjoint"


def test_free_energy_critical_converges(critical_data):
    # the error at a node shrinks about fourfold per doubling
    fes = [free_energy(critical_data.products, grid=g) for g in (64, 128, 256)]
    assert fes[0].classification == "node"
    gaps = [abs(fes[k].value - fes[k + 1].value) for k in range(2)]
    assert 3 < gaps[0] / gaps[1] < 5
    assert fes[-1].error_estimate < 2e-5


def test_vertex_distribution_sums_to_one(uniform_model, critical_model):
    for model in (uniform_model, critical_model):
        dist = vertex_config_distribution(model, grid=64)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)
        assert dist["000"] == dist["111"] == 0.0
    dist = vertex_config_distribution(uniform_model, grid=64)
    assert np.allclose(list(dist.values())[1:7], 1 / 6)


def test_uniform_dimer_probability(uniform_model):
    values = [local_probability_infinite(uniform_model, dimer_event(e), 128).value for e in range(3)]
    assert np.allclose(values, 0.0562207540, atol=1e-9)


def test_critical_local_probability(critical_model):
    closed = 23 / 48 - 25 / (112 * np.pi) * np.arctan(4 / 3) - 65 / (336 * np.pi) * np.arctan(44 / 117)
    res = local_probability_infinite(critical_model, [Target(0, 0, 0, "100")], 256)
    assert res.value == pytest.approx(closed, abs=1e-7)
    assert res.classification == "node"


def test_disconnected_cluster_rejected(uniform_model):
    targets = [Target(0, 0, 0, "001"), Target(5, 5, 0, "001")]
    with pytest.raises(ClusterLimitationError):
        local_probability_infinite(uniform_model, targets, 32)


def test_duplicate_targets_rejected(uniform_model):
    with pytest.raises(ValueError):
        local_probability_infinite(uniform_model, [Target(0, 0, 0, "001")] * 2, 32)


def test_off_critical_one_two_spectrum():
    r = one_two_signature(1, 2, 2)
    data = spectral_data(orthogonal_reduction(np.array([r, r]), 1).fisher)
    assert data.classification == "disjoint"
    assert min(data.real_values.values()) > 0
