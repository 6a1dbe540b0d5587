import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from algctl.chart import DualPoint
from algctl.fields import ScalarField, coordinate_field, random_quadratic_field
from algctl.models import sample_state
from algctl.poisson import (dirac_tensor, hamiltonian_vector_field, jacobiator, poisson_bracket,
                            poisson_tensor)

from conftest import ZOO, corrupted_so3_chart, oscillator, so3_chart, tm_chart


def test_so3_momentum_bracket():
    p = DualPoint(np.zeros(0), [0.0, 0.0, 5.0])
    assert poisson_bracket(so3_chart(), coordinate_field(0, 0), coordinate_field(1, 0), p) == pytest.approx(-5.0)


def test_tangent_canonical_bracket():
    chart = tm_chart()
    p = DualPoint([0.7], [-1.3])
    assert poisson_bracket(chart, coordinate_field(0, 1), coordinate_field(1, 1), p) == 1.0


def test_oscillator_vector_field():
    chart, H = oscillator()
    dx, dmu = hamiltonian_vector_field(chart, H, DualPoint([1.0], [0.0]))
    np.testing.assert_allclose(dx, [0.0])
    np.testing.assert_allclose(dmu, [-1.0])


def test_rigid_body_flow_is_m_cross_omega(bundles):
    rb = bundles["rigid-body"]
    m = np.array([0.3, -1.2, 0.8])
    _, dm = rb.vector_field(DualPoint(np.zeros(0), m))
    np.testing.assert_allclose(dm, np.cross(m, m / np.array([1.0, 2.0, 3.0])), atol=1e-15)


def test_tensor_matches_bracket():
    rng = np.random.default_rng(3)
    from conftest import corrupted_action_chart
    chart = corrupted_action_chart()
    F, G = random_quadratic_field(rng, 3, 3), random_quadratic_field(rng, 3, 3)
    p = DualPoint(rng.uniform(-1, 1, 3), rng.standard_normal(3))
    gF = np.concatenate(F.gradient(p))
    gG = np.concatenate(G.gradient(p))
    assert gF @ poisson_tensor(chart, p) @ gG == pytest.approx(poisson_bracket(chart, F, G, p))


def test_dirac_constraints_are_casimirs(bundles):
    s2 = bundles["s2-steering"]
    rng = np.random.default_rng(0)
    p = sample_state(s2, rng)
    P = dirac_tensor(s2.chart, p, s2.constraints)
    for c in s2.constraints:
        g = np.concatenate(c.gradient(p))
        np.testing.assert_allclose(P @ g, 0.0, atol=1e-12)
    np.testing.assert_allclose(P, -P.T, atol=1e-12)


seeds = st.integers(min_value=0, max_value=2**31 - 1)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, name=st.sampled_from(ZOO))
def test_antisymmetry_property(bundles, seed, name):
    m = bundles[name]
    rng = np.random.default_rng(seed)
    F = random_quadratic_field(rng, m.chart.base_dim, m.chart.fiber_rank)
    G = random_quadratic_field(rng, m.chart.base_dim, m.chart.fiber_rank)
    p = sample_state(m, rng)
    assert poisson_bracket(m.chart, F, G, p) == pytest.approx(-poisson_bracket(m.chart, G, F, p), abs=1e-12)
    assert poisson_bracket(m.chart, F, F, p) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=seeds, name=st.sampled_from(ZOO))
def test_leibniz_property(bundles, seed, name):
    m = bundles[name]
    n, k = m.chart.base_dim, m.chart.fiber_rank
    rng = np.random.default_rng(seed)
    F, G, H = (random_quadratic_field(rng, n, k).numeric() for _ in range(3))
    p = sample_state(m, rng)
    br = lambda A, B: poisson_bracket(m.chart, A, B, p)
    lhs = br(F * G, H)
    assert abs(lhs - F(p) * br(G, H) - G(p) * br(F, H)) <= 1e-6 * max(1.0, abs(lhs))


@settings(max_examples=10, deadline=None)
@given(seed=seeds, name=st.sampled_from(ZOO))
def test_jacobi_property(bundles, seed, name):
    m = bundles[name]
    n, k = m.chart.base_dim, m.chart.fiber_rank
    rng = np.random.default_rng(seed)
    F, G, K = (random_quadratic_field(rng, n, k) for _ in range(3))
    assert abs(jacobiator(m.chart, F, G, K, sample_state(m, rng))) <= 1e-4


def test_dirac_bracket_jacobi(bundles):
    s2 = bundles["s2-steering"]
    rng = np.random.default_rng(11)
    for _ in range(3):
        F, G, K = (random_quadratic_field(rng, 3, 6) for _ in range(3))
        assert abs(jacobiator(s2.chart, F, G, K, sample_state(s2, rng), s2.constraints)) <= 1e-4


def test_jacobiator_detects_corrupted_structure():
    rng = np.random.default_rng(0)
    chart = corrupted_so3_chart()
    worst = 0.0
    for _ in range(3):
        F, G, K = (random_quadratic_field(rng, 0, 3) for _ in range(3))
        worst = max(worst, abs(jacobiator(chart, F, G, K, DualPoint(np.zeros(0), rng.standard_normal(3)))))
    assert worst > 1e-2
