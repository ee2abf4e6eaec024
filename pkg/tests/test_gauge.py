import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhreduce.chaplygin import JK_matrix, canonical_matrix, reduce_state
from nhreduce.examples import build_example
from nhreduce.gauge import (
    B1_matrix,
    B_matrix,
    B_tilde_matrix,
    SingularGaugeBlockError,
    Y_coefficients,
    build_gauge,
    calB_matrix,
    calB_tilde_basic_residual,
    dynamical_condition_residual,
    eta_lift,
    eta_lift_fd,
    fiber_independence_residual,
    form_B_total,
    gauge_J,
    momentum_relation_residual,
    omega_B_tilde_matrix,
    reduced_J,
)
from nhreduce.geometry import exterior_derivative
from nhreduce.symmetry import SectionBasis, gauge_momenta


def body_rates(ex, q):
    """Body angular velocity of every frame column of a rotation chart."""
    g = q[:9].reshape(3, 3)
    E = ex.system.chart.frame(q)
    out = []
    for a in range(ex.system.n):
        A = g.T @ E[:9, a].reshape(3, 3)
        out.append(np.array([A[2, 1], A[0, 2], A[1, 0]]))
    return out


def test_particle_and_snakeboard_B_vanish(examples, gauges, rng):
    for name in ("particle", "snakeboard"):
        g = gauges[name]
        for _ in range(20):
            s = examples[name].system.random_state(rng)
            assert np.max(np.abs(calB_matrix(g, s))) <= 1e-10
            assert np.max(np.abs(B_matrix(g, s))) <= 1e-10
    s = examples["particle"].system.random_state(rng)
    assert np.max(np.abs(B1_matrix(gauges["particle"], s))) <= 1e-10


def test_ball_B1_is_JK_plus_J_dgamma_lambda(examples, gauges, rng):
    """B1 = <J, K_W> + J d<gamma, lambda>, with d<gamma, lambda> by finite differences."""
    ex = examples["chaplygin_ball"]
    ch = ex.system.chart
    gl = lambda q: np.array([q[6:9] @ w for w in body_rates(ex, q)])
    s = ex.system.random_state(rng)
    J = ex.oracles["J"](s.q, s.pD)
    B1 = B1_matrix(gauges["chaplygin_ball"], s)
    JK = JK_matrix(ex.system, s)
    for a, b in ((0, 1), (0, 2), (1, 2)):
        dgl = exterior_derivative(gl, ch, s.q, a, b)
        assert B1[a, b] == pytest.approx(JK[a, b] + J * dgl, abs=1e-7)


def test_ball_calB_closed_form(examples, gauges, rng):
    """calB on Hor = mr^2 <gamma,Omega><gamma,dlambda> - J Phi_S2."""
    ex = examples["chaplygin_ball"]
    mr2 = ex.oracles["mr2"]
    for _ in range(10):
        s = ex.system.random_state(rng)
        gam, Om = s.q[6:9], ex.oracles["omega"](s.q, s.pD)
        J = ex.oracles["J"](s.q, s.pD)
        w = body_rates(ex, s.q)
        area = ex.oracles["area_form"](gam, np.cross(gam, w[0]), np.cross(gam, w[1]))
        expected = mr2 * (gam @ Om) * (-gam @ np.cross(w[0], w[1])) - J * area
        assert calB_matrix(gauges["chaplygin_ball"], s)[0, 1] == pytest.approx(expected, abs=1e-9)


def test_ball_B_total(examples, gauges, rng):
    ex = examples["chaplygin_ball"]
    g = gauges["chaplygin_ball"]
    for _ in range(10):
        s = ex.system.random_state(rng)
        w = body_rates(ex, s.q)
        Om = ex.oracles["omega"](s.q, s.pD)
        B = B_matrix(g, s)
        ref = np.array([[ex.oracles["B_total"](Om, w[a], w[b]) for b in range(5)] for a in range(5)])
        assert np.max(np.abs(B - ref)) < 1e-8
    u, v = np.zeros(5), np.zeros(5)
    u[0], v[1] = 1.0, 1.0
    assert form_B_total(g, s, u, v) == pytest.approx(B[0, 1])


def test_left_frame_pair_gives_minus_mr2_Omega3(examples):
    ex = examples["chaplygin_ball"]
    Om = np.array([0.3, -1.2, 0.7])
    val = ex.oracles["B_total"](Om, np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    assert val == pytest.approx(-ex.oracles["mr2"] * Om[2])


def test_gauge_J_matches_momenta(examples, gauges, rng, name):
    ex = examples[name]
    s = ex.system.random_state(rng)
    assert np.allclose(gauge_J(gauges[name], s), gauge_momenta(ex.system, ex.sections, s), atol=1e-10)
    a = reduce_state(ex.system, ex.reduced, s)
    assert np.allclose(reduced_J(gauges[name], a), gauge_J(gauges[name], s), atol=1e-10)


def test_dynamical_condition(examples, gauges, rng, name):
    for _ in range(5):
        assert dynamical_condition_residual(gauges[name], examples[name].system.random_state(rng)) < 1e-9


def test_semi_basic_on_fiber(examples, gauges, rng, name):
    ex = examples[name]
    a = reduce_state(ex.system, ex.reduced, ex.system.random_state(rng))
    Bt = B_tilde_matrix(gauges[name], a)
    r = ex.reduced.dim
    assert np.max(np.abs(Bt[r:, :]), initial=0.0) == 0.0
    assert np.max(np.abs(Bt[:, r:]), initial=0.0) == 0.0


def test_zero_momentum_is_canonical(examples, gauges, rng, name):
    ex = examples[name]
    s = ex.system.state(ex.system.sample_q(rng), np.zeros(ex.system.r))
    a = reduce_state(ex.system, ex.reduced, s)
    assert np.allclose(omega_B_tilde_matrix(gauges[name], a), canonical_matrix(ex.reduced, a), atol=1e-12)


def test_cancel_path_agrees(examples, gauges, rng, name):
    ex = examples[name]
    a = reduce_state(ex.system, ex.reduced, ex.system.random_state(rng))
    g = gauges[name]
    assert np.allclose(omega_B_tilde_matrix(g, a, cancel=True), omega_B_tilde_matrix(g, a, cancel=False),
                       atol=1e-9)


def test_eta_lift_matches_group_derivative(examples, gauges, rng, name):
    ex = examples[name]
    a = reduce_state(ex.system, ex.reduced, ex.system.random_state(rng))
    for i in range(ex.k):
        assert np.allclose(eta_lift(gauges[name], a, i), eta_lift_fd(gauges[name], a, i), atol=1e-6)


def test_calB_tilde_basic_and_fiber_free(examples, gauges, rng, name):
    ex = examples[name]
    a = reduce_state(ex.system, ex.reduced, ex.system.random_state(rng))
    assert calB_tilde_basic_residual(gauges[name], a, rng) < 1e-8
    assert fiber_independence_residual(gauges[name], a, rng) < 1e-8


def test_omit_gauge_zeroes_B(examples, rng):
    ex = examples["chaplygin_ball"]
    g = build_gauge(ex.system, ex.sections, ex.reduced, omit_gauge=True)
    assert np.all(B_matrix(g, ex.system.random_state(rng)) == 0.0)


def test_singular_gauge_block(examples, rng):
    ex = examples["particle"]
    g = build_gauge(ex.system, SectionBasis([lambda q: np.zeros(2)]), ex.reduced)
    with pytest.raises(SingularGaugeBlockError):
        Y_coefficients(g, ex.system.sample_q(rng))


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["particle", "snakeboard", "chaplygin_ball"]))
def test_momentum_relation_property(seed, name):
    ex = build_example(name)
    g = build_gauge(ex.system, ex.sections, ex.reduced)
    a = reduce_state(ex.system, ex.reduced, ex.system.random_state(np.random.default_rng(seed)))
    assert momentum_relation_residual(g, a) < 1e-7
