import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhreduce.examples import build_example
from nhreduce.integrate import integrate
from nhreduce.symmetry import gauge_momenta
from nhreduce.system import (
    constraint_residual,
    derivative_along,
    hamel_vector_field,
    hamiltonian_M,
    lagrange_dalembert_oracle,
    legendre_to_M,
    nonholonomic_bracket,
    nonholonomic_vector_field,
    oracle_pDdot,
    velocity,
)

seeds = st.integers(0, 2**31 - 1)


def test_particle_legendre_at_origin(examples):
    s = legendre_to_M(examples["particle"].system, np.zeros(3), np.array([1.0, 0.0]))
    assert np.allclose(s.pD, [1.0, 0.0])


def test_particle_legendre_off_axis(examples):
    # kappa on {d_x + y d_z, d_y} at y = 1 is diag(1 + y^2, 1)
    s = legendre_to_M(examples["particle"].system, np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0]))
    assert np.allclose(s.pD, [2.0, 0.0])
    assert s.pW[0] == pytest.approx(1.0)


def test_ball_momentum_at_identity(examples):
    # M = I Omega + mr^2 (Omega - <gamma, Omega> gamma); spin about gamma carries no mr^2 part
    ex = examples["chaplygin_ball"]
    q = np.concatenate([np.eye(3).ravel(), [0.0, 0.0]])
    v = np.linalg.solve(ex.extras["adapted"](q[6:9]), np.array([0.0, 0.0, 1.0]))
    s = legendre_to_M(ex.system, q, v)
    assert np.allclose(ex.oracles["M"](s.q, s.pD), [0.0, 0.0, ex.params["I3"]])


def test_ball_momentum_generic(examples, rng):
    ex = examples["chaplygin_ball"]
    for _ in range(5):
        s = ex.system.random_state(rng)
        gam, Om = s.q[6:9], ex.oracles["omega"](s.q, s.pD)
        assert np.allclose(ex.oracles["M"](s.q, s.pD), ex.oracles["M_from_omega"](gam, Om), atol=1e-12)


def test_energy_values(examples, rng):
    sol = examples["solid_of_revolution"].system
    q = sol.random_state(rng).q
    assert hamiltonian_M(sol, sol.state(q, np.zeros(sol.r))) == pytest.approx(float(sol.potential(q)))
    part = examples["particle"].system
    assert hamiltonian_M(part, part.state(np.zeros(3), np.array([1.0, 0.0]))) == pytest.approx(0.5)


def test_snakeboard_energy_matches_coordinate_lagrangian(examples, rng):
    ex = examples["snakeboard"]
    for _ in range(5):
        s = ex.system.random_state(rng)
        assert hamiltonian_M(ex.system, s) == pytest.approx(ex.oracles["hamiltonian"](s.q, s.pD), rel=1e-12)


def test_particle_field_at_origin(examples):
    sysm = examples["particle"].system
    X = nonholonomic_vector_field(sysm, sysm.state(np.zeros(3), np.array([1.0, 0.0])))
    assert np.allclose(X.qdot, [1.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose(X.pDdot, 0.0, atol=1e-10)


def test_zero_momentum_kinetic_systems_rest(examples, rng):
    for n in ("particle", "snakeboard", "chaplygin_ball"):
        sysm = examples[n].system
        s = sysm.state(sysm.random_state(rng).q, np.zeros(sysm.r))
        X = nonholonomic_vector_field(sysm, s)
        assert np.max(np.abs(X.w)) < 1e-10


def test_particle_multiplier_oracle_symmetric_case(examples):
    vdot, lam = lagrange_dalembert_oracle(examples["particle"].system, np.zeros(3), np.array([1.0, 0.0]))
    assert np.allclose(vdot, 0.0, atol=1e-9) and np.allclose(lam, 0.0, atol=1e-9)


def test_snakeboard_field_matches_multiplier_oracle(examples, rng):
    sysm = examples["snakeboard"].system
    for _ in range(10):
        s = sysm.random_state(rng)
        assert np.allclose(nonholonomic_vector_field(sysm, s).pDdot, oracle_pDdot(sysm, s), atol=1e-9)


def test_statics_limit(examples, rng):
    """At rest only gravity acts; both paths agree and pD moves."""
    sysm = examples["solid_of_revolution"].system
    s = sysm.state(sysm.random_state(rng).q, np.zeros(sysm.r))
    a = nonholonomic_vector_field(sysm, s).pDdot
    assert np.allclose(a, oracle_pDdot(sysm, s), atol=1e-9)
    assert np.max(np.abs(a)) > 1e-3


def test_free_euler_top():
    """Ball with r = 0 is the free rigid body: I Omega' = I Omega x Omega."""
    ex = build_example("chaplygin_ball", {"r": 0.0})
    sysm = ex.system
    II = ex.oracles["inertia"]
    q = ex.trajectory_state().q
    Om0 = np.array([0.4, -0.7, 1.1])
    s0 = legendre_to_M(sysm, q, np.linalg.solve(ex.extras["adapted"](q[6:9]), Om0))
    h = 1e-4
    tr = integrate(sysm, s0, h, 2 * h)
    Om = [ex.oracles["omega"](s.q, s.pD) for s in tr.states]
    dOm = (-3 * Om[0] + 4 * Om[1] - Om[2]) / (2 * h)
    expected = np.linalg.solve(II, np.cross(II @ Om0, Om0))
    assert np.allclose(dOm, expected, atol=1e-6)


def test_bracket_antisymmetry_and_dynamics(examples, rng):
    sysm = examples["snakeboard"].system
    s = sysm.random_state(rng)
    f = lambda st_: math.sin(st_.q[0]) * st_.pD[2] + st_.pD[0] ** 2
    H = lambda st_: hamiltonian_M(sysm, st_)
    assert abs(nonholonomic_bracket(sysm, f, f, s)) < 1e-10
    X = nonholonomic_vector_field(sysm, s)
    assert nonholonomic_bracket(sysm, f, H, s) == pytest.approx(derivative_along(sysm, f, s, X.w), abs=1e-8)


def test_particle_gauge_momentum_commutes_with_H(examples, rng):
    ex = examples["particle"]
    sysm = ex.system
    J = lambda st_: float(gauge_momenta(sysm, ex.sections, st_)[0])
    H = lambda st_: hamiltonian_M(sysm, st_)
    for _ in range(5):
        assert abs(nonholonomic_bracket(sysm, J, H, sysm.random_state(rng))) < 1e-8


@settings(max_examples=15, deadline=None)
@given(seeds, st.sampled_from(["particle", "snakeboard", "chaplygin_ball", "solid_of_revolution"]))
def test_hamel_matches_almost_symplectic_solve(seed, name):
    sysm = build_example(name).system
    s = sysm.random_state(np.random.default_rng(seed))
    a = hamel_vector_field(sysm, s)
    b = nonholonomic_vector_field(sysm, s)
    scale = max(1.0, float(np.max(np.abs(a.w))))
    assert np.max(np.abs(a.w - b.w)) / scale < 1e-8
    assert constraint_residual(sysm, s) < 1e-12
    assert np.allclose(velocity(sysm, s), a.w[: sysm.r])
